//! Fit the under-specified input parameters (pump power scale, comb power
//! scale, chirp) against a measured output trace.
//!
//! The objective is the RMS dB error over the first few sideband orders'
//! peak powers — not a full-trace residual, which would chase the ASE floor
//! and instrument artifacts the model does not include. Minimization is a
//! bounded Nelder-Mead simplex: only function values are used, every
//! candidate is clamped into the bounds box, and the best-so-far objective
//! is recorded after each evaluation so the history is non-increasing.

use serde::Serialize;

use crate::comb::{synthesize_input, CombLine, CombSpec, PumpSpec};
use crate::error::{Error, Result};
use crate::fwm::{measure_sidebands_trace, predict_lines};
use crate::osa::{emulate_osa, Trace};
use crate::signal::TemporalGrid;
use crate::ssfm::{propagate, FiberParams};

/// Inclusive lower/upper bounds per parameter. Equal bounds pin a parameter
/// at that value (it drops out of the simplex).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub pump_scale: (f64, f64),
    pub comb_scale: (f64, f64),
    pub chirp_per_s2: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self { pump_scale: (0.25, 4.0), comb_scale: (0.25, 4.0), chirp_per_s2: (0.0, 0.0) }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CalibrateOptions {
    /// Evaluation budget beyond the mandatory initial-point evaluation.
    pub max_evals: usize,
    /// Stop when the simplex's objective spread falls below this many dB.
    pub tol_db: f64,
    /// Sideband orders included in the objective.
    pub j_max: u32,
    /// Peak-search window around each predicted sideband.
    pub window_hz: f64,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self { max_evals: 200, tol_db: 0.01, j_max: 5, window_hz: 10e9 }
    }
}

/// Residual of one sideband order at the best point, simulated minus
/// measured, in dB.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrderResidual {
    pub order: u32,
    pub signal_db: f64,
    pub idler_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub pump_scale: f64,
    pub comb_scale: f64,
    pub chirp_per_s2: f64,
    /// Best objective seen after each evaluation (non-increasing), dB RMS.
    pub objective_history: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
    pub residuals_db: Vec<OrderResidual>,
}

struct Objective<'a> {
    comb: &'a CombSpec,
    pump: &'a PumpSpec,
    grid: &'a TemporalGrid,
    fiber: &'a FiberParams,
    opts: CalibrateOptions,
    rbw_hz: f64,
    range_nm: (f64, f64),
    delta_f_hz: f64,
    measured_db: Vec<(f64, f64)>,
}

const OBJECTIVE_POWER_FLOOR_W: f64 = 1e-30;

fn db_of(p_w: f64) -> f64 {
    10.0 * (p_w.max(OBJECTIVE_POWER_FLOOR_W) / 1e-3).log10()
}

impl<'a> Objective<'a> {
    fn new(
        measured: &'a Trace,
        comb: &'a CombSpec,
        pump: &'a PumpSpec,
        grid: &'a TemporalGrid,
        fiber: &'a FiberParams,
        opts: CalibrateOptions,
    ) -> Result<Self> {
        let delta_f_hz = comb.min_spacing_hz().unwrap_or(50e9);
        let preds = predict_lines(pump.frequency_hz, delta_f_hz, opts.j_max)?;
        let measured_side =
            measure_sidebands_trace(measured, &preds, opts.window_hz)?;
        let measured_db = measured_side
            .iter()
            .map(|m| (db_of(m.signal_power_w), db_of(m.idler_power_w)))
            .collect();
        Ok(Self {
            comb,
            pump,
            grid,
            fiber,
            opts,
            rbw_hz: measured.rbw_hz.unwrap_or(3e9),
            range_nm: measured.wavelength_bounds_nm(),
            delta_f_hz,
            measured_db,
        })
    }

    fn eval(&self, x: &[f64; 3]) -> Result<(f64, Vec<OrderResidual>)> {
        let scaled_comb = CombSpec::new(
            self.comb
                .lines
                .iter()
                .map(|l| CombLine { frequency_hz: l.frequency_hz, power_w: l.power_w * x[1] })
                .collect(),
            self.comb.sub_spacing_hz,
            self.comb.envelope_fwhm_hz,
        )?;
        let scaled_pump = PumpSpec::new(self.pump.frequency_hz, self.pump.power_w * x[0])?;
        let chirp = if x[2] != 0.0 { Some(x[2]) } else { None };
        let (input, _) = synthesize_input(&scaled_comb, &scaled_pump, self.grid, chirp)?;
        let (output, _) = propagate(&input.to_time()?, self.fiber)?;
        let sim_trace = emulate_osa(&output.to_frequency()?, self.rbw_hz, self.range_nm)?;
        let preds = predict_lines(self.pump.frequency_hz, self.delta_f_hz, self.opts.j_max)?;
        let sim = measure_sidebands_trace(&sim_trace, &preds, self.opts.window_hz)?;

        let mut sum_sq = 0.0;
        let mut residuals = Vec::with_capacity(sim.len());
        for (m, &(meas_s, meas_i)) in sim.iter().zip(&self.measured_db) {
            let rs = db_of(m.signal_power_w) - meas_s;
            let ri = db_of(m.idler_power_w) - meas_i;
            sum_sq += rs * rs + ri * ri;
            residuals.push(OrderResidual { order: m.order, signal_db: rs, idler_db: ri });
        }
        let rms = (sum_sq / (2.0 * sim.len() as f64)).sqrt();
        Ok((rms, residuals))
    }
}

/// Calibrate `(pump_scale, comb_scale, chirp)` against a measured trace.
/// Starts from `(1, 1, 0)`, which must lie inside `bounds`.
pub fn calibrate(
    measured: &Trace,
    comb: &CombSpec,
    pump: &PumpSpec,
    grid: &TemporalGrid,
    fiber: &FiberParams,
    bounds: &ParamBounds,
    opts: &CalibrateOptions,
) -> Result<CalibrationResult> {
    let lo = [bounds.pump_scale.0, bounds.comb_scale.0, bounds.chirp_per_s2.0];
    let hi = [bounds.pump_scale.1, bounds.comb_scale.1, bounds.chirp_per_s2.1];
    let x0 = [1.0, 1.0, 0.0];
    for d in 0..3 {
        if lo[d] > hi[d] || x0[d] < lo[d] || x0[d] > hi[d] {
            return Err(Error::BoundsViolation { point: x0.to_vec() });
        }
    }
    let active: Vec<usize> = (0..3).filter(|&d| hi[d] > lo[d]).collect();

    let objective = Objective::new(measured, comb, pump, grid, fiber, *opts)?;
    let clamp = |x: &mut [f64; 3]| {
        for d in 0..3 {
            x[d] = x[d].clamp(lo[d], hi[d]);
        }
    };

    let mut history: Vec<f64> = Vec::new();
    let mut evals = 0usize;
    let mut best: (f64, [f64; 3], Vec<OrderResidual>) = {
        let (f, r) = objective.eval(&x0)?;
        history.push(f);
        (f, x0, r)
    };
    let mut budget = opts.max_evals;
    let eval = |x: &[f64; 3],
                    best: &mut (f64, [f64; 3], Vec<OrderResidual>),
                    history: &mut Vec<f64>,
                    evals: &mut usize|
     -> Result<f64> {
        let (f, r) = objective.eval(x)?;
        *evals += 1;
        if f < best.0 {
            *best = (f, *x, r);
        }
        history.push(best.0);
        Ok(f)
    };

    if active.is_empty() || budget == 0 {
        return Ok(CalibrationResult {
            pump_scale: best.1[0],
            comb_scale: best.1[1],
            chirp_per_s2: best.1[2],
            objective_history: history,
            evaluations: evals,
            converged: active.is_empty(),
            residuals_db: best.2,
        });
    }

    // Simplex over the active dimensions.
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(active.len() + 1);
    simplex.push((x0, best.0));
    for &d in &active {
        let mut x = x0;
        let step = 0.25 * (hi[d] - lo[d]);
        x[d] = if x0[d] + step <= hi[d] { x0[d] + step } else { x0[d] - step };
        clamp(&mut x);
        if budget == 0 {
            break;
        }
        budget -= 1;
        let f = eval(&x, &mut best, &mut history, &mut evals)?;
        simplex.push((x, f));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while budget > 0 && simplex.len() == active.len() + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex.last().unwrap().1 - simplex[0].1;
        if spread < opts.tol_db {
            converged = true;
            break;
        }
        let worst = simplex.len() - 1;
        // Centroid of all but the worst vertex, active dims only.
        let mut centroid = x0;
        for &d in &active {
            centroid[d] =
                simplex[..worst].iter().map(|(x, _)| x[d]).sum::<f64>() / worst as f64;
        }
        let blend = |a: &[f64; 3], b: &[f64; 3], t: f64| {
            let mut out = *a;
            for &d in &active {
                out[d] = a[d] + t * (b[d] - a[d]);
            }
            out
        };

        let xw = simplex[worst].0;
        let mut reflected = blend(&centroid, &xw, -alpha);
        clamp(&mut reflected);
        budget -= 1;
        let fr = eval(&reflected, &mut best, &mut history, &mut evals)?;

        if fr < simplex[0].1 && budget > 0 {
            let mut expanded = blend(&centroid, &xw, -gamma);
            clamp(&mut expanded);
            budget -= 1;
            let fe = eval(&expanded, &mut best, &mut history, &mut evals)?;
            simplex[worst] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[worst - 1].1 {
            simplex[worst] = (reflected, fr);
        } else if budget > 0 {
            let mut contracted = blend(&centroid, &xw, rho);
            clamp(&mut contracted);
            budget -= 1;
            let fc = eval(&contracted, &mut best, &mut history, &mut evals)?;
            if fc < simplex[worst].1 {
                simplex[worst] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                let x_best = simplex[0].0;
                for i in 1..simplex.len() {
                    if budget == 0 {
                        break;
                    }
                    let mut x = blend(&x_best, &simplex[i].0, sigma);
                    clamp(&mut x);
                    budget -= 1;
                    let f = eval(&x, &mut best, &mut history, &mut evals)?;
                    simplex[i] = (x, f);
                }
            }
        }
    }

    Ok(CalibrationResult {
        pump_scale: best.1[0],
        comb_scale: best.1[1],
        chirp_per_s2: best.1[2],
        objective_history: history,
        evaluations: evals,
        converged,
        residuals_db: best.2,
    })
}
