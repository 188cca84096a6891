//! Quadratic chromatic-dispersion model `D(λ) = d₂λ² + d₁λ + d₀`, its
//! least-squares fit, the Taylor coefficients β₂–β₄ at a reference
//! wavelength, and the linear transfer phase used by the split-step solver.
//!
//! β₂ follows the usual relation `β₂ = -λ²D(λ)/(2πc)`; β₃ and β₄ are its
//! successive ω-derivatives expressed directly in the quadratic's
//! coefficients, so a finite-difference check against β₂(ω) closes to
//! machine-ish precision.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{check_wavelength, SPEED_OF_LIGHT};

/// Quadratic dispersion parameter model. Units: `d0` s/m², `d1` s/m³,
/// `d2` s/m⁴; `lambda_c_m` is the reference wavelength carried along for
/// Taylor expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub lambda_c_m: f64,
}

impl DispersionModel {
    pub fn new(d0: f64, d1: f64, d2: f64, lambda_c_m: f64) -> Result<Self> {
        check_wavelength(lambda_c_m)?;
        Ok(Self { d0, d1, d2, lambda_c_m })
    }

    /// Wavelengths where `D(λ) = 0`, or `None` when the quadratic has no
    /// real root. The fitted HNLF model has a negative discriminant, so it
    /// reports `None` rather than a complex root.
    pub fn zero_dispersion_wavelengths_m(&self) -> Option<(f64, f64)> {
        if self.d2 == 0.0 {
            if self.d1 == 0.0 {
                return None;
            }
            let r = -self.d0 / self.d1;
            return Some((r, r));
        }
        let disc = self.d1 * self.d1 - 4.0 * self.d2 * self.d0;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let a = (-self.d1 - s) / (2.0 * self.d2);
        let b = (-self.d1 + s) / (2.0 * self.d2);
        Some((a.min(b), a.max(b)))
    }
}

/// Taylor coefficients of the propagation constant at `lambda_c_m`.
/// Units: β₂ s²/m, β₃ s³/m, β₄ s⁴/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSet {
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub lambda_c_m: f64,
}

impl BetaSet {
    /// All-zero dispersion (useful for phase-matched test configurations).
    pub fn zero(lambda_c_m: f64) -> Self {
        Self { beta2: 0.0, beta3: 0.0, beta4: 0.0, lambda_c_m }
    }
}

/// Evaluate `D(λ)` inside the supported band.
pub fn eval_d(model: &DispersionModel, wavelength_m: f64) -> Result<f64> {
    check_wavelength(wavelength_m)?;
    Ok(model.d2 * wavelength_m * wavelength_m + model.d1 * wavelength_m + model.d0)
}

/// β₂–β₄ from the quadratic model at `lambda_c_m`:
///
/// ```text
/// β₂ = -λ²(d₂λ² + d₁λ + d₀)/(2πc)
/// β₃ =  λ²(4d₂λ³ + 3d₁λ² + 2d₀λ)/(4π²c²)
/// β₄ = -λ²(20d₂λ⁴ + 12d₁λ³ + 6d₀λ²)/(8π³c³)
/// ```
pub fn taylor_betas(model: &DispersionModel, lambda_c_m: f64) -> Result<BetaSet> {
    check_wavelength(lambda_c_m)?;
    let l = lambda_c_m;
    let c = SPEED_OF_LIGHT;
    let l2 = l * l;
    let beta2 = -l2 * (model.d2 * l2 + model.d1 * l + model.d0) / (2.0 * PI * c);
    let beta3 = l2 * (4.0 * model.d2 * l2 * l + 3.0 * model.d1 * l2 + 2.0 * model.d0 * l)
        / (4.0 * PI * PI * c * c);
    let beta4 = -l2
        * (20.0 * model.d2 * l2 * l2 + 12.0 * model.d1 * l2 * l + 6.0 * model.d0 * l2)
        / (8.0 * PI * PI * PI * c * c * c);
    Ok(BetaSet { beta2, beta3, beta4, lambda_c_m })
}

/// Least-squares quadratic fit of `(λ, D)` samples.
///
/// The wavelengths are recentred about 1550 nm and rescaled before forming
/// the 3×3 normal equations; with raw wavelengths near 1.55e-6 m the system
/// is hopelessly ill-conditioned. Coefficients come back in the original
/// basis. Needs at least three distinct wavelengths.
pub fn fit_quadratic(samples: &[(f64, f64)]) -> Result<DispersionModel> {
    const LAMBDA_REF: f64 = 1550e-9;
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::UnderdeterminedFit(distinct.len()));
    }

    let scale = samples
        .iter()
        .map(|s| (s.0 - LAMBDA_REF).abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);

    // Moments of the centred, scaled abscissa.
    let mut sx = [0.0f64; 5];
    let mut sxy = [0.0f64; 3];
    for &(lambda, d) in samples {
        let x = (lambda - LAMBDA_REF) / scale;
        let mut xp = 1.0;
        for (p, slot) in sx.iter_mut().enumerate() {
            *slot += xp;
            if p < 3 {
                sxy[p] += xp * d;
            }
            xp *= x;
        }
    }
    let a = [
        [sx[0], sx[1], sx[2]],
        [sx[1], sx[2], sx[3]],
        [sx[2], sx[3], sx[4]],
    ];
    let coeffs = solve3(a, sxy).ok_or(Error::SingularFit)?;

    // Undo the scaling, then the centering: D = a0 + a1·x + a2·x² with
    // x = λ - r expands to d2 = a2, d1 = a1 - 2·a2·r, d0 = a0 - a1·r + a2·r².
    let a0 = coeffs[0];
    let a1 = coeffs[1] / scale;
    let a2 = coeffs[2] / (scale * scale);
    let r = LAMBDA_REF;
    Ok(DispersionModel {
        d0: a0 - a1 * r + a2 * r * r,
        d1: a1 - 2.0 * a2 * r,
        d2: a2,
        lambda_c_m: LAMBDA_REF,
    })
}

/// Gaussian elimination with partial pivoting for a 3×3 system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Dispersive phase accumulated over `z` for each angular-frequency offset:
/// `φ(ω) = (β₂/2·ω² + β₃/6·ω³ + β₄/24·ω⁴)·z`, applied as `e^{iφ}` so the
/// linear step is magnitude-preserving.
pub fn linear_transfer_phase(betas: &BetaSet, omega_offsets: &[f64], z_m: f64) -> Vec<f64> {
    omega_offsets
        .iter()
        .map(|&w| {
            let w2 = w * w;
            (betas.beta2 / 2.0 * w2 + betas.beta3 / 6.0 * w2 * w + betas.beta4 / 24.0 * w2 * w2)
                * z_m
        })
        .collect()
}

/// Degenerate-pump phase mismatch `Δβ = 2γP + β₂Δω² + (β₄/12)Δω⁴`, in 1/m.
/// Positive `detuning_rad_s` is the signal's angular offset from the pump.
pub fn phase_mismatch(
    betas: &BetaSet,
    gamma_per_w_m: f64,
    pump_power_w: f64,
    detuning_rad_s: f64,
) -> f64 {
    let w2 = detuning_rad_s * detuning_rad_s;
    2.0 * gamma_per_w_m * pump_power_w + betas.beta2 * w2 + betas.beta4 / 12.0 * w2 * w2
}

/// Load `(wavelength_m, D_s_per_m2)` samples from a CSV with header
/// `wavelength_nm,d_ps_per_nm_km`. 1 ps/(nm·km) = 1e-6 s/m².
pub fn load_dispersion_samples(path: &Path) -> Result<Vec<(f64, f64)>> {
    let content = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut out = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != "wavelength_nm,d_ps_per_nm_km" {
                return Err(Error::Parse {
                    path: pstr,
                    line: lineno + 1,
                    message: format!("expected 'wavelength_nm,d_ps_per_nm_km' header, got '{line}'"),
                });
            }
            header_seen = true;
            continue;
        }
        let mut cols = line.split(',');
        let mut field = |what: &str| -> Result<f64> {
            cols.next()
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("invalid {what}"),
                })
        };
        let lambda_nm = field("wavelength")?;
        let d = field("dispersion")?;
        out.push((lambda_nm * 1e-9, d * 1e-6));
    }
    Ok(out)
}

/// The fitted HNLF coefficients used as defaults throughout the toolkit.
pub fn hnlf_model() -> DispersionModel {
    DispersionModel { d0: -2.36e-4, d1: 297.5, d2: -9.4e7, lambda_c_m: 1550e-9 }
}
