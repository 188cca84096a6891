//! Input-spectrum construction: comb lines carrying dense sub-combs under
//! Gaussian envelopes, a single-bin CW pump, and optional linear chirp.
//!
//! Each configured line of peak power `P` expands into sub-lines at
//! `center + k·sub_spacing` with powers `P·exp(-4 ln2 (k·sub_spacing)²/w²)`
//! (`w` the envelope FWHM), truncated beyond three FWHM from the centre.
//! Sub-lines snap to the nearest grid bin; powers landing on a shared bin
//! add, so the configured total power is conserved bin-exactly. The snap
//! error is reported rather than silently absorbed.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::osa::Trace;
use crate::peaks;
use crate::signal::{
    dbm_to_watts, Field, Representation, TemporalGrid, SPEED_OF_LIGHT,
};

/// Sub-comb line spacing matching a 22.47 MHz mode-locked-laser repetition
/// rate.
pub const DEFAULT_SUB_SPACING_HZ: f64 = 22.47e6;
/// Gaussian envelope FWHM of each filtered comb line.
pub const DEFAULT_ENVELOPE_FWHM_HZ: f64 = 21.23e6;

/// Envelope truncation: sub-lines beyond this many FWHM from the line centre
/// are omitted.
const ENVELOPE_CUTOFF_FWHM: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombLine {
    pub frequency_hz: f64,
    pub power_w: f64,
}

/// A set of comb lines plus the sub-comb structure they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct CombSpec {
    pub lines: Vec<CombLine>,
    pub sub_spacing_hz: f64,
    pub envelope_fwhm_hz: f64,
}

impl CombSpec {
    pub fn new(lines: Vec<CombLine>, sub_spacing_hz: f64, envelope_fwhm_hz: f64) -> Result<Self> {
        if !(sub_spacing_hz > 0.0) || !(envelope_fwhm_hz > 0.0) {
            return Err(Error::InvalidCombSpec);
        }
        for w in lines.windows(2) {
            if !(w[1].frequency_hz > w[0].frequency_hz) {
                return Err(Error::InvalidCombSpec);
            }
        }
        if lines.iter().any(|l| !(l.power_w > 0.0)) {
            return Err(Error::InvalidCombSpec);
        }
        Ok(Self { lines, sub_spacing_hz, envelope_fwhm_hz })
    }

    pub fn with_default_structure(lines: Vec<CombLine>) -> Result<Self> {
        Self::new(lines, DEFAULT_SUB_SPACING_HZ, DEFAULT_ENVELOPE_FWHM_HZ)
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Smallest spacing between adjacent lines, if two or more exist.
    pub fn min_spacing_hz(&self) -> Option<f64> {
        self.lines
            .windows(2)
            .map(|w| w[1].frequency_hz - w[0].frequency_hz)
            .min_by(f64::total_cmp)
    }

    pub fn total_power_w(&self) -> f64 {
        self.lines.iter().map(|l| l.power_w).sum()
    }
}

/// Monochromatic pump occupying a single grid bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub frequency_hz: f64,
    pub power_w: f64,
}

impl PumpSpec {
    pub fn new(frequency_hz: f64, power_w: f64) -> Result<Self> {
        if !(power_w > 0.0) {
            return Err(Error::NonPositive { context: "pump power", value: power_w });
        }
        Ok(Self { frequency_hz, power_w })
    }
}

/// Bookkeeping emitted alongside a synthesized input field.
#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub lines: usize,
    pub sub_lines_placed: usize,
    /// Largest |requested - snapped| frequency error, bounded by df/2.
    pub max_snap_error_hz: f64,
    /// Total linear power placed on the grid (comb sub-lines plus pump).
    pub total_power_w: f64,
    pub pump_bin: usize,
    pub pump_snap_error_hz: f64,
    /// Sub-lines that shared a bin with an earlier sub-line or the pump.
    pub merged_sub_lines: usize,
    /// Group-delay-dispersion equivalent of the applied chirp, if any.
    pub chirp_gdd_s2: Option<f64>,
}

/// Extract comb lines from an OSA trace as local maxima with at least
/// `min_prominence_db` of topographic prominence above the surrounding
/// baseline. Peak positions and powers are refined with a parabolic fit in
/// the dB domain, where a Gaussian line is exactly parabolic. Lines come
/// back sorted by increasing frequency with linear powers.
pub fn extract_comb_peaks(trace: &Trace, min_prominence_db: f64) -> Result<CombSpec> {
    if trace.points.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(min_prominence_db > 0.0) {
        return Err(Error::NonPositive {
            context: "peak prominence",
            value: min_prominence_db,
        });
    }
    let values: Vec<f64> = trace.points.iter().map(|p| p.power_dbm).collect();
    let mut lines: Vec<CombLine> = peaks::find_peaks(&values, min_prominence_db)
        .into_iter()
        .map(|p| {
            let (delta, refined_db) = peaks::refine_parabolic(&values, p.index);
            let step = if p.index + 1 < trace.points.len() {
                trace.points[p.index + 1].wavelength_nm - trace.points[p.index].wavelength_nm
            } else {
                0.0
            };
            let wl_nm = trace.points[p.index].wavelength_nm + delta * step;
            CombLine {
                frequency_hz: SPEED_OF_LIGHT / (wl_nm * 1e-9),
                power_w: dbm_to_watts(refined_db),
            }
        })
        .collect();
    lines.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
    CombSpec::new(lines, DEFAULT_SUB_SPACING_HZ, DEFAULT_ENVELOPE_FWHM_HZ)
}

/// Build the frequency-domain input field: sub-comb structure for every comb
/// line plus the pump in its own bin.
///
/// Spectral phase is zero (transform-limited) unless `chirp` is given.
/// A non-zero chirp rate `C` (the pulse train's instantaneous angular
/// frequency sweeps as `2C·T`) is realized as the quadratic spectral phase
/// `φ(ω) = -ω²/(4C)` about the comb's power-weighted centre — the group-delay
/// profile of that sweep — applied to comb bins only, leaving the pump
/// monochromatic and every bin power untouched.
pub fn synthesize_input(
    comb: &CombSpec,
    pump: &PumpSpec,
    grid: &TemporalGrid,
    chirp_per_s2: Option<f64>,
) -> Result<(Field, SynthReport)> {
    let n = grid.n_points();
    let df = grid.df_hz();
    let (f_lo, f_hi) = grid.frequency_bounds_hz();

    if let Some(min_spacing) = comb.min_spacing_hz() {
        if df > min_spacing {
            return Err(Error::GridTooCoarse { df_hz: df, min_spacing_hz: min_spacing });
        }
    }

    let mut power_bins = vec![0.0f64; n];
    let mut occupied = vec![false; n];
    let mut report = SynthReport {
        lines: comb.lines.len(),
        sub_lines_placed: 0,
        max_snap_error_hz: 0.0,
        total_power_w: 0.0,
        pump_bin: 0,
        pump_snap_error_hz: 0.0,
        merged_sub_lines: 0,
        chirp_gdd_s2: None,
    };

    let k_max = (ENVELOPE_CUTOFF_FWHM * comb.envelope_fwhm_hz / comb.sub_spacing_hz).floor()
        as i64;
    let ln2_4 = 4.0 * (2.0f64).ln();
    let mut comb_bins: Vec<usize> = Vec::new();
    for line in &comb.lines {
        for k in -k_max..=k_max {
            let f = line.frequency_hz + k as f64 * comb.sub_spacing_hz;
            let detune = k as f64 * comb.sub_spacing_hz;
            if detune.abs() > ENVELOPE_CUTOFF_FWHM * comb.envelope_fwhm_hz {
                continue;
            }
            let bin = grid.nearest_bin(f).ok_or(Error::FrequencyOutsideGrid {
                frequency_hz: f,
                lo: f_lo,
                hi: f_hi,
            })?;
            let p = line.power_w * (-ln2_4 * (detune / comb.envelope_fwhm_hz).powi(2)).exp();
            if occupied[bin] {
                report.merged_sub_lines += 1;
            } else {
                occupied[bin] = true;
                comb_bins.push(bin);
            }
            power_bins[bin] += p;
            report.sub_lines_placed += 1;
            let err = (grid.frequency_at_hz(bin) - f).abs();
            report.max_snap_error_hz = report.max_snap_error_hz.max(err);
        }
    }

    let pump_bin = grid.nearest_bin(pump.frequency_hz).ok_or(Error::FrequencyOutsideGrid {
        frequency_hz: pump.frequency_hz,
        lo: f_lo,
        hi: f_hi,
    })?;
    if occupied[pump_bin] {
        report.merged_sub_lines += 1;
    }
    power_bins[pump_bin] += pump.power_w;
    report.pump_bin = pump_bin;
    report.pump_snap_error_hz = (grid.frequency_at_hz(pump_bin) - pump.frequency_hz).abs();
    report.total_power_w = power_bins.iter().sum();

    // Phase per comb bin; pump stays at zero phase.
    let mut samples = vec![Complex64::new(0.0, 0.0); n];
    let chirp = chirp_per_s2.unwrap_or(0.0);
    let f_ref = if chirp != 0.0 {
        let total: f64 = comb_bins.iter().map(|&b| power_bins[b]).sum();
        if total > 0.0 {
            comb_bins
                .iter()
                .map(|&b| grid.frequency_at_hz(b) * power_bins[b])
                .sum::<f64>()
                / total
        } else {
            grid.center_frequency_hz()
        }
    } else {
        0.0
    };
    if chirp != 0.0 {
        report.chirp_gdd_s2 = Some(-1.0 / (2.0 * chirp));
    }
    for &bin in &comb_bins {
        let amp = (n as f64 * power_bins[bin]).sqrt();
        let phase = if chirp != 0.0 && bin != pump_bin {
            let w = 2.0 * std::f64::consts::PI * (grid.frequency_at_hz(bin) - f_ref);
            -w * w / (4.0 * chirp)
        } else {
            0.0
        };
        samples[bin] = Complex64::from_polar(amp, phase);
    }
    // Pump bin amplitude covers any merged comb power there, at zero phase.
    samples[pump_bin] = Complex64::new((n as f64 * power_bins[pump_bin]).sqrt(), 0.0);

    let field = Field::new(*grid, Representation::Frequency, samples)?;
    Ok((field, report))
}

/// Multiply a time-domain envelope by the quadratic phase `e^{iC·T²}`.
/// Magnitudes are untouched at every sample.
pub fn apply_linear_chirp(field: &Field, chirp_per_s2: f64) -> Result<Field> {
    if field.representation() != Representation::Time {
        return Err(Error::RepresentationMismatch(field.representation()));
    }
    let grid = *field.grid();
    let samples = field
        .samples()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let t = grid.time_at_s(j);
            s * Complex64::from_polar(1.0, chirp_per_s2 * t * t)
        })
        .collect();
    Field::new(grid, Representation::Time, samples)
}

/// Save a comb spec as `frequency_thz,power_dbm` CSV. The sub-comb structure
/// travels in comment metadata.
pub fn save_comb_csv(comb: &CombSpec, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# sub_spacing_hz={}", comb.sub_spacing_hz).unwrap();
    writeln!(out, "# envelope_fwhm_hz={}", comb.envelope_fwhm_hz).unwrap();
    writeln!(out, "frequency_thz,power_dbm").unwrap();
    for line in &comb.lines {
        let dbm = 10.0 * (line.power_w / 1e-3).log10();
        writeln!(out, "{:.9},{:.9}", line.frequency_hz / 1e12, dbm).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_comb_csv(path: &Path) -> Result<CombSpec> {
    let content = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut sub = DEFAULT_SUB_SPACING_HZ;
    let mut env = DEFAULT_ENVELOPE_FWHM_HZ;
    let mut lines = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.trim().split_once('=') {
                match key.trim() {
                    "sub_spacing_hz" => sub = value.trim().parse().unwrap_or(sub),
                    "envelope_fwhm_hz" => env = value.trim().parse().unwrap_or(env),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if line != "frequency_thz,power_dbm" {
                return Err(Error::Parse {
                    path: pstr,
                    line: lineno + 1,
                    message: format!("expected 'frequency_thz,power_dbm' header, got '{line}'"),
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
        let f_thz = field("frequency")?;
        let dbm = field("power")?;
        lines.push(CombLine { frequency_hz: f_thz * 1e12, power_w: dbm_to_watts(dbm) });
    }
    lines.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
    CombSpec::new(lines, sub, env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osa::TracePoint;
    use approx::assert_relative_eq;

    fn synthetic_peak_trace() -> Trace {
        // Five Gaussian peaks spaced 50 GHz, 30 dB above a -60 dBm floor.
        let centers: Vec<f64> = (0..5)
            .map(|i| SPEED_OF_LIGHT / 1550e-9 + (i as f64 - 2.0) * 50e9)
            .collect();
        let points: Vec<TracePoint> = (0..4000)
            .map(|i| {
                let wl = 1548.0 + i as f64 * 0.001;
                let f = SPEED_OF_LIGHT / (wl * 1e-9);
                let mut p_lin = dbm_to_watts(-60.0);
                for &c in &centers {
                    p_lin += dbm_to_watts(-30.0)
                        * (-4.0 * (2.0f64).ln() * ((f - c) / 2e9).powi(2)).exp();
                }
                TracePoint { wavelength_nm: wl, power_dbm: 10.0 * (p_lin / 1e-3).log10() }
            })
            .collect();
        Trace::new(points, Some(3e9)).unwrap()
    }

    #[test]
    fn extracts_five_peaks_with_correct_spacing() {
        let comb = extract_comb_peaks(&synthetic_peak_trace(), 10.0).unwrap();
        assert_eq!(comb.lines.len(), 5);
        for w in comb.lines.windows(2) {
            let spacing = w[1].frequency_hz - w[0].frequency_hz;
            assert!((spacing - 50e9).abs() < 0.1e9, "spacing {spacing}");
        }
        for l in &comb.lines {
            assert_relative_eq!(l.power_w, dbm_to_watts(-30.0), max_relative = 0.05);
        }
    }

    #[test]
    fn flat_trace_yields_empty_comb() {
        let points = (0..100)
            .map(|i| TracePoint { wavelength_nm: 1549.0 + i as f64 * 0.01, power_dbm: -55.0 })
            .collect();
        let t = Trace::new(points, None).unwrap();
        let comb = extract_comb_peaks(&t, 5.0).unwrap();
        assert!(comb.is_empty());
    }

    #[test]
    fn excessive_prominence_yields_empty_comb() {
        let comb = extract_comb_peaks(&synthetic_peak_trace(), 40.0).unwrap();
        assert!(comb.is_empty());
    }

    fn test_grid() -> TemporalGrid {
        TemporalGrid::new(1 << 16, 44.5e-9, 1550e-9).unwrap()
    }

    #[test]
    fn pump_lands_in_single_bin() {
        let grid = test_grid();
        let fc = grid.center_frequency_hz();
        let pump = PumpSpec::new(fc + 0.3 * grid.df_hz(), 1e-3).unwrap();
        let comb = CombSpec::with_default_structure(vec![]).unwrap();
        let (field, report) = synthesize_input(&comb, &pump, &grid, None).unwrap();
        let powers = field.spectral_powers_w().unwrap();
        let nonzero: Vec<usize> =
            (0..powers.len()).filter(|&k| powers[k] > 0.0).collect();
        assert_eq!(nonzero, vec![report.pump_bin]);
        assert_relative_eq!(powers[report.pump_bin], 1e-3, max_relative = 1e-12);
        assert!(report.pump_snap_error_hz <= grid.df_hz() / 2.0);
    }

    #[test]
    fn total_power_is_conserved() {
        let grid = test_grid();
        let fc = grid.center_frequency_hz();
        let lines: Vec<CombLine> = (0..5)
            .map(|i| CombLine {
                frequency_hz: fc + (i as f64 + 1.0) * 50e9,
                power_w: 0.2e-3 * (i as f64 + 1.0),
            })
            .collect();
        let comb = CombSpec::with_default_structure(lines).unwrap();
        let pump = PumpSpec::new(fc, 10e-3).unwrap();
        let (field, report) = synthesize_input(&comb, &pump, &grid, None).unwrap();
        let total: f64 = field.spectral_powers_w().unwrap().iter().sum();
        assert_relative_eq!(total, report.total_power_w, max_relative = 1e-6);
        // Doubling configured powers doubles every bin power.
        let doubled = CombSpec::with_default_structure(
            comb.lines
                .iter()
                .map(|l| CombLine { frequency_hz: l.frequency_hz, power_w: 2.0 * l.power_w })
                .collect(),
        )
        .unwrap();
        let pump2 = PumpSpec::new(fc, 20e-3).unwrap();
        let (field2, _) = synthesize_input(&doubled, &pump2, &grid, None).unwrap();
        let p1 = field.spectral_powers_w().unwrap();
        let p2 = field2.spectral_powers_w().unwrap();
        for k in 0..p1.len() {
            if p1[k] > 0.0 {
                assert_relative_eq!(p2[k], 2.0 * p1[k], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn first_side_subline_suppression_matches_envelope() {
        let grid = test_grid();
        let fc = grid.center_frequency_hz();
        let comb =
            CombSpec::with_default_structure(vec![CombLine { frequency_hz: fc, power_w: 1e-3 }])
                .unwrap();
        let pump = PumpSpec::new(fc + 500e9, 1e-3).unwrap();
        let (field, _) = synthesize_input(&comb, &pump, &grid, None).unwrap();
        let powers = field.spectral_powers_w().unwrap();
        let center_bin = grid.nearest_bin(fc).unwrap();
        let side_bin = grid.nearest_bin(fc + DEFAULT_SUB_SPACING_HZ).unwrap();
        assert_ne!(center_bin, side_bin);
        let ratio = powers[side_bin] / powers[center_bin];
        let expected = (-4.0 * (2.0f64).ln()
            * (DEFAULT_SUB_SPACING_HZ / DEFAULT_ENVELOPE_FWHM_HZ).powi(2))
        .exp();
        assert_relative_eq!(ratio, expected, max_relative = 1e-9);
        assert_relative_eq!(ratio, 4.4e-2, max_relative = 0.02);
    }

    #[test]
    fn spectrum_is_zero_outside_line_windows() {
        let grid = test_grid();
        let fc = grid.center_frequency_hz();
        let comb = CombSpec::with_default_structure(vec![
            CombLine { frequency_hz: fc - 50e9, power_w: 1e-3 },
            CombLine { frequency_hz: fc + 50e9, power_w: 1e-3 },
        ])
        .unwrap();
        let pump = PumpSpec::new(fc, 5e-3).unwrap();
        let (field, report) = synthesize_input(&comb, &pump, &grid, None).unwrap();
        let powers = field.spectral_powers_w().unwrap();
        let guard = ENVELOPE_CUTOFF_FWHM * DEFAULT_ENVELOPE_FWHM_HZ + grid.df_hz();
        for (k, &p) in powers.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let f = grid.frequency_at_hz(k);
            let near_line = comb
                .lines
                .iter()
                .any(|l| (f - l.frequency_hz).abs() <= guard);
            assert!(
                near_line || k == report.pump_bin,
                "unexpected power at bin {k} ({f} Hz)"
            );
        }
    }

    #[test]
    fn rejects_line_outside_span_and_coarse_grid() {
        let grid = test_grid();
        let fc = grid.center_frequency_hz();
        let comb = CombSpec::with_default_structure(vec![CombLine {
            frequency_hz: fc + grid.span_hz(),
            power_w: 1e-3,
        }])
        .unwrap();
        let pump = PumpSpec::new(fc, 1e-3).unwrap();
        assert!(matches!(
            synthesize_input(&comb, &pump, &grid, None),
            Err(Error::FrequencyOutsideGrid { .. })
        ));

        let coarse = TemporalGrid::new(16, 1e-12, 1550e-9).unwrap(); // df = 1 THz
        let two_lines = CombSpec::with_default_structure(vec![
            CombLine { frequency_hz: coarse.center_frequency_hz(), power_w: 1e-3 },
            CombLine { frequency_hz: coarse.center_frequency_hz() + 50e9, power_w: 1e-3 },
        ])
        .unwrap();
        assert!(matches!(
            synthesize_input(&two_lines, &pump, &coarse, None),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn chirp_leaves_magnitudes_and_energy_alone() {
        let grid = TemporalGrid::new(1 << 10, 1e-9, 1550e-9).unwrap();
        let samples: Vec<Complex64> = (0..grid.n_points())
            .map(|j| Complex64::new((j as f64 * 0.01).sin(), 0.3))
            .collect();
        let f = Field::new(grid, Representation::Time, samples).unwrap();
        let chirped = apply_linear_chirp(&f, 3.7e20).unwrap();
        assert_relative_eq!(f.energy_j(), chirped.energy_j(), max_relative = 1e-12);
        for (a, b) in f.samples().iter().zip(chirped.samples()) {
            assert_relative_eq!(a.norm(), b.norm(), max_relative = 1e-12);
        }
        let identity = apply_linear_chirp(&f, 0.0).unwrap();
        for (a, b) in f.samples().iter().zip(identity.samples()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn chirp_requires_time_representation() {
        let grid = TemporalGrid::new(16, 1e-9, 1550e-9).unwrap();
        let f = Field::zeros(grid, Representation::Frequency);
        assert!(matches!(
            apply_linear_chirp(&f, 1.0),
            Err(Error::RepresentationMismatch(Representation::Frequency))
        ));
    }

    #[test]
    fn chirped_gaussian_spectrum_broadens() {
        let n = 1 << 12;
        let grid = TemporalGrid::new(n, 400e-12, 1550e-9).unwrap();
        let t0 = 15e-12 / (2.0 * (2.0f64.ln()).sqrt()); // amplitude 1/e half-width
        let samples: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = grid.time_at_s(j);
                Complex64::new((-t * t / (2.0 * t0 * t0)).exp(), 0.0)
            })
            .collect();
        let tl = Field::new(grid, Representation::Time, samples).unwrap();
        let chirp = 2.0 / (t0 * t0); // dimensionless chirp parameter 2C·t0² = 4
        let chirped = apply_linear_chirp(&tl, chirp).unwrap();

        let bw = |f: &Field| {
            let s = f.to_frequency().unwrap();
            let p: Vec<f64> = s.samples().iter().map(|v| v.norm_sqr()).collect();
            // second-moment bandwidth
            let total: f64 = p.iter().sum();
            let mean: f64 = p
                .iter()
                .enumerate()
                .map(|(k, &v)| k as f64 * v)
                .sum::<f64>()
                / total;
            (p.iter()
                .enumerate()
                .map(|(k, &v)| (k as f64 - mean).powi(2) * v)
                .sum::<f64>()
                / total)
                .sqrt()
        };
        let (bw_tl, bw_ch) = (bw(&tl), bw(&chirped));
        // Chirped Gaussian bandwidth grows by sqrt(1 + (2C·t0²)²).
        let expected = (1.0f64 + (2.0 * chirp * t0 * t0).powi(2)).sqrt();
        assert!(bw_ch > bw_tl);
        assert_relative_eq!(bw_ch / bw_tl, expected, max_relative = 0.02);
    }

    #[test]
    fn chirp_in_synthesis_changes_phases_not_powers() {
        let grid = test_grid();
        let fc = grid.center_frequency_hz();
        let comb = CombSpec::with_default_structure(vec![
            CombLine { frequency_hz: fc + 50e9, power_w: 1e-3 },
            CombLine { frequency_hz: fc + 100e9, power_w: 1e-3 },
        ])
        .unwrap();
        let pump = PumpSpec::new(fc, 5e-3).unwrap();
        let chirp = 2.5e21;
        let (plain, _) = synthesize_input(&comb, &pump, &grid, None).unwrap();
        let (chirped, report) = synthesize_input(&comb, &pump, &grid, Some(chirp)).unwrap();
        assert_eq!(report.chirp_gdd_s2, Some(-1.0 / (2.0 * chirp)));
        let p0 = plain.spectral_powers_w().unwrap();
        let p1 = chirped.spectral_powers_w().unwrap();
        for k in 0..p0.len() {
            assert!(
                (p0[k] - p1[k]).abs() <= 1e-12 * p0[k],
                "bin {k} power moved under chirp"
            );
        }
        // Pump keeps zero phase; comb bins away from the reference pick up
        // a quadratic phase.
        let pump_bin = report.pump_bin;
        assert_eq!(chirped.samples()[pump_bin].arg(), 0.0);
        let far_bin = grid.nearest_bin(fc + 100e9).unwrap();
        assert!(chirped.samples()[far_bin].arg().abs() > 1e-3);
    }

    #[test]
    fn comb_csv_round_trip() {
        let comb = CombSpec::new(
            vec![
                CombLine { frequency_hz: 193.35e12, power_w: 0.4e-3 },
                CombLine { frequency_hz: 193.40e12, power_w: 1.1e-3 },
            ],
            22.47e6,
            21.23e6,
        )
        .unwrap();
        let path = std::env::temp_dir().join("fwmkit_comb_rt.csv");
        save_comb_csv(&comb, &path).unwrap();
        let back = load_comb_csv(&path).unwrap();
        assert_eq!(back.lines.len(), 2);
        assert_eq!(back.sub_spacing_hz, comb.sub_spacing_hz);
        assert_eq!(back.envelope_fwhm_hz, comb.envelope_fwhm_hz);
        for (a, b) in comb.lines.iter().zip(&back.lines) {
            assert_relative_eq!(a.frequency_hz, b.frequency_hz, max_relative = 1e-9);
            assert_relative_eq!(a.power_w, b.power_w, max_relative = 1e-8);
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn pulse_train_period_matches_sub_spacing() {
        // On a 4x44.5 ns window the sub-comb of a single line produces a
        // train with period 1/sub_spacing ≈ 44.5 ns.
        let n = 1 << 16;
        let window = 4.0 * 44.5e-9;
        let grid = TemporalGrid::new(n, window, 1550e-9).unwrap();
        let fc = grid.center_frequency_hz();
        let comb =
            CombSpec::with_default_structure(vec![CombLine { frequency_hz: fc, power_w: 1e-3 }])
                .unwrap();
        let pump = PumpSpec::new(fc + 100e9, 1e-6).unwrap();
        let (field, _) = synthesize_input(&comb, &pump, &grid, None).unwrap();
        let time = field.to_time().unwrap();
        let intensity: Vec<f64> = time.samples().iter().map(|s| s.norm_sqr()).collect();
        // Circular intensity autocorrelation, best lag in [n/16, n/2].
        let mut best = (0usize, f64::NEG_INFINITY);
        for lag in (n / 16)..(n / 2) {
            let mut acc = 0.0;
            let mut j = 0;
            while j < n {
                acc += intensity[j] * intensity[(j + lag) % n];
                j += 16; // decimated sum is enough to locate the peak
            }
            if acc > best.1 {
                best = (lag, acc);
            }
        }
        let period_s = best.0 as f64 * grid.dt_s();
        let expected = 1.0 / DEFAULT_SUB_SPACING_HZ;
        assert!(
            (period_s - expected).abs() < 0.05e-9,
            "period {period_s} vs {expected}"
        );
    }
}
