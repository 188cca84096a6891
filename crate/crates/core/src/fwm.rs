//! Four-wave-mixing bookkeeping: predicted signal/idler line positions,
//! the all-pairs comb correlation table, and sideband measurement from a
//! simulated spectrum or a recorded trace.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::osa::Trace;
use crate::signal::{dbm_to_watts, Field, SPEED_OF_LIGHT};

/// j-th order signal/idler pair around the pump. The idler is computed as
/// `2·f_pump - signal`, which keeps `signal + idler == 2·f_pump` exact in
/// floating point (Sterbenz: the subtraction is lossless for detunings below
/// the pump frequency).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinePrediction {
    pub order: u32,
    pub signal_hz: f64,
    pub idler_hz: f64,
}

/// Sideband pairs `f_pump ± j·Δf` for `j = 1..=j_max`.
pub fn predict_lines(pump_hz: f64, delta_f_hz: f64, j_max: u32) -> Result<Vec<LinePrediction>> {
    if !(delta_f_hz > 0.0) {
        return Err(Error::NonPositive { context: "line spacing", value: delta_f_hz });
    }
    if j_max == 0 {
        return Err(Error::ZeroOrder);
    }
    Ok((1..=j_max)
        .map(|j| {
            let signal = pump_hz + j as f64 * delta_f_hz;
            let idler = 2.0 * pump_hz - signal;
            LinePrediction { order: j, signal_hz: signal, idler_hz: idler }
        })
        .collect())
}

/// One directed pair `(row, col)` of comb lines and the sideband pair their
/// spacing generates around the pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEntry {
    pub row: usize,
    pub col: usize,
    /// Pair order `j = |col - row|`.
    pub order: u32,
    pub signal_hz: f64,
    pub idler_hz: f64,
}

/// All-pairs table over the comb: entry `(m, m')` carries the sidebands at
/// `f_pump ± (f_m' - f_m)`. Diagonal entries are absent; `(m, m')` and
/// `(m', m)` describe the same order.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationMatrix {
    pub comb_frequencies_hz: Vec<f64>,
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationMatrix {
    pub fn entry(&self, row: usize, col: usize) -> Option<&CorrelationEntry> {
        self.entries.iter().find(|e| e.row == row && e.col == col)
    }
}

pub fn correlation_matrix(comb_frequencies_hz: &[f64], pump_hz: f64) -> Result<CorrelationMatrix> {
    if comb_frequencies_hz.len() < 2 {
        return Err(Error::InvalidCombFrequencies);
    }
    for w in comb_frequencies_hz.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidCombFrequencies);
        }
    }
    let n = comb_frequencies_hz.len();
    let mut entries = Vec::with_capacity(n * (n - 1));
    for row in 0..n {
        for col in 0..n {
            if row == col {
                continue;
            }
            let delta = comb_frequencies_hz[col] - comb_frequencies_hz[row];
            let signal = pump_hz + delta;
            let idler = 2.0 * pump_hz - signal;
            entries.push(CorrelationEntry {
                row,
                col,
                order: row.abs_diff(col) as u32,
                signal_hz: signal,
                idler_hz: idler,
            });
        }
    }
    Ok(CorrelationMatrix { comb_frequencies_hz: comb_frequencies_hz.to_vec(), entries })
}

/// Measured power at one predicted sideband pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SidebandMeasurement {
    pub order: u32,
    pub signal_power_w: f64,
    pub idler_power_w: f64,
    /// Frequencies where the maxima were actually found.
    pub signal_hz: f64,
    pub idler_hz: f64,
    /// False when the window's maximum does not clear the local floor
    /// (window median) by at least 3 dB.
    pub signal_found: bool,
    pub idler_found: bool,
}

/// Measure sidebands on a frequency-domain field.
pub fn measure_sidebands(
    spectrum: &Field,
    predictions: &[LinePrediction],
    window_hz: f64,
) -> Result<Vec<SidebandMeasurement>> {
    let grid = spectrum.grid();
    let powers = spectrum.spectral_powers_w()?;
    let freqs: Vec<f64> = (0..grid.n_points()).map(|k| grid.frequency_at_hz(k)).collect();
    measure_on_samples(&freqs, &powers, predictions, window_hz)
}

/// Measure sidebands on an OSA trace (powers converted to linear watts).
pub fn measure_sidebands_trace(
    trace: &Trace,
    predictions: &[LinePrediction],
    window_hz: f64,
) -> Result<Vec<SidebandMeasurement>> {
    let mut pairs: Vec<(f64, f64)> = trace
        .points
        .iter()
        .map(|p| (SPEED_OF_LIGHT / (p.wavelength_nm * 1e-9), dbm_to_watts(p.power_dbm)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let freqs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let powers: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    measure_on_samples(&freqs, &powers, predictions, window_hz)
}

fn measure_on_samples(
    freqs: &[f64],
    powers: &[f64],
    predictions: &[LinePrediction],
    window_hz: f64,
) -> Result<Vec<SidebandMeasurement>> {
    if !(window_hz > 0.0) {
        return Err(Error::NonPositive { context: "search window", value: window_hz });
    }
    if predictions.len() >= 2 {
        let delta_f = predictions[1].signal_hz - predictions[0].signal_hz;
        if window_hz >= delta_f / 2.0 {
            return Err(Error::WindowTooWide { window_hz, delta_f_hz: delta_f });
        }
    }

    let measure = |center: f64| -> (f64, f64, bool) {
        let lo = freqs.partition_point(|&f| f < center - window_hz);
        let hi = freqs.partition_point(|&f| f <= center + window_hz);
        if lo >= hi {
            return (0.0, center, false);
        }
        let slice = &powers[lo..hi];
        let (imax, &peak) = slice
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let mut sorted: Vec<f64> = slice.to_vec();
        sorted.sort_by(f64::total_cmp);
        let floor = sorted[sorted.len() / 2];
        // "Found" means clearing the local floor by 3 dB.
        let found = peak > 0.0 && peak > floor * 10f64.powf(0.3);
        (peak, freqs[lo + imax], found)
    };

    Ok(predictions
        .iter()
        .map(|p| {
            let (sp, sf, s_found) = measure(p.signal_hz);
            let (ip, ifq, i_found) = measure(p.idler_hz);
            SidebandMeasurement {
                order: p.order,
                signal_power_w: sp,
                idler_power_w: ip,
                signal_hz: sf,
                idler_hz: ifq,
                signal_found: s_found,
                idler_found: i_found,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Field, Representation, TemporalGrid};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn first_order_prediction_around_1550_12nm() {
        let pump = SPEED_OF_LIGHT / 1550.12e-9;
        assert_relative_eq!(pump, 193.39946e12, max_relative = 1e-6);
        let lines = predict_lines(pump, 50e9, 1).unwrap();
        assert_relative_eq!(lines[0].signal_hz, pump + 50e9, max_relative = 1e-12);
        assert_relative_eq!(lines[0].signal_hz, 193.44946e12, max_relative = 1e-6);
        assert_relative_eq!(lines[0].idler_hz, 193.34946e12, max_relative = 1e-6);
    }

    #[test]
    fn zero_order_is_rejected() {
        assert!(matches!(predict_lines(1.9e14, 50e9, 0), Err(Error::ZeroOrder)));
        assert!(predict_lines(1.9e14, 0.0, 3).is_err());
    }

    #[test]
    fn predictions_are_exactly_symmetric_about_pump() {
        let pump = SPEED_OF_LIGHT / 1550.12e-9;
        for p in predict_lines(pump, 50e9, 64).unwrap() {
            assert_eq!(p.signal_hz + p.idler_hz, 2.0 * pump);
        }
    }

    #[test]
    fn matrix_over_equally_spaced_lines() {
        let f0 = 193.0e12;
        let comb: Vec<f64> = (0..6).map(|i| f0 + i as f64 * 50e9).collect();
        let pump = 193.2e12;
        let m = correlation_matrix(&comb, pump).unwrap();
        assert_eq!(m.entries.len(), 30);
        let orders: std::collections::BTreeSet<u32> =
            m.entries.iter().map(|e| e.order).collect();
        assert_eq!(orders, (1..=5).collect());
        // First off-diagonal is order 1 with Δ = 50 GHz.
        let e = m.entry(0, 1).unwrap();
        assert_eq!(e.order, 1);
        assert_relative_eq!(e.signal_hz, pump + 50e9, max_relative = 1e-12);
        // (m, m') and (m', m) describe the same order with mirrored roles.
        let r = m.entry(1, 0).unwrap();
        assert_eq!(r.order, 1);
        assert_relative_eq!(r.signal_hz, pump - 50e9, max_relative = 1e-12);
        assert_eq!(e.signal_hz + e.idler_hz, 2.0 * pump);
    }

    #[test]
    fn two_lines_give_single_undirected_pair() {
        let m = correlation_matrix(&[193.0e12, 193.05e12], 193.2e12).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert!(m.entries.iter().all(|e| e.order == 1));
    }

    #[test]
    fn non_uniform_comb_brute_force() {
        let f0 = 193.0e12;
        let comb = [f0, f0 + 50e9, f0 + 150e9];
        let pump = 193.3e12;
        let m = correlation_matrix(&comb, pump).unwrap();
        assert_eq!(m.entries.len(), 6);
        let mut seps: Vec<f64> = m
            .entries
            .iter()
            .map(|e| (e.signal_hz - pump).abs())
            .collect();
        seps.sort_by(f64::total_cmp);
        seps.dedup_by(|a, b| (*a - *b).abs() < 1.0);
        assert_eq!(seps.len(), 3);
        assert_relative_eq!(seps[0], 50e9, max_relative = 1e-12);
        assert_relative_eq!(seps[1], 100e9, max_relative = 1e-12);
        assert_relative_eq!(seps[2], 150e9, max_relative = 1e-12);
    }

    #[test]
    fn matrix_rejects_unsorted_or_short_input() {
        assert!(correlation_matrix(&[193.0e12], 193.2e12).is_err());
        assert!(correlation_matrix(&[193.1e12, 193.0e12], 193.2e12).is_err());
    }

    fn spectrum_with_peaks(peaks: &[(f64, f64)]) -> Field {
        let grid = TemporalGrid::new(1 << 12, 10e-9, 1550e-9).unwrap();
        let mut samples = vec![Complex64::new(0.0, 0.0); grid.n_points()];
        for &(f, p) in peaks {
            let k = grid.nearest_bin(f).unwrap();
            samples[k] = Complex64::new(Field::bin_amplitude_for_power(&grid, p), 0.0);
        }
        Field::new(grid, Representation::Frequency, samples).unwrap()
    }

    #[test]
    fn injected_sidebands_are_recovered() {
        let fc = SPEED_OF_LIGHT / 1550e-9;
        let preds = predict_lines(fc, 50e9, 2).unwrap();
        let spec = spectrum_with_peaks(&[
            (preds[0].signal_hz, 2e-6),
            (preds[0].idler_hz, 1.5e-6),
        ]);
        let m = measure_sidebands(&spec, &preds, 10e9).unwrap();
        assert!(m[0].signal_found && m[0].idler_found);
        assert_relative_eq!(m[0].signal_power_w, 2e-6, max_relative = 1e-9);
        assert_relative_eq!(m[0].idler_power_w, 1.5e-6, max_relative = 1e-9);
        assert!(!m[1].signal_found && !m[1].idler_found);
        assert_eq!(m[1].signal_power_w, 0.0);
    }

    #[test]
    fn oversized_window_is_rejected() {
        let fc = SPEED_OF_LIGHT / 1550e-9;
        let preds = predict_lines(fc, 50e9, 3).unwrap();
        let spec = spectrum_with_peaks(&[(fc + 50e9, 1e-6)]);
        assert!(matches!(
            measure_sidebands(&spec, &preds, 25e9),
            Err(Error::WindowTooWide { .. })
        ));
    }

    #[test]
    fn measurement_does_not_modify_spectrum_and_is_idempotent() {
        let fc = SPEED_OF_LIGHT / 1550e-9;
        let preds = predict_lines(fc, 50e9, 1).unwrap();
        let spec = spectrum_with_peaks(&[(fc + 50e9, 1e-6)]);
        let before = spec.samples().to_vec();
        let a = measure_sidebands(&spec, &preds, 10e9).unwrap();
        let b = measure_sidebands(&spec, &preds, 10e9).unwrap();
        assert_eq!(spec.samples(), &before[..]);
        assert_eq!(a[0].signal_power_w, b[0].signal_power_w);
    }
}
