//! Uniform time/frequency grids, complex field envelopes, and unitary
//! transforms between the two domains.
//!
//! A [`TemporalGrid`] fixes `n` samples over a time window `W` centred on a
//! carrier wavelength. Time samples sit at `T_j = (j - n/2)·dt` and frequency
//! bins at `f_k = f_c + (k - n/2)·df` with `dt = W/n`, `df = 1/W`, so the
//! frequency axis is stored monotone with the carrier at index `n/2`.
//!
//! Sign convention: a line detuned by `+ω` from the carrier evolves as
//! `e^{-iωT}` in the envelope, which the forward transform places *above*
//! the carrier bin. Under this convention the dispersive half of the
//! propagation equation advances a detuned line by `+β₂/2·ω²·z`.
//!
//! The envelope carries amplitude in √W, so `|A|²` is instantaneous power.
//! Transforms use the symmetric `1/√n` normalization, making energy
//! bookkeeping identical in both domains. Group delay (the `β₁` walk-off)
//! never appears: the time axis is the retarded frame co-moving with the
//! pulse, which eliminates it from the propagation equation.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wavelength band accepted for carrier and evaluation wavelengths, meters.
pub const WAVELENGTH_BAND_M: (f64, f64) = (1.0e-6, 2.0e-6);

pub(crate) fn check_wavelength(lambda_m: f64) -> Result<()> {
    if lambda_m > WAVELENGTH_BAND_M.0 && lambda_m < WAVELENGTH_BAND_M.1 {
        Ok(())
    } else {
        Err(Error::WavelengthOutOfBand(lambda_m))
    }
}

/// Uniform sampling grid shared by the time and frequency representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalGrid {
    n_points: usize,
    time_window_s: f64,
    center_wavelength_m: f64,
}

impl TemporalGrid {
    /// Build a grid of `n_points` samples (power of two, >= 2) over
    /// `time_window_s` seconds around `center_wavelength_m`.
    pub fn new(n_points: usize, time_window_s: f64, center_wavelength_m: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n_points));
        }
        if !(time_window_s > 0.0) {
            return Err(Error::NonPositiveWindow(time_window_s));
        }
        check_wavelength(center_wavelength_m)?;
        Ok(Self { n_points, time_window_s, center_wavelength_m })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn time_window_s(&self) -> f64 {
        self.time_window_s
    }

    pub fn center_wavelength_m(&self) -> f64 {
        self.center_wavelength_m
    }

    /// Sample spacing `dt = W/n`. Exact in binary arithmetic because `n` is a
    /// power of two.
    pub fn dt_s(&self) -> f64 {
        self.time_window_s / self.n_points as f64
    }

    /// Frequency resolution `df = 1/W`.
    pub fn df_hz(&self) -> f64 {
        1.0 / self.time_window_s
    }

    /// Total spectral span `n·df`.
    pub fn span_hz(&self) -> f64 {
        self.n_points as f64 * self.df_hz()
    }

    pub fn center_frequency_hz(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_wavelength_m
    }

    /// Time coordinate of sample `j`, centred so `T = 0` sits at index `n/2`.
    pub fn time_at_s(&self, index: usize) -> f64 {
        (index as f64 - (self.n_points / 2) as f64) * self.dt_s()
    }

    /// Absolute frequency of bin `k` on the monotone axis.
    pub fn frequency_at_hz(&self, bin: usize) -> f64 {
        self.center_frequency_hz() + self.offset_at_hz(bin)
    }

    /// Frequency offset of bin `k` from the carrier.
    pub fn offset_at_hz(&self, bin: usize) -> f64 {
        (bin as f64 - (self.n_points / 2) as f64) * self.df_hz()
    }

    /// Angular frequency offset `2π(f_k - f_c)` of bin `k`.
    pub fn omega_offset_at(&self, bin: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.offset_at_hz(bin)
    }

    /// Lowest/highest bin-centre frequencies of the grid.
    pub fn frequency_bounds_hz(&self) -> (f64, f64) {
        (self.frequency_at_hz(0), self.frequency_at_hz(self.n_points - 1))
    }

    /// Bin whose centre is nearest to `frequency_hz`, or `None` when the
    /// frequency falls outside the grid by more than half a bin.
    pub fn nearest_bin(&self, frequency_hz: f64) -> Option<usize> {
        let rel = (frequency_hz - self.center_frequency_hz()) / self.df_hz();
        let k = rel.round() + (self.n_points / 2) as f64;
        if k < 0.0 || k > (self.n_points - 1) as f64 {
            None
        } else {
            Some(k as usize)
        }
    }
}

/// Domain in which a [`Field`]'s samples currently live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Time,
    Frequency,
}

/// Direction argument for [`Field::transform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformDirection {
    ToFrequency,
    ToTime,
}

/// Complex envelope on a [`TemporalGrid`], in either domain.
#[derive(Debug, Clone)]
pub struct Field {
    grid: TemporalGrid,
    representation: Representation,
    samples: Vec<Complex64>,
}

impl Field {
    pub fn new(
        grid: TemporalGrid,
        representation: Representation,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        if samples.len() != grid.n_points() {
            return Err(Error::SampleCountMismatch {
                got: samples.len(),
                expected: grid.n_points(),
            });
        }
        Ok(Self { grid, representation, samples })
    }

    pub fn zeros(grid: TemporalGrid, representation: Representation) -> Self {
        let n = grid.n_points();
        Self { grid, representation, samples: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Continuous wave of constant power (time representation).
    pub fn cw(grid: TemporalGrid, power_w: f64) -> Self {
        let n = grid.n_points();
        let amp = power_w.sqrt();
        Self {
            grid,
            representation: Representation::Time,
            samples: vec![Complex64::new(amp, 0.0); n],
        }
    }

    pub fn grid(&self) -> &TemporalGrid {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Unitary transform to the other domain. Requesting the representation
    /// the field is already in is an error.
    pub fn transform(&self, direction: TransformDirection) -> Result<Field> {
        let target = match direction {
            TransformDirection::ToFrequency => Representation::Frequency,
            TransformDirection::ToTime => Representation::Time,
        };
        if target == self.representation {
            return Err(Error::RepresentationMismatch(self.representation));
        }

        let n = self.grid.n_points();
        let mut buf = self.samples.clone();
        // Both axes are centred at index n/2; rotate so the centre sample
        // lands at index 0, run the raw FFT, rotate back. For even n the two
        // shifts are the same rotation.
        buf.rotate_left(n / 2);
        let mut planner = FftPlanner::<f64>::new();
        let fft = match direction {
            // e^{-iωT} at +ω must land above the carrier bin, which the
            // unnormalized inverse DFT provides.
            TransformDirection::ToFrequency => planner.plan_fft_inverse(n),
            TransformDirection::ToTime => planner.plan_fft_forward(n),
        };
        fft.process(&mut buf);
        buf.rotate_left(n / 2);
        let scale = 1.0 / (n as f64).sqrt();
        for v in &mut buf {
            *v *= scale;
        }
        Ok(Field { grid: self.grid, representation: target, samples: buf })
    }

    pub fn to_frequency(&self) -> Result<Field> {
        self.transform(TransformDirection::ToFrequency)
    }

    pub fn to_time(&self) -> Result<Field> {
        self.transform(TransformDirection::ToTime)
    }

    /// Pulse energy `Σ|A|²·dt`. The unitary transform makes this identical
    /// in both representations (Parseval).
    pub fn energy_j(&self) -> f64 {
        let dt = self.grid.dt_s();
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * dt
    }

    /// Linear power carried by each frequency bin, in watts. A monochromatic
    /// line of power `P` occupying one bin reports exactly `P`.
    pub fn spectral_powers_w(&self) -> Result<Vec<f64>> {
        if self.representation != Representation::Frequency {
            return Err(Error::RepresentationMismatch(self.representation));
        }
        let n = self.grid.n_points() as f64;
        Ok(self.samples.iter().map(|s| s.norm_sqr() / n).collect())
    }

    /// Amplitude that gives a single bin the linear power `power_w`.
    pub fn bin_amplitude_for_power(grid: &TemporalGrid, power_w: f64) -> f64 {
        (grid.n_points() as f64 * power_w).sqrt()
    }
}

/// dBm/watts conversions. `watts_to_dbm` rejects non-positive input.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1.0e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> Result<f64> {
    if !(watts > 0.0) {
        return Err(Error::NonPositivePower(watts));
    }
    Ok(10.0 * (watts / 1.0e-3).log10())
}

/// dBm value for a possibly-zero power: zero maps to `-inf`, which the
/// spectrum CSV round-trips losslessly.
fn dbm_or_neg_inf(watts: f64) -> f64 {
    if watts > 0.0 {
        10.0 * (watts / 1.0e-3).log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Write a frequency-domain field as a spectrum CSV:
/// `frequency_thz,power_dbm,phase_rad`, one row per bin, frequencies strictly
/// increasing. Grid metadata is kept in `#` comment lines so the file can be
/// loaded back onto an identical grid.
pub fn save_spectrum_csv(field: &Field, path: &Path) -> Result<()> {
    if field.representation() != Representation::Frequency {
        return Err(Error::RepresentationMismatch(field.representation()));
    }
    let grid = field.grid();
    let n = grid.n_points() as f64;
    let mut out = String::new();
    writeln!(out, "# n_points={}", grid.n_points()).unwrap();
    writeln!(out, "# time_window_s={}", grid.time_window_s()).unwrap();
    writeln!(out, "# center_wavelength_m={}", grid.center_wavelength_m()).unwrap();
    writeln!(out, "frequency_thz,power_dbm,phase_rad").unwrap();
    for (k, s) in field.samples().iter().enumerate() {
        let f_thz = grid.frequency_at_hz(k) / 1e12;
        let p_dbm = dbm_or_neg_inf(s.norm_sqr() / n);
        let phase = if s.norm_sqr() > 0.0 { s.arg() } else { 0.0 };
        writeln!(out, "{f_thz:.9},{p_dbm:.9},{phase:.9}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Load a spectrum CSV written by [`save_spectrum_csv`].
pub fn load_spectrum_csv(path: &Path) -> Result<Field> {
    let content = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut n_points: Option<usize> = None;
    let mut window: Option<f64> = None;
    let mut lambda: Option<f64> = None;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some((key, value)) = meta.split_once('=') {
                match key.trim() {
                    "n_points" => n_points = value.trim().parse().ok(),
                    "time_window_s" => window = value.trim().parse().ok(),
                    "center_wavelength_m" => lambda = value.trim().parse().ok(),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if line != "frequency_thz,power_dbm,phase_rad" {
                return Err(Error::Parse {
                    path: pstr,
                    line: lineno + 1,
                    message: format!("expected spectrum header, got '{line}'"),
                });
            }
            header_seen = true;
            continue;
        }
        let mut cols = line.split(',');
        let parse = |s: Option<&str>, what: &str| -> Result<f64> {
            s.and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("invalid {what}"),
            })
        };
        let _f = parse(cols.next(), "frequency")?;
        let p = parse(cols.next(), "power")?;
        let ph = parse(cols.next(), "phase")?;
        rows.push((p, ph));
    }
    let (n, w, l) = match (n_points, window, lambda) {
        (Some(n), Some(w), Some(l)) => (n, w, l),
        _ => {
            return Err(Error::Parse {
                path: pstr,
                line: 0,
                message: "missing grid metadata comments (n_points/time_window_s/center_wavelength_m)"
                    .into(),
            })
        }
    };
    if rows.len() != n {
        return Err(Error::Parse {
            path: pstr,
            line: 0,
            message: format!("expected {n} bins, found {}", rows.len()),
        });
    }
    let grid = TemporalGrid::new(n, w, l)?;
    let nf = n as f64;
    let samples = rows
        .iter()
        .map(|&(p_dbm, phase)| {
            let p_w = if p_dbm == f64::NEG_INFINITY { 0.0 } else { dbm_to_watts(p_dbm) };
            Complex64::from_polar((nf * p_w).sqrt(), phase)
        })
        .collect();
    Field::new(grid, Representation::Frequency, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_derived_quantities() {
        let g = TemporalGrid::new(1 << 18, 44.5e-9, 1550e-9).unwrap();
        assert_relative_eq!(g.dt_s(), 169.75e-15, max_relative = 1e-3);
        assert_relative_eq!(g.df_hz(), 22.472e6, max_relative = 1e-3);
        assert_relative_eq!(g.span_hz(), 5.891e12, max_relative = 1e-3);
        // dt·n = window and df·n = span are exact; df·window is machine-exact.
        assert_eq!(g.dt_s() * g.n_points() as f64, g.time_window_s());
        assert_eq!(g.df_hz() * g.n_points() as f64, g.span_hz());
        assert!((g.df_hz() * g.time_window_s() - 1.0).abs() < 4e-16);
    }

    #[test]
    fn tiny_grid() {
        let g = TemporalGrid::new(2, 1.0, 1550e-9).unwrap();
        assert_eq!(g.dt_s(), 0.5);
        assert_eq!(g.df_hz(), 1.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            TemporalGrid::new((1 << 10) + 1, 1e-9, 1550e-9),
            Err(Error::NotPowerOfTwo(_))
        ));
        assert!(matches!(TemporalGrid::new(1, 1e-9, 1550e-9), Err(Error::NotPowerOfTwo(1))));
        assert!(matches!(
            TemporalGrid::new(4, 0.0, 1550e-9),
            Err(Error::NonPositiveWindow(_))
        ));
        assert!(matches!(
            TemporalGrid::new(4, 1e-9, 3000e-9),
            Err(Error::WavelengthOutOfBand(_))
        ));
    }

    #[test]
    fn delta_sample_has_flat_spectrum() {
        let g = TemporalGrid::new(64, 1e-9, 1550e-9).unwrap();
        let mut f = Field::zeros(g, Representation::Time);
        f.samples[17] = Complex64::new(2.0, 0.5);
        let s = f.to_frequency().unwrap();
        let mags: Vec<f64> = s.samples().iter().map(|v| v.norm()).collect();
        let expect = (2.0f64 * 2.0 + 0.5 * 0.5).sqrt() / 8.0;
        for m in mags {
            assert_relative_eq!(m, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn positive_detuning_lands_above_center() {
        // e^{-iωT} with ω = 2π·m·df must appear in bin n/2 + m.
        let n = 128;
        let g = TemporalGrid::new(n, 1e-9, 1550e-9).unwrap();
        let m = 5i64;
        let omega = 2.0 * std::f64::consts::PI * m as f64 * g.df_hz();
        let samples: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, -omega * g.time_at_s(j)))
            .collect();
        let f = Field::new(g, Representation::Time, samples).unwrap();
        let s = f.to_frequency().unwrap();
        let peak = s
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, (n as i64 / 2 + m) as usize);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = TemporalGrid::new(256, 5e-9, 1550e-9).unwrap();
        let samples: Vec<Complex64> = (0..256)
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos()))
            .collect();
        let f = Field::new(g, Representation::Time, samples.clone()).unwrap();
        let back = f.to_frequency().unwrap().to_time().unwrap();
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn transform_rejects_same_direction() {
        let g = TemporalGrid::new(4, 1e-9, 1550e-9).unwrap();
        let f = Field::zeros(g, Representation::Time);
        assert!(matches!(f.to_time(), Err(Error::RepresentationMismatch(_))));
    }

    #[test]
    fn gaussian_time_bandwidth_product() {
        // 15 ps intensity-FWHM Gaussian -> spectral FWHM ≈ 0.441/15ps ≈ 29.4 GHz.
        let n = 1 << 14;
        let g = TemporalGrid::new(n, 500e-12, 1550e-9).unwrap();
        let fwhm_t = 15e-12;
        let samples: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = g.time_at_s(j);
                Complex64::new((-2.0 * (2.0f64).ln() * (t / fwhm_t).powi(2)).exp(), 0.0)
            })
            .collect();
        let f = Field::new(g, Representation::Time, samples).unwrap();
        let s = f.to_frequency().unwrap();
        let p: Vec<f64> = s.samples().iter().map(|v| v.norm_sqr()).collect();
        let fwhm_f = fwhm_of_peak(&p) * g.df_hz();
        let expected = 2.0 * (2.0f64).ln() / std::f64::consts::PI / fwhm_t;
        assert_relative_eq!(fwhm_f, expected, max_relative = 1e-3);
        assert_relative_eq!(fwhm_f, 29.4e9, max_relative = 2e-3);
    }

    /// Intensity FWHM in bins, by linear interpolation at half max.
    fn fwhm_of_peak(p: &[f64]) -> f64 {
        let (imax, &pmax) =
            p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let half = pmax / 2.0;
        let mut lo = imax as f64;
        for i in (0..imax).rev() {
            if p[i] < half {
                lo = i as f64 + (half - p[i]) / (p[i + 1] - p[i]);
                break;
            }
        }
        let mut hi = imax as f64;
        for i in imax..p.len() - 1 {
            if p[i + 1] < half {
                hi = i as f64 + (p[i] - half) / (p[i] - p[i + 1]);
                break;
            }
        }
        hi - lo
    }

    #[test]
    fn energy_of_cw_and_zero() {
        let g = TemporalGrid::new(1 << 10, 44.5e-9, 1550e-9).unwrap();
        let f = Field::cw(g, 1.0);
        assert_relative_eq!(f.energy_j(), 44.5e-9, max_relative = 1e-12);
        assert_eq!(Field::zeros(g, Representation::Time).energy_j(), 0.0);
    }

    #[test]
    fn dbm_conversions() {
        assert_relative_eq!(dbm_to_watts(10.2), 10.471e-3, max_relative = 1e-4);
        assert_relative_eq!(dbm_to_watts(0.0), 1.0e-3, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0, max_relative = 1e-12);
        assert!(watts_to_dbm(0.0).is_err());
        assert!(watts_to_dbm(-1.0).is_err());
        assert_relative_eq!(watts_to_dbm(1.0e-3).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let g = TemporalGrid::new(64, 1e-9, 1550e-9).unwrap();
        let mut f = Field::zeros(g, Representation::Frequency);
        f.samples[20] = Complex64::from_polar(3.0, 0.7);
        f.samples[40] = Complex64::from_polar(0.5, -1.2);
        let dir = std::env::temp_dir().join("fwmkit_spectrum_rt.csv");
        save_spectrum_csv(&f, &dir).unwrap();
        let back = load_spectrum_csv(&dir).unwrap();
        assert_eq!(back.grid(), f.grid());
        for (a, b) in f.samples().iter().zip(back.samples()) {
            assert!((a - b).norm() < 1e-8 * (1.0 + a.norm()));
        }
        std::fs::remove_file(dir).ok();
    }
}
