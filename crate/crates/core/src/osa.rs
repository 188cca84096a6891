//! Optical-spectrum-analyzer traces: CSV persistence, finite resolution
//! bandwidth emulation, and trace-against-trace comparison.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::peaks;
use crate::signal::{dbm_to_watts, Field, Representation, SPEED_OF_LIGHT};

/// Lowest power a trace will report; keeps every trace sample finite even
/// where the underlying spectrum is numerically zero.
pub const TRACE_FLOOR_DBM: f64 = -200.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub wavelength_nm: f64,
    pub power_dbm: f64,
}

/// Wavelength-vs-power spectrum as an OSA records it. Wavelengths are
/// strictly increasing and powers finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub points: Vec<TracePoint>,
    pub rbw_hz: Option<f64>,
}

impl Trace {
    pub fn new(points: Vec<TracePoint>, rbw_hz: Option<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyTrace);
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].wavelength_nm > w[0].wavelength_nm) {
                return Err(Error::NonMonotoneWavelengths { row: i + 2 });
            }
        }
        if points.iter().any(|p| !p.power_dbm.is_finite() || !p.wavelength_nm.is_finite()) {
            return Err(Error::EmptyTrace);
        }
        Ok(Self { points, rbw_hz })
    }

    pub fn wavelength_bounds_nm(&self) -> (f64, f64) {
        (self.points[0].wavelength_nm, self.points[self.points.len() - 1].wavelength_nm)
    }

    /// Linear interpolation in the dB domain at `wavelength_nm`; clamps to
    /// the end values outside the trace.
    pub fn sample_dbm(&self, wavelength_nm: f64) -> f64 {
        let pts = &self.points;
        if wavelength_nm <= pts[0].wavelength_nm {
            return pts[0].power_dbm;
        }
        if wavelength_nm >= pts[pts.len() - 1].wavelength_nm {
            return pts[pts.len() - 1].power_dbm;
        }
        let hi = pts.partition_point(|p| p.wavelength_nm < wavelength_nm);
        let (a, b) = (&pts[hi - 1], &pts[hi]);
        let t = (wavelength_nm - a.wavelength_nm) / (b.wavelength_nm - a.wavelength_nm);
        a.power_dbm + t * (b.power_dbm - a.power_dbm)
    }
}

/// Per-peak match between two traces.
#[derive(Debug, Clone, Serialize)]
pub struct PeakMatch {
    pub wavelength_a_nm: f64,
    pub wavelength_b_nm: f64,
    pub frequency_offset_hz: f64,
    pub power_delta_db: f64,
    /// True when the nearest counterpart lies within the matching window.
    pub matched: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub rms_db: f64,
    pub samples_compared: usize,
    pub peaks: Vec<PeakMatch>,
}

/// Save a trace as `wavelength_nm,power_dbm` CSV with six decimal digits;
/// RBW metadata goes into a `# rbw_ghz=` comment.
pub fn save_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut out = String::new();
    if let Some(rbw) = trace.rbw_hz {
        writeln!(out, "# rbw_ghz={}", rbw / 1e9).unwrap();
    }
    writeln!(out, "wavelength_nm,power_dbm").unwrap();
    for p in &trace.points {
        writeln!(out, "{:.6},{:.6}", p.wavelength_nm, p.power_dbm).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let content = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut rbw_hz = None;
    let mut points = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.trim().split_once('=') {
                if key.trim() == "rbw_ghz" {
                    rbw_hz = value.trim().parse::<f64>().ok().map(|g| g * 1e9);
                }
            }
            continue;
        }
        if !header_seen {
            if line != "wavelength_nm,power_dbm" {
                return Err(Error::Parse {
                    path: pstr,
                    line: lineno + 1,
                    message: format!("expected 'wavelength_nm,power_dbm' header, got '{line}'"),
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
        let wl = field("wavelength")?;
        let p = field("power")?;
        if let Some(last) = points.last() {
            let last: &TracePoint = last;
            if wl <= last.wavelength_nm {
                return Err(Error::NonMonotoneWavelengths { row: lineno + 1 });
            }
        }
        points.push(TracePoint { wavelength_nm: wl, power_dbm: p });
    }
    Trace::new(points, rbw_hz)
}

/// Emulate a finite-RBW OSA sweep of a frequency-domain field.
///
/// Per-bin linear powers are convolved with a unit-sum Gaussian of FWHM
/// `rbw_hz` (identity when the RBW is below one bin), so the integrated
/// linear power is preserved exactly. The trace samples the smoothed powers
/// at grid-bin wavelengths within `range_nm`, decimated to roughly four
/// samples per RBW. Powers below [`TRACE_FLOOR_DBM`] clamp to the floor.
pub fn emulate_osa(spectrum: &Field, rbw_hz: f64, range_nm: (f64, f64)) -> Result<Trace> {
    if spectrum.representation() != Representation::Frequency {
        return Err(Error::RepresentationMismatch(spectrum.representation()));
    }
    if !(rbw_hz > 0.0) {
        return Err(Error::NonPositive { context: "resolution bandwidth", value: rbw_hz });
    }
    let grid = spectrum.grid();
    let (lo_nm, hi_nm) = (range_nm.0.min(range_nm.1), range_nm.0.max(range_nm.1));
    let f_lo = SPEED_OF_LIGHT / (hi_nm * 1e-9);
    let f_hi = SPEED_OF_LIGHT / (lo_nm * 1e-9);
    let (g_lo, g_hi) = grid.frequency_bounds_hz();
    if f_lo < g_lo || f_hi > g_hi {
        return Err(Error::FrequencyOutsideGrid {
            frequency_hz: if f_lo < g_lo { f_lo } else { f_hi },
            lo: g_lo,
            hi: g_hi,
        });
    }

    let powers = spectrum.spectral_powers_w()?;
    let df = grid.df_hz();
    let smoothed = if rbw_hz < df {
        powers
    } else {
        let sigma_bins = rbw_hz / (2.0 * (2.0 * (2.0f64).ln()).sqrt()) / df;
        let half = (4.0 * sigma_bins).ceil() as usize;
        let mut kernel: Vec<f64> = (0..=2 * half)
            .map(|i| {
                let x = i as f64 - half as f64;
                (-x * x / (2.0 * sigma_bins * sigma_bins)).exp()
            })
            .collect();
        let norm: f64 = kernel.iter().sum();
        for k in &mut kernel {
            *k /= norm;
        }
        let n = powers.len();
        let mut out = vec![0.0f64; n];
        for (i, &p) in powers.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let start = i.saturating_sub(half);
            let end = (i + half).min(n - 1);
            for j in start..=end {
                out[j] += p * kernel[j + half - i];
            }
        }
        out
    };

    let stride = ((rbw_hz / (4.0 * df)).floor() as usize).max(1);
    let floor_w = dbm_to_watts(TRACE_FLOOR_DBM);
    let mut pts: Vec<TracePoint> = Vec::new();
    let mut k = 0usize;
    while k < smoothed.len() {
        let f = grid.frequency_at_hz(k);
        if f >= f_lo && f <= f_hi {
            let p = smoothed[k].max(floor_w);
            pts.push(TracePoint {
                wavelength_nm: SPEED_OF_LIGHT / f * 1e9,
                power_dbm: 10.0 * (p / 1e-3).log10(),
            });
        }
        k += stride;
    }
    pts.reverse(); // ascending frequency -> descending wavelength
    Trace::new(pts, Some(rbw_hz))
}

/// Compare two traces over a wavelength band.
///
/// Both traces are resampled onto a common uniform axis (linear
/// interpolation in dB); samples where either trace sits below `floor_dbm`
/// are excluded from the RMS. Peaks of `a` are matched to their nearest
/// peak in `b`, with `matched` set when the counterpart lies within 10 GHz.
pub fn compare_traces(
    a: &Trace,
    b: &Trace,
    band_nm: (f64, f64),
    floor_dbm: f64,
) -> Result<ComparisonReport> {
    const MATCH_WINDOW_HZ: f64 = 10e9;
    const PEAK_PROMINENCE_DB: f64 = 6.0;

    let (a_lo, a_hi) = a.wavelength_bounds_nm();
    let (b_lo, b_hi) = b.wavelength_bounds_nm();
    let lo = band_nm.0.min(band_nm.1).max(a_lo).max(b_lo);
    let hi = band_nm.0.max(band_nm.1).min(a_hi).min(b_hi);
    if !(hi > lo) {
        return Err(Error::EmptyOverlap);
    }

    let n = a.points.len().max(b.points.len()).max(2);
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        let wl = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let pa = a.sample_dbm(wl);
        let pb = b.sample_dbm(wl);
        if pa < floor_dbm || pb < floor_dbm {
            continue;
        }
        sum_sq += (pa - pb) * (pa - pb);
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyOverlap);
    }
    let rms_db = (sum_sq / count as f64).sqrt();

    let peaks_of = |t: &Trace| -> Vec<(f64, f64)> {
        let vals: Vec<f64> = t.points.iter().map(|p| p.power_dbm).collect();
        peaks::find_peaks(&vals, PEAK_PROMINENCE_DB)
            .into_iter()
            .filter(|p| {
                let wl = t.points[p.index].wavelength_nm;
                wl >= lo && wl <= hi && p.value >= floor_dbm
            })
            .map(|p| {
                let (delta, value) = peaks::refine_parabolic(&vals, p.index);
                let wl_step = if p.index + 1 < t.points.len() {
                    t.points[p.index + 1].wavelength_nm - t.points[p.index].wavelength_nm
                } else {
                    0.0
                };
                (t.points[p.index].wavelength_nm + delta * wl_step, value)
            })
            .collect()
    };
    let pa = peaks_of(a);
    let pb = peaks_of(b);

    let mut matches = Vec::new();
    for &(wl_a, db_a) in &pa {
        let f_a = SPEED_OF_LIGHT / (wl_a * 1e-9);
        if let Some(&(wl_b, db_b)) = pb.iter().min_by(|x, y| {
            (x.0 - wl_a).abs().total_cmp(&(y.0 - wl_a).abs())
        }) {
            let f_b = SPEED_OF_LIGHT / (wl_b * 1e-9);
            matches.push(PeakMatch {
                wavelength_a_nm: wl_a,
                wavelength_b_nm: wl_b,
                frequency_offset_hz: f_b - f_a,
                power_delta_db: db_b - db_a,
                matched: (f_b - f_a).abs() <= MATCH_WINDOW_HZ,
            });
        }
    }

    Ok(ComparisonReport { rms_db, samples_compared: count, peaks: matches })
}
