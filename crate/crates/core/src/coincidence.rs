//! Time-tag coincidence analysis: cross-correlograms from two detector
//! channels, peak-train location, and the coincidence-to-accidental ratio
//! with Poisson uncertainties.
//!
//! For a pulsed pair source the accidentals are not flat in delay — they
//! repeat at multiples of the pulse period — so the accidental level is
//! estimated from windows centred on the neighbouring period-spaced peaks,
//! not from off-peak regions.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::peaks;

/// One detector channel's time tags, integer picoseconds, non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TagStream {
    pub channel: u32,
    pub timestamps_ps: Vec<i64>,
    pub duration_s: f64,
}

impl TagStream {
    pub fn new(channel: u32, timestamps_ps: Vec<i64>, duration_s: f64) -> Result<Self> {
        if !(duration_s > 0.0) {
            return Err(Error::NonPositiveDuration(duration_s));
        }
        for (i, w) in timestamps_ps.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(Error::UnsortedTimestamps { channel, row: i + 1 });
            }
        }
        Ok(Self { channel, timestamps_ps, duration_s })
    }

    pub fn rate_cps(&self) -> f64 {
        self.timestamps_ps.len() as f64 / self.duration_s
    }
}

/// Histogram of idler-minus-signal arrival-time differences.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlogram {
    pub bin_width_ps: i64,
    pub min_delay_ps: i64,
    pub max_delay_ps: i64,
    pub counts: Vec<u64>,
}

impl Correlogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_center_ps(&self, bin: usize) -> f64 {
        self.min_delay_ps as f64 + (bin as f64 + 0.5) * self.bin_width_ps as f64
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histogram `t_idler - t_signal` over `[range.0, range.1)` with the given
/// bin width. The range must be a positive whole number of bins. Pairs are
/// enumerated with a two-pointer sweep, so the cost is linear in the tag
/// counts plus the number of in-range pairs.
pub fn correlogram(
    signal: &TagStream,
    idler: &TagStream,
    bin_width_ps: i64,
    range_ps: (i64, i64),
) -> Result<Correlogram> {
    let (min_delay, max_delay) = range_ps;
    if bin_width_ps <= 0 || max_delay <= min_delay || (max_delay - min_delay) % bin_width_ps != 0
    {
        return Err(Error::BadHistogramRange {
            min_ps: min_delay,
            max_ps: max_delay,
            bin_ps: bin_width_ps,
        });
    }
    let n_bins = ((max_delay - min_delay) / bin_width_ps) as usize;
    let mut counts = vec![0u64; n_bins];

    let idler_tags = &idler.timestamps_ps;
    let mut lo = 0usize;
    let mut hi = 0usize;
    for &ts in &signal.timestamps_ps {
        while lo < idler_tags.len() && idler_tags[lo] - ts < min_delay {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < idler_tags.len() && idler_tags[hi] - ts < max_delay {
            hi += 1;
        }
        for &ti in &idler_tags[lo..hi] {
            let bin = ((ti - ts - min_delay) / bin_width_ps) as usize;
            counts[bin] += 1;
        }
    }
    Ok(Correlogram { bin_width_ps, min_delay_ps: min_delay, max_delay_ps: max_delay, counts })
}

/// Detected train of correlogram peaks.
#[derive(Debug, Clone, Serialize)]
pub struct PeakTrain {
    /// Centroid-refined position of the first peak, ps.
    pub offset_ps: f64,
    /// Median spacing of consecutive peaks; `None` with fewer than 2 peaks.
    pub period_ps: Option<f64>,
    pub peak_indices: Vec<usize>,
    pub peak_positions_ps: Vec<f64>,
}

/// Locate the peak train: local maxima with at least `min_prominence`
/// counts of prominence, positions refined by a background-subtracted
/// centroid so broadened peaks resolve to better than a bin. Returns `None`
/// when no peak clears the prominence threshold.
pub fn find_peak_train(hist: &Correlogram, min_prominence: f64) -> Option<PeakTrain> {
    let values: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let found = peaks::find_peaks(&values, min_prominence);
    if found.is_empty() {
        return None;
    }
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let baseline = sorted[sorted.len() / 2];

    // Centroid window: out to where counts fall below a quarter of the
    // peak's height above baseline, capped at 40 bins per side.
    let refine = |index: usize, height: f64| -> f64 {
        let threshold = baseline + 0.25 * (height - baseline);
        let cap = 40usize;
        let mut lo = index;
        while lo > 0 && index - lo < cap && values[lo - 1] > threshold {
            lo -= 1;
        }
        let mut hi = index;
        while hi + 1 < values.len() && hi - index < cap && values[hi + 1] > threshold {
            hi += 1;
        }
        let mut wsum = 0.0;
        let mut psum = 0.0;
        for k in lo..=hi {
            let w = (values[k] - baseline).max(0.0);
            wsum += w;
            psum += w * hist.bin_center_ps(k);
        }
        if wsum > 0.0 {
            psum / wsum
        } else {
            hist.bin_center_ps(index)
        }
    };

    let peak_indices: Vec<usize> = found.iter().map(|p| p.index).collect();
    let peak_positions_ps: Vec<f64> =
        found.iter().map(|p| refine(p.index, p.value)).collect();
    let period_ps = if peak_positions_ps.len() >= 2 {
        let mut gaps: Vec<f64> =
            peak_positions_ps.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        Some(gaps[gaps.len() / 2])
    } else {
        None
    };
    Some(PeakTrain {
        offset_ps: peak_positions_ps[0],
        period_ps,
        peak_indices,
        peak_positions_ps,
    })
}

/// Coincidence statistics for one signal/idler channel pair.
#[derive(Debug, Clone, Serialize)]
pub struct CarReport {
    pub coincidence_counts: u64,
    pub mean_accidental_counts: f64,
    pub car: f64,
    pub car_sigma: f64,
    /// Singles rates, counts/s.
    pub r_s_cps: f64,
    pub r_i_cps: f64,
    /// Coincidence rate `coincidence_counts / duration`, counts/s.
    pub r_c_cps: f64,
    pub peak_offset_ps: f64,
    pub peak_period_ps: f64,
    /// Set when every accidental window was empty; `car` is then infinite.
    pub accidentals_zero: bool,
    pub accidental_window_counts: Vec<u64>,
}

/// CAR with the peak train located automatically.
///
/// Detection runs on a box-smoothed copy of the histogram (box width =
/// the peak window) so a peak competes with counting noise through its
/// window-integrated counts, and nearby candidates within two peak windows
/// merge into one peak; this keeps Poisson ripples on a broadened peak from
/// registering as separate train members. Positions are refined on the raw
/// histogram by background-subtracted centroid.
pub fn compute_car(
    hist: &Correlogram,
    signal: &TagStream,
    idler: &TagStream,
    peak_window_ps: i64,
    n_accidental_windows: usize,
) -> Result<CarReport> {
    let train =
        detect_peak_train_windowed(hist, peak_window_ps).ok_or(Error::NoPeakTrain)?;
    let period = train.period_ps.ok_or(Error::NoPeakPeriod)?;
    // Zero-order peak = the tallest of the train. On the default unsigned
    // range that is also the first; on a signed range the accidental train
    // extends to negative delays ahead of the coincidence peak.
    let tallest = train
        .peak_indices
        .iter()
        .enumerate()
        .max_by_key(|(_, &bin)| hist.counts[bin])
        .map(|(i, _)| train.peak_positions_ps[i])
        .unwrap_or(train.offset_ps);
    compute_car_at(hist, signal, idler, tallest, period, peak_window_ps, n_accidental_windows)
}

/// Peak-train detection tuned for pulsed-source correlograms; see
/// [`compute_car`] for the scheme. Returns `None` when nothing clears the
/// noise-scaled prominence threshold.
pub fn detect_peak_train_windowed(hist: &Correlogram, peak_window_ps: i64) -> Option<PeakTrain> {
    let n = hist.n_bins();
    if n == 0 {
        return None;
    }
    let raw: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let box_bins = ((peak_window_ps / hist.bin_width_ps).max(1) as usize).min(n);

    // Rolling box sum of width `box_bins` (window-integrated counts).
    let mut smooth = vec![0.0f64; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc += raw[i];
        if i >= box_bins {
            acc -= raw[i - box_bins];
        }
        smooth[i] = acc;
    }

    let mut sorted = smooth.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let prominence = (8.0 * (median + 1.0).sqrt()).max(5.0);

    let candidates = peaks::find_peaks(&smooth, prominence);
    if candidates.is_empty() {
        return None;
    }
    // Greedy clustering: tallest first, enforce two peak windows of
    // separation.
    let min_sep_bins = (2 * peak_window_ps / hist.bin_width_ps).max(1);
    let mut by_height: Vec<&peaks::Peak> = candidates.iter().collect();
    by_height.sort_by(|a, b| b.value.total_cmp(&a.value));
    let mut accepted: Vec<usize> = Vec::new();
    for cand in by_height {
        if accepted
            .iter()
            .all(|&idx| (idx as i64 - cand.index as i64).abs() >= min_sep_bins)
        {
            accepted.push(cand.index);
        }
    }
    accepted.sort_unstable();

    // The box sum peaks half a window right of the underlying peak; refine
    // on the raw histogram with a centroid over ±peak_window.
    let raw_baseline = {
        let mut s = raw.clone();
        s.sort_by(f64::total_cmp);
        s[n / 2]
    };
    let half = box_bins as f64 / 2.0;
    let refine = |smooth_idx: usize| -> f64 {
        let center = (smooth_idx as f64 - half).round().max(0.0) as usize;
        let lo = center.saturating_sub(box_bins);
        let hi = (center + box_bins).min(n - 1);
        let mut wsum = 0.0;
        let mut psum = 0.0;
        for k in lo..=hi {
            let w = (raw[k] - raw_baseline).max(0.0);
            wsum += w;
            psum += w * hist.bin_center_ps(k);
        }
        if wsum > 0.0 {
            psum / wsum
        } else {
            hist.bin_center_ps(center)
        }
    };

    let peak_positions_ps: Vec<f64> = accepted.iter().map(|&i| refine(i)).collect();
    let peak_indices: Vec<usize> = peak_positions_ps
        .iter()
        .map(|&p| {
            (((p - hist.min_delay_ps as f64) / hist.bin_width_ps as f64 - 0.5)
                .round()
                .max(0.0) as usize)
                .min(n - 1)
        })
        .collect();
    let period_ps = if peak_positions_ps.len() >= 2 {
        let mut gaps: Vec<f64> =
            peak_positions_ps.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        Some(gaps[gaps.len() / 2])
    } else {
        None
    };
    Some(PeakTrain {
        offset_ps: peak_positions_ps[0],
        period_ps,
        peak_indices,
        peak_positions_ps,
    })
}

/// CAR with explicit zero-order peak position and period — the estimator
/// behind [`compute_car`], also usable on featureless control data.
///
/// Coincidences are the counts within `±peak_window_ps` of `offset_ps`;
/// the accidental level is the mean over equal windows at the next
/// `n_accidental_windows` period multiples. `car_sigma` propagates Poisson
/// errors: `car·sqrt(1/C + 1/ΣA)`.
pub fn compute_car_at(
    hist: &Correlogram,
    signal: &TagStream,
    idler: &TagStream,
    offset_ps: f64,
    period_ps: f64,
    peak_window_ps: i64,
    n_accidental_windows: usize,
) -> Result<CarReport> {
    if n_accidental_windows < 2 {
        return Err(Error::NonPositive {
            context: "accidental window count (need >= 2)",
            value: n_accidental_windows as f64,
        });
    }
    if (peak_window_ps as f64) >= period_ps / 2.0 {
        return Err(Error::PeakWindowTooWide { window_ps: peak_window_ps, period_ps });
    }

    let window_sum = |center: f64| -> Result<u64> {
        let lo = center - peak_window_ps as f64;
        let hi = center + peak_window_ps as f64;
        if lo < hist.min_delay_ps as f64 || hi > hist.max_delay_ps as f64 {
            return Err(Error::AccidentalWindowOutOfRange { index: 0, position_ps: center });
        }
        let mut acc = 0u64;
        // first bin whose centre can reach lo
        let first = ((lo - hist.min_delay_ps as f64) / hist.bin_width_ps as f64 - 0.5)
            .ceil()
            .max(0.0) as usize;
        for bin in first..hist.n_bins() {
            let c = hist.bin_center_ps(bin);
            if c > hi {
                break;
            }
            if c >= lo {
                acc += hist.counts[bin];
            }
        }
        Ok(acc)
    };

    let coincidence_counts = window_sum(offset_ps)?;
    let mut accidental_window_counts = Vec::with_capacity(n_accidental_windows);
    for k in 1..=n_accidental_windows {
        let center = offset_ps + k as f64 * period_ps;
        let counts = window_sum(center).map_err(|_| Error::AccidentalWindowOutOfRange {
            index: k,
            position_ps: center,
        })?;
        accidental_window_counts.push(counts);
    }
    let total_accidentals: u64 = accidental_window_counts.iter().sum();
    let mean_accidental_counts = total_accidentals as f64 / n_accidental_windows as f64;

    let accidentals_zero = total_accidentals == 0;
    let car = if accidentals_zero {
        f64::INFINITY
    } else {
        coincidence_counts as f64 / mean_accidental_counts
    };
    let car_sigma = if accidentals_zero {
        f64::INFINITY
    } else if coincidence_counts == 0 {
        0.0
    } else {
        car * (1.0 / coincidence_counts as f64 + 1.0 / total_accidentals as f64).sqrt()
    };

    Ok(CarReport {
        coincidence_counts,
        mean_accidental_counts,
        car,
        car_sigma,
        r_s_cps: signal.rate_cps(),
        r_i_cps: idler.rate_cps(),
        r_c_cps: coincidence_counts as f64 / signal.duration_s,
        peak_offset_ps: offset_ps,
        peak_period_ps: period_ps,
        accidentals_zero,
        accidental_window_counts,
    })
}

/// Write streams as `channel,timestamp_ps` CSV (channel 0 = signal,
/// 1 = idler), with the duration in a `# duration_s=` comment.
pub fn save_tags(streams: &[TagStream], path: &Path) -> Result<()> {
    let mut out = String::new();
    if let Some(first) = streams.first() {
        writeln!(out, "# duration_s={}", first.duration_s).unwrap();
    }
    writeln!(out, "channel,timestamp_ps").unwrap();
    for stream in streams {
        for &t in &stream.timestamps_ps {
            writeln!(out, "{},{}", stream.channel, t).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Load tag streams; one stream per channel present, in channel order.
/// Per-channel sortedness is enforced, reporting the first offending row.
/// Without a duration comment the duration falls back to the latest tag.
pub fn load_tags(path: &Path) -> Result<Vec<TagStream>> {
    let content = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut duration_s: Option<f64> = None;
    let mut channels: [Vec<i64>; 2] = [Vec::new(), Vec::new()];
    let mut header_seen = false;
    let mut max_ts = 0i64;
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.trim().split_once('=') {
                if key.trim() == "duration_s" {
                    duration_s = value.trim().parse().ok();
                }
            }
            continue;
        }
        if !header_seen {
            if line != "channel,timestamp_ps" {
                return Err(Error::Parse {
                    path: pstr,
                    line: lineno + 1,
                    message: format!("expected 'channel,timestamp_ps' header, got '{line}'"),
                });
            }
            header_seen = true;
            continue;
        }
        let (ch_str, ts_str) = line.split_once(',').ok_or_else(|| Error::Parse {
            path: pstr.clone(),
            line: lineno + 1,
            message: "expected two columns".into(),
        })?;
        let ch: i64 = ch_str.trim().parse().map_err(|_| Error::Parse {
            path: pstr.clone(),
            line: lineno + 1,
            message: format!("invalid channel '{ch_str}'"),
        })?;
        let ts: i64 = ts_str.trim().parse().map_err(|_| Error::Parse {
            path: pstr.clone(),
            line: lineno + 1,
            message: format!("invalid timestamp '{ts_str}'"),
        })?;
        if ch != 0 && ch != 1 {
            return Err(Error::UnknownChannel { channel: ch, row: lineno + 1 });
        }
        let tags = &mut channels[ch as usize];
        if let Some(&last) = tags.last() {
            if ts < last {
                return Err(Error::UnsortedTimestamps { channel: ch as u32, row: lineno + 1 });
            }
        }
        tags.push(ts);
        max_ts = max_ts.max(ts);
    }
    let duration = duration_s.unwrap_or_else(|| (max_ts as f64 / 1e12).max(1e-12));
    let mut out = Vec::new();
    for (ch, tags) in channels.into_iter().enumerate() {
        if !tags.is_empty() {
            out.push(TagStream::new(ch as u32, tags, duration)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(channel: u32, tags: Vec<i64>, duration_s: f64) -> TagStream {
        TagStream::new(channel, tags, duration_s).unwrap()
    }

    #[test]
    fn shifted_copy_concentrates_in_one_bin() {
        let base: Vec<i64> = (0..1000).map(|i| i * 997_001).collect();
        let shifted: Vec<i64> = base.iter().map(|t| t + 33_500).collect();
        let s = stream(0, base, 1e-3);
        let i = stream(1, shifted, 1e-3);
        let hist = correlogram(&s, &i, 50, (0, 1_000_000)).unwrap();
        let expected_bin = (33_500 / 50) as usize;
        for (bin, &c) in hist.counts.iter().enumerate() {
            if bin == expected_bin {
                assert_eq!(c, 1000);
            } else {
                assert_eq!(c, 0, "stray counts in bin {bin}");
            }
        }
    }

    #[test]
    fn empty_idler_gives_all_zero_counts() {
        let s = stream(0, vec![10, 20, 30], 1e-9);
        let i = stream(1, vec![], 1e-9);
        let hist = correlogram(&s, &i, 50, (0, 1000)).unwrap();
        assert_eq!(hist.total_counts(), 0);
    }

    #[test]
    fn rejects_non_integral_range() {
        let s = stream(0, vec![1], 1e-9);
        assert!(matches!(
            correlogram(&s, &s, 50, (0, 1025)),
            Err(Error::BadHistogramRange { .. })
        ));
        assert!(correlogram(&s, &s, 50, (100, 100)).is_err());
    }

    #[test]
    fn brute_force_oracle_agrees_exactly() {
        // Deterministic scrambled tags, signed range, awkward bin width.
        let mut sig = Vec::new();
        let mut idl = Vec::new();
        let mut x = 12345u64;
        let mut step = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 33) as i64
        };
        for _ in 0..800 {
            sig.push(step() % 1_000_000);
            idl.push(step() % 1_000_000);
        }
        sig.sort_unstable();
        idl.sort_unstable();
        let s = stream(0, sig.clone(), 1e-6);
        let i = stream(1, idl.clone(), 1e-6);
        let (bw, range) = (37, (-40_034, 40_034)); // 2164 bins of width 37
        let hist = correlogram(&s, &i, bw, range).unwrap();

        let n_bins = ((range.1 - range.0) / bw) as usize;
        let mut oracle = vec![0u64; n_bins];
        for &ts in &sig {
            for &ti in &idl {
                let d = ti - ts;
                if d >= range.0 && d < range.1 {
                    oracle[((d - range.0) / bw) as usize] += 1;
                }
            }
        }
        assert_eq!(hist.counts, oracle);
        assert_eq!(hist.total_counts() as usize, oracle.iter().sum::<u64>() as usize);
    }

    #[test]
    fn swapping_streams_mirrors_the_correlogram() {
        let mut sig = vec![5, 40, 41, 300, 1200, 1201];
        let mut idl = vec![17, 41, 290, 950, 1200];
        sig.sort_unstable();
        idl.sort_unstable();
        let s = stream(0, sig, 1e-9);
        let i = stream(1, idl, 1e-9);
        // Unit bins make the mirror exact: delay d of (s,i) is -d of (i,s).
        let h_si = correlogram(&s, &i, 1, (-1500, 1500)).unwrap();
        let h_is = correlogram(&i, &s, 1, (-1499, 1501)).unwrap();
        let n = h_si.counts.len();
        for k in 0..n {
            assert_eq!(h_si.counts[k], h_is.counts[n - 1 - k]);
        }
    }

    #[test]
    fn synthetic_train_is_recovered() {
        // Peaks at 33.5 + 44.5k ns over 1 us, 50 ps bins.
        let mut counts = vec![0u64; 20_000];
        let mut k = 0;
        loop {
            let pos_ps = 33_500.0 + 44_500.0 * k as f64;
            let bin = (pos_ps / 50.0) as usize;
            if bin >= counts.len() {
                break;
            }
            counts[bin] = 500;
            if bin > 0 {
                counts[bin - 1] = 250;
            }
            counts[bin + 1] = 250;
            k += 1;
        }
        let hist =
            Correlogram { bin_width_ps: 50, min_delay_ps: 0, max_delay_ps: 1_000_000, counts };
        let train = find_peak_train(&hist, 100.0).unwrap();
        assert!((train.offset_ps - 33_500.0).abs() <= 50.0, "offset {}", train.offset_ps);
        let period = train.period_ps.unwrap();
        assert!((period - 44_500.0).abs() <= 50.0, "period {period}");
        assert_eq!(train.peak_indices.len(), 22);
    }

    #[test]
    fn single_peak_has_no_period() {
        let mut counts = vec![0u64; 1000];
        counts[400] = 100;
        let hist =
            Correlogram { bin_width_ps: 50, min_delay_ps: 0, max_delay_ps: 50_000, counts };
        let train = find_peak_train(&hist, 10.0).unwrap();
        assert!(train.period_ps.is_none());
        assert_eq!(train.peak_indices, vec![400]);
    }

    #[test]
    fn flat_histogram_has_no_peaks() {
        let hist = Correlogram {
            bin_width_ps: 50,
            min_delay_ps: 0,
            max_delay_ps: 50_000,
            counts: vec![7u64; 1000],
        };
        assert!(find_peak_train(&hist, 5.0).is_none());
    }

    #[test]
    fn car_seventeen_with_expected_sigma() {
        // C = 1700 against four accidental windows of 100 -> 17 ± ~0.95.
        let mut counts = vec![0u64; 20_000];
        let peak_bin = |pos_ps: f64| (pos_ps / 50.0) as usize;
        counts[peak_bin(33_500.0)] = 1700;
        for k in 1..=4 {
            counts[peak_bin(33_500.0 + 44_500.0 * k as f64)] = 100;
        }
        let hist =
            Correlogram { bin_width_ps: 50, min_delay_ps: 0, max_delay_ps: 1_000_000, counts };
        let s = stream(0, (0..1000).map(|i| i * 1000).collect(), 1e-3);
        let i = stream(1, (0..1000).map(|i| i * 1000 + 33_500).collect(), 1e-3);
        let report = compute_car(&hist, &s, &i, 2000, 4).unwrap();
        assert_eq!(report.coincidence_counts, 1700);
        assert_eq!(report.mean_accidental_counts, 100.0);
        assert!((report.car - 17.0).abs() < 1e-12);
        assert!((report.car_sigma - 0.95).abs() < 0.05, "sigma {}", report.car_sigma);
    }

    #[test]
    fn car_is_invariant_under_global_time_shift() {
        let sig: Vec<i64> = (0..5000).map(|i| i * 200_129).collect();
        let idl: Vec<i64> = sig.iter().map(|t| t + 33_500).collect();
        let shift = 7_777_777i64;
        let report = |offset: i64| {
            let s = stream(0, sig.iter().map(|t| t + offset).collect(), 1.0);
            let i = stream(1, idl.iter().map(|t| t + offset).collect(), 1.0);
            let hist = correlogram(&s, &i, 50, (0, 1_000_000)).unwrap();
            compute_car_at(&hist, &s, &i, 33_500.0, 200_129.0, 2000, 4).unwrap()
        };
        let a = report(0);
        let b = report(shift);
        assert_eq!(a.coincidence_counts, b.coincidence_counts);
        assert_eq!(a.car, b.car);
    }

    #[test]
    fn zero_accidentals_reports_infinite_car_with_flag() {
        let mut counts = vec![0u64; 20_000];
        counts[(33_500 / 50) as usize] = 1000;
        let hist =
            Correlogram { bin_width_ps: 50, min_delay_ps: 0, max_delay_ps: 1_000_000, counts };
        let s = stream(0, vec![0], 1e-3);
        let i = stream(1, vec![33_500], 1e-3);
        let r =
            compute_car_at(&hist, &s, &i, 33_500.0, 44_500.0, 100, 4).unwrap();
        assert!(r.accidentals_zero);
        assert!(r.car.is_infinite());
    }

    #[test]
    fn peak_window_must_fit_inside_period() {
        let hist = Correlogram {
            bin_width_ps: 50,
            min_delay_ps: 0,
            max_delay_ps: 1_000_000,
            counts: vec![0u64; 20_000],
        };
        let s = stream(0, vec![0], 1e-3);
        assert!(matches!(
            compute_car_at(&hist, &s, &s, 33_500.0, 44_500.0, 23_000, 4),
            Err(Error::PeakWindowTooWide { .. })
        ));
    }

    #[test]
    fn tag_csv_round_trip_and_errors() {
        let s = stream(0, vec![100, 200, 350], 2.5);
        let i = stream(1, vec![50, 400], 2.5);
        let path = std::env::temp_dir().join("fwmkit_tags_rt.csv");
        save_tags(&[s.clone(), i.clone()], &path).unwrap();
        let loaded = load_tags(&path).unwrap();
        assert_eq!(loaded, vec![s, i]);

        std::fs::write(&path, "channel,timestamp_ps\n0,100\n0,50\n").unwrap();
        match load_tags(&path) {
            Err(Error::UnsortedTimestamps { channel: 0, row }) => assert_eq!(row, 3),
            other => panic!("expected unsorted error, got {other:?}"),
        }
        std::fs::write(&path, "channel,timestamp_ps\n2,100\n").unwrap();
        assert!(matches!(load_tags(&path), Err(Error::UnknownChannel { channel: 2, .. })));
        std::fs::write(&path, "channel,timestamp_ps\n").unwrap();
        assert!(load_tags(&path).unwrap().is_empty());
        std::fs::remove_file(path).ok();
    }
}
