//! Synthetic single-photon-detector tag streams for a pulsed correlated-pair
//! source, plus the closed-form CAR oracle the coincidence pipeline is
//! validated against.
//!
//! Sampling scheme (fixed for reproducibility): per pulse the pair count is
//! Poisson(μ) and each pair is detected independently with efficiencies
//! `η_s`, `η_i`. Rather than looping over every pulse, the generator draws
//! the three aggregate Poisson counts — both-detected, signal-only,
//! idler-only events over all pulses — and assigns each event a uniformly
//! random pulse index; splitting a Poisson process by independent marks
//! makes this exactly equivalent. Dark counts are homogeneous Poisson
//! processes per channel. All randomness comes from a ChaCha8 stream seeded
//! with the caller's 64-bit seed, drawn in a fixed order, so identical seeds
//! give identical streams on any platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::coincidence::TagStream;
use crate::error::{Error, Result};

/// Pulsed pair-source and detector model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub rep_rate_hz: f64,
    /// Mean photon pairs per pump pulse (Poisson).
    pub mean_pairs_per_pulse: f64,
    pub eta_signal: f64,
    pub eta_idler: f64,
    pub dark_rate_signal_cps: f64,
    pub dark_rate_idler_cps: f64,
    /// Gaussian timing jitter per detection, ps (1σ).
    pub jitter_sigma_ps: f64,
    /// Extra idler path delay, ps.
    pub delay_offset_ps: i64,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self {
            rep_rate_hz: 22.47e6,
            mean_pairs_per_pulse: 0.1,
            eta_signal: 0.1,
            eta_idler: 0.1,
            dark_rate_signal_cps: 0.0,
            dark_rate_idler_cps: 0.0,
            jitter_sigma_ps: 300.0,
            delay_offset_ps: 33_500,
        }
    }
}

impl SourceModel {
    fn validate(&self) -> Result<()> {
        let ok = self.rep_rate_hz > 0.0
            && self.mean_pairs_per_pulse >= 0.0
            && (0.0..=1.0).contains(&self.eta_signal)
            && (0.0..=1.0).contains(&self.eta_idler)
            && self.dark_rate_signal_cps >= 0.0
            && self.dark_rate_idler_cps >= 0.0
            && self.jitter_sigma_ps >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::NonPositive {
                context: "source model parameter",
                value: f64::NAN,
            })
        }
    }

    /// Expected singles rates including darks, counts/s.
    pub fn expected_rate_signal_cps(&self) -> f64 {
        self.rep_rate_hz * self.mean_pairs_per_pulse * self.eta_signal
            + self.dark_rate_signal_cps
    }

    pub fn expected_rate_idler_cps(&self) -> f64 {
        self.rep_rate_hz * self.mean_pairs_per_pulse * self.eta_idler + self.dark_rate_idler_cps
    }
}

/// Generate signal and idler tag streams over `duration_s`, deterministic
/// for a given seed. Tags jittered outside `[0, duration]` are dropped.
pub fn generate_tags(
    model: &SourceModel,
    duration_s: f64,
    seed: u64,
) -> Result<(TagStream, TagStream)> {
    model.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::NonPositiveDuration(duration_s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pulses = (duration_s * model.rep_rate_hz).floor() as u64;
    let period_ps = 1e12 / model.rep_rate_hz;
    let duration_ps = (duration_s * 1e12) as i64;

    let mu = model.mean_pairs_per_pulse;
    let (es, ei) = (model.eta_signal, model.eta_idler);
    let mean_both = n_pulses as f64 * mu * es * ei;
    let mean_s_only = n_pulses as f64 * mu * es * (1.0 - ei);
    let mean_i_only = n_pulses as f64 * mu * ei * (1.0 - es);
    let mean_dark_s = model.dark_rate_signal_cps * duration_s;
    let mean_dark_i = model.dark_rate_idler_cps * duration_s;

    // Fixed draw order: the five aggregate counts, then the event loops.
    let mut draw_count = |mean: f64| -> Result<u64> {
        if mean <= 0.0 {
            return Ok(0);
        }
        let poisson = Poisson::new(mean).map_err(|_| Error::NonPositive {
            context: "event count mean",
            value: mean,
        })?;
        Ok(poisson.sample(&mut rng) as u64)
    };
    let n_both = draw_count(mean_both)?;
    let n_s_only = draw_count(mean_s_only)?;
    let n_i_only = draw_count(mean_i_only)?;
    let n_dark_s = draw_count(mean_dark_s)?;
    let n_dark_i = draw_count(mean_dark_i)?;

    let jitter = if model.jitter_sigma_ps > 0.0 {
        Some(Normal::new(0.0, model.jitter_sigma_ps).expect("valid sigma"))
    } else {
        None
    };

    let mut signal: Vec<i64> = Vec::with_capacity((n_both + n_s_only + n_dark_s) as usize);
    let mut idler: Vec<i64> = Vec::with_capacity((n_both + n_i_only + n_dark_i) as usize);

    let push_tag = |tags: &mut Vec<i64>, t_ps: f64| {
        let t = t_ps.round() as i64;
        if t >= 0 && t <= duration_ps {
            tags.push(t);
        }
    };
    let pulse_time =
        |rng: &mut ChaCha8Rng| -> f64 { rng.random_range(0..n_pulses) as f64 * period_ps };
    let jitter_ps = |rng: &mut ChaCha8Rng| -> f64 {
        jitter.map(|d| d.sample(rng)).unwrap_or(0.0)
    };

    for _ in 0..n_both {
        let t = pulse_time(&mut rng);
        let js = jitter_ps(&mut rng);
        let ji = jitter_ps(&mut rng);
        push_tag(&mut signal, t + js);
        push_tag(&mut idler, t + model.delay_offset_ps as f64 + ji);
    }
    for _ in 0..n_s_only {
        let t = pulse_time(&mut rng);
        let j = jitter_ps(&mut rng);
        push_tag(&mut signal, t + j);
    }
    for _ in 0..n_i_only {
        let t = pulse_time(&mut rng);
        let j = jitter_ps(&mut rng);
        push_tag(&mut idler, t + model.delay_offset_ps as f64 + j);
    }
    for _ in 0..n_dark_s {
        let t = rng.random_range(0..=duration_ps);
        signal.push(t);
    }
    for _ in 0..n_dark_i {
        let t = rng.random_range(0..=duration_ps);
        idler.push(t);
    }

    signal.sort_unstable();
    idler.sort_unstable();
    Ok((
        TagStream::new(0, signal, duration_s)?,
        TagStream::new(1, idler, duration_s)?,
    ))
}

/// Closed-form CAR for the model, as the peak-window estimator measures it:
///
/// `CAR = 1 + μ·η_s·η_i / ((μ·η_s + d_s)(μ·η_i + d_i))`
///
/// with `d_x = dark_rate_x / rep_rate` the dark probability per pulse
/// window. Valid in the small-μ regime with a peak window wide enough to
/// capture the jitter spread (≳ 6σ) yet well below the pulse period; the
/// jitter capture fraction cancels between the matched coincidence and
/// accidental windows, which is why `peak_window_ps` does not enter the
/// value. Dark contributions are folded per pulse window, an approximation
/// exact at zero darks.
pub fn analytic_car(model: &SourceModel, peak_window_ps: i64) -> Result<f64> {
    model.validate()?;
    let _ = peak_window_ps;
    let mu = model.mean_pairs_per_pulse;
    let d_s = model.dark_rate_signal_cps / model.rep_rate_hz;
    let d_i = model.dark_rate_idler_cps / model.rep_rate_hz;
    if mu <= 0.0 && d_s <= 0.0 && d_i <= 0.0 {
        return Err(Error::NoDetectableEvents);
    }
    let p_s = mu * model.eta_signal + d_s;
    let p_i = mu * model.eta_idler + d_i;
    if p_s <= 0.0 || p_i <= 0.0 {
        return Err(Error::NoDetectableEvents);
    }
    Ok(1.0 + mu * model.eta_signal * model.eta_idler / (p_s * p_i))
}
