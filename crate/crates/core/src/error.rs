//! Crate-wide error type.

use crate::signal::Representation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("n_points must be a power of two >= 2, got {0}")]
    NotPowerOfTwo(usize),

    #[error("time window must be positive, got {0} s")]
    NonPositiveWindow(f64),

    #[error("wavelength {0:e} m outside supported band (1 um, 2 um)")]
    WavelengthOutOfBand(f64),

    #[error("sample count {got} does not match grid size {expected}")]
    SampleCountMismatch { got: usize, expected: usize },

    #[error("field is already in {0:?} representation")]
    RepresentationMismatch(Representation),

    #[error("power must be positive for dBm conversion, got {0} W")]
    NonPositivePower(f64),

    #[error("quadratic fit needs at least 3 distinct wavelengths, got {0}")]
    UnderdeterminedFit(usize),

    #[error("singular system encountered while solving the quadratic fit")]
    SingularFit,

    #[error("frequency {frequency_hz:e} Hz outside grid span [{lo:e}, {hi:e}] Hz")]
    FrequencyOutsideGrid { frequency_hz: f64, lo: f64, hi: f64 },

    #[error("grid too coarse to separate comb lines: df = {df_hz:e} Hz > minimum line spacing {min_spacing_hz:e} Hz")]
    GridTooCoarse { df_hz: f64, min_spacing_hz: f64 },

    #[error("comb lines must be strictly increasing in frequency with positive powers")]
    InvalidCombSpec,

    #[error("{context} must be positive, got {value}")]
    NonPositive { context: &'static str, value: f64 },

    #[error("non-finite samples encountered at propagation step {step}")]
    NonFiniteSamples { step: usize },

    #[error("convergence probe needs at least 3 step sizes, got {0}")]
    TooFewStepSizes(usize),

    #[error("step sizes must successively halve: dz[{index}] = {got} does not halve {previous}")]
    NotHalving { index: usize, got: f64, previous: f64 },

    #[error("sideband order j must be at least 1")]
    ZeroOrder,

    #[error("need at least 2 strictly increasing comb frequencies")]
    InvalidCombFrequencies,

    #[error("search window {window_hz:e} Hz would overlap adjacent orders (line spacing {delta_f_hz:e} Hz)")]
    WindowTooWide { window_hz: f64, delta_f_hz: f64 },

    #[error("initial point {point:?} lies outside the search bounds")]
    BoundsViolation { point: Vec<f64> },

    #[error("traces do not overlap in the requested band")]
    EmptyOverlap,

    #[error("trace is empty")]
    EmptyTrace,

    #[error("wavelengths must be strictly increasing (violated at row {row})")]
    NonMonotoneWavelengths { row: usize },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("timestamps not sorted: channel {channel} row {row}")]
    UnsortedTimestamps { channel: u32, row: usize },

    #[error("unknown channel {channel} at row {row} (expected 0 or 1)")]
    UnknownChannel { channel: i64, row: usize },

    #[error("histogram range ({min_ps}, {max_ps}) ps is not a positive multiple of bin width {bin_ps} ps")]
    BadHistogramRange { min_ps: i64, max_ps: i64, bin_ps: i64 },

    #[error("no coincidence peak train found in the correlogram")]
    NoPeakTrain,

    #[error("peak period could not be determined (fewer than 2 peaks)")]
    NoPeakPeriod,

    #[error("peak window {window_ps} ps must be smaller than half the peak period {period_ps} ps")]
    PeakWindowTooWide { window_ps: i64, period_ps: f64 },

    #[error("accidental window {index} at {position_ps} ps falls outside the histogram range")]
    AccidentalWindowOutOfRange { index: usize, position_ps: f64 },

    #[error("source model has no detectable events (zero pair and dark rates)")]
    NoDetectableEvents,

    #[error("duration must be positive, got {0} s")]
    NonPositiveDuration(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
