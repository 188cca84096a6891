//! Run configuration: a single JSON document whose keys all have defaults
//! matching the reference experiment, each overridable by a command-line
//! flag (the flag wins).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberCfg {
    pub length_m: f64,
    pub gamma_per_w_km: f64,
    pub dz_m: f64,
}

impl Default for FiberCfg {
    fn default() -> Self {
        Self { length_m: 1000.0, gamma_per_w_km: 11.0, dz_m: 10.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridCfg {
    pub n_points: usize,
    pub window_ns: f64,
    pub center_nm: f64,
}

impl Default for GridCfg {
    fn default() -> Self {
        Self { n_points: 1 << 18, window_ns: 44.5, center_nm: 1550.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionCfg {
    /// Quadratic coefficients, s/m², s/m³, s/m⁴.
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    /// Optional `wavelength_nm,d_ps_per_nm_km` sample file; when set, the
    /// coefficients are fitted from it instead.
    pub sample_file: Option<PathBuf>,
}

impl Default for DispersionCfg {
    fn default() -> Self {
        Self { d0: -2.36e-4, d1: 297.5, d2: -9.4e7, sample_file: None }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineCfg {
    pub frequency_thz: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputCfg {
    /// Comb line CSV (`frequency_thz,power_dbm`); alternative to `lines`.
    pub comb_file: Option<PathBuf>,
    pub lines: Vec<LineCfg>,
    pub pump_nm: f64,
    pub pump_dbm: f64,
    pub chirp_per_s2: f64,
    pub sub_spacing_mhz: f64,
    pub envelope_fwhm_mhz: f64,
}

impl Default for InputCfg {
    fn default() -> Self {
        Self {
            comb_file: None,
            lines: Vec::new(),
            pump_nm: 1550.12,
            pump_dbm: 10.2,
            chirp_per_s2: 0.0,
            sub_spacing_mhz: 22.47,
            envelope_fwhm_mhz: 21.23,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisCfg {
    pub bin_ps: i64,
    pub range_us: f64,
    pub peak_window_ns: f64,
    pub accidental_windows: usize,
}

impl Default for AnalysisCfg {
    fn default() -> Self {
        Self { bin_ps: 50, range_us: 1.0, peak_window_ns: 2.0, accidental_windows: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationCfg {
    pub max_evals: usize,
    pub tol_db: f64,
    pub j_max: u32,
    pub window_ghz: f64,
    pub pump_scale_bounds: (f64, f64),
    pub comb_scale_bounds: (f64, f64),
    pub chirp_bounds: (f64, f64),
}

impl Default for CalibrationCfg {
    fn default() -> Self {
        Self {
            max_evals: 200,
            tol_db: 0.01,
            j_max: 5,
            window_ghz: 10.0,
            pump_scale_bounds: (0.25, 4.0),
            comb_scale_bounds: (0.25, 4.0),
            chirp_bounds: (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fiber: FiberCfg,
    pub grid: GridCfg,
    pub dispersion: DispersionCfg,
    pub input: InputCfg,
    pub analysis: AnalysisCfg,
    pub calibration: CalibrationCfg,
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    /// All validation problems at once, empty when the config is usable.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.grid.n_points < 2 || !self.grid.n_points.is_power_of_two() {
            problems.push(format!(
                "grid.n_points must be a power of two >= 2, got {}",
                self.grid.n_points
            ));
        }
        if !(self.grid.window_ns > 0.0) {
            problems.push(format!("grid.window_ns must be positive, got {}", self.grid.window_ns));
        }
        for (name, nm) in [("grid.center_nm", self.grid.center_nm), ("input.pump_nm", self.input.pump_nm)] {
            if !(nm > 1000.0 && nm < 2000.0) {
                problems.push(format!("{name} must lie in (1000, 2000) nm, got {nm}"));
            }
        }
        if !(self.fiber.length_m > 0.0) {
            problems.push(format!("fiber.length_m must be positive, got {}", self.fiber.length_m));
        }
        if !(self.fiber.dz_m > 0.0) {
            problems.push(format!("fiber.dz_m must be positive, got {}", self.fiber.dz_m));
        }
        if self.fiber.gamma_per_w_km < 0.0 {
            problems.push(format!(
                "fiber.gamma_per_w_km must be non-negative, got {}",
                self.fiber.gamma_per_w_km
            ));
        }
        if !(self.input.sub_spacing_mhz > 0.0) || !(self.input.envelope_fwhm_mhz > 0.0) {
            problems.push("input sub-comb spacing and envelope FWHM must be positive".into());
        }
        if self.analysis.bin_ps <= 0 {
            problems.push(format!("analysis.bin_ps must be positive, got {}", self.analysis.bin_ps));
        }
        if !(self.analysis.range_us > 0.0) {
            problems.push(format!("analysis.range_us must be positive, got {}", self.analysis.range_us));
        }
        if !(self.analysis.peak_window_ns > 0.0) {
            problems.push(format!(
                "analysis.peak_window_ns must be positive, got {}",
                self.analysis.peak_window_ns
            ));
        }
        if self.analysis.accidental_windows < 2 {
            problems.push(format!(
                "analysis.accidental_windows must be at least 2, got {}",
                self.analysis.accidental_windows
            ));
        }
        if let Some(f) = &self.dispersion.sample_file {
            if !f.exists() {
                problems.push(format!("dispersion.sample_file {} does not exist", f.display()));
            }
        }
        if let Some(f) = &self.input.comb_file {
            if !f.exists() {
                problems.push(format!("input.comb_file {} does not exist", f.display()));
            }
        }
        problems
    }
}
