//! `fwmkit` — one entry point for the whole pipeline: dispersion fitting,
//! input synthesis, fiber propagation, sideband prediction, OSA emulation
//! and comparison, synthetic tag generation, and coincidence analysis.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 runtime
//! failure.

mod config;
mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use fwmkit::calibrate::{calibrate, CalibrateOptions, ParamBounds};
use fwmkit::coincidence::{
    compute_car, compute_car_at, correlogram, load_tags, save_tags, Correlogram,
};
use fwmkit::comb::{
    apply_linear_chirp, extract_comb_peaks, load_comb_csv, save_comb_csv, synthesize_input,
    CombLine, CombSpec, PumpSpec,
};
use fwmkit::dispersion::{
    eval_d, fit_quadratic, hnlf_model, load_dispersion_samples, taylor_betas, DispersionModel,
};
use fwmkit::fwm::{measure_sidebands, predict_lines};
use fwmkit::osa::{compare_traces, emulate_osa, load_trace, save_trace};
use fwmkit::signal::{
    dbm_to_watts, load_spectrum_csv, save_spectrum_csv, Field, TemporalGrid, SPEED_OF_LIGHT,
};
use fwmkit::ssfm::{convergence_probe, propagate, FiberParams, ObservedOrder};
use fwmkit::tagsim::{analytic_car, generate_tags, SourceModel};

#[derive(Parser)]
#[command(name = "fwmkit", version, about = "Fiber FWM comb simulation and coincidence analysis")]
struct Cli {
    /// JSON run configuration; every key has a default and can be
    /// overridden by the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    n_points: Option<usize>,

    #[arg(long, global = true)]
    window_ns: Option<f64>,

    #[arg(long, global = true)]
    pump_nm: Option<f64>,

    #[arg(long, global = true)]
    pump_dbm: Option<f64>,

    #[arg(long, global = true)]
    dz_m: Option<f64>,

    #[arg(long, global = true)]
    bin_ps: Option<i64>,

    #[arg(long, global = true)]
    range_us: Option<f64>,

    #[arg(long, global = true)]
    jmax: Option<u32>,

    /// Also write SVG plots of spectra/correlograms.
    #[arg(long, global = true)]
    svg: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the quadratic dispersion model from a sample CSV.
    FitDispersion(FitDispersionArgs),
    /// Synthesize the input spectrum (comb sub-structure plus pump).
    SynthInput(SynthInputArgs),
    /// Propagate an input spectrum through the fiber.
    Propagate(PropagateArgs),
    /// Print predicted signal/idler lines around the pump.
    PredictLines(PredictLinesArgs),
    /// Convolve a spectrum dump with a finite OSA resolution bandwidth.
    EmulateOsa(EmulateOsaArgs),
    /// Compare two traces over a wavelength band.
    Compare(CompareArgs),
    /// Generate synthetic detector tag streams.
    GenTags(GenTagsArgs),
    /// Build the correlogram and CAR report from a tag file.
    AnalyzeTags(AnalyzeTagsArgs),
    /// Fit pump/comb power scales (and optionally chirp) to a measured trace.
    Calibrate(CalibrateArgs),
    /// Run the built-in verification checks.
    Selftest,
}

#[derive(Args)]
struct FitDispersionArgs {
    /// `wavelength_nm,d_ps_per_nm_km` CSV; defaults to dispersion.sample_file.
    #[arg(long)]
    samples: Option<PathBuf>,
}

#[derive(Args)]
struct SynthInputArgs {
    /// Extract the comb lines from a measured trace instead of using the
    /// configured lines.
    #[arg(long, value_name = "CSV")]
    from_trace: Option<PathBuf>,
    /// Peak prominence threshold for the trace extraction, dB.
    #[arg(long, default_value_t = 10.0)]
    min_prominence_db: f64,
}

#[derive(Args)]
struct PropagateArgs {
    /// Input spectrum CSV (defaults to synthesizing from the config).
    #[arg(long, value_name = "CSV")]
    input: Option<PathBuf>,
    /// Include per-step energies in diagnostics.json.
    #[arg(long)]
    energies: bool,
    /// Run the step-size convergence probe (dz, dz/2, dz/4) and report it.
    #[arg(long)]
    probe: bool,
}

#[derive(Args)]
struct PredictLinesArgs {
    #[arg(long, default_value_t = 50.0)]
    delta_ghz: f64,
}

#[derive(Args)]
struct EmulateOsaArgs {
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    rbw_ghz: f64,
    #[arg(long)]
    lambda_min_nm: Option<f64>,
    #[arg(long)]
    lambda_max_nm: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    band_min_nm: Option<f64>,
    #[arg(long)]
    band_max_nm: Option<f64>,
    #[arg(long, default_value_t = -75.0)]
    floor_dbm: f64,
}

#[derive(Args)]
struct GenTagsArgs {
    #[arg(long, default_value_t = 1.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 22.47)]
    rep_mhz: f64,
    /// Mean photon pairs per pulse.
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    #[arg(long, default_value_t = 0.1)]
    eta_s: f64,
    #[arg(long, default_value_t = 0.1)]
    eta_i: f64,
    #[arg(long, default_value_t = 0.0)]
    dark_s_cps: f64,
    #[arg(long, default_value_t = 0.0)]
    dark_i_cps: f64,
    #[arg(long, default_value_t = 300.0)]
    jitter_ps: f64,
    #[arg(long, default_value_t = 33.5)]
    offset_ns: f64,
}

#[derive(Args)]
struct AnalyzeTagsArgs {
    #[arg(long, value_name = "CSV")]
    tags: PathBuf,
    /// Lower edge of the correlogram range in µs (negative for a signed
    /// histogram; the upper edge comes from --range-us).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    min_delay_us: f64,
    #[arg(long)]
    peak_window_ns: Option<f64>,
    #[arg(long)]
    acc_windows: Option<usize>,
    /// Force the coincidence window position instead of detecting peaks.
    #[arg(long)]
    offset_ns: Option<f64>,
    /// Force the accidental window period (requires --offset-ns).
    #[arg(long)]
    period_ns: Option<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Measured output trace to fit against.
    #[arg(long, value_name = "CSV")]
    measured: PathBuf,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    tol_db: Option<f64>,
}

enum Failure {
    Validation(Vec<String>),
    Runtime(String),
}

impl From<fwmkit::Error> for Failure {
    fn from(e: fwmkit::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successes; anything else is a validation
            // failure.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(problems)) => {
            for p in &problems {
                eprintln!("config error: {p}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Validation(vec![e]))?,
        None => RunConfig::default(),
    };
    // Flags win over config.
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.n_points {
        cfg.grid.n_points = v;
    }
    if let Some(v) = cli.window_ns {
        cfg.grid.window_ns = v;
    }
    if let Some(v) = cli.pump_nm {
        cfg.input.pump_nm = v;
    }
    if let Some(v) = cli.pump_dbm {
        cfg.input.pump_dbm = v;
    }
    if let Some(v) = cli.dz_m {
        cfg.fiber.dz_m = v;
    }
    if let Some(v) = cli.bin_ps {
        cfg.analysis.bin_ps = v;
    }
    if let Some(v) = cli.range_us {
        cfg.analysis.range_us = v;
    }
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Failure::Validation(problems));
    }
    std::fs::create_dir_all(&cli.out)?;

    match &cli.command {
        Command::FitDispersion(args) => cmd_fit_dispersion(&cli, &cfg, args),
        Command::SynthInput(args) => cmd_synth_input(&cli, &cfg, args),
        Command::Propagate(args) => cmd_propagate(&cli, &cfg, args),
        Command::PredictLines(args) => cmd_predict_lines(&cli, &cfg, args),
        Command::EmulateOsa(args) => cmd_emulate_osa(&cli, args),
        Command::Compare(args) => cmd_compare(&cli, args),
        Command::GenTags(args) => cmd_gen_tags(&cli, &cfg, args),
        Command::AnalyzeTags(args) => cmd_analyze_tags(&cli, &cfg, args),
        Command::Calibrate(args) => cmd_calibrate(&cli, &cfg, args),
        Command::Selftest => cmd_selftest(),
    }
}

fn grid_of(cfg: &RunConfig) -> Result<TemporalGrid, Failure> {
    Ok(TemporalGrid::new(
        cfg.grid.n_points,
        cfg.grid.window_ns * 1e-9,
        cfg.grid.center_nm * 1e-9,
    )?)
}

fn dispersion_of(cfg: &RunConfig) -> Result<DispersionModel, Failure> {
    match &cfg.dispersion.sample_file {
        Some(path) => {
            let samples = load_dispersion_samples(path)?;
            Ok(fit_quadratic(&samples)?)
        }
        None => Ok(DispersionModel::new(
            cfg.dispersion.d0,
            cfg.dispersion.d1,
            cfg.dispersion.d2,
            cfg.grid.center_nm * 1e-9,
        )?),
    }
}

fn fiber_of(cfg: &RunConfig) -> Result<FiberParams, Failure> {
    let model = dispersion_of(cfg)?;
    let betas = taylor_betas(&model, cfg.grid.center_nm * 1e-9)?;
    Ok(FiberParams::new(
        cfg.fiber.length_m,
        cfg.fiber.gamma_per_w_km * 1e-3,
        cfg.fiber.dz_m,
        betas,
    )?)
}

fn comb_of(cfg: &RunConfig) -> Result<CombSpec, Failure> {
    let (sub, env) =
        (cfg.input.sub_spacing_mhz * 1e6, cfg.input.envelope_fwhm_mhz * 1e6);
    if let Some(path) = &cfg.input.comb_file {
        let loaded = load_comb_csv(path)?;
        return Ok(CombSpec::new(loaded.lines, sub, env)?);
    }
    let mut lines: Vec<CombLine> = cfg
        .input
        .lines
        .iter()
        .map(|l| CombLine {
            frequency_hz: l.frequency_thz * 1e12,
            power_w: dbm_to_watts(l.power_dbm),
        })
        .collect();
    lines.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
    Ok(CombSpec::new(lines, sub, env)?)
}

fn pump_of(cfg: &RunConfig) -> Result<PumpSpec, Failure> {
    Ok(PumpSpec::new(
        SPEED_OF_LIGHT / (cfg.input.pump_nm * 1e-9),
        dbm_to_watts(cfg.input.pump_dbm),
    )?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Runtime(format!("serializing {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn spectrum_svg(path: &Path, field: &Field, title: &str) -> Result<(), Failure> {
    let grid = field.grid();
    let powers = field.spectral_powers_w()?;
    let points: Vec<(f64, f64)> = powers
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            (grid.frequency_at_hz(k) / 1e12, 10.0 * (p.max(1e-23) / 1e-3).log10())
        })
        .collect();
    svg::line_chart(path, title, "frequency / THz", "power / dBm", &points)?;
    Ok(())
}

fn cmd_fit_dispersion(
    cli: &Cli,
    cfg: &RunConfig,
    args: &FitDispersionArgs,
) -> Result<(), Failure> {
    let path = args
        .samples
        .clone()
        .or_else(|| cfg.dispersion.sample_file.clone())
        .ok_or_else(|| {
            Failure::Validation(vec![
                "fit-dispersion needs --samples or dispersion.sample_file".into()
            ])
        })?;
    let samples = load_dispersion_samples(&path)?;
    let model = fit_quadratic(&samples)?;
    let lambda_c = cfg.grid.center_nm * 1e-9;
    let betas = taylor_betas(&model, lambda_c)?;

    #[derive(serde::Serialize)]
    struct FitReport {
        model: DispersionModel,
        betas: fwmkit::dispersion::BetaSet,
        d_at_lambda_c_s_per_m2: f64,
        zero_dispersion_wavelengths_m: Option<(f64, f64)>,
        samples_used: usize,
    }
    let report = FitReport {
        model,
        betas,
        d_at_lambda_c_s_per_m2: eval_d(&model, lambda_c)?,
        zero_dispersion_wavelengths_m: model.zero_dispersion_wavelengths_m(),
        samples_used: samples.len(),
    };
    write_json(&cli.out.join("dispersion.json"), &report)?;
    println!(
        "fit-dispersion: d0={:.4e} d1={:.4e} d2={:.4e}, beta2({:.1} nm)={:.3e} s^2/m -> {}",
        model.d0,
        model.d1,
        model.d2,
        cfg.grid.center_nm,
        betas.beta2,
        cli.out.join("dispersion.json").display()
    );
    Ok(())
}

fn synthesize(cfg: &RunConfig) -> Result<(Field, fwmkit::comb::SynthReport), Failure> {
    let grid = grid_of(cfg)?;
    let comb = comb_of(cfg)?;
    let pump = pump_of(cfg)?;
    let chirp = if cfg.input.chirp_per_s2 != 0.0 { Some(cfg.input.chirp_per_s2) } else { None };
    Ok(synthesize_input(&comb, &pump, &grid, chirp)?)
}

fn cmd_synth_input(cli: &Cli, cfg: &RunConfig, args: &SynthInputArgs) -> Result<(), Failure> {
    let (field, report) = match &args.from_trace {
        Some(path) => {
            let trace = load_trace(path)?;
            let extracted = extract_comb_peaks(&trace, args.min_prominence_db)?;
            let comb = CombSpec::new(
                extracted.lines,
                cfg.input.sub_spacing_mhz * 1e6,
                cfg.input.envelope_fwhm_mhz * 1e6,
            )?;
            save_comb_csv(&comb, &cli.out.join("extracted_comb.csv"))?;
            let grid = grid_of(cfg)?;
            let pump = pump_of(cfg)?;
            let chirp =
                (cfg.input.chirp_per_s2 != 0.0).then_some(cfg.input.chirp_per_s2);
            synthesize_input(&comb, &pump, &grid, chirp)?
        }
        None => synthesize(cfg)?,
    };
    let spectrum_path = cli.out.join("input_spectrum.csv");
    save_spectrum_csv(&field, &spectrum_path)?;
    write_json(&cli.out.join("synth_report.json"), &report)?;
    if cli.svg {
        spectrum_svg(&cli.out.join("input_spectrum.svg"), &field, "synthesized input")?;
    }
    println!(
        "synth-input: {} lines, {} sub-lines, {:.3} mW total, max snap {:.2} kHz -> {}",
        report.lines,
        report.sub_lines_placed,
        report.total_power_w * 1e3,
        report.max_snap_error_hz / 1e3,
        spectrum_path.display()
    );
    Ok(())
}

fn cmd_propagate(cli: &Cli, cfg: &RunConfig, args: &PropagateArgs) -> Result<(), Failure> {
    let input = match &args.input {
        Some(path) => load_spectrum_csv(path)?,
        None => synthesize(cfg)?.0,
    };
    let fiber = fiber_of(cfg)?;
    let mut time_in = input.to_time()?;
    if cfg.input.chirp_per_s2 != 0.0 && args.input.is_some() {
        time_in = apply_linear_chirp(&time_in, cfg.input.chirp_per_s2)?;
    }
    let (output, diagnostics) = propagate(&time_in, &fiber)?;
    let spectrum = output.to_frequency()?;
    let out_path = cli.out.join("output_spectrum.csv");
    save_spectrum_csv(&spectrum, &out_path)?;

    #[derive(serde::Serialize)]
    struct Diag {
        steps_taken: usize,
        energy_drift_rel: f64,
        band_edge_warning: bool,
        band_edge_margin_db: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        step_energies_j: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        observed_order: Option<ObservedOrder>,
    }
    let observed_order = if args.probe {
        let dz = fiber.dz_m;
        Some(convergence_probe(&time_in, &fiber, &[dz, dz / 2.0, dz / 4.0])?)
    } else {
        None
    };
    let diag = Diag {
        steps_taken: diagnostics.steps_taken,
        energy_drift_rel: diagnostics.energy_drift_rel,
        band_edge_warning: diagnostics.band_edge_warning,
        band_edge_margin_db: diagnostics.band_edge_margin_db,
        step_energies_j: args.energies.then(|| diagnostics.step_energies_j.clone()),
        observed_order,
    };
    write_json(&cli.out.join("diagnostics.json"), &diag)?;

    // Sideband summary around the configured pump, when a comb spacing is
    // known.
    let comb = comb_of(cfg)?;
    if let Some(delta_f) = comb.min_spacing_hz() {
        let pump = pump_of(cfg)?;
        let preds = predict_lines(pump.frequency_hz, delta_f, cli.jmax.unwrap_or(5))?;
        let side = measure_sidebands(&spectrum, &preds, (delta_f / 5.0).min(10e9))?;
        let mut csv = String::from(
            "j,signal_thz,signal_dbm,signal_found,idler_thz,idler_dbm,idler_found\n",
        );
        for m in &side {
            let dbm = |w: f64| 10.0 * (w.max(1e-30) / 1e-3).log10();
            writeln!(
                csv,
                "{},{:.9},{:.3},{},{:.9},{:.3},{}",
                m.order,
                m.signal_hz / 1e12,
                dbm(m.signal_power_w),
                m.signal_found,
                m.idler_hz / 1e12,
                dbm(m.idler_power_w),
                m.idler_found
            )
            .unwrap();
        }
        std::fs::write(cli.out.join("sidebands.csv"), csv)?;
        let found = side.iter().filter(|m| m.signal_found && m.idler_found).count();
        println!(
            "propagate: {found}/{} sideband orders present on both sides of the pump",
            side.len()
        );
    }
    if cli.svg {
        spectrum_svg(&cli.out.join("output_spectrum.svg"), &spectrum, "propagated output")?;
    }
    if diagnostics.band_edge_warning {
        eprintln!(
            "warning: spectral content within 5% of the grid edge is only {:.1} dB below peak (aliasing risk)",
            diagnostics.band_edge_margin_db
        );
    }
    let mut line = format!(
        "propagate: {} steps over {} m, energy drift {:.2e}",
        diagnostics.steps_taken, cfg.fiber.length_m, diagnostics.energy_drift_rel
    );
    if let Some(order) = &diag.observed_order {
        match order {
            ObservedOrder::Exact => write!(line, ", probe: exact").unwrap(),
            ObservedOrder::Order(p) => write!(line, ", probe order {p:.2}").unwrap(),
        }
    }
    println!("{line} -> {}", out_path.display());
    Ok(())
}

fn cmd_predict_lines(cli: &Cli, cfg: &RunConfig, args: &PredictLinesArgs) -> Result<(), Failure> {
    let pump_hz = SPEED_OF_LIGHT / (cfg.input.pump_nm * 1e-9);
    let j_max = cli.jmax.unwrap_or(5);
    let lines = predict_lines(pump_hz, args.delta_ghz * 1e9, j_max)?;
    println!("pump {:.6} THz, spacing {} GHz", pump_hz / 1e12, args.delta_ghz);
    println!("{:>3} {:>16} {:>16} {:>12} {:>12}", "j", "signal_thz", "idler_thz", "signal_nm", "idler_nm");
    let mut csv = String::from("j,signal_thz,idler_thz\n");
    for p in &lines {
        println!(
            "{:>3} {:>16.6} {:>16.6} {:>12.4} {:>12.4}",
            p.order,
            p.signal_hz / 1e12,
            p.idler_hz / 1e12,
            SPEED_OF_LIGHT / p.signal_hz * 1e9,
            SPEED_OF_LIGHT / p.idler_hz * 1e9
        );
        writeln!(csv, "{},{:.9},{:.9}", p.order, p.signal_hz / 1e12, p.idler_hz / 1e12).unwrap();
    }
    std::fs::write(cli.out.join("predictions.csv"), csv)?;
    Ok(())
}

fn cmd_emulate_osa(cli: &Cli, args: &EmulateOsaArgs) -> Result<(), Failure> {
    let field = load_spectrum_csv(&args.input)?;
    let grid = field.grid();
    let (f_lo, f_hi) = grid.frequency_bounds_hz();
    // Default range: the grid span, trimmed one bin at each edge.
    let lambda_min = args
        .lambda_min_nm
        .unwrap_or_else(|| SPEED_OF_LIGHT / (f_hi - grid.df_hz()) * 1e9);
    let lambda_max = args
        .lambda_max_nm
        .unwrap_or_else(|| SPEED_OF_LIGHT / (f_lo + grid.df_hz()) * 1e9);
    let trace = emulate_osa(&field, args.rbw_ghz * 1e9, (lambda_min, lambda_max))?;
    let path = cli.out.join("trace.csv");
    save_trace(&trace, &path)?;
    if cli.svg {
        let points: Vec<(f64, f64)> =
            trace.points.iter().map(|p| (p.wavelength_nm, p.power_dbm)).collect();
        svg::line_chart(
            &cli.out.join("trace.svg"),
            &format!("emulated OSA sweep, RBW {} GHz", args.rbw_ghz),
            "wavelength / nm",
            "power / dBm",
            &points,
        )?;
    }
    println!(
        "emulate-osa: {} points over {:.3}..{:.3} nm at {} GHz RBW -> {}",
        trace.points.len(),
        lambda_min,
        lambda_max,
        args.rbw_ghz,
        path.display()
    );
    Ok(())
}

fn cmd_compare(cli: &Cli, args: &CompareArgs) -> Result<(), Failure> {
    let a = load_trace(&args.a)?;
    let b = load_trace(&args.b)?;
    let band = (
        args.band_min_nm.unwrap_or(f64::NEG_INFINITY).max(a.wavelength_bounds_nm().0),
        args.band_max_nm.unwrap_or(f64::INFINITY).min(a.wavelength_bounds_nm().1),
    );
    let report = compare_traces(&a, &b, band, args.floor_dbm)?;
    write_json(&cli.out.join("comparison.json"), &report)?;
    let matched = report.peaks.iter().filter(|p| p.matched).count();
    println!(
        "compare: rms {:.3} dB over {} samples, {} peaks ({} matched within 10 GHz)",
        report.rms_db,
        report.samples_compared,
        report.peaks.len(),
        matched
    );
    Ok(())
}

fn cmd_gen_tags(cli: &Cli, cfg: &RunConfig, args: &GenTagsArgs) -> Result<(), Failure> {
    let model = SourceModel {
        rep_rate_hz: args.rep_mhz * 1e6,
        mean_pairs_per_pulse: args.mu,
        eta_signal: args.eta_s,
        eta_idler: args.eta_i,
        dark_rate_signal_cps: args.dark_s_cps,
        dark_rate_idler_cps: args.dark_i_cps,
        jitter_sigma_ps: args.jitter_ps,
        delay_offset_ps: (args.offset_ns * 1000.0).round() as i64,
    };
    let (signal, idler) = generate_tags(&model, args.duration_s, cfg.seed)?;
    let path = cli.out.join("tags.csv");
    save_tags(&[signal.clone(), idler.clone()], &path)?;
    write_json(&cli.out.join("source_model.json"), &model)?;
    println!(
        "gen-tags: seed {} -> {:.1} kcps signal, {:.1} kcps idler, analytic CAR {:.2} -> {}",
        cfg.seed,
        signal.rate_cps() / 1e3,
        idler.rate_cps() / 1e3,
        analytic_car(&model, (cfg.analysis.peak_window_ns * 1000.0) as i64)
            .unwrap_or(f64::NAN),
        path.display()
    );
    Ok(())
}

fn save_correlogram_csv(hist: &Correlogram, path: &Path) -> Result<(), Failure> {
    let mut out = String::from("delay_ps,counts\n");
    for (bin, &c) in hist.counts.iter().enumerate() {
        writeln!(out, "{},{}", hist.bin_center_ps(bin), c).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn cmd_analyze_tags(cli: &Cli, cfg: &RunConfig, args: &AnalyzeTagsArgs) -> Result<(), Failure> {
    let streams = load_tags(&args.tags)?;
    let signal = streams
        .iter()
        .find(|s| s.channel == 0)
        .ok_or_else(|| Failure::Runtime("tag file has no channel 0 (signal)".into()))?;
    let idler = streams
        .iter()
        .find(|s| s.channel == 1)
        .ok_or_else(|| Failure::Runtime("tag file has no channel 1 (idler)".into()))?;

    let bin = cfg.analysis.bin_ps;
    let min_ps = ((args.min_delay_us * 1e6).round() as i64 / bin) * bin;
    let max_ps = ((cfg.analysis.range_us * 1e6).round() as i64 / bin) * bin;
    if max_ps <= min_ps {
        return Err(Failure::Validation(vec![format!(
            "--range-us ({max_ps} ps) must exceed --min-delay-us ({min_ps} ps)"
        )]));
    }
    let hist = correlogram(signal, idler, bin, (min_ps, max_ps))?;
    save_correlogram_csv(&hist, &cli.out.join("correlogram.csv"))?;

    let window_ps =
        (args.peak_window_ns.unwrap_or(cfg.analysis.peak_window_ns) * 1000.0).round() as i64;
    let n_acc = args.acc_windows.unwrap_or(cfg.analysis.accidental_windows);
    let report = match (args.offset_ns, args.period_ns) {
        (Some(offset), Some(period)) => compute_car_at(
            &hist,
            signal,
            idler,
            offset * 1000.0,
            period * 1000.0,
            window_ps,
            n_acc,
        )?,
        (None, None) => compute_car(&hist, signal, idler, window_ps, n_acc)?,
        _ => {
            return Err(Failure::Validation(vec![
                "--offset-ns and --period-ns must be given together".into(),
            ]))
        }
    };
    write_json(&cli.out.join("car_report.json"), &report)?;
    if cli.svg {
        let points: Vec<(f64, f64)> = hist
            .counts
            .iter()
            .enumerate()
            .map(|(k, &c)| (hist.bin_center_ps(k) / 1000.0, c as f64))
            .collect();
        svg::line_chart(
            &cli.out.join("correlogram.svg"),
            "coincidence correlogram",
            "delay / ns",
            "counts",
            &points,
        )?;
    }
    println!(
        "analyze-tags: peak at {:.2} ns, period {:.2} ns, C={}, A={:.1}, CAR {:.2} ± {:.2} (Rs {:.0} cps, Rc {:.1} cps)",
        report.peak_offset_ps / 1000.0,
        report.peak_period_ps / 1000.0,
        report.coincidence_counts,
        report.mean_accidental_counts,
        report.car,
        report.car_sigma,
        report.r_s_cps,
        report.r_c_cps
    );
    Ok(())
}

fn cmd_calibrate(cli: &Cli, cfg: &RunConfig, args: &CalibrateArgs) -> Result<(), Failure> {
    let measured = load_trace(&args.measured)?;
    let grid = grid_of(cfg)?;
    let comb = comb_of(cfg)?;
    if comb.is_empty() {
        return Err(Failure::Validation(vec![
            "calibrate needs comb lines (input.lines or input.comb_file)".into(),
        ]));
    }
    let pump = pump_of(cfg)?;
    let fiber = fiber_of(cfg)?;
    let c = &cfg.calibration;
    let bounds = ParamBounds {
        pump_scale: c.pump_scale_bounds,
        comb_scale: c.comb_scale_bounds,
        chirp_per_s2: c.chirp_bounds,
    };
    let opts = CalibrateOptions {
        max_evals: args.max_evals.unwrap_or(c.max_evals),
        tol_db: args.tol_db.unwrap_or(c.tol_db),
        j_max: cli.jmax.unwrap_or(c.j_max),
        window_hz: c.window_ghz * 1e9,
    };
    let result = calibrate(&measured, &comb, &pump, &grid, &fiber, &bounds, &opts)?;
    write_json(&cli.out.join("calibration.json"), &result)?;
    println!(
        "calibrate: pump_scale {:.4}, comb_scale {:.4}, chirp {:.3e}, objective {:.4} dB after {} evals ({})",
        result.pump_scale,
        result.comb_scale,
        result.chirp_per_s2,
        result.objective_history.last().copied().unwrap_or(f64::NAN),
        result.evaluations,
        if result.converged { "converged" } else { "budget exhausted" }
    );
    Ok(())
}

fn cmd_selftest() -> Result<(), Failure> {
    let checks: Vec<(&str, fn() -> Result<String, String>)> = vec![
        ("parseval_round_trip", selftest::parseval),
        ("dbm_round_trip", selftest::dbm_round_trip),
        ("dispersion_fit_and_beta2", selftest::dispersion_fit),
        ("beta_finite_difference_chain", selftest::beta_chain),
        ("spm_phase", selftest::spm_phase),
        ("fwm_small_gain", selftest::fwm_small_gain),
        ("comb_power_bookkeeping", selftest::comb_power),
        ("osa_power_preservation", selftest::osa_power),
        ("correlogram_brute_force", selftest::correlogram_oracle),
        ("tagsim_car_consistency", selftest::tagsim_car),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failures > 0 {
        return Err(Failure::Runtime(format!("{failures} selftest check(s) failed")));
    }
    println!("selftest: all checks passed");
    Ok(())
}

mod selftest {
    use super::*;
    use fwmkit::dispersion::BetaSet;
    use fwmkit::signal::Representation;
    use num_complex::Complex64;

    fn check(cond: bool, detail: String) -> Result<String, String> {
        if cond {
            Ok(detail)
        } else {
            Err(detail)
        }
    }

    pub fn parseval() -> Result<String, String> {
        let grid = TemporalGrid::new(1 << 12, 10e-9, 1550e-9).map_err(|e| e.to_string())?;
        let samples: Vec<Complex64> = (0..grid.n_points())
            .map(|j| Complex64::new((j as f64 * 0.31).sin(), (j as f64 * 0.17).cos()))
            .collect();
        let f = Field::new(grid, Representation::Time, samples).map_err(|e| e.to_string())?;
        let s = f.to_frequency().map_err(|e| e.to_string())?;
        let back = s.to_time().map_err(|e| e.to_string())?;
        let energy_err = ((f.energy_j() - s.energy_j()) / f.energy_j()).abs();
        let max_diff = f
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        check(
            energy_err < 1e-12 && max_diff < 1e-12,
            format!("energy err {energy_err:.1e}, round trip {max_diff:.1e}"),
        )
    }

    pub fn dbm_round_trip() -> Result<String, String> {
        let mut worst = 0.0f64;
        for p in [1e-12, 1e-9, 1e-3, 0.5, 10.0] {
            let back = dbm_to_watts(fwmkit::signal::watts_to_dbm(p).map_err(|e| e.to_string())?);
            worst = worst.max(((back - p) / p).abs());
        }
        check(worst < 1e-12, format!("worst relative error {worst:.1e}"))
    }

    pub fn dispersion_fit() -> Result<String, String> {
        let reference = hnlf_model();
        let samples: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let l = 1530e-9 + 40e-9 * i as f64 / 9.0;
                (l, eval_d(&reference, l).unwrap())
            })
            .collect();
        let fit = fit_quadratic(&samples).map_err(|e| e.to_string())?;
        let err = ((fit.d0 - reference.d0) / reference.d0)
            .abs()
            .max(((fit.d1 - reference.d1) / reference.d1).abs())
            .max(((fit.d2 - reference.d2) / reference.d2).abs());
        let beta2 = taylor_betas(&reference, 1550e-9).map_err(|e| e.to_string())?.beta2;
        check(
            err < 1e-9 && ((beta2 - 9.06e-28) / 9.06e-28).abs() < 0.005,
            format!("fit err {err:.1e}, beta2 {beta2:.3e} s^2/m"),
        )
    }

    pub fn beta_chain() -> Result<String, String> {
        let m = hnlf_model();
        let omega_c = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / 1550e-9;
        let h = omega_c * 1e-5;
        let beta2_of = |omega: f64| {
            let l = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / omega;
            -l * l * eval_d(&m, l).unwrap() / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
        };
        let betas = taylor_betas(&m, 1550e-9).map_err(|e| e.to_string())?;
        let fd3 = (beta2_of(omega_c + h) - beta2_of(omega_c - h)) / (2.0 * h);
        let rel = ((betas.beta3 - fd3) / betas.beta3).abs();
        check(rel < 1e-6, format!("beta3 vs d(beta2)/dω: {rel:.1e} relative"))
    }

    pub fn spm_phase() -> Result<String, String> {
        let grid = TemporalGrid::new(1 << 10, 10e-9, 1550e-9).map_err(|e| e.to_string())?;
        let p = dbm_to_watts(10.2);
        let input = Field::cw(grid, p);
        let fiber = FiberParams::new(1000.0, 11e-3, 10.0, BetaSet::zero(1550e-9))
            .map_err(|e| e.to_string())?;
        let (out, _) = propagate(&input, &fiber).map_err(|e| e.to_string())?;
        let phase = (out.samples()[0] / input.samples()[0]).arg();
        let expected = 11e-3 * p * 1000.0;
        check(
            (phase - expected).abs() < 1e-6,
            format!("phase {phase:.6} rad vs γPL {expected:.6}"),
        )
    }

    pub fn fwm_small_gain() -> Result<String, String> {
        let n = 1 << 12;
        let grid = TemporalGrid::new(n, 10e-9, 1550e-9).map_err(|e| e.to_string())?;
        let detune = (50e9 / grid.df_hz()).round() as i64;
        let mut samples = vec![Complex64::new(0.0, 0.0); n];
        samples[n / 2] = Complex64::new(Field::bin_amplitude_for_power(&grid, 10e-3), 0.0);
        samples[(n as i64 / 2 + detune) as usize] =
            Complex64::new(Field::bin_amplitude_for_power(&grid, 1e-6), 0.0);
        let input = Field::new(grid, Representation::Frequency, samples)
            .map_err(|e| e.to_string())?
            .to_time()
            .map_err(|e| e.to_string())?;
        let fiber = FiberParams::new(1000.0, 11e-3, 10.0, BetaSet::zero(1550e-9))
            .map_err(|e| e.to_string())?;
        let (out, _) = propagate(&input, &fiber).map_err(|e| e.to_string())?;
        let powers = out
            .to_frequency()
            .map_err(|e| e.to_string())?
            .spectral_powers_w()
            .map_err(|e| e.to_string())?;
        let idler = powers[(n as i64 / 2 - detune) as usize];
        let expected = (11e-3f64 * 10e-3 * 1000.0).powi(2) * 1e-6;
        let rel = ((idler - expected) / expected).abs();
        check(rel < 0.05, format!("idler {idler:.3e} W vs {expected:.3e} W ({rel:.4} rel)"))
    }

    pub fn comb_power() -> Result<String, String> {
        let grid = TemporalGrid::new(1 << 14, 44.5e-9, 1550e-9).map_err(|e| e.to_string())?;
        let fc = grid.center_frequency_hz();
        let comb = CombSpec::with_default_structure(vec![
            CombLine { frequency_hz: fc - 50e9, power_w: 1e-3 },
            CombLine { frequency_hz: fc + 50e9, power_w: 2e-3 },
        ])
        .map_err(|e| e.to_string())?;
        let pump = PumpSpec::new(fc, 5e-3).map_err(|e| e.to_string())?;
        let (field, report) =
            synthesize_input(&comb, &pump, &grid, None).map_err(|e| e.to_string())?;
        let total: f64 = field
            .spectral_powers_w()
            .map_err(|e| e.to_string())?
            .iter()
            .sum();
        let rel = ((total - report.total_power_w) / report.total_power_w).abs();
        check(rel < 1e-6, format!("placed {total:.6e} W vs configured {:.6e} W", report.total_power_w))
    }

    pub fn osa_power() -> Result<String, String> {
        let n = 1 << 12;
        let grid = TemporalGrid::new(n, 1.0 / 1e9, 1550e-9).map_err(|e| e.to_string())?;
        let mut samples = vec![Complex64::new(0.0, 0.0); n];
        samples[n / 2] = Complex64::new(Field::bin_amplitude_for_power(&grid, 1e-3), 0.0);
        let f = Field::new(grid, Representation::Frequency, samples).map_err(|e| e.to_string())?;
        let t = emulate_osa(&f, 3e9, (1540.0, 1560.0)).map_err(|e| e.to_string())?;
        let total: f64 = t.points.iter().map(|p| dbm_to_watts(p.power_dbm)).sum();
        let rel = ((total - 1e-3) / 1e-3).abs();
        check(rel < 1e-6, format!("integrated {total:.6e} W vs 1e-3 W"))
    }

    pub fn correlogram_oracle() -> Result<String, String> {
        let mut x = 9876u64;
        let mut step = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 33) % 500_000) as i64
        };
        let mut sig: Vec<i64> = (0..500).map(|_| step()).collect();
        let mut idl: Vec<i64> = (0..500).map(|_| step()).collect();
        sig.sort_unstable();
        idl.sort_unstable();
        let s = fwmkit::coincidence::TagStream::new(0, sig.clone(), 1e-6)
            .map_err(|e| e.to_string())?;
        let i = fwmkit::coincidence::TagStream::new(1, idl.clone(), 1e-6)
            .map_err(|e| e.to_string())?;
        let hist = correlogram(&s, &i, 50, (-10_000, 10_000)).map_err(|e| e.to_string())?;
        let mut oracle = vec![0u64; 400];
        for &ts in &sig {
            for &ti in &idl {
                let d = ti - ts;
                if (-10_000..10_000).contains(&d) {
                    oracle[((d + 10_000) / 50) as usize] += 1;
                }
            }
        }
        check(
            hist.counts == oracle,
            format!("{} total counts match the O(n²) oracle", hist.total_counts()),
        )
    }

    pub fn tagsim_car() -> Result<String, String> {
        let model = SourceModel {
            mean_pairs_per_pulse: 0.1,
            eta_signal: 0.1,
            eta_idler: 0.1,
            ..Default::default()
        };
        let (s, i) = generate_tags(&model, 1.0, 424242).map_err(|e| e.to_string())?;
        let hist = correlogram(&s, &i, 50, (0, 1_000_000)).map_err(|e| e.to_string())?;
        let report = compute_car(&hist, &s, &i, 2000, 4).map_err(|e| e.to_string())?;
        let analytic = analytic_car(&model, 2000).map_err(|e| e.to_string())?;
        let pull = (report.car - analytic).abs() / report.car_sigma;
        check(
            pull < 3.0,
            format!("CAR {:.2} ± {:.2} vs analytic {analytic:.2} ({pull:.1}σ)", report.car, report.car_sigma),
        )
    }
}
