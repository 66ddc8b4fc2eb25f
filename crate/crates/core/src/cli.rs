//! The `sgqt` command line.
//!
//! `sgqt run` resolves a configuration (flags over config file over scenario
//! preset), runs the ensemble and writes CSV summaries, a JSON report, a run
//! manifest and optionally an SVG plot. `sgqt fit` re-fits a power law to a
//! saved CSV.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::SgqtError;
use crate::experiments::{
    run_experiment, EnsembleSummary, ExperimentConfig, ExperimentReport, InitMode, LabeledFit,
    Scenario, SummaryRow,
};
use crate::fit::{fit_power_law, ScalingFit, SlopeConvention};
use crate::measurement::Shots;
use crate::spsa::{GainSchedule, Trajectory};

pub const SEED_ENV: &str = "SGQT_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "sgqt",
    version,
    about = "Self-guided quantum tomography simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an ensemble scenario and write summaries and fits.
    Run(RunArgs),
    /// Fit a power law to a column of a saved CSV.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    /// JSON config (ExperimentConfig fields, any subset) or a run manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated register sizes.
    #[arg(long, value_delimiter = ',')]
    pub qubits: Option<Vec<usize>>,
    /// Shots per estimate, or "infinite".
    #[arg(long)]
    pub shots: Option<Shots>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Base seed; falls back to the config file, then $SGQT_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gain schedule as a,A,b,s,t.
    #[arg(long, value_parser = parse_gains)]
    pub gains: Option<GainSchedule>,
    /// "haar" or "perturbed:STD".
    #[arg(long)]
    pub init: Option<InitMode>,
    #[arg(long)]
    pub depolarizing: Option<f64>,
    #[arg(long = "meas-noise")]
    pub meas_noise: Option<f64>,
    /// γ fit window as lo,hi (iterations, inclusive).
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Iteration counts for η fits, comma-separated.
    #[arg(long = "eta-k", value_delimiter = ',')]
    pub eta_ks: Option<Vec<u64>>,
    #[arg(long, default_value = "sgqt-out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write a log-log SVG plot of the median curves.
    #[arg(long)]
    pub svg: bool,
    /// Also write every trial's trajectory CSV.
    #[arg(long)]
    pub trajectories: bool,
    /// Allow registers above the desk-scale caps (6 full, 8 W-class).
    #[arg(long)]
    pub allow_large: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Fit window lo,hi on the x column; defaults to the last decade.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    #[arg(long, default_value = "k")]
    pub x: String,
    #[arg(long, default_value = "median")]
    pub column: String,
    /// Report +slope (η) instead of −slope (γ).
    #[arg(long)]
    pub growth: bool,
}

fn parse_floats(s: &str, expected: usize, what: &str) -> Result<Vec<f64>, String> {
    let values = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| format!("{what}: {e}"))?;
    if values.len() != expected {
        return Err(format!(
            "{what}: expected {expected} comma-separated numbers"
        ));
    }
    Ok(values)
}

fn parse_gains(s: &str) -> Result<GainSchedule, String> {
    let v = parse_floats(s, 5, "gains a,A,b,s,t")?;
    GainSchedule::new(v[0], v[1], v[2], v[3], v[4]).map_err(|e| e.to_string())
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2, "window lo,hi")?;
    Ok((v[0], v[1]))
}

/// Failure categories mapped onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Partial configuration read from a JSON file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigOverlay {
    scenario: Option<Scenario>,
    n_qubits: Option<Vec<usize>>,
    #[serde(rename = "shots_N")]
    shots: Option<Shots>,
    #[serde(rename = "iterations_k")]
    iterations: Option<u64>,
    n_trials: Option<usize>,
    gains: Option<GainSchedule>,
    init_mode: Option<InitMode>,
    depolarizing_p: Option<f64>,
    measurement_noise_std: Option<f64>,
    base_seed: Option<u64>,
    fit_window: Option<(f64, f64)>,
    eta_ks: Option<Vec<u64>>,
    allow_large: Option<bool>,
}

fn read_overlay(path: &Path) -> Result<ConfigOverlay, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("config {} is not valid JSON: {e}", path.display()))
    })?;
    // a run manifest carries the resolved config under "config"
    if let Some(inner) = value.get_mut("config").filter(|_| value_is_manifest(&text)) {
        value = inner.take();
    }
    serde_json::from_value(value)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

fn value_is_manifest(text: &str) -> bool {
    serde_json::from_str::<RunManifest>(text).is_ok()
}

/// Applies presets, then the config file, then flags.
pub fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let overlay = match &args.config {
        Some(path) => read_overlay(path)?,
        None => ConfigOverlay::default(),
    };
    let scenario = args.scenario.or(overlay.scenario).ok_or_else(|| {
        CliError::Usage("no scenario given (use --scenario or a config file)".into())
    })?;
    let mut cfg = ExperimentConfig::preset(scenario);

    macro_rules! layer {
        ($field:ident, $flag:expr, $file:expr) => {
            if let Some(v) = $flag.or($file) {
                cfg.$field = v;
            }
        };
    }
    layer!(n_qubits, args.qubits.clone(), overlay.n_qubits);
    layer!(shots, args.shots, overlay.shots);
    layer!(iterations, args.iterations, overlay.iterations);
    layer!(n_trials, args.trials, overlay.n_trials);
    layer!(gains, args.gains, overlay.gains);
    layer!(init_mode, args.init, overlay.init_mode);
    layer!(depolarizing_p, args.depolarizing, overlay.depolarizing_p);
    layer!(
        measurement_noise_std,
        args.meas_noise,
        overlay.measurement_noise_std
    );
    layer!(eta_ks, args.eta_ks.clone(), overlay.eta_ks);
    if let Some(w) = args.window.or(overlay.fit_window) {
        cfg.fit_window = Some(w);
    }
    cfg.allow_large = args.allow_large || overlay.allow_large.unwrap_or(false);

    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => Some(s.trim().parse::<u64>().map_err(|_| {
            CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {s:?}"))
        })?),
        Err(_) => None,
    };
    if let Some(seed) = args.seed.or(overlay.base_seed).or(env_seed) {
        cfg.base_seed = seed;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// What a run produced and how to reproduce it.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub scenario: Scenario,
    pub base_seed: u64,
    pub config: ExperimentConfig,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct EnsembleEntry<'a> {
    n_qubits: usize,
    physical_dim: usize,
    n_trials: usize,
    total_shots: u64,
    initial: &'a SummaryRow,
    last: Option<&'a SummaryRow>,
    floor: f64,
    below_floor: &'a [u64],
    summary_csv: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    rescaled_csv: Option<String>,
}

#[derive(Debug, Serialize)]
struct SummaryReport<'a> {
    scenario: Scenario,
    base_seed: u64,
    ensembles: Vec<EnsembleEntry<'a>>,
    gamma_fits: &'a [LabeledFit],
    eta_fits: &'a [LabeledFit],
}

fn fmt_float(v: f64) -> String {
    format!("{v:e}")
}

fn write_summary_csv(path: &Path, summary: &EnsembleSummary) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    w.write_record(["k", "median", "q25", "q75"])
        .map_err(runtime)?;
    for r in &summary.rows {
        w.write_record([
            r.k.to_string(),
            fmt_float(r.median),
            fmt_float(r.q25),
            fmt_float(r.q75),
        ])
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

fn write_trajectory_csv(path: &Path, t: &Trajectory) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    w.write_record(["k", "infidelity", "f_plus", "f_minus"])
        .map_err(runtime)?;
    for r in &t.records {
        w.write_record([
            r.k.to_string(),
            fmt_float(r.infidelity),
            fmt_float(r.f_plus),
            fmt_float(r.f_minus),
        ])
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Log-log plot of the median curves, one polyline per register size.
pub fn render_svg(title: &str, summaries: &[EnsembleSummary]) -> String {
    let (w, h, margin) = (640.0, 440.0, 60.0);
    let points: Vec<Vec<(f64, f64)>> = summaries
        .iter()
        .map(|s| {
            s.rows
                .iter()
                .filter(|r| r.median > 0.0)
                .map(|r| ((r.k as f64).log10(), r.median.log10()))
                .collect()
        })
        .collect();
    let all = points.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, -1.0, 0.0);
    }
    let (x0, x1, y0, y1) = (
        x0.floor(),
        x1.ceil().max(x0.floor() + 1.0),
        y0.floor(),
        y1.ceil().max(y0.floor() + 1.0),
    );
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - y0) / (y1 - y0) * (h - 2.0 * margin);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#,
        w / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * margin,
        h - 2.0 * margin
    );
    for e in x0 as i32..=x1 as i32 {
        let x = sx(e as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{e}</text>"#,
            h - margin + 16.0
        );
    }
    for e in y0 as i32..=y1 as i32 {
        let y = sy(e as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"#,
            margin - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">iterations k</text>"#,
        w / 2.0,
        h - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">median infidelity</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, (s, pts)) in summaries.iter().zip(&points).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        // thin to at most ~400 vertices, evenly in log k
        let mut path = String::new();
        let mut last_x = f64::NEG_INFINITY;
        let step = (x1 - x0) / 400.0;
        for &(x, y) in pts {
            if x - last_x >= step {
                let _ = write!(path, "{:.2},{:.2} ", sx(x), sy(y));
                last_x = x;
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">n={}</text>"#,
            w - margin + 6.0,
            margin + 14.0 * (i as f64 + 1.0),
            s.n_qubits
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn describe_fit(name: &str, fit: &ScalingFit) -> String {
    format!(
        "{name} = {:.4} ± {:.4} (window [{}, {}], {} points)",
        fit.exponent, fit.stderr, fit.window.0, fit.window.1, fit.points
    )
}

fn write_outputs(
    report: &ExperimentReport,
    out: &Path,
    svg: bool,
) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(out)
        .map_err(|e| runtime(format!("cannot create {}: {e}", out.display())))?;
    let cfg = &report.config;
    let mut outputs = Vec::new();
    let mut entries = Vec::new();
    for (raw, fitted) in report.summaries.iter().zip(&report.fitted) {
        let n = raw.n_qubits;
        let name = format!("summary_n{n}.csv");
        write_summary_csv(&out.join(&name), raw)?;
        outputs.push(name.clone());
        let rescaled_csv = if fitted.floor > 0.0 {
            let r = format!("rescaled_n{n}.csv");
            write_summary_csv(&out.join(&r), fitted)?;
            outputs.push(r.clone());
            Some(r)
        } else {
            None
        };
        entries.push(EnsembleEntry {
            n_qubits: n,
            physical_dim: raw.physical_dim,
            n_trials: raw.n_trials,
            total_shots: raw.total_shots,
            initial: &raw.initial,
            last: raw.rows.last(),
            floor: fitted.floor,
            below_floor: &fitted.below_floor,
            summary_csv: name,
            rescaled_csv,
        });
    }
    if let Some(all) = &report.trajectories {
        let dir = out.join("trajectories");
        fs::create_dir_all(&dir).map_err(runtime)?;
        for (&n, trajectories) in cfg.n_qubits.iter().zip(all) {
            for (i, t) in trajectories.iter().enumerate() {
                let name = format!("trajectories/n{n}_trial{i}.csv");
                write_trajectory_csv(&out.join(&name), t)?;
                outputs.push(name);
            }
        }
    }
    let summary = SummaryReport {
        scenario: cfg.scenario,
        base_seed: cfg.base_seed,
        ensembles: entries,
        gamma_fits: &report.gamma_fits,
        eta_fits: &report.eta_fits,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    fs::write(out.join("summary.json"), json + "\n").map_err(runtime)?;
    outputs.push("summary.json".into());
    if svg {
        let title = format!("{} (median infidelity)", cfg.scenario);
        fs::write(out.join("plot.svg"), render_svg(&title, &report.fitted)).map_err(runtime)?;
        outputs.push("plot.svg".into());
    }
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        tool: "sgqt".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        scenario: cfg.scenario,
        base_seed: cfg.base_seed,
        config: cfg.clone(),
        outputs: outputs.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    fs::write(out.join("manifest.json"), json + "\n").map_err(runtime)?;
    Ok(outputs)
}

pub fn run_command(args: &RunArgs) -> Result<ExperimentReport, CliError> {
    let cfg = resolve_config(args)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(runtime)?;
    let report = pool
        .install(|| run_experiment(&cfg, args.trajectories))
        .map_err(runtime)?;
    write_outputs(&report, &args.out, args.svg)?;

    println!(
        "{}: {} trial(s) x {} iteration(s), N = {}, seed {}",
        cfg.scenario, cfg.n_trials, cfg.iterations, cfg.shots, cfg.base_seed
    );
    for (s, g) in report.fitted.iter().zip(&report.gamma_fits) {
        let prefix = format!(
            "n={} d={} median k={}: {:e}",
            s.n_qubits,
            s.physical_dim,
            cfg.iterations,
            s.final_median()
        );
        match (&g.fit, &g.error) {
            (Some(fit), _) => println!("{prefix}; {}", describe_fit("gamma", fit)),
            (None, Some(e)) => println!("{prefix}; gamma fit failed: {e}"),
            _ => println!("{prefix}"),
        }
    }
    for e in &report.eta_fits {
        match (&e.fit, &e.error) {
            (Some(fit), _) => println!("k={}: {}", e.label, describe_fit("eta", fit)),
            (None, Some(err)) => println!("k={}: eta fit failed: {err}", e.label),
            _ => {}
        }
    }
    println!("outputs written to {}", args.out.display());
    Ok(report)
}

/// Reads two numeric columns of a CSV.
pub fn read_columns(path: &Path, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("cannot read header of {}: {e}", path.display())))?
        .clone();
    let index = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Usage(format!("{} has no column {name:?}", path.display())))
    };
    let (xi, yi) = (index(x)?, index(y)?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Usage(e.to_string()))?;
        let parse = |i: usize| {
            record
                .get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Usage(format!("row {}: non-numeric value", line + 2)))
        };
        xs.push(parse(xi)?);
        ys.push(parse(yi)?);
    }
    Ok((xs, ys))
}

pub fn fit_command(args: &FitArgs) -> Result<ScalingFit, CliError> {
    let (xs, ys) = read_columns(&args.input, &args.x, &args.column)?;
    let window = args.window.unwrap_or_else(|| {
        let hi = xs.iter().copied().fold(0.0, f64::max);
        (hi / 10.0, hi)
    });
    let convention = if args.growth {
        SlopeConvention::Growth
    } else {
        SlopeConvention::Decay
    };
    let fit = fit_power_law(&xs, &ys, window, convention).map_err(|e| match e {
        SgqtError::Fit(_) | SgqtError::Domain(_) | SgqtError::Dimension(_) => {
            CliError::Usage(e.to_string())
        }
        other => runtime(other),
    })?;
    let name = if args.growth { "eta" } else { "gamma" };
    println!("{}", describe_fit(name, &fit));
    Ok(fit)
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run_command(args).map(|_| ()),
        Command::Fit(args) => fit_command(args).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
