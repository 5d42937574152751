//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use wkde::deviation::{build_eval_grid, kde_variable, DeviationEngine};
use wkde::estimator::kde_fast;
use wkde::{BandwidthSelector, Density, Sample, StreamId};

use crate::config::{load_config, ExperimentConfig, Resolved};
use crate::error::{LabError, Result};
use crate::harness::{self, fmt_coords, fmt_f64, Outcome};
use crate::output::{write_error, write_experiment, write_profile, Format, OutputDir, RUN_INFO};

#[derive(Debug, Parser)]
#[command(name = "wkde-lab", version, about = "Weighted uniform-in-bandwidth KDE experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Config file: `key=value` lines or a JSON object.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config key; repeatable, later wins.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,

    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// Output directory (default: the config's `out`, else `wkde-out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the configured kernel integrates to one and respects its support and bound.
    ValidateKernel,
    /// Audit the regularity and tail conditions and the centering margin.
    CheckConditions,
    /// Evaluate the estimator on the evaluation grid.
    Estimate,
    /// The per-bandwidth deviation profile and `Δₙ` of one sample.
    Deviation,
    /// Slope test of the median `Δₙ` over `n_list`.
    Boundedness,
    /// Data-driven against fixed `a_n` bandwidth deviation rates.
    Rates,
    /// Running maxima of `Δₙ` along nested sample paths.
    Path,
    /// Growth of `Δₙ` when the tail condition fails (demo, never fails).
    Necessity,
    /// Plug-in functional bound on random `(seed, h)` configurations.
    Functional,
    /// Write the evaluation grid.
    Grid,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ValidateKernel => "validate-kernel",
            Command::CheckConditions => "check-conditions",
            Command::Estimate => "estimate",
            Command::Deviation => "deviation",
            Command::Boundedness => "boundedness",
            Command::Rates => "rates",
            Command::Path => "path",
            Command::Necessity => "necessity",
            Command::Functional => "functional",
            Command::Grid => "grid",
        }
    }
}

/// Parses `args`, runs the subcommand and returns the exit code: 0 on success or PASS, 1 on
/// a failed verdict, 2 on usage or configuration errors, 3 on numerical or IO errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let fallback = cli.out.clone().unwrap_or_else(|| PathBuf::from("wkde-out"));
    match execute(&cli) {
        Ok(outcome) => outcome.exit_code(),
        Err((dir, err)) => {
            let dir = dir.unwrap_or(fallback);
            eprintln!("error: {err}");
            if let Err(w) = write_error(&dir, &err) {
                eprintln!("error: could not write error.json: {w}");
            }
            err.exit_code()
        }
    }
}

type Failure = (Option<PathBuf>, LabError);

fn execute(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let mut cfg = load_config(cli.config.as_deref(), &cli.set).map_err(|e| (None, e))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("wkde-out"));
    let fail = |e: LabError| (Some(dir.clone()), e);
    let started = Instant::now();
    let mut out = OutputDir::create(&dir).map_err(fail)?;
    let outcome = dispatch(cli.command, &cfg, cli.workers, cli.format, &mut out).map_err(fail)?;
    out.write("config.echo", cfg.echo().as_bytes()).map_err(fail)?;
    let info = format!(
        "subcommand={}\nseed={}\nworkers={}\nwall_clock_secs={:.3}\nversion={}\n",
        cli.command.name(),
        cfg.seed,
        cli.workers,
        started.elapsed().as_secs_f64(),
        env!("CARGO_PKG_VERSION"),
    );
    out.write_unlisted(RUN_INFO, info.as_bytes()).map_err(fail)?;
    out.finish().map_err(fail)?;
    println!("{}: {:?} ({})", cli.command.name(), outcome, dir.display());
    Ok(outcome)
}

fn dispatch(
    cmd: Command,
    cfg: &ExperimentConfig,
    workers: usize,
    format: Format,
    out: &mut OutputDir,
) -> Result<Outcome> {
    let experiment = match cmd {
        Command::Boundedness => harness::run_boundedness(cfg, workers)?,
        Command::Rates => harness::run_rates(cfg, workers)?,
        Command::Path => harness::run_path(cfg, workers)?,
        Command::Necessity => harness::run_necessity(cfg, workers)?,
        Command::Functional => harness::run_functional(cfg, workers)?,
        Command::CheckConditions => harness::run_conditions(cfg)?,
        Command::ValidateKernel => return validate_kernel(cfg, format, out),
        Command::Estimate => return estimate(cfg, format, out),
        Command::Deviation => return deviation(cfg, format, out),
        Command::Grid => return grid(cfg, format, out),
    };
    for note in &experiment.notes {
        eprintln!("note: {note}");
    }
    write_experiment(out, &experiment, format)?;
    Ok(experiment.outcome)
}

fn write_summary<T: Serialize>(out: &mut OutputDir, format: Format, value: &T) -> Result<()> {
    if format.json() {
        out.write_json("summary.json", value)?;
    } else {
        let flat = match serde_json::to_value(value)? {
            serde_json::Value::Object(map) => map,
            _ => unreachable!("summaries are objects"),
        };
        let rows: Vec<Vec<String>> = flat
            .into_iter()
            .map(|(k, v)| vec![k, v.as_str().map(String::from).unwrap_or_else(|| v.to_string())])
            .collect();
        out.write_table("summary.csv", &["key".into(), "value".into()], &rows)?;
    }
    Ok(())
}

fn validate_kernel(cfg: &ExperimentConfig, format: Format, out: &mut OutputDir) -> Result<Outcome> {
    let r = cfg.resolve()?;
    let report = r.kernel.validate(64)?;
    write_summary(out, format, &report)?;
    Ok(if report.passed { Outcome::Pass } else { Outcome::Fail })
}

/// The configured data file, or a draw of `cfg.n` points on stream `(seed, 0, n)`.
fn load_sample(cfg: &ExperimentConfig, r: &Resolved) -> Result<Sample> {
    match &cfg.data {
        Some(path) => read_points(Path::new(path), r.model.dim()),
        None => {
            let n = usize::try_from(cfg.n).map_err(|_| LabError::Config("n too large".into()))?;
            Ok(wkde::sample::draw_sample(
                &r.model,
                n,
                StreamId::new(cfg.seed, 0, cfg.n),
            )?)
        }
    }
}

fn read_points(path: &Path, dim: usize) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim {
            return Err(LabError::Config(format!(
                "{} line {}: expected {dim} columns, got {}",
                path.display(),
                i + 1,
                rec.len()
            )));
        }
        for field in rec.iter() {
            points.push(field.parse::<f64>().map_err(|_| {
                LabError::Config(format!("{} line {}: '{field}' is not a number", path.display(), i + 1))
            })?);
        }
    }
    Ok(Sample::from_points(dim, points)?)
}

fn coord_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|k| format!("t{k}")).collect()
}

#[derive(Serialize)]
struct EstimateSummary {
    n: u64,
    bandwidth: String,
    points: usize,
    grid_id: String,
}

fn estimate(cfg: &ExperimentConfig, format: Format, out: &mut OutputDir) -> Result<Outcome> {
    let r = cfg.resolve()?;
    let sample = load_sample(cfg, &r)?;
    let n = sample.len() as u64;
    let grid = build_eval_grid(&r.model, &r.weight, &r.window, n, cfg.grid_cap, None)?;
    let (values, label) = match cfg.h {
        Some(h) => {
            let v = kde_fast(&sample, &r.kernel, h, &grid.points)?;
            (
                v.into_iter().map(|x| (x, h)).collect::<Vec<_>>(),
                format!("fixed h={h}"),
            )
        }
        None => {
            let sel: BandwidthSelector = cfg.selector(&r.kernel)?;
            let v = kde_variable(&sample, &r.kernel, &sel, &r.window, &grid.points)?;
            (v.into_iter().map(|x| (x.value, x.h_used)).collect(), sel.name())
        }
    };
    let d = r.model.dim();
    let mut header = coord_header(d);
    header.extend(["value", "h_used", "in_a_n"].map(String::from));
    let rows: Vec<Vec<String>> = values
        .iter()
        .enumerate()
        .map(|(i, (v, h))| {
            let mut row: Vec<String> = grid.point(i).iter().map(|x| fmt_f64(*x)).collect();
            row.extend([fmt_f64(*v), fmt_f64(*h), grid.a_n_membership[i].to_string()]);
            row
        })
        .collect();
    if format.csv() {
        out.write_table("estimate.csv", &header, &rows)?;
    }
    if format.json() {
        let objects: Vec<serde_json::Map<String, serde_json::Value>> = rows
            .iter()
            .map(|row| {
                header
                    .iter()
                    .cloned()
                    .zip(row.iter().map(|s| serde_json::Value::from(s.clone())))
                    .collect()
            })
            .collect();
        out.write_json("estimate.json", &objects)?;
    }
    let summary = EstimateSummary {
        n,
        bandwidth: label,
        points: grid.len(),
        grid_id: grid.grid_id_hex(),
    };
    write_summary(out, format, &summary)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct DeviationSummary {
    n: u64,
    delta_n: f64,
    h_at_max: f64,
    argsup_coords: String,
    bandwidths: usize,
    grid_id: String,
    grid_capped: bool,
}

fn deviation(cfg: &ExperimentConfig, format: Format, out: &mut OutputDir) -> Result<Outcome> {
    let r = cfg.resolve()?;
    let sample = load_sample(cfg, &r)?;
    let n = sample.len() as u64;
    let grid = build_eval_grid(&r.model, &r.weight, &r.window, n, cfg.grid_cap, Some(&sample))?;
    let engine = DeviationEngine::new(&r.kernel, cfg.quad_points)?;
    let dev = engine.uniform_deviation(&sample, &r.model, &r.weight, &r.window, cfg.subgrid_k, &grid)?;
    write_profile(out, &dev, format)?;
    let best = &dev.profile[dev.argmax];
    let summary = DeviationSummary {
        n,
        delta_n: dev.delta_n,
        h_at_max: best.h,
        argsup_coords: fmt_coords(&best.argsup),
        bandwidths: dev.profile.len(),
        grid_id: grid.grid_id_hex(),
        grid_capped: grid.capped,
    };
    write_summary(out, format, &summary)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct GridSummary {
    n: u64,
    points: usize,
    a_n_points: usize,
    per_axis: usize,
    spacing: f64,
    capped: bool,
    region_r: f64,
    grid_id: String,
}

fn grid(cfg: &ExperimentConfig, format: Format, out: &mut OutputDir) -> Result<Outcome> {
    let r = cfg.resolve()?;
    let sample = match &cfg.data {
        Some(_) => Some(load_sample(cfg, &r)?),
        None => None,
    };
    let n = sample.as_ref().map_or(cfg.n, |s| s.len() as u64);
    let g = build_eval_grid(&r.model, &r.weight, &r.window, n, cfg.grid_cap, sample.as_ref())?;
    let mut header = coord_header(g.dim);
    header.extend(["density", "psi", "in_a_n"].map(String::from));
    let rows: Vec<Vec<String>> = (0..g.len())
        .map(|i| {
            let mut row: Vec<String> = g.point(i).iter().map(|x| fmt_f64(*x)).collect();
            row.extend([
                fmt_f64(g.density[i]),
                fmt_f64(g.psi[i]),
                g.a_n_membership[i].to_string(),
            ]);
            row
        })
        .collect();
    if format.csv() {
        out.write_table("grid.csv", &header, &rows)?;
    }
    let summary = GridSummary {
        n,
        points: g.len(),
        a_n_points: g.member_count(),
        per_axis: g.per_axis,
        spacing: g.spacing,
        capped: g.capped,
        region_r: g.region_r_used,
        grid_id: g.grid_id_hex(),
    };
    write_summary(out, format, &summary)?;
    Ok(Outcome::Pass)
}
