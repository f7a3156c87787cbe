//! Scenario-driven front end: separation runs, closed-loop batches and planar
//! set exports, each written as JSON, CSV and SVG artifacts.
//!
//! Every artifact is written to a temporary sibling first and renamed into
//! place, so a file is either absent or complete.

pub mod boundary;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use afdi_core::ccg::Vector;
use afdi_core::par::{self, Exec};
use afdi_core::reach::reach;
use afdi_core::runtime::{run_episode, EpisodeLog};
use afdi_core::scenario::{load_scenario, Method, Scenario, ScenarioConfig, ScheduleSpec};
use afdi_core::separation::{separation_input, svd_separation_input, SeparationResult};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use thiserror::Error;

pub use boundary::planar_boundary;

#[derive(Debug, Parser)]
#[command(name = "afdi", version, about = "Set-based active fault diagnosis runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a separating input sequence.
    Separate(SeparateArgs),
    /// Closed-loop detection episodes over a batch of seeds.
    Simulate(SimulateArgs),
    /// Planar boundary samples of every mode's reachable set.
    ExportSets(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ccg,
    Svd,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ccg => Method::Ccg,
            MethodArg::Svd => Method::Svd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Vertex,
    PerStep,
}

impl From<ScheduleArg> for ScheduleSpec {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Vertex => ScheduleSpec::Vertex,
            ScheduleArg::PerStep => ScheduleSpec::PerStep,
        }
    }
}

/// Overrides shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Bundled scenario name or path to a JSON config.
    pub scenario: String,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Boundary rays for the separation sampler.
    #[arg(long)]
    pub rays: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    #[arg(long, default_value = "afdi-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SeparateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Exit with status 0 even when the certificate fails.
    #[arg(long)]
    pub allow_uncertified: bool,
    /// Boundary points per mode in the CSV and SVG.
    #[arg(long, default_value_t = 64)]
    pub boundary_rays: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Plant mode, by name or index.
    #[arg(long, default_value = "1")]
    pub plant: String,
    /// Number of episodes; seeds run from `--seed` upward.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Steps per episode; the scenario value when absent.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Reuse the input sequence of an earlier `separate` report.
    #[arg(long, conflicts_with = "no_excitation")]
    pub excitation: Option<PathBuf>,
    /// Track only, never excite.
    #[arg(long)]
    pub no_excitation: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Two coordinates of the lifted leading block, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub coords: Option<Vec<usize>>,
    /// Input sequence in time order, comma separated; zero when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub input: Option<Vec<f64>>,
    /// Boundary points per mode.
    #[arg(long = "boundary-rays", default_value_t = 360)]
    pub boundary_rays: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] afdi_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 3 for configuration and usage errors, 4 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(afdi_core::Error::Config { .. }) | CliError::Usage(_) => 3,
            CliError::Core(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    #[serde(flatten)]
    pub result: SeparationResult,
    /// Wall time of the whole separation call.
    pub total_ms: f64,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchSummary {
    pub scenario: String,
    pub plant: usize,
    pub plant_name: String,
    pub excitation: Option<String>,
    pub excitation_certified: Option<bool>,
    pub episodes: usize,
    /// Episodes that ended with the plant mode as the only survivor.
    pub isolation_rate: f64,
    pub mean_steps_to_isolation: Option<f64>,
    pub detection_rate: f64,
    pub true_mode_eliminations: usize,
    pub alarms: usize,
    pub artifacts: Vec<PathBuf>,
}

/// What a finished command tells `main` about its exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Uncertified,
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Separate(a) => {
            let report = cmd_separate(&a)?;
            Ok(if report.result.certified || a.allow_uncertified {
                Outcome::Done
            } else {
                Outcome::Uncertified
            })
        }
        Command::Simulate(a) => cmd_simulate(&a).map(|_| Outcome::Done),
        Command::ExportSets(a) => cmd_export_sets(&a).map(|_| Outcome::Done),
    }
}

fn configure(common: &Common) -> CliResult<ScenarioConfig> {
    let mut cfg = load_scenario(&common.scenario)?;
    if let Some(m) = common.method {
        cfg.method = m.into();
    }
    if let Some(r) = common.rays {
        cfg.sampling.n_rays = Some(r);
    }
    if let Some(s) = common.seed {
        cfg.sampling.seed = s;
    }
    if let Some(s) = common.schedule {
        cfg.schedule = s.into();
    }
    Ok(cfg)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Ccg => "ccg",
        Method::Svd => "svd",
    }
}

/// Writes `contents` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn separate(scenario: &Scenario) -> CliResult<(SeparationResult, f64)> {
    let start = Instant::now();
    let result = match scenario.config.method {
        Method::Ccg => separation_input(&scenario.problem(), &scenario.sampling)?,
        Method::Svd => svd_separation_input(&scenario.problem(), &scenario.svd)?,
    };
    Ok((result, start.elapsed().as_secs_f64() * 1e3))
}

/// Boundary loops of every mode's leading block at `u`, projected on `coords`.
fn mode_boundaries(scenario: &Scenario, u: &Vector, coords: &[usize], n: usize) -> CliResult<Vec<(String, Vec<[f64; 2]>)>> {
    if coords.len() != 2 {
        return Err(CliError::Usage(format!(
            "only planar export is supported; got {} coordinates",
            coords.len()
        )));
    }
    let p = scenario.problem();
    let clouds = par::map(&scenario.modes, Exec::Auto, |_, mode| -> afdi_core::Result<_> {
        let r = reach(mode, p.horizon, p.sets, p.schedule, p.space)?;
        let z = boundary::projected_block(&r, u, coords)?;
        Ok((mode.name.clone(), planar_boundary(&z, n, p.backend)?))
    });
    clouds.into_iter().map(|c| c.map_err(CliError::from)).collect()
}

fn boundary_csv(clouds: &[(String, Vec<[f64; 2]>)]) -> String {
    let mut out = String::from("mode,x,y\n");
    for (name, pts) in clouds {
        for p in pts {
            out.push_str(&format!("{name},{:.12e},{:.12e}\n", p[0], p[1]));
        }
    }
    out
}

fn coord_labels(scenario: &Scenario, coords: &[usize]) -> [String; 2] {
    let block = match scenario.config.space {
        afdi_core::scenario::SpaceSpec::State => "x",
        afdi_core::scenario::SpaceSpec::Output => "y",
    };
    [format!("{block}[{}]", coords[0]), format!("{block}[{}]", coords[1])]
}

fn format_sequence(u: &[f64]) -> String {
    let parts: Vec<String> = u.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn cmd_separate(args: &SeparateArgs) -> CliResult<RunReport> {
    let cfg = configure(&args.common)?;
    let scenario = cfg.build()?;
    let method = method_name(cfg.method);
    info!("separating `{}` with {method}", cfg.name);
    let (result, total_ms) = separate(&scenario)?;
    if !result.certified {
        warn!("separation of `{}` is not certified", cfg.name);
    }
    let out = &args.common.out;
    let stem = format!("{}-{method}", cfg.name);
    let json_path = out.join(format!("{stem}.json"));
    let csv_path = out.join(format!("{stem}-boundary.csv"));
    let svg_path = out.join(format!("{stem}.svg"));

    let coords = cfg.export.coords;
    let clouds = mode_boundaries(&scenario, &result.u_star(), &coords, args.boundary_rays)?;
    write_atomic(&csv_path, &boundary_csv(&clouds))?;
    let labels = coord_labels(&scenario, &coords);
    let series: Vec<svg::Series> = clouds.iter().map(|(n, p)| svg::Series { name: n, points: p }).collect();
    let caption = vec![
        format!("u* = {}", format_sequence(&result.u_star)),
        format!("cost {:.4}, certified {}", result.cost, result.certified),
    ];
    write_atomic(&svg_path, &svg::plot(&series, svg::Style::Scatter, [&labels[0], &labels[1]], &caption))?;

    let report = RunReport {
        scenario: cfg.name.clone(),
        result,
        total_ms,
        artifacts: vec![json_path.clone(), csv_path, svg_path],
    };
    write_atomic(&json_path, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(report)
}

/// `u_star` of a report written by `separate`.
pub fn read_excitation(path: &Path) -> CliResult<SeparationResult> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let bad = |m: &str| CliError::Usage(format!("{}: {m}", path.display()));
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e.to_string()))?;
    let u_star = v["u_star"]
        .as_array()
        .and_then(|a| a.iter().map(serde_json::Value::as_f64).collect::<Option<Vec<f64>>>())
        .ok_or_else(|| bad("missing numeric `u_star`"))?;
    Ok(SeparationResult {
        method: v["method"].as_str().unwrap_or("file").to_string(),
        u_star,
        cost: v["cost"].as_f64().unwrap_or(f64::NAN),
        certified: v["certified"].as_bool().unwrap_or(false),
        certificates: Vec::new(),
        rays_used: 0,
        seed: 0,
        ray_solves: Default::default(),
        candidates: 0,
        timings_ms: Default::default(),
        iterations: 0,
        sigma_history: Vec::new(),
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<BatchSummary> {
    let mut cfg = configure(&args.common)?;
    if let Some(steps) = args.steps {
        cfg.runtime.steps = steps;
    }
    let scenario = cfg.build()?;
    let plant = scenario
        .mode_index(&args.plant)
        .ok_or_else(|| CliError::Usage(format!("plant `{}` is not a mode of `{}`", args.plant, cfg.name)))?;
    let excitation = if args.no_excitation {
        None
    } else if let Some(path) = &args.excitation {
        Some(read_excitation(path)?)
    } else {
        Some(separate(&scenario)?.0)
    };
    if let Some(e) = &excitation {
        if e.u_star.len() != scenario.horizon() * scenario.n_u() {
            return Err(CliError::Usage(format!(
                "excitation has {} entries, expected {}",
                e.u_star.len(),
                scenario.horizon() * scenario.n_u()
            )));
        }
        if !e.certified {
            warn!("excitation sequence is not certified");
        }
    }
    let base = args.common.seed.unwrap_or(0);
    let seeds: Vec<u64> = (base..base + args.seeds).collect();
    let logs = par::map(&seeds, Exec::Auto, |_, &seed| run_episode(&scenario, plant, seed, excitation.as_ref()))
        .into_iter()
        .collect::<afdi_core::Result<Vec<EpisodeLog>>>()?;

    let out = &args.common.out;
    let mut artifacts = Vec::new();
    for log in &logs {
        let path = out.join(format!("{}-plant{plant}-seed{}.csv", cfg.name, log.seed));
        write_atomic(&path, &log.to_csv())?;
        artifacts.push(path);
    }
    let n = logs.len().max(1) as f64;
    let isolated: Vec<&EpisodeLog> = logs.iter().filter(|l| l.isolated_correctly()).collect();
    let steps: Vec<f64> = isolated.iter().filter_map(|l| l.isolated_at).map(|t| t as f64).collect();
    let summary_path = out.join(format!("{}-plant{plant}-summary.json", cfg.name));
    artifacts.push(summary_path.clone());
    let summary = BatchSummary {
        scenario: cfg.name.clone(),
        plant,
        plant_name: scenario.modes[plant].name.clone(),
        excitation: excitation.as_ref().map(|e| e.method.clone()),
        excitation_certified: excitation.as_ref().map(|e| e.certified),
        episodes: logs.len(),
        isolation_rate: isolated.len() as f64 / n,
        mean_steps_to_isolation: (!steps.is_empty()).then(|| steps.iter().sum::<f64>() / steps.len() as f64),
        detection_rate: logs.iter().filter(|l| l.detected_at.is_some()).count() as f64 / n,
        true_mode_eliminations: logs.iter().filter(|l| l.true_mode_eliminated).count(),
        alarms: logs.iter().filter(|l| l.alarm).count(),
        artifacts,
    };
    write_atomic(&summary_path, &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    Ok(summary)
}

pub fn cmd_export_sets(args: &ExportArgs) -> CliResult<Vec<PathBuf>> {
    let cfg = configure(&args.common)?;
    let scenario = cfg.build()?;
    let coords = args.coords.clone().unwrap_or_else(|| cfg.export.coords.to_vec());
    let dim = scenario.horizon() * scenario.n_u();
    let u = match &args.input {
        Some(v) if v.len() != dim => {
            return Err(CliError::Usage(format!("--input needs {dim} values, got {}", v.len())));
        }
        Some(v) => Vector::from_column_slice(v),
        None => Vector::zeros(dim),
    };
    let clouds = mode_boundaries(&scenario, &u, &coords, args.boundary_rays)?;
    let stem = format!("{}-sets", cfg.name);
    let csv_path = args.common.out.join(format!("{stem}.csv"));
    let svg_path = args.common.out.join(format!("{stem}.svg"));
    write_atomic(&csv_path, &boundary_csv(&clouds))?;
    let labels = coord_labels(&scenario, &coords);
    let series: Vec<svg::Series> = clouds.iter().map(|(n, p)| svg::Series { name: n, points: p }).collect();
    let caption = vec![format!("u = {}", format_sequence(u.as_slice()))];
    write_atomic(&svg_path, &svg::plot(&series, svg::Style::Loop, [&labels[0], &labels[1]], &caption))?;
    Ok(vec![csv_path, svg_path])
}
