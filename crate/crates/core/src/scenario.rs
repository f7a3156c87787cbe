//! JSON scenario files and the two bundled scenarios.
//!
//! Matrices are row-major arrays whose entries are numbers or expression
//! strings. Expressions see the scenario `params`, the mode's `fault` as `f`
//! and the scheduling vector as `th1, th2, …`. Unknown fields are rejected and
//! every error names the offending field path.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ccg::{Ccg, Mat, Vector};
use crate::conic::{Backend, SolverSettings};
use crate::error::{Error, Result};
use crate::reach::{Cell, LpvMode, MatrixFn, Schedule, Space, UncertaintySets};
use crate::separation::{CostSpec, SamplingParams, SeparationProblem, SvdSettings};

const BUNDLED: [(&str, &str); 2] = [
    ("vehicle-s5", include_str!("../scenarios/vehicle-s5.json")),
    ("quadrotor-s5", include_str!("../scenarios/quadrotor-s5.json")),
];

/// Names accepted by [`load_scenario`] without a file.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Expr(String),
}

pub type MatrixSpec = Vec<Vec<Entry>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub name: String,
    /// Bound to `f` in expressions.
    #[serde(default = "one")]
    pub fault: f64,
    pub a: MatrixSpec,
    pub b: MatrixSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Entry>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SetSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Point(Vec<f64>),
}

impl SetSpec {
    pub fn build(&self) -> Result<Ccg> {
        match self {
            SetSpec::Ball { center, radius } => Ccg::ball(Vector::from_column_slice(center), *radius),
            SetSpec::Box { lo, hi } => Ccg::boxed(lo, hi),
            SetSpec::Point(p) => Ok(Ccg::point(Vector::from_column_slice(p))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SetSpec::Ball { center, .. } => center.len(),
            SetSpec::Box { lo, .. } => lo.len(),
            SetSpec::Point(p) => p.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetsSpec {
    pub x0: SetSpec,
    pub u: SetSpec,
    pub w: SetSpec,
    pub v: SetSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceSpec {
    #[default]
    State,
    Output,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleSpec {
    #[default]
    Vertex,
    PerStep,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Ccg,
    Svd,
}

impl From<SpaceSpec> for Space {
    fn from(s: SpaceSpec) -> Self {
        match s {
            SpaceSpec::State => Space::State,
            SpaceSpec::Output => Space::Output,
        }
    }
}

impl From<ScheduleSpec> for Schedule {
    fn from(s: ScheduleSpec) -> Self {
        match s {
            ScheduleSpec::Vertex => Schedule::VertexConstant,
            ScheduleSpec::PerStep => Schedule::PerStepHull,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub gamma: f64,
    /// Per-step input weight; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<Vec<Vec<f64>>>,
    /// Tracking stage weight; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    /// Tracking terminal weight; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    /// Tracking reference; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rays: Option<usize>,
    #[serde(default = "default_eps")]
    pub eps_inflate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub refine: bool,
}

fn default_eps() -> f64 {
    0.01
}

fn yes() -> bool {
    true
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_rays: None,
            eps_inflate: default_eps(),
            seed: 0,
            refine: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            tol: s.tol,
            max_iter: s.max_iter,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvdConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvdConfig {
    fn default() -> Self {
        let s = SvdSettings::default();
        Self {
            tol: s.tol,
            max_iter: s.max_iter,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeConfig {
    pub steps: usize,
    /// Order reduction period of the bank sets.
    pub reduce_every: usize,
    /// Reduce earlier once a set has more latent variables than this.
    pub max_latent: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            steps: 20,
            reduce_every: 5,
            max_latent: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    pub coords: [usize; 2],
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { coords: [0, 1] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Scheduling vertices shared by every mode.
    pub vertices: Vec<Vec<f64>>,
    /// The first mode is nominal.
    pub modes: Vec<ModeSpec>,
    pub sets: SetsSpec,
    pub horizon: usize,
    #[serde(default)]
    pub space: SpaceSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub cost: CostConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub svd: SvdConfig,
    #[serde(default)]
    pub runtime: RuntimeConfig,
    #[serde(default)]
    pub export: ExportConfig,
}

fn config_err(path: impl Into<String>, message: impl ToString) -> Error {
    Error::Config {
        path: path.into(),
        message: message.to_string(),
    }
}

fn matrix_fn(spec: &MatrixSpec, path: &str) -> Result<MatrixFn> {
    let rows = spec.len();
    let cols = spec.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(config_err(path, "matrix must be nonempty"));
    }
    let mut cells = Vec::with_capacity(rows * cols);
    for (i, row) in spec.iter().enumerate() {
        if row.len() != cols {
            return Err(config_err(format!("{path}[{i}]"), format!("expected {cols} entries, got {}", row.len())));
        }
        for (j, e) in row.iter().enumerate() {
            let cell = match e {
                Entry::Number(v) => Cell::Value(*v),
                Entry::Expr(s) => Cell::parse(s).map_err(|err| config_err(format!("{path}[{i}][{j}]"), err))?,
            };
            cells.push(cell);
        }
    }
    MatrixFn::new(rows, cols, cells).map_err(|e| config_err(path, e))
}

fn numeric(rows: &[Vec<f64>], path: &str) -> Result<Mat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(config_err(path, "ragged matrix"));
    }
    Ok(Mat::from_fn(n, m, |i, j| rows[i][j]))
}

fn square_or_identity(m: &Option<Vec<Vec<f64>>>, n: usize, path: &str) -> Result<Mat> {
    match m {
        None => Ok(Mat::identity(n, n)),
        Some(rows) => {
            let m = numeric(rows, path)?;
            if m.shape() != (n, n) {
                return Err(config_err(path, format!("expected {n}×{n}, got {}×{}", m.nrows(), m.ncols())));
            }
            Ok(m)
        }
    }
}

/// A validated scenario with every object the pipelines need.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub modes: Vec<LpvMode>,
    pub sets: UncertaintySets,
    pub cost: CostSpec,
    pub backend: Backend,
    pub sampling: SamplingParams,
    pub svd: SvdSettings,
    /// Tracking weights and reference.
    pub q: Mat,
    pub p: Mat,
    pub reference: Vector,
}

impl Scenario {
    pub fn space(&self) -> Space {
        self.config.space.into()
    }

    pub fn schedule(&self) -> Schedule {
        self.config.schedule.into()
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn n_u(&self) -> usize {
        self.modes[0].n_u()
    }

    pub fn problem(&self) -> SeparationProblem<'_> {
        SeparationProblem {
            modes: &self.modes,
            sets: &self.sets,
            horizon: self.config.horizon,
            schedule: self.schedule(),
            space: self.space(),
            cost: &self.cost,
            backend: &self.backend,
        }
    }

    pub fn mode_index(&self, key: &str) -> Option<usize> {
        self.modes
            .iter()
            .position(|m| m.name == key)
            .or_else(|| key.parse::<usize>().ok().filter(|&i| i < self.modes.len()))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(path, e.into_inner())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config fields serialize")
    }

    pub fn build(&self) -> Result<Scenario> {
        if self.horizon == 0 {
            return Err(config_err("horizon", "must be at least 1"));
        }
        if self.modes.len() < 2 {
            return Err(config_err("modes", "need at least two modes"));
        }
        if !(0.0..=1.0).contains(&self.cost.gamma) {
            return Err(config_err("cost.gamma", "must lie in [0, 1]"));
        }
        let vertices: Vec<Vector> = self.vertices.iter().map(|v| Vector::from_column_slice(v)).collect();
        let mut modes = Vec::with_capacity(self.modes.len());
        for (k, spec) in self.modes.iter().enumerate() {
            let path = |f: &str| format!("modes[{k}].{f}");
            let mut mode = LpvMode::new(
                &spec.name,
                vertices.clone(),
                self.params.clone(),
                matrix_fn(&spec.a, &path("a"))?,
                matrix_fn(&spec.b, &path("b"))?,
            )
            .map_err(|e| config_err(format!("modes[{k}]"), e))?;
            mode.fault = spec.fault;
            let nx = mode.n_x();
            if let Some(c) = &spec.c {
                mode.c = matrix_fn(c, &path("c"))?;
            }
            let ny = mode.n_y();
            if let Some(e) = &spec.e {
                mode.e = matrix_fn(e, &path("e"))?;
            }
            mode.f = match &spec.f {
                Some(f) => matrix_fn(f, &path("f"))?,
                None => MatrixFn::constant(&Mat::identity(ny, ny)),
            };
            if let Some(r) = &spec.r {
                mode.r = matrix_fn(&r.iter().map(|e| vec![e.clone()]).collect(), &path("r"))?;
            }
            mode.s = match &spec.s {
                Some(s) => matrix_fn(&s.iter().map(|e| vec![e.clone()]).collect(), &path("s"))?,
                None => MatrixFn::column(&Vector::zeros(ny)),
            };
            mode.validate().map_err(|e| config_err(format!("modes[{k}]"), e))?;
            if modes
                .first()
                .is_some_and(|m0: &LpvMode| (m0.n_x(), m0.n_u(), m0.n_y()) != (nx, mode.n_u(), ny))
            {
                return Err(config_err(format!("modes[{k}]"), "dimensions differ from the first mode"));
            }
            modes.push(mode);
        }
        let backend = Backend {
            settings: SolverSettings {
                tol: self.solver.tol,
                max_iter: self.solver.max_iter,
            },
            ..Backend::default()
        };
        let set = |s: &SetSpec, name: &str, dim: usize| -> Result<Ccg> {
            if s.dim() != dim {
                return Err(config_err(format!("sets.{name}"), format!("expected dimension {dim}, got {}", s.dim())));
            }
            s.build().map_err(|e| config_err(format!("sets.{name}"), e))
        };
        let m0 = &modes[0];
        let sets = UncertaintySets::new(
            set(&self.sets.x0, "x0", m0.n_x())?,
            set(&self.sets.u, "u", m0.n_u())?,
            set(&self.sets.w, "w", m0.n_w())?,
            set(&self.sets.v, "v", m0.n_v())?,
            &backend,
        )
        .map_err(|e| config_err("sets.u", e))?;
        let r1 = square_or_identity(&self.cost.r1, m0.n_u(), "cost.r1")?;
        let cost = CostSpec::standard(&r1, self.horizon, self.cost.gamma).map_err(|e| config_err("cost", e))?;
        let q = square_or_identity(&self.cost.q, m0.n_x(), "cost.q")?;
        let p = square_or_identity(&self.cost.p, m0.n_x(), "cost.p")?;
        let reference = match &self.cost.reference {
            None => Vector::zeros(m0.n_x()),
            Some(r) if r.len() == m0.n_x() => Vector::from_column_slice(r),
            Some(r) => return Err(config_err("cost.reference", format!("expected {} entries, got {}", m0.n_x(), r.len()))),
        };
        let out_dim = match self.space {
            SpaceSpec::State => m0.n_x(),
            SpaceSpec::Output => m0.n_y(),
        };
        if self.export.coords.iter().any(|&c| c >= out_dim) || self.export.coords[0] == self.export.coords[1] {
            return Err(config_err("export.coords", format!("need two distinct indices below {out_dim}")));
        }
        if self.sampling.eps_inflate < 0.0 {
            return Err(config_err("sampling.eps_inflate", "must be nonnegative"));
        }
        Ok(Scenario {
            config: self.clone(),
            modes,
            sets,
            cost,
            backend,
            sampling: SamplingParams {
                n_rays: self.sampling.n_rays,
                eps_inflate: self.sampling.eps_inflate,
                seed: self.sampling.seed,
                refine: self.sampling.refine,
            },
            svd: SvdSettings {
                tol: self.svd.tol,
                max_iter: self.svd.max_iter,
            },
            q,
            p,
            reference,
        })
    }
}

/// A bundled scenario by name, or a JSON file by path.
pub fn load_scenario(name_or_path: &str) -> Result<ScenarioConfig> {
    if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == name_or_path) {
        return ScenarioConfig::from_json(text);
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path).map_err(|e| {
        config_err(
            name_or_path,
            format!("{e}; bundled scenarios are {}", bundled_names().join(", ")),
        )
    })?;
    ScenarioConfig::from_json(&text)
}
