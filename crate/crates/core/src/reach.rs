//! LPV modes and reachable sets lifted into the joint state–control space.
//!
//! A lifted set lives in `ℝ^{n_s + N·n_u}`: the terminal state (or output)
//! block first, then the inputs `u_0, …, u_{N−1}` in time order. All copies of
//! the input coordinates share one latent block, so the pairing between an
//! input sequence and the states it produces is kept exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use evalexpr::{ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};

use crate::ccg::{Ccg, Mat, Vector};
use crate::conic::Backend;
use crate::error::{check_dim, Error, Result};
use crate::par::{self, Exec};

/// A scalar entry: a literal or an expression over parameters, `f` and `th1…`.
#[derive(Clone)]
pub enum Cell {
    Value(f64),
    Expr { source: String, node: Node<DefaultNumericTypes> },
}

impl Cell {
    pub fn parse(source: &str) -> Result<Self> {
        if let Ok(v) = source.trim().parse::<f64>() {
            return Ok(Cell::Value(v));
        }
        let node = evalexpr::build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| Error::Invalid(format!("expression `{source}`: {e}")))?;
        Ok(Cell::Expr {
            source: source.to_string(),
            node,
        })
    }

    fn eval(&self, ctx: &HashMapContext<DefaultNumericTypes>) -> Result<f64> {
        match self {
            Cell::Value(v) => Ok(*v),
            Cell::Expr { source, node } => {
                let v = node
                    .eval_number_with_context(ctx)
                    .map_err(|e| Error::Invalid(format!("expression `{source}`: {e}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Invalid(format!("expression `{source}` is not finite")))
                }
            }
        }
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => write!(f, "{v:?}"),
            Cell::Expr { source, .. } => write!(f, "`{source}`"),
        }
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Cell::Value(a), Cell::Value(b)) => a.to_bits() == b.to_bits(),
            (Cell::Expr { source: a, .. }, Cell::Expr { source: b, .. }) => a == b,
            _ => false,
        }
    }
}

/// A matrix whose entries may depend on the scheduling vector. Row-major cells.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFn {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

impl MatrixFn {
    pub fn new(rows: usize, cols: usize, cells: Vec<Cell>) -> Result<Self> {
        check_dim("matrix cell count", rows * cols, cells.len())?;
        Ok(Self { rows, cols, cells })
    }

    pub fn constant(m: &Mat) -> Self {
        let cells = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| Cell::Value(m[(i, j)]))
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            cells,
        }
    }

    pub fn column(v: &Vector) -> Self {
        Self::constant(&Mat::from_column_slice(v.len(), 1, v.as_slice()))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    fn eval(&self, ctx: &HashMapContext<DefaultNumericTypes>) -> Result<Mat> {
        let mut m = Mat::zeros(self.rows, self.cols);
        for (k, cell) in self.cells.iter().enumerate() {
            m[(k / self.cols, k % self.cols)] = cell.eval(ctx)?;
        }
        Ok(m)
    }
}

/// Numeric system matrices at one scheduling vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub e: Mat,
    pub f: Mat,
    pub r: Vector,
    pub s: Vector,
}

/// One system mode `x⁺ = A x + B u + r + E w`, `y = C x + s + F v`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpvMode {
    pub name: String,
    /// Vertices of the scheduling polytope, bound to `th1, th2, …`.
    pub vertices: Vec<Vector>,
    /// Named constants visible to every expression.
    pub params: BTreeMap<String, f64>,
    /// Actuator effectiveness, bound to `f`.
    pub fault: f64,
    pub a: MatrixFn,
    pub b: MatrixFn,
    pub c: MatrixFn,
    pub e: MatrixFn,
    pub f: MatrixFn,
    pub r: MatrixFn,
    pub s: MatrixFn,
}

impl LpvMode {
    /// Mode with full-state output, identity noise maps and zero offsets.
    pub fn new(name: &str, vertices: Vec<Vector>, params: BTreeMap<String, f64>, a: MatrixFn, b: MatrixFn) -> Result<Self> {
        let nx = a.rows;
        let mode = Self {
            name: name.to_string(),
            vertices,
            params,
            fault: 1.0,
            a,
            b,
            c: MatrixFn::constant(&Mat::identity(nx, nx)),
            e: MatrixFn::constant(&Mat::identity(nx, nx)),
            f: MatrixFn::constant(&Mat::identity(nx, nx)),
            r: MatrixFn::column(&Vector::zeros(nx)),
            s: MatrixFn::column(&Vector::zeros(nx)),
        };
        mode.validate()?;
        Ok(mode)
    }

    /// Single-vertex mode with constant `A`, `B`.
    pub fn lti(name: &str, a: &Mat, b: &Mat) -> Result<Self> {
        Self::new(
            name,
            vec![Vector::zeros(0)],
            BTreeMap::new(),
            MatrixFn::constant(a),
            MatrixFn::constant(b),
        )
    }

    pub fn n_x(&self) -> usize {
        self.a.rows
    }

    pub fn n_u(&self) -> usize {
        self.b.cols
    }

    pub fn n_y(&self) -> usize {
        self.c.rows
    }

    pub fn n_w(&self) -> usize {
        self.e.cols
    }

    pub fn n_v(&self) -> usize {
        self.f.cols
    }

    /// Checks shapes and evaluates every vertex once.
    pub fn validate(&self) -> Result<()> {
        let (nx, nu, ny) = (self.n_x(), self.n_u(), self.n_y());
        let expect = |what: &'static str, m: &MatrixFn, rows: usize, cols: Option<usize>| -> Result<()> {
            check_dim(what, rows, m.rows)?;
            if let Some(c) = cols {
                check_dim(what, c, m.cols)?;
            }
            Ok(())
        };
        expect("A shape", &self.a, nx, Some(nx))?;
        expect("B rows", &self.b, nx, None)?;
        expect("C columns", &self.c, ny, Some(nx))?;
        expect("E rows", &self.e, nx, None)?;
        expect("F rows", &self.f, ny, None)?;
        expect("r shape", &self.r, nx, Some(1))?;
        expect("s shape", &self.s, ny, Some(1))?;
        if nu == 0 {
            return Err(Error::Invalid(format!("mode `{}` has no inputs", self.name)));
        }
        let Some(first) = self.vertices.first() else {
            return Err(Error::Invalid(format!("mode `{}` has no scheduling vertices", self.name)));
        };
        for v in &self.vertices {
            check_dim("scheduling vertex length", first.len(), v.len())?;
            self.at(v)?;
        }
        Ok(())
    }

    fn context(&self, theta: &Vector) -> Result<HashMapContext<DefaultNumericTypes>> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        let mut set = |k: &str, v: f64| {
            ctx.set_value(k.to_string(), Value::from_float(v))
                .map_err(|e| Error::Invalid(format!("binding `{k}`: {e}")))
        };
        for (k, v) in &self.params {
            set(k, *v)?;
        }
        set("f", self.fault)?;
        for (i, t) in theta.iter().enumerate() {
            set(&format!("th{}", i + 1), *t)?;
        }
        Ok(ctx)
    }

    /// System matrices at `theta`.
    pub fn at(&self, theta: &Vector) -> Result<Realization> {
        let ctx = self.context(theta)?;
        Ok(Realization {
            a: self.a.eval(&ctx)?,
            b: self.b.eval(&ctx)?,
            c: self.c.eval(&ctx)?,
            e: self.e.eval(&ctx)?,
            f: self.f.eval(&ctx)?,
            r: self.r.eval(&ctx)?.column(0).into_owned(),
            s: self.s.eval(&ctx)?.column(0).into_owned(),
        })
    }

    /// Mean of the scheduling vertices.
    pub fn centroid(&self) -> Vector {
        let n = self.vertices.len().max(1) as f64;
        let dim = self.vertices.first().map_or(0, Vector::len);
        self.vertices.iter().fold(Vector::zeros(dim), |acc, v| acc + v) / n
    }

    /// Realizations at every vertex, in vertex order.
    pub fn vertex_realizations(&self) -> Result<Vec<Realization>> {
        self.vertices.iter().map(|v| self.at(v)).collect()
    }
}

const INPUT_SNAP: f64 = 1e-7;

/// Initial-state, input, disturbance and measurement-noise sets.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintySets {
    pub x0: Ccg,
    pub u: Ccg,
    pub w: Ccg,
    pub v: Ccg,
}

impl UncertaintySets {
    /// Rejects input sets that leave the nonnegative orthant.
    pub fn new(x0: Ccg, u: Ccg, w: Ccg, v: Ccg, backend: &Backend) -> Result<Self> {
        for i in 0..u.dim() {
            let mut d = Vector::zeros(u.dim());
            d[i] = -1.0;
            let (h, _) = backend.support(&u, &d)?;
            if h > 1e-7 {
                return Err(Error::Invalid(format!("input set reaches u[{i}] = {:.3e} < 0", -h)));
            }
        }
        Ok(Self { x0, u, w, v })
    }

    /// Coordinate bounds of the input set; bounds within `1e-7` of zero are
    /// snapped to zero.
    pub fn input_bounds(&self, backend: &Backend) -> Result<(Vector, Vector)> {
        let n = self.u.dim();
        let mut lo = Vector::zeros(n);
        let mut hi = Vector::zeros(n);
        for i in 0..n {
            let mut d = Vector::zeros(n);
            d[i] = 1.0;
            hi[i] = backend.support(&self.u, &d)?.0;
            lo[i] = -backend.support(&self.u, &(-d))?.0;
        }
        // Solver round-off around the orthant face.
        for v in lo.iter_mut().chain(hi.iter_mut()) {
            if v.abs() <= INPUT_SNAP {
                *v = 0.0;
            }
        }
        Ok((lo, hi))
    }

    fn check(&self, mode: &LpvMode) -> Result<()> {
        check_dim("initial set vs state dimension", mode.n_x(), self.x0.dim())?;
        check_dim("input set vs input dimension", mode.n_u(), self.u.dim())?;
        check_dim("disturbance set vs E columns", mode.n_w(), self.w.dim())?;
        check_dim("noise set vs F columns", mode.n_v(), self.v.dim())
    }
}

/// Hull policy over the scheduling vertices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    /// One vertex held over the horizon, hull at the end.
    #[default]
    VertexConstant,
    /// Hull after every step; sound for time-varying scheduling.
    PerStepHull,
}

/// Which block is lifted next to the inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Space {
    #[default]
    State,
    Output,
}

/// Reachable set over `(s_N, u_0, …, u_{N−1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedReachSet {
    pub set: Ccg,
    pub horizon: usize,
    pub mode: String,
    /// Dimension of the leading state or output block.
    pub n_s: usize,
    pub n_u: usize,
}

impl LiftedReachSet {
    pub fn state_range(&self) -> Range<usize> {
        0..self.n_s
    }

    pub fn control_range(&self) -> Range<usize> {
        self.n_s..self.n_s + self.horizon * self.n_u
    }

    pub fn control_indices(&self) -> Vec<usize> {
        self.control_range().collect()
    }

    /// Coordinate of `u_k[i]`.
    pub fn control_index(&self, k: usize, i: usize) -> usize {
        self.n_s + k * self.n_u + i
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.horizon == other.horizon && self.n_s == other.n_s && self.n_u == other.n_u
    }

    /// Points of the set whose input block equals `u`.
    pub fn slice_controls(&self, u: &Vector) -> Result<Ccg> {
        check_dim("input sequence length", self.horizon * self.n_u, u.len())?;
        let mut sel = Mat::zeros(u.len(), self.set.dim());
        for (row, col) in self.control_range().enumerate() {
            sel[(row, col)] = 1.0;
        }
        self.set.intersect(&Ccg::point(u.clone()), Some(&sel))
    }

    /// Leading block of the slice at `u`.
    pub fn state_at(&self, u: &Vector) -> Result<Ccg> {
        self.slice_controls(u)?.project(&self.state_range().collect::<Vec<_>>())
    }
}

fn powers(a: &Mat, n: usize) -> Vec<Mat> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(Mat::identity(a.nrows(), a.ncols()));
    for k in 0..n {
        let next = a * &out[k];
        out.push(next);
    }
    out
}

/// `[A^{N−1}B  ⋯  AB  B]`: block `j` multiplies `u_j`, so that
/// `x_N = A^N x_0 + 𝒞 [u_0; …; u_{N−1}]`.
pub fn controllability_matrix(a: &Mat, b: &Mat, n: usize) -> Result<Mat> {
    if n == 0 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    check_dim("A must be square", a.nrows(), a.ncols())?;
    check_dim("B rows vs A", a.nrows(), b.nrows())?;
    let p = powers(a, n - 1);
    let nu = b.ncols();
    let mut out = Mat::zeros(a.nrows(), n * nu);
    for j in 0..n {
        out.view_mut((0, j * nu), b.shape()).copy_from(&(&p[n - 1 - j] * b));
    }
    Ok(out)
}

fn power_set(base: &Ccg, n: usize) -> Result<Ccg> {
    let mut out = base.clone();
    for _ in 1..n {
        out = out.cartesian_product(base)?;
    }
    Ok(out)
}

/// `[[I, M], [0, I]]` applied to `(s, u)` plus an offset on `s`.
fn shear(set: &Ccg, m: &Mat, offset: &Vector) -> Result<Ccg> {
    let (ns, nc) = m.shape();
    let mut t = Mat::identity(ns + nc, ns + nc);
    t.view_mut((0, ns), (ns, nc)).copy_from(m);
    let mut shift = Vector::zeros(ns + nc);
    shift.rows_mut(0, ns).copy_from(offset);
    set.linear_map(&t, &shift)
}

fn lift_realization(re: &Realization, n: usize, sets: &UncertaintySets) -> Result<Ccg> {
    let p = powers(&re.a, n);
    let mut state = sets.x0.linear_map(&p[n], &Vector::zeros(re.a.nrows()))?;
    let mut offset = Vector::zeros(re.a.nrows());
    for k in 0..n {
        let m = &p[n - 1 - k];
        state = state.minkowski_sum(&sets.w.linear_map(&(m * &re.e), &Vector::zeros(re.a.nrows()))?)?;
        offset += m * &re.r;
    }
    let joint = state.cartesian_product(&power_set(&sets.u, n)?)?;
    shear(&joint, &controllability_matrix(&re.a, &re.b, n)?, &offset)
}

fn lifted(mode: &LpvMode, set: Ccg, n: usize, n_s: usize) -> LiftedReachSet {
    LiftedReachSet {
        set,
        horizon: n,
        mode: mode.name.clone(),
        n_s,
        n_u: mode.n_u(),
    }
}

/// Reachable set with the scheduling vector held at `theta`.
pub fn lift_vertex(mode: &LpvMode, theta: &Vector, n: usize, sets: &UncertaintySets) -> Result<LiftedReachSet> {
    sets.check(mode)?;
    if n == 0 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    let set = lift_realization(&mode.at(theta)?, n, sets)?;
    Ok(lifted(mode, set, n, mode.n_x()))
}

/// One step `s⁺ = A s + B u_k + r ⊕ E 𝒲` on a lifted set.
fn step(joint: &Ccg, re: &Realization, k: usize, n: usize, sets: &UncertaintySets) -> Result<Ccg> {
    let (nx, nu) = (re.a.nrows(), re.b.ncols());
    let dim = nx + n * nu;
    let mut t = Mat::identity(dim, dim);
    t.view_mut((0, 0), (nx, nx)).copy_from(&re.a);
    t.view_mut((0, nx + k * nu), (nx, nu)).copy_from(&re.b);
    let mut shift = Vector::zeros(dim);
    shift.rows_mut(0, nx).copy_from(&re.r);
    let noise = sets
        .w
        .linear_map(&re.e, &Vector::zeros(nx))?
        .cartesian_product(&Ccg::point(Vector::zeros(n * nu)))?;
    joint.linear_map(&t, &shift)?.minkowski_sum(&noise)
}

/// Hull of the reachable sets over all scheduling vertices.
pub fn reach_mode(mode: &LpvMode, n: usize, sets: &UncertaintySets, schedule: Schedule) -> Result<LiftedReachSet> {
    sets.check(mode)?;
    if n == 0 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    let reals = mode.vertex_realizations()?;
    let set = match schedule {
        Schedule::VertexConstant => {
            let parts = par::map(&reals, Exec::Auto, |_, re| lift_realization(re, n, sets));
            Ccg::convex_hull_all(&parts.into_iter().collect::<Result<Vec<_>>>()?)?
        }
        Schedule::PerStepHull => {
            let mut joint = sets.x0.cartesian_product(&power_set(&sets.u, n)?)?;
            for k in 0..n {
                let parts = par::map(&reals, Exec::Auto, |_, re| step(&joint, re, k, n, sets));
                joint = Ccg::convex_hull_all(&parts.into_iter().collect::<Result<Vec<_>>>()?)?;
            }
            joint
        }
    };
    Ok(lifted(mode, set, n, mode.n_x()))
}

/// Replaces the state block by `C x + s ⊕ F 𝒱` evaluated at `theta`.
pub fn apply_output_map(
    rs: &LiftedReachSet,
    mode: &LpvMode,
    theta: &Vector,
    sets: &UncertaintySets,
) -> Result<LiftedReachSet> {
    check_dim("lifted block vs state dimension", mode.n_x(), rs.n_s)?;
    let re = mode.at(theta)?;
    Ok(LiftedReachSet {
        set: output_image(&rs.set, &re, rs.horizon * rs.n_u, sets)?,
        n_s: mode.n_y(),
        ..rs.clone()
    })
}

fn output_image(joint: &Ccg, re: &Realization, nc: usize, sets: &UncertaintySets) -> Result<Ccg> {
    let (ny, nx) = re.c.shape();
    let mut t = Mat::zeros(ny + nc, nx + nc);
    t.view_mut((0, 0), (ny, nx)).copy_from(&re.c);
    t.view_mut((ny, nx), (nc, nc)).fill_with_identity();
    let mut shift = Vector::zeros(ny + nc);
    shift.rows_mut(0, ny).copy_from(&re.s);
    let noise = sets
        .v
        .linear_map(&re.f, &Vector::zeros(ny))?
        .cartesian_product(&Ccg::point(Vector::zeros(nc)))?;
    joint.linear_map(&t, &shift)?.minkowski_sum(&noise)
}

/// [`reach_mode`] in the requested space. Output maps are applied per vertex
/// before the hull under [`Schedule::VertexConstant`], and hulled over the
/// vertices of the final state set otherwise.
pub fn reach(mode: &LpvMode, n: usize, sets: &UncertaintySets, schedule: Schedule, space: Space) -> Result<LiftedReachSet> {
    if space == Space::State {
        return reach_mode(mode, n, sets, schedule);
    }
    sets.check(mode)?;
    if n == 0 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    let reals = mode.vertex_realizations()?;
    let nc = n * mode.n_u();
    let parts = match schedule {
        Schedule::VertexConstant => par::map(&reals, Exec::Auto, |_, re| {
            output_image(&lift_realization(re, n, sets)?, re, nc, sets)
        }),
        Schedule::PerStepHull => {
            let state = reach_mode(mode, n, sets, schedule)?;
            par::map(&reals, Exec::Auto, |_, re| output_image(&state.set, re, nc, sets))
        }
    };
    let set = Ccg::convex_hull_all(&parts.into_iter().collect::<Result<Vec<_>>>()?)?;
    Ok(lifted(mode, set, n, mode.n_y()))
}
