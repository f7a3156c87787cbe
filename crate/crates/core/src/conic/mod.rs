//! Embedded conic optimizer over products of free, nonnegative, box, ball and
//! second-order cones, and the set queries built on it.

mod cone;
mod ipm;
mod queries;

pub use queries::{Backend, Certificate};

use log::debug;

use crate::ccg::{ConeSpec, Mat, Vector};
use crate::error::{check_dim, Error, Result};
use ipm::{StandardForm, VarBlock};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// `min objᵀξ  s.t.  A ξ = b,  ξ ∈ C₁ × ⋯ × C_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem {
    pub objective: Vector,
    pub a: Mat,
    pub b: Vector,
    pub cones: Vec<ConeSpec>,
}

impl ConicProblem {
    pub fn new(objective: Vector, a: Mat, b: Vector, cones: Vec<ConeSpec>) -> Result<Self> {
        let n: usize = cones.iter().map(ConeSpec::dim).sum();
        check_dim("objective length vs cone dimensions", n, objective.len())?;
        check_dim("constraint columns vs cone dimensions", n, a.ncols())?;
        check_dim("constraint rows vs rhs", a.nrows(), b.len())?;
        for c in &cones {
            c.validate()?;
        }
        Ok(Self {
            objective,
            a,
            b,
            cones,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub status: Status,
    /// `+∞` when infeasible, `−∞` when unbounded, `NaN` on failure.
    pub value: f64,
    pub x: Vector,
    /// Equality multipliers of the original rows (zero for rows dropped as redundant).
    pub y: Vector,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// Where each original variable went.
#[derive(Clone, Copy, Debug)]
enum VarSlot {
    Solver(usize),
    Fixed(f64),
}

struct Compiled {
    form: StandardForm,
    slots: Vec<VarSlot>,
    /// Original row index and scale for each kept row.
    kept_rows: Vec<(usize, f64)>,
    obj_scale: f64,
}

/// Slack entry: an optional `(variable, coefficient)` term plus a constant.
type SlackRow = (Option<(usize, f64)>, f64);

fn compile(p: &ConicProblem) -> std::result::Result<Compiled, Status> {
    let mut slots = Vec::with_capacity(p.n_vars());
    let mut blocks = Vec::new();
    let mut nonneg_rows: Vec<SlackRow> = Vec::new();
    let mut soc_rows: Vec<Vec<SlackRow>> = Vec::new();
    // Block rows are recorded as (is_soc, index) and resolved after layout.
    let mut block_refs: Vec<Vec<(bool, usize)>> = Vec::new();
    let mut nvar = 0;
    for cone in &p.cones {
        match cone {
            ConeSpec::Free { dim } => {
                for _ in 0..*dim {
                    slots.push(VarSlot::Solver(nvar));
                    blocks.push(VarBlock { start: nvar, len: 1, rows: vec![] });
                    block_refs.push(vec![]);
                    nvar += 1;
                }
            }
            ConeSpec::NonNegative { dim } => {
                for _ in 0..*dim {
                    slots.push(VarSlot::Solver(nvar));
                    blocks.push(VarBlock { start: nvar, len: 1, rows: vec![] });
                    block_refs.push(vec![(false, nonneg_rows.len())]);
                    nonneg_rows.push((Some((nvar, -1.0)), 0.0));
                    nvar += 1;
                }
            }
            ConeSpec::Box { lo, hi } => {
                for (l, h) in lo.iter().zip(hi) {
                    if l == h {
                        slots.push(VarSlot::Fixed(*l));
                        continue;
                    }
                    slots.push(VarSlot::Solver(nvar));
                    blocks.push(VarBlock { start: nvar, len: 1, rows: vec![] });
                    block_refs.push(vec![(false, nonneg_rows.len()), (false, nonneg_rows.len() + 1)]);
                    nonneg_rows.push((Some((nvar, -1.0)), -l));
                    nonneg_rows.push((Some((nvar, 1.0)), *h));
                    nvar += 1;
                }
            }
            ConeSpec::Ball2 { dim, radius } => {
                if *radius == 0.0 {
                    slots.extend(std::iter::repeat_n(VarSlot::Fixed(0.0), *dim));
                    continue;
                }
                let mut rows = vec![(None, *radius)];
                for j in 0..*dim {
                    slots.push(VarSlot::Solver(nvar + j));
                    rows.push((Some((nvar + j, -1.0)), 0.0));
                }
                blocks.push(VarBlock { start: nvar, len: *dim, rows: vec![] });
                block_refs.push(vec![(true, soc_rows.len())]);
                soc_rows.push(rows);
                nvar += dim;
            }
            ConeSpec::Soc { dim } => {
                let mut rows = vec![(Some((nvar + dim - 1, -1.0)), 0.0)];
                for j in 0..*dim {
                    slots.push(VarSlot::Solver(nvar + j));
                }
                for j in 0..dim - 1 {
                    rows.push((Some((nvar + j, -1.0)), 0.0));
                }
                blocks.push(VarBlock { start: nvar, len: *dim, rows: vec![] });
                block_refs.push(vec![(true, soc_rows.len())]);
                soc_rows.push(rows);
                nvar += dim;
            }
        }
    }

    let n_nonneg = nonneg_rows.len();
    let mut soc_offsets = Vec::with_capacity(soc_rows.len());
    let mut off = n_nonneg;
    for r in &soc_rows {
        soc_offsets.push(off);
        off += r.len();
    }
    for (blk, refs) in blocks.iter_mut().zip(&block_refs) {
        for &(is_soc, idx) in refs {
            if is_soc {
                let start = soc_offsets[idx];
                blk.rows.extend(
                    (0..soc_rows[idx].len()).filter(|&k| soc_rows[idx][k].0.is_some()).map(|k| start + k),
                );
            } else {
                blk.rows.push(idx);
            }
        }
    }
    let all_rows: Vec<_> = nonneg_rows.into_iter().chain(soc_rows.iter().flatten().copied()).collect();
    let g_rows: Vec<_> = all_rows.iter().map(|r| r.0).collect();
    let h = Vector::from_iterator(all_rows.len(), all_rows.iter().map(|r| r.1));
    let soc_dims: Vec<usize> = soc_rows.iter().map(Vec::len).collect();
    let cones = cone::Cones::new(n_nonneg, &soc_dims);

    // Objective and equalities over solver variables.
    let mut c = Vector::zeros(nvar);
    let mut a_full = Mat::zeros(p.a.nrows(), nvar);
    let mut b_full = p.b.clone();
    for (j, slot) in slots.iter().enumerate() {
        match *slot {
            VarSlot::Solver(k) => {
                c[k] = p.objective[j];
                a_full.set_column(k, &p.a.column(j));
            }
            VarSlot::Fixed(v) => {
                b_full.axpy(-v, &p.a.column(j), 1.0);
            }
        }
    }

    // Drop dependent rows; equilibrate the rest.
    let mut kept_rows = Vec::new();
    let mut basis: Vec<(Vector, f64)> = Vec::new();
    for i in 0..a_full.nrows() {
        let row = a_full.row(i).transpose();
        let norm = row.norm();
        let scale_b = b_full[i].abs().max(1.0);
        if norm == 0.0 {
            if b_full[i].abs() > 1e-9 * scale_b {
                debug!("presolve: zero row {i} with rhs {}", b_full[i]);
                return Err(Status::Infeasible);
            }
            continue;
        }
        let mut q = &row / norm;
        let mut beta = b_full[i] / norm;
        for (qk, bk) in &basis {
            let coef = qk.dot(&q);
            q.axpy(-coef, qk, 1.0);
            beta -= coef * bk;
        }
        let rest = q.norm();
        if rest < 1e-10 {
            if beta.abs() > 1e-8 * (scale_b / norm).max(1.0) {
                debug!("presolve: inconsistent dependent row {i} (residual {beta:e})");
                return Err(Status::Infeasible);
            }
            continue;
        }
        basis.push((q / rest, beta / rest));
        kept_rows.push((i, 1.0 / norm));
    }
    let mut a = Mat::zeros(kept_rows.len(), nvar);
    let mut b = Vector::zeros(kept_rows.len());
    for (r, &(i, s)) in kept_rows.iter().enumerate() {
        a.set_row(r, &(a_full.row(i) * s));
        b[r] = b_full[i] * s;
    }
    let obj_scale = c.amax().max(1e-12);
    let obj_scale = if c.amax() == 0.0 { 1.0 } else { obj_scale };
    c /= obj_scale;

    Ok(Compiled {
        form: StandardForm {
            c,
            a,
            b,
            g_rows,
            h,
            cones,
            blocks,
        },
        slots,
        kept_rows,
        obj_scale,
    })
}

/// Solves a conic problem. Deterministic for identical inputs.
pub fn solve(p: &ConicProblem, settings: &SolverSettings) -> Result<SolveOutcome> {
    if !(settings.tol > 0.0) {
        return Err(Error::Invalid("solver tolerance must be positive".into()));
    }
    let n = p.n_vars();
    let m = p.a.nrows();
    let compiled = match compile(p) {
        Ok(c) => c,
        Err(status) => {
            return Ok(SolveOutcome {
                status,
                value: f64::INFINITY,
                x: Vector::zeros(n),
                y: Vector::zeros(m),
                residuals: Residuals::default(),
                iterations: 0,
            })
        }
    };
    let raw = if compiled.form.c.is_empty() {
        ipm::RawOutcome {
            status: Status::Optimal,
            x: Vector::zeros(0),
            y: Vector::zeros(compiled.form.a.nrows()),
            residuals: Residuals::default(),
            iterations: 0,
        }
    } else {
        ipm::solve(&compiled.form, settings)
    };
    let mut x = Vector::zeros(n);
    for (j, slot) in compiled.slots.iter().enumerate() {
        x[j] = match *slot {
            VarSlot::Solver(k) => raw.x[k],
            VarSlot::Fixed(v) => v,
        };
    }
    let mut y = Vector::zeros(m);
    if raw.status == Status::Optimal {
        for (r, &(i, s)) in compiled.kept_rows.iter().enumerate() {
            y[i] = raw.y[r] * s * compiled.obj_scale;
        }
    }
    let value = match raw.status {
        Status::Optimal => p.objective.dot(&x),
        Status::Infeasible => f64::INFINITY,
        Status::Unbounded => f64::NEG_INFINITY,
        Status::NumericalFailure => f64::NAN,
    };
    debug!(
        "conic solve: n={n} m={m} status={:?} value={value:e} iterations={}",
        raw.status, raw.iterations
    );
    Ok(SolveOutcome {
        status: raw.status,
        value,
        x,
        y,
        residuals: raw.residuals,
        iterations: raw.iterations,
    })
}
