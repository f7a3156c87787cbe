//! Constrained Convex Generators.
//!
//! A CCG is the set `{ G ξ + c : A ξ = b, ξ ∈ C₁ × ⋯ × C_p }` where each factor
//! `Cᵢ` is one of the [`ConeSpec`] variants. All operations here are closed-form
//! and return new values; a `Ccg` is never mutated after construction.

mod json;
mod ops;
mod reduce;

pub use json::{ccg_from_json, ccg_to_json};
pub use ops::set_matrix_vector_product;
pub use reduce::{reduce_order, OrderReduction};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// One factor of the latent constraint product.
#[derive(Clone, Debug, PartialEq)]
pub enum ConeSpec {
    Free { dim: usize },
    NonNegative { dim: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball2 { dim: usize, radius: f64 },
    /// `‖head‖₂ ≤ last` where head is the first `dim − 1` coordinates.
    Soc { dim: usize },
}

impl ConeSpec {
    pub fn unit_box(dim: usize) -> Self {
        ConeSpec::Box {
            lo: vec![-1.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConeSpec::Free { dim }
            | ConeSpec::NonNegative { dim }
            | ConeSpec::Ball2 { dim, .. }
            | ConeSpec::Soc { dim } => *dim,
            ConeSpec::Box { lo, .. } => lo.len(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            ConeSpec::Free { .. } => "Free",
            ConeSpec::NonNegative { .. } => "NonNegative",
            ConeSpec::Box { .. } => "Box",
            ConeSpec::Ball2 { .. } => "Ball2",
            ConeSpec::Soc { .. } => "SOC",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::Invalid("cone dimension must be positive".into()));
        }
        match self {
            ConeSpec::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::Invalid("box bounds differ in length".into()));
                }
                for (l, h) in lo.iter().zip(hi) {
                    if !l.is_finite() || !h.is_finite() || l > h {
                        return Err(Error::Invalid(format!("box bound [{l}, {h}] is not valid")));
                    }
                }
            }
            ConeSpec::Ball2 { radius, .. } => {
                if !radius.is_finite() || *radius < 0.0 {
                    return Err(Error::Invalid(format!("ball radius {radius} must be finite and ≥ 0")));
                }
            }
            ConeSpec::Soc { dim } if *dim < 2 => {
                return Err(Error::Invalid("second-order cone needs dim ≥ 2".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Whether the factor is bounded (box or ball).
    pub fn is_bounded(&self) -> bool {
        matches!(self, ConeSpec::Box { .. } | ConeSpec::Ball2 { .. })
    }

    /// Largest Euclidean norm over the factor; `None` when unbounded.
    pub fn max_norm(&self) -> Option<f64> {
        match self {
            ConeSpec::Box { lo, hi } => Some(
                lo.iter()
                    .zip(hi)
                    .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
            ConeSpec::Ball2 { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    /// Membership of a latent block in this factor, with absolute slack `tol`.
    pub fn contains_latent(&self, xi: &[f64], tol: f64) -> bool {
        match self {
            ConeSpec::Free { .. } => true,
            ConeSpec::NonNegative { .. } => xi.iter().all(|v| *v >= -tol),
            ConeSpec::Box { lo, hi } => xi
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            ConeSpec::Ball2 { radius, .. } => xi.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius + tol,
            ConeSpec::Soc { .. } => {
                let (head, last) = xi.split_at(xi.len() - 1);
                head.iter().map(|v| v * v).sum::<f64>().sqrt() <= last[0] + tol
            }
        }
    }
}

/// A constrained convex generator `(G, c, A, b, cones)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ccg {
    g: Mat,
    c: Vector,
    a: Mat,
    b: Vector,
    cones: Vec<ConeSpec>,
}

impl Ccg {
    pub fn new(g: Mat, c: Vector, a: Mat, b: Vector, cones: Vec<ConeSpec>) -> Result<Self> {
        check_dim("CCG center length vs generator rows", g.nrows(), c.len())?;
        check_dim("CCG constraint columns vs generator columns", g.ncols(), a.ncols())?;
        check_dim("CCG constraint rows vs rhs length", a.nrows(), b.len())?;
        let latent: usize = cones.iter().map(ConeSpec::dim).sum();
        check_dim("CCG cone dimensions vs generator columns", g.ncols(), latent)?;
        for cone in &cones {
            cone.validate()?;
        }
        if g.iter().chain(c.iter()).chain(a.iter()).chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("CCG data must be finite".into()));
        }
        Ok(Self { g, c, a, b, cones })
    }

    /// Construct without an equality system.
    pub fn from_generators(g: Mat, c: Vector, cones: Vec<ConeSpec>) -> Result<Self> {
        let ng = g.ncols();
        Self::new(g, c, Mat::zeros(0, ng), Vector::zeros(0), cones)
    }

    /// The singleton `{c}` (no latent variables).
    pub fn point(c: Vector) -> Self {
        let n = c.len();
        Self {
            g: Mat::zeros(n, 0),
            c,
            a: Mat::zeros(0, 0),
            b: Vector::zeros(0),
            cones: Vec::new(),
        }
    }

    /// `[-1, 1]^n` with `G = I`.
    pub fn unit_box(n: usize) -> Self {
        Self {
            g: Mat::identity(n, n),
            c: Vector::zeros(n),
            a: Mat::zeros(0, n),
            b: Vector::zeros(0),
            cones: vec![ConeSpec::unit_box(n)],
        }
    }

    /// Axis-aligned box `[lo, hi]`, generated by a unit latent box.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim("box bounds", lo.len(), hi.len())?;
        let n = lo.len();
        if n == 0 {
            return Err(Error::Invalid("box of dimension 0".into()));
        }
        let half: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l)).collect();
        if half.iter().any(|h| *h < 0.0 || !h.is_finite()) {
            return Err(Error::Invalid("box requires finite lo ≤ hi".into()));
        }
        let mid = Vector::from_iterator(n, lo.iter().zip(hi).map(|(l, h)| 0.5 * (h + l)));
        Self::from_generators(Mat::from_diagonal(&Vector::from_vec(half)), mid, vec![ConeSpec::unit_box(n)])
    }

    /// Euclidean ball `‖x − center‖ ≤ radius`.
    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(Error::Invalid("ball of dimension 0".into()));
        }
        Self::from_generators(Mat::identity(n, n), center, vec![ConeSpec::Ball2 { dim: n, radius }])
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn n_latent(&self) -> usize {
        self.g.ncols()
    }

    pub fn n_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn g(&self) -> &Mat {
        &self.g
    }

    pub fn c(&self) -> &Vector {
        &self.c
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn cones(&self) -> &[ConeSpec] {
        &self.cones
    }

    /// Point generated by a latent vector (no feasibility check).
    pub fn point_at(&self, xi: &Vector) -> Vector {
        &self.g * xi + &self.c
    }

    /// Checks a latent vector against the cones and equalities.
    pub fn latent_feasible(&self, xi: &Vector, tol: f64) -> bool {
        if xi.len() != self.n_latent() {
            return false;
        }
        let mut offset = 0;
        for cone in &self.cones {
            let d = cone.dim();
            if !cone.contains_latent(&xi.as_slice()[offset..offset + d], tol) {
                return false;
            }
            offset += d;
        }
        (&self.a * xi - &self.b).amax() <= tol
    }
}

/// A CCG over `ℝ^{p·q}` read column-major as `p × q` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixCcg {
    set: Ccg,
    rows: usize,
    cols: usize,
}

impl MatrixCcg {
    pub fn new(set: Ccg, rows: usize, cols: usize) -> Result<Self> {
        check_dim("matrix set ambient vs shape", rows * cols, set.dim())?;
        Ok(Self { set, rows, cols })
    }

    /// `{M}` for a fixed matrix.
    pub fn singleton(m: &Mat) -> Self {
        let vec = Vector::from_column_slice(m.as_slice());
        Self {
            set: Ccg::point(vec),
            rows: m.nrows(),
            cols: m.ncols(),
        }
    }

    /// Interval matrix `{ M : lo ≤ M ≤ hi }` entrywise.
    pub fn interval(lo: &Mat, hi: &Mat) -> Result<Self> {
        check_dim("interval matrix rows", lo.nrows(), hi.nrows())?;
        check_dim("interval matrix cols", lo.ncols(), hi.ncols())?;
        let set = Ccg::boxed(lo.as_slice(), hi.as_slice())?;
        Self::new(set, lo.nrows(), lo.ncols())
    }

    pub fn set(&self) -> &Ccg {
        &self.set
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}
