//! Excitation inputs that force the reachable sets of competing modes apart.
//!
//! [`separation_input`] works on the exact lifted sets: it collects the input
//! sequences under which two modes can still agree, samples the boundary of
//! that region by ray shooting in the input space only, and keeps the cheapest
//! sequence outside it. [`svd_separation_input`] trades optimality for speed by
//! pushing along the input direction of largest divergence between two modes.
//! Both finish with the same certificate: the pairwise intersection of lifted
//! sets, sliced at the chosen input, must be conically infeasible.

mod ccg;
mod certify;
pub mod sphere;
mod svd;

use std::time::Instant;

use serde::Serialize;

use crate::ccg::{Mat, Vector};
use crate::conic::Backend;
use crate::error::{check_dim, Error, Result};
use crate::qp::box_qp;
use crate::reach::{LpvMode, Schedule, Space, UncertaintySets};

pub use ccg::{
    boundary_candidates, indistinguishable_pair, indistinguishable_union, separation_input, separation_with_candidates,
    Candidate, CandidateSet, IndistinguishableSet,
};
pub use certify::{certify, PairCertificate, PairSets};
pub use svd::{
    build_v, max_separation_direction, svd_separation_detailed, svd_separation_input, SvdSeparationState, SvdSettings,
};

/// `γ uᵀR₁u + (1 − γ)‖R₂u‖²` over the stacked input sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec {
    pub r1: Mat,
    pub r2: Mat,
    pub gamma: f64,
}

impl CostSpec {
    pub fn new(r1: Mat, r2: Mat, gamma: f64) -> Result<Self> {
        check_dim("R1 must be square", r1.nrows(), r1.ncols())?;
        check_dim("R2 columns vs R1", r1.ncols(), r2.ncols())?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Invalid(format!("gamma = {gamma} outside [0, 1]")));
        }
        if (&r1 - r1.transpose()).amax() > 1e-12 * (1.0 + r1.amax()) {
            return Err(Error::Invalid("R1 must be symmetric".into()));
        }
        if r1.nrows() > 0 && r1.clone().symmetric_eigenvalues().min() < -1e-10 * (1.0 + r1.amax()) {
            return Err(Error::Invalid("R1 must be positive semidefinite".into()));
        }
        Ok(Self { r1, r2, gamma })
    }

    /// Per-step weight `r1_step` on every input and first differences between
    /// consecutive inputs.
    pub fn standard(r1_step: &Mat, horizon: usize, gamma: f64) -> Result<Self> {
        let nu = r1_step.nrows();
        let dim = nu * horizon;
        let mut r1 = Mat::zeros(dim, dim);
        for k in 0..horizon {
            r1.view_mut((k * nu, k * nu), (nu, nu)).copy_from(r1_step);
        }
        let mut r2 = Mat::zeros(nu * horizon.saturating_sub(1), dim);
        for k in 0..horizon.saturating_sub(1) {
            for i in 0..nu {
                r2[(k * nu + i, k * nu + i)] = -1.0;
                r2[(k * nu + i, (k + 1) * nu + i)] = 1.0;
            }
        }
        Self::new(r1, r2, gamma)
    }

    pub fn dim(&self) -> usize {
        self.r1.nrows()
    }

    pub fn eval(&self, u: &Vector) -> f64 {
        let r2u = &self.r2 * u;
        self.gamma * u.dot(&(&self.r1 * u)) + (1.0 - self.gamma) * r2u.norm_squared()
    }

    /// Hessian of [`CostSpec::eval`].
    pub fn hessian(&self) -> Mat {
        (&self.r1 * self.gamma + self.r2.transpose() * &self.r2 * (1.0 - self.gamma)) * 2.0
    }

    /// Cheapest sequence inside the box `[lo, hi]`.
    pub fn minimizer(&self, lo: &Vector, hi: &Vector) -> Result<Vector> {
        box_qp(&self.hessian(), &Vector::zeros(self.dim()), lo, hi, 1e-12, 10_000)
    }
}

/// Ray sampling controls for the boundary of the indistinguishable set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingParams {
    /// `None` selects `max(484, 2·dim²)`.
    pub n_rays: Option<usize>,
    pub eps_inflate: f64,
    pub seed: u64,
    /// Pattern search over ray directions after sampling.
    pub refine: bool,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            n_rays: None,
            eps_inflate: 0.01,
            seed: 0,
            refine: true,
        }
    }
}

impl SamplingParams {
    pub fn rays_for(&self, dim: usize) -> usize {
        self.n_rays.unwrap_or_else(|| 484.max(2 * dim * dim))
    }
}

/// Everything the separation methods need about the mode bank.
#[derive(Clone, Copy, Debug)]
pub struct SeparationProblem<'a> {
    pub modes: &'a [LpvMode],
    pub sets: &'a UncertaintySets,
    pub horizon: usize,
    pub schedule: Schedule,
    pub space: Space,
    pub cost: &'a CostSpec,
    pub backend: &'a Backend,
}

impl SeparationProblem<'_> {
    fn input_dim(&self) -> usize {
        self.horizon * self.sets.u.dim()
    }

    /// Coordinate bounds of `𝒰ᴺ`.
    pub fn sequence_bounds(&self) -> Result<(Vector, Vector)> {
        let (lo, hi) = self.sets.input_bounds(self.backend)?;
        let tile = |v: &Vector| Vector::from_iterator(self.input_dim(), (0..self.horizon).flat_map(|_| v.iter().copied()));
        Ok((tile(&lo), tile(&hi)))
    }
}

/// Wall-clock milliseconds per phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub reach: f64,
    pub intersect: f64,
    pub sample: f64,
    pub certify: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.reach + self.intersect + self.sample + self.certify
    }
}

/// Ray solves split by the dimension of the set they were shot in.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RayCounts {
    /// Rays in the `N·n_u` input space.
    pub input_space: usize,
    /// Rays in the lifted `n_s + N·n_u` space.
    pub lifted_space: usize,
}

impl RayCounts {
    fn record(&mut self, set_dim: usize, input_dim: usize, count: usize) {
        if set_dim == input_dim {
            self.input_space += count;
        } else {
            self.lifted_space += count;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationResult {
    pub method: String,
    /// Inputs in time order, `u_0` first.
    pub u_star: Vec<f64>,
    pub cost: f64,
    pub certified: bool,
    pub certificates: Vec<PairCertificate>,
    pub rays_used: usize,
    pub seed: u64,
    pub ray_solves: RayCounts,
    /// Candidates that survived the membership recheck.
    pub candidates: usize,
    pub timings_ms: PhaseTimings,
    pub iterations: usize,
    pub sigma_history: Vec<f64>,
}

impl SeparationResult {
    pub fn u_star(&self) -> Vector {
        Vector::from_column_slice(&self.u_star)
    }

    /// Input `k` of the sequence.
    pub fn step(&self, k: usize, n_u: usize) -> Vector {
        Vector::from_column_slice(&self.u_star[k * n_u..(k + 1) * n_u])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result fields serialize")
    }
}

pub(crate) fn clamp(u: &Vector, lo: &Vector, hi: &Vector) -> Vector {
    Vector::from_iterator(u.len(), (0..u.len()).map(|i| u[i].clamp(lo[i], hi[i])))
}

pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Self(Instant::now())
    }

    /// Milliseconds since the last lap.
    pub fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let ms = (now - self.0).as_secs_f64() * 1e3;
        self.0 = now;
        ms
    }
}
