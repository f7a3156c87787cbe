//! Set queries on CCGs: emptiness, membership, support and ray shooting.

use super::{solve, ConicProblem, SolveOutcome, SolverSettings, Status};
use crate::ccg::{Ccg, ConeSpec, Mat, Vector};
use crate::error::{check_dim, Error, Result};

/// Outcome of an emptiness or membership test.
///
/// `margin` is the optimal value of the ℓ₁ phase-1 problem over normalized
/// equality rows. The set is declared empty (or the point outside) exactly when
/// `margin` exceeds the backend threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub empty: bool,
    pub margin: f64,
    /// Latent point attaining the margin.
    pub witness: Vector,
}

/// Query engine with its solver settings and decision thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct Backend {
    pub settings: SolverSettings,
    /// Phase-1 value above which a set is empty.
    pub empty_threshold: f64,
    /// Ray lengths beyond this are reported as unbounded.
    pub ray_limit: f64,
}

impl Default for Backend {
    fn default() -> Self {
        Self {
            settings: SolverSettings::default(),
            empty_threshold: 1e-7,
            ray_limit: 1e9,
        }
    }
}

fn check_outcome(out: &SolveOutcome, what: &str) -> Result<()> {
    match out.status {
        Status::NumericalFailure => Err(Error::NumericalFailure(format!(
            "{what}: solver stopped after {} iterations (pres {:.1e}, dres {:.1e})",
            out.iterations, out.residuals.primal, out.residuals.dual
        ))),
        _ => Ok(()),
    }
}

impl Backend {
    pub fn solve(&self, p: &ConicProblem) -> Result<SolveOutcome> {
        solve(p, &self.settings)
    }

    /// Minimizes `Σ (p + q)` subject to `M_n ξ − p + q = r_n`, `ξ ∈ cones`,
    /// where `M_n`, `r_n` are `rows`, `rhs` with unit-norm rows.
    fn phase_one(&self, rows: &Mat, rhs: &Vector, cones: &[ConeSpec], what: &str) -> Result<Certificate> {
        let ng = rows.ncols();
        let mut direct = 0.0;
        let mut keep = Vec::new();
        for i in 0..rows.nrows() {
            let norm = rows.row(i).norm();
            if norm > 1e-14 * (1.0 + rhs[i].abs()) {
                keep.push((i, norm));
            } else {
                direct += rhs[i].abs();
            }
        }
        let m = keep.len();
        let mut a = Mat::zeros(m, ng + 2 * m);
        let mut b = Vector::zeros(m);
        for (r, &(i, norm)) in keep.iter().enumerate() {
            for j in 0..ng {
                a[(r, j)] = rows[(i, j)] / norm;
            }
            a[(r, ng + r)] = -1.0;
            a[(r, ng + m + r)] = 1.0;
            b[r] = rhs[i] / norm;
        }
        let mut obj = Vector::zeros(ng + 2 * m);
        obj.rows_mut(ng, 2 * m).fill(1.0);
        let mut all_cones = cones.to_vec();
        if m > 0 {
            all_cones.push(ConeSpec::NonNegative { dim: 2 * m });
        }
        let witness;
        let value;
        if all_cones.is_empty() {
            witness = Vector::zeros(0);
            value = 0.0;
        } else {
            let prob = ConicProblem::new(obj, a, b, all_cones)?;
            let out = self.solve(&prob)?;
            check_outcome(&out, what)?;
            if out.status != Status::Optimal {
                return Err(Error::NumericalFailure(format!("{what}: phase-1 problem reported {:?}", out.status)));
            }
            witness = out.x.rows(0, ng).into_owned();
            value = out.value.max(0.0);
        }
        let margin = value + direct;
        Ok(Certificate {
            empty: margin > self.empty_threshold,
            margin,
            witness,
        })
    }

    /// Emptiness test with its certificate.
    pub fn emptiness(&self, z: &Ccg) -> Result<Certificate> {
        self.phase_one(z.a(), z.b(), z.cones(), "emptiness")
    }

    pub fn is_empty(&self, z: &Ccg) -> Result<bool> {
        Ok(self.emptiness(z)?.empty)
    }

    /// Membership test; `empty` in the certificate means `p ∉ Z`.
    pub fn membership(&self, z: &Ccg, p: &Vector) -> Result<Certificate> {
        check_dim("membership point vs ambient dimension", z.dim(), p.len())?;
        let rows = Mat::from_fn(z.n_constraints() + z.dim(), z.n_latent(), |i, j| {
            if i < z.n_constraints() {
                z.a()[(i, j)]
            } else {
                z.g()[(i - z.n_constraints(), j)]
            }
        });
        let rhs = Vector::from_iterator(
            z.n_constraints() + z.dim(),
            z.b().iter().copied().chain((p - z.c()).iter().copied()),
        );
        self.phase_one(&rows, &rhs, z.cones(), "membership")
    }

    pub fn contains(&self, z: &Ccg, p: &Vector) -> Result<bool> {
        Ok(!self.membership(z, p)?.empty)
    }

    /// A point of `Z` (the phase-1 witness), or `EmptySet`.
    pub fn feasible_point(&self, z: &Ccg) -> Result<Vector> {
        let cert = self.emptiness(z)?;
        if cert.empty {
            return Err(Error::EmptySet);
        }
        Ok(z.point_at(&cert.witness))
    }

    /// `max dᵀx` over `Z` and a maximizer.
    pub fn support(&self, z: &Ccg, d: &Vector) -> Result<(f64, Vector)> {
        check_dim("support direction vs ambient dimension", z.dim(), d.len())?;
        if z.n_latent() == 0 {
            if z.n_constraints() > 0 && z.b().amax() > self.empty_threshold {
                return Err(Error::EmptySet);
            }
            return Ok((d.dot(z.c()), z.c().clone()));
        }
        let obj = -(z.g().transpose() * d);
        let prob = ConicProblem::new(obj, z.a().clone(), z.b().clone(), z.cones().to_vec())?;
        let out = self.solve(&prob)?;
        check_outcome(&out, "support")?;
        match out.status {
            Status::Infeasible => Err(Error::EmptySet),
            Status::Unbounded => Err(Error::Unbounded),
            _ => {
                let x = z.point_at(&out.x);
                Ok((-out.value + d.dot(z.c()), x))
            }
        }
    }

    /// Largest `t ≥ 0` with `origin + t·d/‖d‖ ∈ Z`.
    ///
    /// The direction is normalized, so `t` is a Euclidean distance. Returns
    /// `OriginOutside` if the origin is not in `Z` and `Unbounded` when the ray
    /// leaves every bound.
    pub fn ray_max(&self, z: &Ccg, origin: &Vector, dir: &Vector) -> Result<f64> {
        check_dim("ray origin vs ambient dimension", z.dim(), origin.len())?;
        check_dim("ray direction vs ambient dimension", z.dim(), dir.len())?;
        let norm = dir.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Invalid("ray direction must be nonzero and finite".into()));
        }
        if !self.contains(z, origin)? {
            return Err(Error::OriginOutside);
        }
        self.ray_from_member(z, origin, &(dir / norm))
    }

    /// [`Backend::ray_max`] for an origin already known to be in `Z` and a unit `d`.
    pub(crate) fn ray_from_member(&self, z: &Ccg, origin: &Vector, d: &Vector) -> Result<f64> {
        let ng = z.n_latent();
        let (n, m) = (z.dim(), z.n_constraints());
        let mut a = Mat::zeros(m + n, ng + 1);
        a.view_mut((0, 0), (m, ng)).copy_from(z.a());
        a.view_mut((m, 0), (n, ng)).copy_from(z.g());
        for i in 0..n {
            a[(m + i, ng)] = -d[i];
        }
        let b = Vector::from_iterator(m + n, z.b().iter().copied().chain((origin - z.c()).iter().copied()));
        let mut obj = Vector::zeros(ng + 1);
        obj[ng] = -1.0;
        let mut cones = z.cones().to_vec();
        cones.push(ConeSpec::NonNegative { dim: 1 });
        let prob = ConicProblem::new(obj, a, b, cones)?;
        let out = self.solve(&prob)?;
        check_outcome(&out, "ray shooting")?;
        match out.status {
            Status::Unbounded => Err(Error::Unbounded),
            Status::Infeasible => Err(Error::NumericalFailure(
                "ray problem infeasible although the origin is contained".into(),
            )),
            _ => {
                let t = out.x[ng].max(0.0);
                if t > self.ray_limit {
                    Err(Error::Unbounded)
                } else {
                    Ok(t)
                }
            }
        }
    }
}
