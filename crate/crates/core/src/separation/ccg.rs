use log::{debug, warn};

use super::certify::{all_empty, certify, PairSets};
use super::{clamp, sphere, CostSpec, RayCounts, SamplingParams, SeparationProblem, SeparationResult, Stopwatch};
use crate::ccg::{Ccg, Vector};
use crate::conic::Backend;
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::reach::{reach, LiftedReachSet};

/// Certification attempts before giving up on the candidate list.
const CERTIFY_LIMIT: usize = 64;
/// Anchor coordinates this close to a bound face count as on it.
const FACE_TOL: f64 = 1e-9;

/// Inputs under which at least one pair of modes can still produce the same
/// leading block, hulled over the pairs.
#[derive(Clone, Debug)]
pub struct IndistinguishableSet {
    /// `None` when every pair is already distinguished by every input.
    pub set: Option<Ccg>,
    /// Pairs whose projected intersection is nonempty.
    pub pairs: Vec<(usize, usize)>,
    pub dim: usize,
}

/// Inputs `u` for which `Ri` and `Rj` share a point `(s, u)`.
pub fn indistinguishable_pair(ri: &LiftedReachSet, rj: &LiftedReachSet) -> Result<Ccg> {
    let joint = PairSets::build(&[ri.clone(), rj.clone()])?;
    project_pair(&joint[0])
}

fn project_pair(p: &PairSets) -> Result<Ccg> {
    p.joint.set.project(&p.joint.control_indices())
}

/// Hull of the nonempty pair sets; empty ones are dropped.
pub fn indistinguishable_union(
    pairs: &[((usize, usize), Ccg)],
    dim: usize,
    backend: &Backend,
) -> Result<IndistinguishableSet> {
    if let Some((_, z)) = pairs.iter().find(|(_, z)| z.dim() != dim) {
        return Err(Error::Dimension {
            context: "pair set vs input sequence dimension",
            expected: dim,
            got: z.dim(),
        });
    }
    let empty = par::map(pairs, Exec::Auto, |_, (_, z)| backend.is_empty(z));
    let mut kept = Vec::new();
    let mut ids = Vec::new();
    for ((id, z), e) in pairs.iter().zip(empty) {
        if !e? {
            kept.push(z.clone());
            ids.push(*id);
        }
    }
    let set = if kept.is_empty() { None } else { Some(Ccg::convex_hull_all(&kept)?) };
    Ok(IndistinguishableSet { set, pairs: ids, dim })
}

/// A sampled point just outside the indistinguishable set.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    /// Index of the generating ray; refinement steps continue the numbering.
    pub ray: usize,
    pub direction: Vector,
    /// Distance to the boundary along `direction`.
    pub t: f64,
    /// `anchor + (1 + ε)·t·direction` before clamping.
    pub raw: Vector,
    pub u: Vector,
}

#[derive(Clone, Debug, Default)]
pub struct CandidateSet {
    pub anchor: Vector,
    /// Survivors of the membership recheck, in ray order.
    pub candidates: Vec<Candidate>,
    /// Every candidate before the recheck, in ray order.
    pub raw: Vec<Candidate>,
    pub rays: usize,
    pub failed_rays: usize,
    pub ray_solves: RayCounts,
}

/// Flips direction components that would leave the box through a face the
/// anchor lies on.
fn reflect(d: &Vector, anchor: &Vector, lo: &Vector, hi: &Vector) -> Option<Vector> {
    let mut out = d.clone();
    for i in 0..d.len() {
        let at_lo = anchor[i] <= lo[i] + FACE_TOL;
        let at_hi = anchor[i] >= hi[i] - FACE_TOL;
        out[i] = match (at_lo, at_hi) {
            (true, true) => 0.0,
            (true, false) => out[i].abs(),
            (false, true) => -out[i].abs(),
            _ => out[i],
        };
    }
    let norm = out.norm();
    (norm > 1e-12).then(|| out / norm)
}

/// Anchor in `I`: the preferred point when contained, else the center of `I`,
/// else a phase-1 point.
fn anchor(i_set: &Ccg, preferred: Option<&Vector>, backend: &Backend) -> Result<Vector> {
    if let Some(p) = preferred {
        if backend.contains(i_set, p)? {
            return Ok(p.clone());
        }
    }
    if backend.contains(i_set, i_set.c())? {
        return Ok(i_set.c().clone());
    }
    backend.feasible_point(i_set)
}

struct Shooter<'a> {
    i_set: &'a Ccg,
    anchor: &'a Vector,
    lo: &'a Vector,
    hi: &'a Vector,
    eps: f64,
    backend: &'a Backend,
}

enum Shot {
    Kept(Candidate),
    Inside(Candidate),
    Failed,
}

impl Shooter<'_> {
    fn shoot(&self, ray: usize, d: &Vector) -> Result<Shot> {
        let d = match reflect(d, self.anchor, self.lo, self.hi) {
            Some(d) => d,
            None => return Ok(Shot::Failed),
        };
        let t = match self.backend.ray_from_member(self.i_set, self.anchor, &d) {
            Ok(t) => t,
            Err(Error::NumericalFailure(msg)) => {
                warn!("ray {ray} skipped: {msg}");
                return Ok(Shot::Failed);
            }
            Err(e) => return Err(e),
        };
        let raw = self.anchor + &d * ((1.0 + self.eps) * t);
        let u = clamp(&raw, self.lo, self.hi);
        let cand = Candidate {
            ray,
            direction: d,
            t,
            raw,
            u,
        };
        if self.backend.contains(self.i_set, &cand.u)? {
            Ok(Shot::Inside(cand))
        } else {
            Ok(Shot::Kept(cand))
        }
    }
}

fn shoot_all(shooter: &Shooter, dirs: &[Vector]) -> Result<CandidateSet> {
    let shots = par::map(dirs, Exec::Auto, |k, d| shooter.shoot(k, d));
    let mut out = CandidateSet {
        anchor: shooter.anchor.clone(),
        rays: dirs.len(),
        ..CandidateSet::default()
    };
    out.ray_solves.record(shooter.i_set.dim(), shooter.lo.len(), dirs.len());
    for s in shots {
        match s? {
            Shot::Kept(c) => {
                out.raw.push(c.clone());
                out.candidates.push(c);
            }
            Shot::Inside(c) => out.raw.push(c),
            Shot::Failed => out.failed_rays += 1,
        }
    }
    Ok(out)
}

/// Boundary samples of `I` pushed outward by `ε` and clamped into `[lo, hi]`.
///
/// Rays start at `preferred` when it lies in `I`. Directions come from
/// [`sphere::directions`] and are reflected into the box at the faces the
/// anchor touches.
pub fn boundary_candidates(
    i_set: &Ccg,
    bounds: (&Vector, &Vector),
    sampling: &SamplingParams,
    preferred: Option<&Vector>,
    backend: &Backend,
) -> Result<CandidateSet> {
    let dim = i_set.dim();
    let dirs = sphere::directions(dim, sampling.rays_for(dim), sampling.seed);
    let anchor = anchor(i_set, preferred, backend)?;
    let shooter = Shooter {
        i_set,
        anchor: &anchor,
        lo: bounds.0,
        hi: bounds.1,
        eps: sampling.eps_inflate,
        backend,
    };
    let set = shoot_all(&shooter, &dirs)?;
    if set.candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    Ok(set)
}

/// Compass search on the ray direction of the cheapest candidate.
fn refine(shooter: &Shooter, cost: &CostSpec, set: &mut CandidateSet) -> Result<()> {
    let Some(start) = set
        .candidates
        .iter()
        .min_by(|a, b| cost.eval(&a.u).total_cmp(&cost.eval(&b.u)))
        .cloned()
    else {
        return Ok(());
    };
    let dim = start.direction.len();
    let mut best = start;
    let mut best_cost = cost.eval(&best.u);
    let mut next_ray = set.rays;
    let mut step = 0.25;
    while step > 1e-3 {
        let trials: Vec<Vector> = (0..2 * dim)
            .map(|k| {
                let mut d = best.direction.clone();
                d[k / 2] += if k % 2 == 0 { step } else { -step };
                d
            })
            .collect();
        let shots = par::map(&trials, Exec::Auto, |k, d| shooter.shoot(next_ray + k, d));
        set.ray_solves.record(shooter.i_set.dim(), dim, trials.len());
        next_ray += trials.len();
        let mut improved = false;
        for s in shots {
            if let Shot::Kept(c) = s? {
                let value = cost.eval(&c.u);
                if value < best_cost {
                    best_cost = value;
                    best = c.clone();
                    improved = true;
                }
                set.candidates.push(c);
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    set.rays = next_ray;
    debug!("refined cost {best_cost:.6} after {next_ray} rays");
    Ok(())
}

/// Cheapest certified input outside the indistinguishable set.
pub fn separation_input(problem: &SeparationProblem, sampling: &SamplingParams) -> Result<SeparationResult> {
    separation_with_candidates(problem, sampling).map(|(r, _)| r)
}

/// [`separation_input`] together with the candidate list it chose from.
pub fn separation_with_candidates(
    problem: &SeparationProblem,
    sampling: &SamplingParams,
) -> Result<(SeparationResult, CandidateSet)> {
    if problem.modes.len() < 2 {
        return Err(Error::Invalid("separation needs at least two modes".into()));
    }
    let dim = problem.input_dim();
    if problem.cost.dim() != dim {
        return Err(Error::Dimension {
            context: "cost dimension vs input sequence",
            expected: dim,
            got: problem.cost.dim(),
        });
    }
    let backend = problem.backend;
    let mut clock = Stopwatch::start();
    let mut result = SeparationResult {
        method: "ccg".into(),
        u_star: Vec::new(),
        cost: 0.0,
        certified: false,
        certificates: Vec::new(),
        rays_used: 0,
        seed: sampling.seed,
        ray_solves: RayCounts::default(),
        candidates: 0,
        timings_ms: Default::default(),
        iterations: 0,
        sigma_history: Vec::new(),
    };

    let reach_sets = par::map(problem.modes, Exec::Auto, |_, m| {
        reach(m, problem.horizon, problem.sets, problem.schedule, problem.space)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    result.timings_ms.reach = clock.lap();

    let pairs = PairSets::build(&reach_sets)?;
    let projected = par::map(&pairs, Exec::Auto, |_, p| project_pair(p).map(|z| (p.pair, z)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let union = indistinguishable_union(&projected, dim, backend)?;
    result.timings_ms.intersect = clock.lap();

    let (lo, hi) = problem.sequence_bounds()?;
    let cheapest = problem.cost.minimizer(&lo, &hi)?;
    let Some(i_set) = union.set.as_ref() else {
        // Every input separates; the cheapest one is the answer.
        result.timings_ms.sample = clock.lap();
        result.certificates = certify(&pairs, &cheapest, backend)?;
        result.certified = all_empty(&result.certificates);
        result.cost = problem.cost.eval(&cheapest);
        result.u_star = cheapest.iter().copied().collect();
        result.candidates = 1;
        result.timings_ms.certify = clock.lap();
        return Ok((result, CandidateSet::default()));
    };

    let dirs = sphere::directions(dim, sampling.rays_for(dim), sampling.seed);
    let anchor = anchor(i_set, Some(&cheapest), backend)?;
    let shooter = Shooter {
        i_set,
        anchor: &anchor,
        lo: &lo,
        hi: &hi,
        eps: sampling.eps_inflate,
        backend,
    };
    let mut set = shoot_all(&shooter, &dirs)?;
    if sampling.refine {
        refine(&shooter, problem.cost, &mut set)?;
    }
    result.rays_used = set.rays;
    result.ray_solves = set.ray_solves.clone();
    result.candidates = set.candidates.len();
    result.timings_ms.sample = clock.lap();

    let mut order: Vec<(f64, usize)> = set
        .candidates
        .iter()
        .enumerate()
        .map(|(k, c)| (problem.cost.eval(&c.u), k))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(value, k) in order.iter().take(CERTIFY_LIMIT) {
        let u = &set.candidates[k].u;
        let certs = certify(&pairs, u, backend)?;
        if all_empty(&certs) {
            result.u_star = u.iter().copied().collect();
            result.cost = value;
            result.certificates = certs;
            result.certified = true;
            result.timings_ms.certify = clock.lap();
            return Ok((result, set));
        }
        debug!("candidate from ray {} failed certification", set.candidates[k].ray);
    }

    // Best effort: the cheapest survivor, or the largest admissible input.
    let fallback = order.first().map_or_else(|| hi.clone(), |&(_, k)| set.candidates[k].u.clone());
    warn!("no candidate certified; returning an uncertified input");
    result.certificates = certify(&pairs, &fallback, backend)?;
    result.certified = all_empty(&result.certificates);
    result.cost = problem.cost.eval(&fallback);
    result.u_star = fallback.iter().copied().collect();
    result.timings_ms.certify = clock.lap();
    Ok((result, set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccg::Mat;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn axis_rays_on_unit_ball() {
        let backend = Backend::default();
        let ball = Ccg::ball(Vector::zeros(2), 1.0).unwrap();
        let (lo, hi) = (v(&[0.0, 0.0]), v(&[2.0, 2.0]));
        let origin = v(&[0.0, 0.0]);
        let shooter = Shooter {
            i_set: &ball,
            anchor: &origin,
            lo: &lo,
            hi: &hi,
            eps: 0.01,
            backend: &backend,
        };
        let dirs = [v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, 0.0]), v(&[0.0, -1.0])];
        let set = shoot_all(&shooter, &dirs).unwrap();
        assert_eq!(set.candidates.len(), 4);
        for c in &set.candidates {
            let hit = if c.u[0] > 0.5 { v(&[1.01, 0.0]) } else { v(&[0.0, 1.01]) };
            assert!((&c.u - hit).norm() < 1e-5, "{}", c.u);
        }
        assert_eq!(set.ray_solves.input_space, 4);
    }

    #[test]
    fn segment_candidates_step_off_the_ends() {
        let backend = Backend::default();
        let seg = Ccg::from_generators(Mat::from_row_slice(2, 1, &[1.0, 0.0]), v(&[1.0, 1.0]), vec![crate::ccg::ConeSpec::unit_box(1)])
            .unwrap();
        let (lo, hi) = (v(&[-5.0, -5.0]), v(&[5.0, 5.0]));
        let center = seg.c().clone();
        let shooter = Shooter {
            i_set: &seg,
            anchor: &center,
            lo: &lo,
            hi: &hi,
            eps: 0.01,
            backend: &backend,
        };
        let set = shoot_all(&shooter, &[v(&[1.0, 0.0]), v(&[-1.0, 0.0])]).unwrap();
        assert_eq!(set.candidates.len(), 2);
        assert!((set.candidates[0].u[0] - 2.01).abs() < 1e-5);
        assert!((set.candidates[1].u[0] + 0.01).abs() < 1e-5);
    }

    #[test]
    fn flat_set_in_generic_directions_has_no_exits() {
        let backend = Backend::default();
        let seg = Ccg::from_generators(Mat::from_row_slice(2, 1, &[1.0, 0.0]), v(&[1.0, 1.0]), vec![crate::ccg::ConeSpec::unit_box(1)])
            .unwrap();
        let sampling = SamplingParams {
            n_rays: Some(16),
            ..SamplingParams::default()
        };
        let got = boundary_candidates(&seg, (&v(&[-5.0, -5.0]), &v(&[5.0, 5.0])), &sampling, None, &backend);
        assert!(matches!(got, Err(Error::NoCandidates)));
    }

    #[test]
    fn reflection_keeps_directions_in_the_box() {
        let d = reflect(&v(&[-1.0, 1.0, 1.0]), &v(&[0.0, 0.5, 1.0]), &v(&[0.0, 0.0, 0.0]), &v(&[1.0, 1.0, 1.0])).unwrap();
        assert!(d[0] > 0.0 && d[1] > 0.0 && d[2] < 0.0);
        assert!((d.norm() - 1.0).abs() < 1e-12);
        assert!(reflect(&v(&[1.0]), &v(&[0.0]), &v(&[0.0]), &v(&[0.0])).is_none());
    }

    #[test]
    fn hull_of_two_singletons_is_a_segment() {
        let backend = Backend::default();
        let pairs = vec![((0, 1), Ccg::point(v(&[0.0, 0.0]))), ((0, 2), Ccg::point(v(&[2.0, 0.0])))];
        let u = indistinguishable_union(&pairs, 2, &backend).unwrap();
        let set = u.set.unwrap();
        assert!(backend.contains(&set, &v(&[1.0, 0.0])).unwrap());
        assert!(!backend.contains(&set, &v(&[1.0, 0.1])).unwrap());
        assert_eq!(u.pairs, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn empty_pairs_are_skipped() {
        let backend = Backend::default();
        let empty = Ccg::new(Mat::zeros(1, 1), v(&[0.0]), Mat::from_element(1, 1, 1.0), v(&[3.0]), vec![crate::ccg::ConeSpec::unit_box(1)])
            .unwrap();
        let u = indistinguishable_union(&[((0, 1), empty)], 1, &backend).unwrap();
        assert!(u.set.is_none() && u.pairs.is_empty());
    }
}
