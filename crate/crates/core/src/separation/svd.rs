use log::debug;
use serde::Serialize;

use super::certify::{all_empty, certify, PairSets};
use super::{clamp, SeparationProblem, SeparationResult, Stopwatch};
use crate::ccg::{reduce_order, Mat, Vector};
use crate::error::{check_dim, Error, Result};
use crate::par::{self, Exec};
use crate::reach::{controllability_matrix, reach, LpvMode, Space};

/// Bisection and outer-loop limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SvdSettings {
    /// Width of the final magnitude bracket.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvdSettings {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 50 }
    }
}

/// One outer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdSeparationState {
    pub v: Mat,
    /// Unit, sign-fixed.
    pub direction: Vector,
    pub sigma: f64,
    pub magnitude: f64,
    pub iteration: usize,
    pub separated: bool,
}

/// Input-to-leading-block map at the centroid of `Θ`.
fn input_gain(mode: &LpvMode, n: usize, space: Space) -> Result<Mat> {
    let re = mode.at(&mode.centroid())?;
    let c = controllability_matrix(&re.a, &re.b, n)?;
    Ok(match space {
        Space::State => c,
        Space::Output => &re.c * c,
    })
}

/// `Φ₁⁻¹ M₁ − Φ₂⁻¹ M₂` where `M` is the controllability matrix (times `C` in
/// output space) at each mode's centroid.
pub fn build_v(m1: &LpvMode, m2: &LpvMode, n: usize, phi1: &Mat, phi2: &Mat, space: Space) -> Result<Mat> {
    let g1 = input_gain(m1, n, space)?;
    let g2 = input_gain(m2, n, space)?;
    check_dim("gain rows of the two modes", g1.nrows(), g2.nrows())?;
    check_dim("gain columns of the two modes", g1.ncols(), g2.ncols())?;
    let solve = |phi: &Mat, g: &Mat| -> Result<Mat> {
        check_dim("shape matrix vs gain rows", g.nrows(), phi.nrows())?;
        phi.clone()
            .lu()
            .solve(g)
            .ok_or_else(|| Error::NumericalFailure("shape matrix is singular".into()))
    };
    Ok(solve(phi1, &g1)? - solve(phi2, &g2)?)
}

/// Top right singular vector of `V` and its singular value.
pub fn max_separation_direction(v: &Mat) -> Result<(Vector, f64)> {
    if v.is_empty() || v.amax() == 0.0 {
        return Err(Error::NoSeparation("the modes respond identically to every input".into()));
    }
    let svd = v.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let k = svd.singular_values.imax();
    let sigma = svd.singular_values[k];
    if !(sigma > 1e-12 * v.amax()) {
        return Err(Error::NoSeparation("V has no significant singular value".into()));
    }
    let dir = vt.row(k).transpose();
    let norm = dir.norm();
    Ok((dir / norm, sigma))
}

/// Direction whose clamped image has the larger `‖V·u‖`.
fn fix_sign(v: &Mat, d: Vector, lo: &Vector, hi: &Vector) -> Vector {
    let plus = (v * clamp(&d, lo, hi)).norm();
    let minus = (v * clamp(&-&d, lo, hi)).norm();
    if minus > plus {
        -d
    } else {
        d
    }
}

/// Input sequence along the direction of largest divergence, scaled to the
/// smallest certified magnitude.
pub fn svd_separation_input(problem: &SeparationProblem, settings: &SvdSettings) -> Result<SeparationResult> {
    svd_separation_detailed(problem, settings).map(|(r, _)| r)
}

/// [`svd_separation_input`] together with its iterates.
pub fn svd_separation_detailed(
    problem: &SeparationProblem,
    settings: &SvdSettings,
) -> Result<(SeparationResult, Vec<SvdSeparationState>)> {
    let [m1, m2] = problem.modes else {
        return Err(Error::Invalid(format!(
            "SVD separation takes exactly two modes, got {}",
            problem.modes.len()
        )));
    };
    let backend = problem.backend;
    let mut clock = Stopwatch::start();
    let mut result = SeparationResult {
        method: "svd".into(),
        u_star: Vec::new(),
        cost: 0.0,
        certified: false,
        certificates: Vec::new(),
        rays_used: 0,
        seed: 0,
        ray_solves: Default::default(),
        candidates: 0,
        timings_ms: Default::default(),
        iterations: 0,
        sigma_history: Vec::new(),
    };
    let reach_sets = par::map(&[m1, m2], Exec::Auto, |_, m| {
        reach(m, problem.horizon, problem.sets, problem.schedule, problem.space)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    result.timings_ms.reach = clock.lap();
    let pairs = PairSets::build(&reach_sets)?;
    result.timings_ms.intersect = clock.lap();

    let (lo, hi) = problem.sequence_bounds()?;
    // Largest per-step input bound.
    let m_max = problem.sets.input_bounds(backend)?.1.max();
    let separated = |u: &Vector| -> Result<bool> { Ok(all_empty(&certify(&pairs, u, backend)?)) };

    let mut u_cur = clamp(&Vector::zeros(lo.len()), &lo, &hi);
    let mut states = Vec::new();
    let mut certify_ms = 0.0;
    for it in 0..settings.max_iter {
        let shapes = par::map(&reach_sets, Exec::Auto, |_, r| reduce_order(&r.state_at(&u_cur)?, backend).map(|o| o.phi))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let v = build_v(m1, m2, problem.horizon, &shapes[0], &shapes[1], problem.space)?;
        let (dir, sigma) = max_separation_direction(&v)?;
        let dir = fix_sign(&v, dir, &lo, &hi);
        result.sigma_history.push(sigma);
        result.iterations = it + 1;
        result.timings_ms.sample += clock.lap();

        let at = |m: f64| clamp(&(&dir * m), &lo, &hi);
        let (mut a, mut b) = (0.0, m_max);
        let ok = separated(&at(b))?;
        if ok {
            while b - a > settings.tol {
                let mid = 0.5 * (a + b);
                if separated(&at(mid))? {
                    b = mid;
                } else {
                    a = mid;
                }
            }
        }
        certify_ms += clock.lap();
        let u_next = at(b);
        let moved = (&u_next - &u_cur).norm();
        debug!("svd iteration {it}: sigma {sigma:.4e}, magnitude {b:.4}, separated {ok}");
        states.push(SvdSeparationState {
            v,
            direction: dir,
            sigma,
            magnitude: b,
            iteration: it,
            separated: ok,
        });
        // An unseparated push never replaces a separated input.
        if !ok && it > 0 && states.iter().rev().skip(1).any(|s: &SvdSeparationState| s.separated) {
            break;
        }
        u_cur = u_next;
        if !ok || moved <= settings.tol {
            break;
        }
    }
    result.timings_ms.certify = certify_ms;
    clock.lap();
    result.certificates = certify(&pairs, &u_cur, backend)?;
    result.certified = all_empty(&result.certificates);
    result.cost = problem.cost.eval(&u_cur);
    result.u_star = u_cur.iter().copied().collect();
    result.timings_ms.certify += clock.lap();
    Ok((result, states))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(name: &str, b: f64) -> LpvMode {
        LpvMode::lti(name, &Mat::identity(1, 1), &Mat::from_element(1, 1, b)).unwrap()
    }

    #[test]
    fn scalar_v_by_hand() {
        let one = Mat::identity(1, 1);
        let v = build_v(&scalar("a", 1.0), &scalar("b", 0.5), 2, &one, &one, Space::State).unwrap();
        assert!((v - Mat::from_row_slice(1, 2, &[0.5, 0.5])).amax() < 1e-15);
    }

    #[test]
    fn identical_modes_have_no_direction() {
        let one = Mat::identity(1, 1);
        let v = build_v(&scalar("a", 1.0), &scalar("a", 1.0), 3, &one, &one, Space::State).unwrap();
        assert_eq!(v.amax(), 0.0);
        assert!(matches!(max_separation_direction(&v), Err(Error::NoSeparation(_))));
    }

    #[test]
    fn diagonal_direction() {
        let (d, s) = max_separation_direction(&Mat::from_diagonal(&Vector::from_vec(vec![3.0, 1.0]))).unwrap();
        assert!((s - 3.0).abs() < 1e-12);
        assert!((d[0].abs() - 1.0).abs() < 1e-12 && d[1].abs() < 1e-12);
        let (d, s) = max_separation_direction(&Mat::from_row_slice(1, 2, &[0.5, 0.5])).unwrap();
        assert!((s - 0.5_f64.sqrt()).abs() < 1e-12);
        assert!((d[0].abs() - 0.5_f64.sqrt()).abs() < 1e-12 && (d[0] - d[1]).abs() < 1e-12);
    }

    #[test]
    fn sign_prefers_the_admissible_side() {
        let v = Mat::from_row_slice(1, 2, &[1.0, 1.0]);
        let d = fix_sign(&v, Vector::from_vec(vec![-0.6, -0.8]), &Vector::zeros(2), &Vector::from_element(2, 5.0));
        assert!(d[0] > 0.0 && d[1] > 0.0);
    }
}
