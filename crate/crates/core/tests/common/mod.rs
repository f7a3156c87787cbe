//! Independent references for the conic backend and the set algebra.
//!
//! Supports are recomputed with Clarabel on the operands, never on the
//! composed set, and combined through the closed-form support identities of
//! each operation. Shared with the CLI acceptance test by path.

#![allow(dead_code)]

use afdi_core::ccg::{reduce_order, set_matrix_vector_product, Ccg, ConeSpec, Mat, MatrixCcg, Vector};
use afdi_core::conic::{Backend, ConicProblem, Status};
use afdi_core::Error;
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn gaussian_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_iterator(r, c, (0..r * c).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = gaussian(rng, n);
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

/// Outcome of a Clarabel solve of `min objᵀξ` over the latent description.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

/// `min objᵀξ  s.t.  A ξ = b,  ξ ∈ cones` with Clarabel at tight tolerances.
pub fn clarabel_min(obj: &Vector, a: &Mat, b: &Vector, cones: &[ConeSpec]) -> Reference {
    let n = obj.len();
    // Rows of  A_c ξ + s = b_c,  s ∈ K.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut kinds: Vec<SupportedConeT<f64>> = Vec::new();
    for i in 0..a.nrows() {
        rows.push(a.row(i).iter().copied().collect());
        rhs.push(b[i]);
    }
    if a.nrows() > 0 {
        kinds.push(ZeroConeT(a.nrows()));
    }
    let e = |j: usize, s: f64| {
        let mut r = vec![0.0; n];
        r[j] = s;
        r
    };
    let mut off = 0;
    for c in cones {
        match c {
            ConeSpec::Free { .. } => {}
            ConeSpec::NonNegative { dim } => {
                for j in 0..*dim {
                    rows.push(e(off + j, -1.0));
                    rhs.push(0.0);
                }
                kinds.push(NonnegativeConeT(*dim));
            }
            ConeSpec::Box { lo, hi } => {
                for j in 0..lo.len() {
                    rows.push(e(off + j, 1.0));
                    rhs.push(hi[j]);
                    rows.push(e(off + j, -1.0));
                    rhs.push(-lo[j]);
                }
                kinds.push(NonnegativeConeT(2 * lo.len()));
            }
            ConeSpec::Ball2 { dim, radius } => {
                rows.push(vec![0.0; n]);
                rhs.push(*radius);
                for j in 0..*dim {
                    rows.push(e(off + j, -1.0));
                    rhs.push(0.0);
                }
                kinds.push(SecondOrderConeT(dim + 1));
            }
            ConeSpec::Soc { dim } => {
                rows.push(e(off + dim - 1, -1.0));
                rhs.push(0.0);
                for j in 0..dim - 1 {
                    rows.push(e(off + j, -1.0));
                    rhs.push(0.0);
                }
                kinds.push(SecondOrderConeT(*dim));
            }
        }
        off += c.dim();
    }
    let dense = Mat::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let a_csc = csc(&dense);
    let p = CscMatrix::zeros((n, n));
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-11)
        .tol_gap_rel(1e-11)
        .tol_feas(1e-11)
        .max_iter(400)
        .build()
        .expect("valid settings");
    let q: Vec<f64> = obj.iter().copied().collect();
    let mut solver = DefaultSolver::new(&p, &q, &a_csc, &rhs, &kinds, settings).expect("well-formed reference problem");
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Reference::Optimal(solver.solution.obj_val),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Reference::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Reference::Unbounded,
        s => panic!("reference solver ended with {s:?}"),
    }
}

fn csc(m: &Mat) -> CscMatrix<f64> {
    let (r, c) = m.shape();
    let mut colptr = vec![0];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for j in 0..c {
        for i in 0..r {
            if m[(i, j)] != 0.0 {
                rowval.push(i);
                nzval.push(m[(i, j)]);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(r, c, colptr, rowval, nzval)
}

/// `max dᵀx` over `z` by the reference solver; `None` when `z` is empty.
pub fn reference_support(z: &Ccg, d: &Vector) -> Option<f64> {
    if z.n_latent() == 0 {
        return Some(d.dot(z.c()));
    }
    let obj = -(z.g().transpose() * d);
    match clarabel_min(&obj, z.a(), z.b(), z.cones()) {
        Reference::Optimal(v) => Some(-v + d.dot(z.c())),
        Reference::Infeasible => None,
        Reference::Unbounded => panic!("generated sets are bounded"),
    }
}

/// `max dᵀx` over `{x ∈ Z : R x ∈ Y}`, built from the operands' latent forms.
pub fn reference_intersection_support(z: &Ccg, y: &Ccg, r: &Mat, d: &Vector) -> Option<f64> {
    let (nz, ny) = (z.n_latent(), y.n_latent());
    let rows = z.n_constraints() + y.n_constraints() + y.dim();
    let mut a = Mat::zeros(rows, nz + ny);
    let mut b = Vector::zeros(rows);
    a.view_mut((0, 0), (z.n_constraints(), nz)).copy_from(z.a());
    b.rows_mut(0, z.n_constraints()).copy_from(z.b());
    let o = z.n_constraints();
    a.view_mut((o, nz), (y.n_constraints(), ny)).copy_from(y.a());
    b.rows_mut(o, y.n_constraints()).copy_from(y.b());
    let o = o + y.n_constraints();
    // R (G_z ξ + c_z) = G_y η + c_y
    a.view_mut((o, 0), (y.dim(), nz)).copy_from(&(r * z.g()));
    a.view_mut((o, nz), (y.dim(), ny)).copy_from(&(-y.g()));
    b.rows_mut(o, y.dim()).copy_from(&(y.c() - r * z.c()));
    let mut obj = Vector::zeros(nz + ny);
    obj.rows_mut(0, nz).copy_from(&-(z.g().transpose() * d));
    let cones: Vec<ConeSpec> = z.cones().iter().chain(y.cones()).cloned().collect();
    match clarabel_min(&obj, &a, &b, &cones) {
        Reference::Optimal(v) => Some(-v + d.dot(z.c())),
        Reference::Infeasible => None,
        Reference::Unbounded => panic!("generated sets are bounded"),
    }
}

/// Bounded random CCG: box and ball factors, at most `max_latent` latent
/// variables, and up to one equality through an interior latent point.
pub fn random_ccg(rng: &mut ChaCha8Rng, dim: usize, max_latent: usize) -> Ccg {
    let mut cones = Vec::new();
    let mut left = rng.gen_range(1..=max_latent);
    while left > 0 {
        let d = rng.gen_range(1..=left.min(3));
        if rng.gen_bool(0.5) {
            let lo: Vec<f64> = (0..d).map(|_| -rng.gen_range(0.2..1.5)).collect();
            let hi: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..1.5)).collect();
            cones.push(ConeSpec::Box { lo, hi });
        } else {
            cones.push(ConeSpec::Ball2 {
                dim: d,
                radius: rng.gen_range(0.3..1.5),
            });
        }
        left -= d;
    }
    let ng: usize = cones.iter().map(ConeSpec::dim).sum();
    let g = gaussian_mat(rng, dim, ng);
    let c = gaussian(rng, dim);
    let (a, b) = if ng > 1 && rng.gen_bool(0.5) {
        // ξ = 0 lies strictly inside every factor.
        let a = gaussian_mat(rng, 1, ng);
        let xi0 = gaussian(rng, ng) * 0.1;
        let b = &a * xi0;
        (a, b)
    } else {
        (Mat::zeros(0, ng), Vector::zeros(0))
    };
    Ccg::new(g, c, a, b, cones).expect("generated CCG is well formed")
}

/// Largest deviation found by one instance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Deviation {
    pub max_abs: f64,
    pub directions: usize,
}

impl Deviation {
    fn record(&mut self, ours: f64, reference: f64) {
        self.max_abs = self.max_abs.max((ours - reference).abs() / (1.0 + reference.abs()));
        self.directions += 1;
    }
}

pub const OPS: [&str; 9] = [
    "linear_map",
    "translate",
    "minkowski_sum",
    "intersect",
    "cartesian_product",
    "project",
    "convex_hull",
    "set_matrix_vector_product",
    "reduce_order",
];

/// One randomized instance of operation `op`, checked along `n_dirs`
/// directions. Exact operations are compared with the reference support,
/// outer approximations with sampled points of the exact image.
pub fn check_operation(op: &str, seed: u64, n_dirs: usize) -> Result<Deviation, String> {
    let be = Backend::default();
    let mut r = rng(seed);
    let mut dev = Deviation::default();
    let ours = |z: &Ccg, d: &Vector| -> Result<Option<f64>, String> {
        match be.support(z, d) {
            Ok((h, _)) => Ok(Some(h)),
            Err(Error::EmptySet) => Ok(None),
            Err(e) => Err(format!("{op}: {e}")),
        }
    };
    let compare = |dev: &mut Deviation, a: Option<f64>, b: Option<f64>| -> Result<(), String> {
        match (a, b) {
            (Some(x), Some(y)) => {
                dev.record(x, y);
                Ok(())
            }
            (None, None) => Ok(()),
            _ => Err(format!("{op}: emptiness disagrees ({a:?} vs {b:?})")),
        }
    };
    let n = r.gen_range(1..=3);
    match op {
        "linear_map" | "translate" | "project" => {
            let z = random_ccg(&mut r, n, 4);
            let (m, t) = match op {
                "linear_map" => {
                    let rows = r.gen_range(1..=3);
                    (gaussian_mat(&mut r, rows, n), gaussian(&mut r, rows))
                }
                "translate" => (Mat::identity(n, n), gaussian(&mut r, n)),
                _ => {
                    let k = r.gen_range(0..n);
                    let mut sel = Mat::zeros(1, n);
                    sel[(0, k)] = 1.0;
                    (sel, Vector::zeros(1))
                }
            };
            let out = match op {
                "linear_map" => z.linear_map(&m, &t),
                "translate" => z.translate(&t),
                _ => z.project(&[(0..n).find(|&k| m[(0, k)] == 1.0).unwrap()]),
            }
            .map_err(|e| e.to_string())?;
            for _ in 0..n_dirs {
                let d = unit(&mut r, m.nrows());
                let reference = reference_support(&z, &(m.transpose() * &d)).map(|h| h + d.dot(&t));
                compare(&mut dev, ours(&out, &d)?, reference)?;
            }
        }
        "minkowski_sum" | "convex_hull" => {
            let z = random_ccg(&mut r, n, 2);
            let w = random_ccg(&mut r, n, 2);
            let out = if op == "minkowski_sum" { z.minkowski_sum(&w) } else { z.convex_hull(&w) }.map_err(|e| e.to_string())?;
            for _ in 0..n_dirs {
                let d = unit(&mut r, n);
                let (hz, hw) = (reference_support(&z, &d).unwrap(), reference_support(&w, &d).unwrap());
                let reference = if op == "minkowski_sum" { hz + hw } else { hz.max(hw) };
                compare(&mut dev, ours(&out, &d)?, Some(reference))?;
            }
        }
        "cartesian_product" => {
            let m = r.gen_range(1..=2);
            let z = random_ccg(&mut r, n, 2);
            let w = random_ccg(&mut r, m, 2);
            let out = z.cartesian_product(&w).map_err(|e| e.to_string())?;
            for _ in 0..n_dirs {
                let d = unit(&mut r, n + m);
                let d1 = d.rows(0, n).into_owned();
                let d2 = d.rows(n, m).into_owned();
                let reference = reference_support(&z, &d1).unwrap() + reference_support(&w, &d2).unwrap();
                compare(&mut dev, ours(&out, &d)?, Some(reference))?;
            }
        }
        "intersect" => {
            let z = random_ccg(&mut r, n, 2);
            let rows = r.gen_range(1..=n);
            let rm = gaussian_mat(&mut r, rows, n);
            let mut y = random_ccg(&mut r, rows, 2);
            // Usually nonempty: move Y onto the image of a point of Z.
            if r.gen_bool(0.8) {
                let x0 = be.feasible_point(&z).map_err(|e| e.to_string())?;
                let shift = &rm * x0 - y.c() + gaussian(&mut r, rows) * 0.2;
                y = y.translate(&shift).unwrap();
            }
            let out = z.intersect(&y, Some(&rm)).map_err(|e| e.to_string())?;
            for _ in 0..n_dirs {
                let d = unit(&mut r, n);
                compare(&mut dev, ours(&out, &d)?, reference_intersection_support(&z, &y, &rm, &d))?;
            }
        }
        "set_matrix_vector_product" => {
            let (p, q) = (r.gen_range(1..=2), r.gen_range(1..=2));
            let lo = Mat::from_fn(p, q, |_, _| r.gen_range(-1.0..0.5));
            let hi = Mat::from_fn(p, q, |i, j| lo[(i, j)] + r.gen_range(0.0..1.0));
            let bset = MatrixCcg::interval(&lo, &hi).map_err(|e| e.to_string())?;
            let ulo: Vec<f64> = (0..q).map(|_| r.gen_range(0.0..0.5)).collect();
            let uhi: Vec<f64> = ulo.iter().map(|l| l + r.gen_range(0.1..1.0)).collect();
            let u = Ccg::boxed(&ulo, &uhi).map_err(|e| e.to_string())?;
            let out = set_matrix_vector_product(&bset, &u).map_err(|e| e.to_string())?;
            let samples: Vec<Vector> = (0..200)
                .map(|_| {
                    let b = Mat::from_fn(p, q, |i, j| r.gen_range(lo[(i, j)]..=hi[(i, j)]));
                    let uv = Vector::from_iterator(q, (0..q).map(|k| r.gen_range(ulo[k]..=uhi[k])));
                    let bu = &b * &uv;
                    Vector::from_iterator(p + q, bu.iter().chain(uv.iter()).copied())
                })
                .collect();
            for _ in 0..n_dirs {
                let d = unit(&mut r, p + q);
                let sampled = samples.iter().map(|s| d.dot(s)).fold(f64::NEG_INFINITY, f64::max);
                let h = ours(&out, &d)?.ok_or("product reported empty")?;
                // Outer approximation: only a shortfall is an error.
                dev.record(h.min(sampled), sampled);
            }
        }
        "reduce_order" => {
            let z = random_ccg(&mut r, n, 4);
            let red = reduce_order(&z, &be).map_err(|e| e.to_string())?.as_ccg();
            for _ in 0..n_dirs {
                let d = unit(&mut r, n);
                let reference = reference_support(&z, &d).unwrap();
                let h = ours(&red, &d)?.ok_or("reduction reported empty")?;
                dev.record(h.min(reference), reference);
            }
        }
        other => return Err(format!("unknown operation {other}")),
    }
    Ok(dev)
}

/// Random LP `min cᵀx, A x = b, x ≥ 0` that is feasible and bounded.
pub fn random_lp(rng: &mut ChaCha8Rng) -> ConicProblem {
    let n = rng.gen_range(3..=12);
    let m = rng.gen_range(1..n);
    let a = gaussian_mat(rng, m, n);
    let x_feas = Vector::from_iterator(n, (0..n).map(|_| rng.gen_range(0.1..2.0)));
    let y = gaussian(rng, m);
    let slack = Vector::from_iterator(n, (0..n).map(|_| rng.gen_range(0.0..1.0)));
    let c = a.transpose() * y + slack;
    let b = &a * x_feas;
    ConicProblem::new(c, a, b, vec![ConeSpec::NonNegative { dim: n }]).expect("valid LP")
}

/// `|ours − reference| / (1 + |reference|)` for one LP.
pub fn lp_deviation(p: &ConicProblem) -> Result<f64, String> {
    let ours = Backend::default().solve(p).map_err(|e| e.to_string())?;
    if ours.status != Status::Optimal {
        return Err(format!("backend status {:?}", ours.status));
    }
    match clarabel_min(&p.objective, &p.a, &p.b, &p.cones) {
        Reference::Optimal(v) => Ok((ours.value - v).abs() / (1.0 + v.abs())),
        other => Err(format!("reference status {other:?}")),
    }
}

/// `|ray_max − bisection| ` for one random set, origin and direction.
pub fn ray_deviation(seed: u64) -> Result<f64, String> {
    let be = Backend::default();
    let mut r = rng(seed);
    let n = r.gen_range(1..=3);
    let z = random_ccg(&mut r, n, 4);
    let origin = be.feasible_point(&z).map_err(|e| e.to_string())?;
    let d = unit(&mut r, n);
    let t = be.ray_max(&z, &origin, &d).map_err(|e| e.to_string())?;
    let reach = reference_support(&z, &d).unwrap() - d.dot(&origin);
    let (mut lo, mut hi) = (0.0, reach.max(0.0) + 1e-9);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if be.contains(&z, &(&origin + &d * mid)).map_err(|e| e.to_string())? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((t - 0.5 * (lo + hi)).abs())
}

/// Largest `‖V u‖ − ‖V u_dir‖` over `probes` random unit vectors.
pub fn svd_probe_excess(seed: u64, probes: usize) -> Result<f64, String> {
    let mut r = rng(seed);
    let (rows, cols) = (r.gen_range(1..=6), r.gen_range(1..=8));
    let v = gaussian_mat(&mut r, rows, cols);
    let (dir, sigma) = afdi_core::separation::max_separation_direction(&v).map_err(|e| e.to_string())?;
    let best = (&v * &dir).norm();
    if (best - sigma).abs() > 1e-9 * (1.0 + sigma) {
        return Err(format!("‖V d‖ = {best} but σ = {sigma}"));
    }
    Ok((0..probes)
        .map(|_| (&v * unit(&mut r, cols)).norm() - best)
        .fold(f64::NEG_INFINITY, f64::max))
}
