//! Homogeneous self-dual interior-point method for
//! `min cᵀx  s.t.  A x = b,  h − G x ∈ K`.
//!
//! `G` has at most one `±1` entry per row, which is what compiling latent
//! cone constraints produces. The Newton system is reduced to the normal
//! equations `A H⁻¹ Aᵀ` with `H = Gᵀ W⁻² G` block diagonal over variable blocks.
//! When refinement on the normal equations stalls, the augmented system
//! `[H Aᵀ; A 0]` is factored instead, and failing that the full system in
//! `W`-scaled form, whose conditioning is not squared.

use log::{debug, trace};
use std::cell::OnceCell;

use nalgebra::{Cholesky, LU};

use super::cone::{Cones, Scaling};
use super::{Residuals, SolverSettings, Status};
use crate::ccg::{Mat, Vector};

/// Regularization for variable blocks without cone rows.
const FREE_REG: f64 = 1e-8;
const STEP_FRACTION: f64 = 0.99;
/// A stalled iterate within this multiple of the tolerance counts as solved.
const REDUCED_ACCURACY: f64 = 1e3;

/// Variables `start..start + len` and the cone rows that reference them.
#[derive(Clone, Debug)]
pub(crate) struct VarBlock {
    pub start: usize,
    pub len: usize,
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct StandardForm {
    pub c: Vector,
    pub a: Mat,
    pub b: Vector,
    /// Cone row `i` is `h_i − g_i x` with `g_i = coef · e_var` or zero.
    pub g_rows: Vec<Option<(usize, f64)>>,
    pub h: Vector,
    pub cones: Cones,
    pub blocks: Vec<VarBlock>,
}

#[derive(Clone, Debug)]
pub(crate) struct RawOutcome {
    pub status: Status,
    pub x: Vector,
    pub y: Vector,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl StandardForm {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn g_mul(&self, x: &Vector) -> Vector {
        Vector::from_iterator(
            self.g_rows.len(),
            self.g_rows.iter().map(|r| r.map_or(0.0, |(j, g)| g * x[j])),
        )
    }

    fn gt_mul(&self, z: &Vector) -> Vector {
        let mut out = Vector::zeros(self.n());
        for (i, r) in self.g_rows.iter().enumerate() {
            if let Some((j, g)) = r {
                out[*j] += g * z[i];
            }
        }
        out
    }
}

/// Factorization of the reduced Newton system for one scaling.
struct KktFactor {
    hinv_blocks: Vec<Mat>,
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
    /// Pivoted LU of `[H Aᵀ; A 0]`, built when the normal equations fail to
    /// reach the refinement target.
    aug: OnceCell<Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>>,
    /// Pivoted LU of the scaled full system, built when the augmented one
    /// fails as well.
    full: OnceCell<Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>>,
}

struct Workspace<'a> {
    p: &'a StandardForm,
    /// Nonzero rows of `A` per block and the matching sub-matrix.
    block_a: Vec<(Vec<usize>, Mat)>,
}

impl<'a> Workspace<'a> {
    fn new(p: &'a StandardForm) -> Self {
        let m = p.a.nrows();
        let block_a = p
            .blocks
            .iter()
            .map(|blk| {
                let rows: Vec<usize> = (0..m)
                    .filter(|&i| (0..blk.len).any(|j| p.a[(i, blk.start + j)] != 0.0))
                    .collect();
                let mut sub = Mat::zeros(rows.len(), blk.len);
                for (ri, &i) in rows.iter().enumerate() {
                    for j in 0..blk.len {
                        sub[(ri, j)] = p.a[(i, blk.start + j)];
                    }
                }
                (rows, sub)
            })
            .collect();
        Self { p, block_a }
    }

    fn block_h(&self, blk: &VarBlock, scaling: Option<&Scaling>) -> Mat {
        let p = self.p;
        let mut h = Mat::zeros(blk.len, blk.len);
        for &ri in &blk.rows {
            let (vi, gi) = p.g_rows[ri].expect("block rows reference variables");
            for &rj in &blk.rows {
                let (vj, gj) = p.g_rows[rj].expect("block rows reference variables");
                let w = match scaling {
                    Some(sc) => sc.winv2_entry(&p.cones, ri, rj),
                    None => f64::from(u8::from(ri == rj)),
                };
                h[(vi - blk.start, vj - blk.start)] += gi * gj * w;
            }
        }
        if blk.rows.is_empty() {
            for j in 0..blk.len {
                h[(j, j)] = FREE_REG;
            }
        }
        h
    }

    fn w2(&self, scaling: Option<&Scaling>, i: usize, j: usize) -> f64 {
        match scaling {
            Some(sc) => sc.w2_entry(&self.p.cones, i, j),
            None => f64::from(u8::from(i == j)),
        }
    }

    /// `H⁻¹` for one block, formed from `W²` where the structure allows it.
    ///
    /// A single-SOC block has `G_k` a signed permutation of the cone rows, except
    /// for at most one constant row; then `H⁻¹ = G_kᵀ S G_k` with `S` the Schur
    /// complement of `W²` that eliminates the constant row.
    fn block_hinv(&self, blk: &VarBlock, scaling: Option<&Scaling>) -> Option<Mat> {
        let p = self.p;
        if blk.len == 1 {
            let h = self.block_h(blk, scaling)[(0, 0)];
            return Some(Mat::from_element(1, 1, 1.0 / h));
        }
        let soc = blk.rows.first().and_then(|&r| p.cones.row_soc(r));
        let same_soc = soc.is_some() && blk.rows.iter().all(|&r| p.cones.row_soc(r) == soc);
        if same_soc && blk.rows.len() == blk.len {
            let range = p.cones.soc_range(soc.expect("checked above"));
            let constant: Vec<usize> = range.clone().filter(|r| !blk.rows.contains(r)).collect();
            if constant.len() <= 1 {
                let mut hinv = Mat::zeros(blk.len, blk.len);
                for &ri in &blk.rows {
                    let (vi, gi) = p.g_rows[ri].expect("block rows reference variables");
                    for &rj in &blk.rows {
                        let (vj, gj) = p.g_rows[rj].expect("block rows reference variables");
                        let mut s = self.w2(scaling, ri, rj);
                        if let Some(&k) = constant.first() {
                            s -= self.w2(scaling, ri, k) * self.w2(scaling, k, rj) / self.w2(scaling, k, k);
                        }
                        hinv[(vi - blk.start, vj - blk.start)] = gi * gj * s;
                    }
                }
                return Some(hinv);
            }
        }
        self.block_h(blk, scaling).cholesky().map(|c| c.inverse())
    }

    fn factor(&self, scaling: Option<&Scaling>) -> Option<KktFactor> {
        let p = self.p;
        let m = p.a.nrows();
        let mut hinv_blocks = Vec::with_capacity(p.blocks.len());
        let mut s = Mat::zeros(m, m);
        for (blk, (rows, sub)) in p.blocks.iter().zip(&self.block_a) {
            let hinv = self.block_hinv(blk, scaling)?;
            if !rows.is_empty() {
                let contrib = sub * &hinv * sub.transpose();
                for (a, &i) in rows.iter().enumerate() {
                    for (b, &j) in rows.iter().enumerate() {
                        s[(i, j)] += contrib[(a, b)];
                    }
                }
            }
            hinv_blocks.push(hinv);
        }
        let chol = if m == 0 {
            None
        } else {
            let scale = (0..m).map(|i| s[(i, i)]).fold(0.0_f64, f64::max).max(1e-300);
            let mut reg = 1e-14 * scale;
            let mut out = None;
            for _ in 0..6 {
                let mut sr = s.clone();
                for i in 0..m {
                    sr[(i, i)] += reg;
                }
                if let Some(c) = sr.cholesky() {
                    out = Some(c);
                    break;
                }
                reg *= 100.0;
            }
            Some(out?)
        };
        Some(KktFactor {
            hinv_blocks,
            chol,
            aug: OnceCell::new(),
            full: OnceCell::new(),
        })
    }

    fn hinv_mul(&self, f: &KktFactor, v: &Vector) -> Vector {
        let mut out = Vector::zeros(v.len());
        for (blk, hinv) in self.p.blocks.iter().zip(&f.hinv_blocks) {
            let seg = v.rows(blk.start, blk.len);
            out.rows_mut(blk.start, blk.len).copy_from(&(hinv * seg));
        }
        out
    }

    fn w2_mul(&self, scaling: Option<&Scaling>, v: &Vector) -> Vector {
        match scaling {
            Some(sc) => sc.apply_w2(&self.p.cones, v),
            None => v.clone(),
        }
    }

    fn winv2_mul(&self, scaling: Option<&Scaling>, v: &Vector) -> Vector {
        match scaling {
            Some(sc) => sc.apply_winv(&self.p.cones, &sc.apply_winv(&self.p.cones, v)),
            None => v.clone(),
        }
    }

    /// One solve with the regularized factorization.
    fn solve_once(
        &self,
        f: &KktFactor,
        scaling: Option<&Scaling>,
        r1: &Vector,
        r2: &Vector,
        r3: &Vector,
    ) -> (Vector, Vector, Vector) {
        let p = self.p;
        let rt = r1 + p.gt_mul(&self.winv2_mul(scaling, r3));
        let hr = self.hinv_mul(f, &rt);
        let dy = match &f.chol {
            Some(ch) => ch.solve(&(&p.a * &hr - r2)),
            None => Vector::zeros(0),
        };
        let dx = self.hinv_mul(f, &(rt - p.a.transpose() * &dy));
        let dz = self.winv2_mul(scaling, &(p.g_mul(&dx) - r3));
        (dx, dy, dz)
    }

    /// LU of `[H Aᵀ; A 0]` with `H = Gᵀ W⁻² G`, the system in `(dx, dy)`.
    fn aug_lu(&self, scaling: Option<&Scaling>) -> Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let p = self.p;
        let (n, m) = (p.n(), p.a.nrows());
        let mut k = Mat::zeros(n + m, n + m);
        for blk in &p.blocks {
            k.view_mut((blk.start, blk.start), (blk.len, blk.len))
                .copy_from(&self.block_h(blk, scaling));
        }
        k.view_mut((n, 0), (m, n)).copy_from(&p.a);
        k.view_mut((0, n), (n, m)).copy_from(&p.a.transpose());
        let lu = k.lu();
        lu.is_invertible().then_some(lu)
    }

    fn solve_aug(
        &self,
        lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        scaling: Option<&Scaling>,
        r1: &Vector,
        r2: &Vector,
        r3: &Vector,
    ) -> Option<(Vector, Vector, Vector)> {
        let p = self.p;
        let (n, m) = (p.n(), p.a.nrows());
        let top = r1 + p.gt_mul(&self.winv2_mul(scaling, r3));
        let rhs = Vector::from_iterator(n + m, top.iter().chain(r2.iter()).copied());
        let sol = lu.solve(&rhs)?;
        let dx = sol.rows(0, n).into_owned();
        let dy = sol.rows(n, m).into_owned();
        let dz = self.winv2_mul(scaling, &(p.g_mul(&dx) - r3));
        Some((dx, dy, dz))
    }

    /// LU of `[R Aᵀ G̃ᵀ; A 0 0; G̃ 0 −I]` with `G̃ = W⁻¹G` and `R` the free-block
    /// regularization, the system in the unknowns `(dx, dy, W dz)`.
    fn full_lu(&self, scaling: Option<&Scaling>) -> Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let p = self.p;
        let (n, m, d) = (p.n(), p.a.nrows(), p.cones.dim());
        let mut k = Mat::zeros(n + m + d, n + m + d);
        k.view_mut((n, 0), (m, n)).copy_from(&p.a);
        k.view_mut((0, n), (n, m)).copy_from(&p.a.transpose());
        for blk in p.blocks.iter().filter(|b| b.rows.is_empty()) {
            for j in blk.start..blk.start + blk.len {
                k[(j, j)] = FREE_REG;
            }
        }
        for (i, r) in p.g_rows.iter().enumerate() {
            if let Some((j, g)) = *r {
                let mut e = Vector::zeros(d);
                e[i] = g;
                let col = match scaling {
                    Some(sc) => sc.apply_winv(&p.cones, &e),
                    None => e,
                };
                for (r, v) in col.iter().enumerate() {
                    k[(n + m + r, j)] += v;
                    k[(j, n + m + r)] += v;
                }
            }
        }
        for r in 0..d {
            k[(n + m + r, n + m + r)] = -1.0;
        }
        let lu = k.lu();
        lu.is_invertible().then_some(lu)
    }

    fn solve_full(
        &self,
        lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        scaling: Option<&Scaling>,
        r1: &Vector,
        r2: &Vector,
        r3: &Vector,
    ) -> Option<(Vector, Vector, Vector)> {
        let p = self.p;
        let (n, m) = (p.n(), p.a.nrows());
        let winv = |v: &Vector| match scaling {
            Some(sc) => sc.apply_winv(&p.cones, v),
            None => v.clone(),
        };
        let rhs = Vector::from_iterator(
            n + m + r3.len(),
            r1.iter().chain(r2.iter()).copied().chain(winv(r3).iter().copied()),
        );
        let sol = lu.solve(&rhs)?;
        let dx = sol.rows(0, n).into_owned();
        let dy = sol.rows(n, m).into_owned();
        let dz = winv(&sol.rows(n + m, r3.len()).into_owned());
        Some((dx, dy, dz))
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²] (dx, dy, dz) = (r1, r2, r3)` with refinement.
    fn solve(
        &self,
        f: &KktFactor,
        scaling: Option<&Scaling>,
        r1: &Vector,
        r2: &Vector,
        r3: &Vector,
    ) -> (Vector, Vector, Vector) {
        let p = self.p;
        let rhs_norm = 1.0 + r1.amax().max(r2.amax()).max(r3.amax());
        let target = 1e-12 * rhs_norm;
        let residual = |dx: &Vector, dy: &Vector, dz: &Vector| {
            let e1 = r1 - (p.a.transpose() * dy + p.gt_mul(dz));
            let e2 = r2 - &p.a * dx;
            let e3 = r3 - (p.g_mul(dx) - self.w2_mul(scaling, dz));
            let err = e1.amax().max(e2.amax()).max(e3.amax());
            (e1, e2, e3, err)
        };
        let refine = |mut sol: (Vector, Vector, Vector),
                      step: &dyn Fn(&Vector, &Vector, &Vector) -> Option<(Vector, Vector, Vector)>| {
            let (mut e1, mut e2, mut e3, mut err) = residual(&sol.0, &sol.1, &sol.2);
            for _ in 0..4 {
                if err <= target {
                    break;
                }
                let Some((cx, cy, cz)) = step(&e1, &e2, &e3) else { break };
                let next = (&sol.0 + cx, &sol.1 + cy, &sol.2 + cz);
                let (n1, n2, n3, nerr) = residual(&next.0, &next.1, &next.2);
                if !(nerr < 0.5 * err) {
                    break;
                }
                (sol, e1, e2, e3, err) = (next, n1, n2, n3, nerr);
            }
            (sol, err)
        };
        let normal = |a: &Vector, b: &Vector, c: &Vector| Some(self.solve_once(f, scaling, a, b, c));
        let first = self.solve_once(f, scaling, r1, r2, r3);
        let (sol, err) = refine(first, &normal);
        let accept = 1e-6 * rhs_norm;
        if err <= accept {
            return sol;
        }
        let (mut sol, mut err) = (sol, err);
        if let Some(lu) = f.aug.get_or_init(|| self.aug_lu(scaling)).as_ref() {
            let aug = |a: &Vector, b: &Vector, c: &Vector| self.solve_aug(lu, scaling, a, b, c);
            if let Some(start) = aug(r1, r2, r3) {
                let (alt, alt_err) = refine(start, &aug);
                if alt_err < err {
                    (sol, err) = (alt, alt_err);
                }
            }
        }
        if err <= accept {
            return sol;
        }
        let Some(lu) = f.full.get_or_init(|| self.full_lu(scaling)).as_ref() else {
            return sol;
        };
        let full = |a: &Vector, b: &Vector, c: &Vector| self.solve_full(lu, scaling, a, b, c);
        match full(r1, r2, r3) {
            Some(start) => {
                let (alt, alt_err) = refine(start, &full);
                if alt_err < err { alt } else { sol }
            }
            None => sol,
        }
    }
}

fn shift_into_cone(cones: &Cones, v: &Vector) -> Vector {
    let alpha = cones.min_eig(v);
    if alpha > 1e-8 * (1.0 + v.amax()) || cones.dim() == 0 {
        v.clone()
    } else {
        v + cones.identity() * (1.0 - alpha)
    }
}

struct Iterate {
    x: Vector,
    y: Vector,
    z: Vector,
    s: Vector,
    tau: f64,
    kappa: f64,
}

pub(crate) fn solve(p: &StandardForm, settings: &SolverSettings) -> RawOutcome {
    let n = p.n();
    let m = p.a.nrows();
    let ws = Workspace::new(p);
    let mut last = Residuals::default();
    // Iterate with the smallest worst residual so far.
    let mut best: Option<(f64, Vector, Vector, Residuals)> = None;
    let relaxed = settings.tol * REDUCED_ACCURACY;
    let fail = |msg: &str, it: usize, iterate: Option<&Iterate>, residuals: Residuals, best: Option<(f64, Vector, Vector, Residuals)>| {
        if let Some((score, x, y, r)) = best {
            if score < relaxed {
                debug!("conic solve stopped after {it} iterations ({msg}); best iterate accepted at reduced accuracy");
                return RawOutcome {
                    status: Status::Optimal,
                    x,
                    y,
                    residuals: r,
                    iterations: it,
                };
            }
        }
        debug!("conic solve failed after {it} iterations: {msg}");
        RawOutcome {
            status: Status::NumericalFailure,
            x: iterate.map_or_else(|| Vector::zeros(n), |i| &i.x / i.tau.max(1e-300)),
            y: Vector::zeros(m),
            residuals,
            iterations: it,
        }
    };

    let Some(f0) = ws.factor(None) else {
        return fail("initial factorization", 0, None, last, best);
    };
    let zero_n = Vector::zeros(n);
    let (x0, _, zp) = ws.solve(&f0, None, &zero_n, &p.b, &p.h);
    let s0 = shift_into_cone(&p.cones, &(-zp));
    let (_, y0, zd) = ws.solve(&f0, None, &(-&p.c), &Vector::zeros(m), &Vector::zeros(p.cones.dim()));
    let z0 = shift_into_cone(&p.cones, &zd);
    let mut it = Iterate {
        x: x0,
        y: y0,
        z: z0,
        s: s0,
        tau: 1.0,
        kappa: 1.0,
    };

    let degree = p.cones.degree() as f64;
    let norm_b = p.b.norm();
    let norm_h = p.h.norm();
    let norm_c = p.c.norm();
    let tol = settings.tol;

    for iter in 0..=settings.max_iter {
        // Residuals of the embedding.
        let gtz = p.gt_mul(&it.z);
        let aty = p.a.transpose() * &it.y;
        let dual_lin = &aty + &gtz;
        let rx = &dual_lin + &p.c * it.tau;
        let ax = &p.a * &it.x;
        let ry = -&ax + &p.b * it.tau;
        let gx = p.g_mul(&it.x);
        let rz = -&gx + &p.h * it.tau - &it.s;
        let cx = p.c.dot(&it.x);
        let by_hz = p.b.dot(&it.y) + p.h.dot(&it.z);
        let rt = -cx - by_hz - it.kappa;

        let pres = (ry.norm() / (1.0 + norm_b)).max(rz.norm() / (1.0 + norm_h)) / it.tau;
        let dres = rx.norm() / (1.0 + norm_c) / it.tau;
        let pcost = cx / it.tau;
        let dcost = -by_hz / it.tau;
        let gap = it.s.dot(&it.z) / (it.tau * it.tau);
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        let residuals = Residuals {
            primal: pres,
            dual: dres,
            gap,
        };
        last = residuals;
        let score = pres.max(dres).max(gap.min(relgap));
        if score.is_finite() && best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, &it.x / it.tau, &it.y / it.tau, residuals));
        }
        trace!(
            "it {iter:3} pcost {pcost:+.6e} dcost {dcost:+.6e} gap {gap:.2e} pres {pres:.2e} dres {dres:.2e} tau {:.2e} kap {:.2e}",
            it.tau,
            it.kappa
        );
        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            return fail("non-finite residuals", iter, Some(&it), last, best);
        }

        if pres < tol && dres < tol && (gap < tol || relgap < tol) {
            return RawOutcome {
                status: Status::Optimal,
                x: &it.x / it.tau,
                y: &it.y / it.tau,
                residuals,
                iterations: iter,
            };
        }
        if by_hz < 0.0 && it.tau < it.kappa && dual_lin.norm() < tol * -by_hz {
            return RawOutcome {
                status: Status::Infeasible,
                x: Vector::zeros(n),
                y: &it.y / -by_hz,
                residuals,
                iterations: iter,
            };
        }
        if cx < 0.0 && it.tau < it.kappa && ax.norm().max((&gx + &it.s).norm()) < tol * -cx {
            return RawOutcome {
                status: Status::Unbounded,
                x: &it.x / -cx,
                y: Vector::zeros(m),
                residuals,
                iterations: iter,
            };
        }
        if iter == settings.max_iter {
            return fail("iteration limit reached", iter, Some(&it), last, best);
        }

        let Some(sc) = Scaling::new(&p.cones, &it.s, &it.z) else {
            return fail("iterate left the cone", iter, Some(&it), last, best);
        };
        let Some(f) = ws.factor(Some(&sc)) else {
            return fail("factorization of the normal equations", iter, Some(&it), last, best);
        };
        let lam = &sc.lambda;
        let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (degree + 1.0);

        let (u2x, u2y, u2z) = ws.solve(&f, Some(&sc), &(-&p.c), &p.b, &p.h);
        let denom_base = it.kappa / it.tau - p.c.dot(&u2x) - p.b.dot(&u2y) - p.h.dot(&u2z);

        let direction = |scale: f64, d_s: &Vector, d_k: f64| {
            let d_x = &rx * -scale;
            let d_y = &ry * -scale;
            let d_z = &rz * -scale;
            let d_t = -scale * rt;
            let w_lds = sc.apply_w(&p.cones, &p.cones.jordan_div(lam, d_s));
            let (u1x, u1y, u1z) = ws.solve(&f, Some(&sc), &d_x, &(-&d_y), &(-&d_z - &w_lds));
            let dtau = (d_t + d_k / it.tau + p.c.dot(&u1x) + p.b.dot(&u1y) + p.h.dot(&u1z)) / denom_base;
            let dx = u1x + &u2x * dtau;
            let dy = u1y + &u2y * dtau;
            let dz = u1z + &u2z * dtau;
            let ds = sc.apply_w(
                &p.cones,
                &(p.cones.jordan_div(lam, d_s) - sc.apply_w(&p.cones, &dz)),
            );
            let dkappa = (d_k - it.kappa * dtau) / it.tau;
            (dx, dy, dz, ds, dtau, dkappa)
        };
        let max_step = |ds: &Vector, dz: &Vector, dtau: f64, dkappa: f64| {
            let mut a = p
                .cones
                .step_to_boundary(lam, &sc.apply_winv(&p.cones, ds))
                .min(p.cones.step_to_boundary(lam, &sc.apply_w(&p.cones, dz)));
            if dtau < 0.0 {
                a = a.min(-it.tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-it.kappa / dkappa);
            }
            a
        };

        // Predictor.
        let ds_aff_rhs = -p.cones.jordan_prod(lam, lam);
        let (_, _, dz_a, ds_a, dtau_a, dkappa_a) = direction(1.0, &ds_aff_rhs, -it.tau * it.kappa);
        let alpha_a = max_step(&ds_a, &dz_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let corr = p
            .cones
            .jordan_prod(&sc.apply_winv(&p.cones, &ds_a), &sc.apply_w(&p.cones, &dz_a));
        let d_s = &ds_aff_rhs - corr + p.cones.identity() * (sigma * mu);
        let d_k = -it.tau * it.kappa - dtau_a * dkappa_a + sigma * mu;
        let (dx, dy, dz, ds, dtau, dkappa) = direction(1.0 - sigma, &d_s, d_k);
        let alpha = (STEP_FRACTION * max_step(&ds, &dz, dtau, dkappa)).min(1.0);
        if !(alpha > 1e-12) {
            return fail("step length collapsed", iter, Some(&it), last, best);
        }
        it.x += alpha * dx;
        it.y += alpha * dy;
        it.z += alpha * dz;
        it.s += alpha * ds;
        it.tau += alpha * dtau;
        it.kappa += alpha * dkappa;
    }
    fail("iteration limit reached", settings.max_iter, Some(&it), last, best)
}
