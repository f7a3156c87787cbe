//! Symmetric cone algebra for `K = ℝ₊^l × Q^{q₁} × ⋯ × Q^{q_k}`.
//!
//! SOC vectors are ordered `(v₀, v₁)` with `v₀ ≥ ‖v₁‖`. Nonnegative rows come
//! first, then each second-order cone in sequence.

use std::ops::Range;

use crate::ccg::Vector;

#[derive(Clone, Debug, Default)]
pub(crate) struct Cones {
    pub nonneg: usize,
    socs: Vec<Range<usize>>,
    /// SOC index per row; `None` for nonnegative rows.
    row_soc: Vec<Option<usize>>,
}

impl Cones {
    pub fn new(nonneg: usize, soc_dims: &[usize]) -> Self {
        let mut socs = Vec::with_capacity(soc_dims.len());
        let mut row_soc = vec![None; nonneg];
        let mut off = nonneg;
        for (k, &d) in soc_dims.iter().enumerate() {
            socs.push(off..off + d);
            row_soc.extend(std::iter::repeat_n(Some(k), d));
            off += d;
        }
        Self { nonneg, socs, row_soc }
    }

    pub fn dim(&self) -> usize {
        self.row_soc.len()
    }

    pub fn degree(&self) -> usize {
        self.nonneg + self.socs.len()
    }

    pub fn row_soc(&self, row: usize) -> Option<usize> {
        self.row_soc[row]
    }

    pub fn soc_range(&self, k: usize) -> Range<usize> {
        self.socs[k].clone()
    }

    pub fn identity(&self) -> Vector {
        let mut e = Vector::zeros(self.dim());
        e.rows_mut(0, self.nonneg).fill(1.0);
        for r in &self.socs {
            e[r.start] = 1.0;
        }
        e
    }

    /// Smallest "eigenvalue": `v − t e ∈ K` iff `t ≤` the returned value.
    pub fn min_eig(&self, v: &Vector) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.nonneg {
            m = m.min(v[i]);
        }
        for r in &self.socs {
            let head = v.rows(r.start + 1, r.len() - 1).norm();
            m = m.min(v[r.start] - head);
        }
        m
    }

    /// `u ∘ v`.
    pub fn jordan_prod(&self, u: &Vector, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for i in 0..self.nonneg {
            out[i] = u[i] * v[i];
        }
        for r in &self.socs {
            let (s, d) = (r.start, r.len());
            out[s] = u.rows(s, d).dot(&v.rows(s, d));
            for j in 1..d {
                out[s + j] = u[s] * v[s + j] + v[s] * u[s + j];
            }
        }
        out
    }

    /// `λ \ v`, the inverse of `x ↦ λ ∘ x` for interior `λ`.
    pub fn jordan_div(&self, lam: &Vector, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for i in 0..self.nonneg {
            out[i] = v[i] / lam[i];
        }
        for r in &self.socs {
            let (s, d) = (r.start, r.len());
            let l1 = lam.rows(s + 1, d - 1);
            let v1 = v.rows(s + 1, d - 1);
            let det = soc_det(lam[s], l1.norm());
            let x0 = (lam[s] * v[s] - l1.dot(&v1)) / det;
            out[s] = x0;
            for j in 1..d {
                out[s + j] = (v[s + j] - x0 * lam[s + j]) / lam[s];
            }
        }
        out
    }

    /// Largest `α ≥ 0` with `λ + α d ∈ K` for interior `λ`; `∞` when unrestricted.
    pub fn step_to_boundary(&self, lam: &Vector, d: &Vector) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.nonneg {
            if d[i] < 0.0 {
                alpha = alpha.min(-lam[i] / d[i]);
            }
        }
        for r in &self.socs {
            let (s, n) = (r.start, r.len());
            let l1 = lam.rows(s + 1, n - 1);
            let lnorm = soc_det(lam[s], l1.norm()).sqrt();
            let lb0 = lam[s] / lnorm;
            let d0 = d[s];
            let d1 = d.rows(s + 1, n - 1);
            let rho0 = (lb0 * d0 - l1.dot(&d1) / lnorm) / lnorm;
            let factor = (rho0 + d0 / lnorm) / (lb0 + 1.0);
            let rho1 = d1 / lnorm - (factor / lnorm) * l1;
            let excess = rho1.norm() - rho0;
            if excess > 0.0 {
                alpha = alpha.min(1.0 / excess);
            }
        }
        alpha
    }
}

/// `x₀² − ‖x₁‖²` in factored form.
fn soc_det(x0: f64, x1_norm: f64) -> f64 {
    (x0 - x1_norm) * (x0 + x1_norm)
}

#[derive(Clone, Debug)]
struct SocScaling {
    eta: f64,
    /// `w̄` with `w̄ᵀ J w̄ = 1`.
    w: Vector,
}

/// Nesterov–Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Clone, Debug)]
pub(crate) struct Scaling {
    nonneg_w: Vec<f64>,
    socs: Vec<SocScaling>,
    pub lambda: Vector,
}

impl Scaling {
    /// `None` if `s` or `z` is not strictly interior.
    pub fn new(cones: &Cones, s: &Vector, z: &Vector) -> Option<Self> {
        let mut nonneg_w = Vec::with_capacity(cones.nonneg);
        let mut lambda = Vector::zeros(cones.dim());
        for i in 0..cones.nonneg {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            nonneg_w.push((s[i] / z[i]).sqrt());
            lambda[i] = (s[i] * z[i]).sqrt();
        }
        let mut socs = Vec::with_capacity(cones.socs.len());
        for r in &cones.socs {
            let (st, d) = (r.start, r.len());
            let sv = s.rows(st, d);
            let zv = z.rows(st, d);
            let sdet = soc_det(sv[0], sv.rows(1, d - 1).norm());
            let zdet = soc_det(zv[0], zv.rows(1, d - 1).norm());
            if !(sv[0] > 0.0 && zv[0] > 0.0 && sdet > 0.0 && zdet > 0.0) {
                return None;
            }
            let sn = sdet.sqrt();
            let zn = zdet.sqrt();
            let sb = sv / sn;
            let zb = zv / zn;
            let gamma = ((1.0 + sb.dot(&zb)) / 2.0).sqrt();
            let mut w = Vector::zeros(d);
            w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            for j in 1..d {
                w[j] = (sb[j] - zb[j]) / (2.0 * gamma);
            }
            let eta = (sn / zn).sqrt();
            socs.push(SocScaling { eta, w });
        }
        let mut out = Self {
            nonneg_w,
            socs,
            lambda,
        };
        let wz = out.apply_w(cones, z);
        for r in &cones.socs {
            out.lambda.rows_mut(r.start, r.len()).copy_from(&wz.rows(r.start, r.len()));
        }
        Some(out)
    }

    fn apply(&self, cones: &Cones, v: &Vector, inverse: bool) -> Vector {
        let mut out = Vector::zeros(cones.dim());
        for i in 0..cones.nonneg {
            out[i] = if inverse { v[i] / self.nonneg_w[i] } else { v[i] * self.nonneg_w[i] };
        }
        for (sc, r) in self.socs.iter().zip(&cones.socs) {
            let (st, d) = (r.start, r.len());
            let w0 = sc.w[0];
            let w1 = sc.w.rows(1, d - 1);
            let v1 = v.rows(st + 1, d - 1);
            let w1v1 = w1.dot(&v1);
            let (sign, scale) = if inverse { (-1.0, 1.0 / sc.eta) } else { (1.0, sc.eta) };
            out[st] = scale * (w0 * v[st] + sign * w1v1);
            let coef = sign * v[st] + w1v1 / (1.0 + w0);
            for j in 1..d {
                out[st + j] = scale * (v[st + j] + coef * sc.w[j]);
            }
        }
        out
    }

    pub fn apply_w(&self, cones: &Cones, v: &Vector) -> Vector {
        self.apply(cones, v, false)
    }

    pub fn apply_winv(&self, cones: &Cones, v: &Vector) -> Vector {
        self.apply(cones, v, true)
    }

    /// `W² v`.
    pub fn apply_w2(&self, cones: &Cones, v: &Vector) -> Vector {
        let mut out = Vector::zeros(cones.dim());
        for i in 0..cones.nonneg {
            out[i] = v[i] * self.nonneg_w[i] * self.nonneg_w[i];
        }
        for (sc, r) in self.socs.iter().zip(&cones.socs) {
            let (st, d) = (r.start, r.len());
            let vv = v.rows(st, d);
            let wv = sc.w.dot(&vv);
            let e2 = sc.eta * sc.eta;
            out[st] = e2 * (2.0 * sc.w[0] * wv - vv[0]);
            for j in 1..d {
                out[st + j] = e2 * (2.0 * sc.w[j] * wv + vv[j]);
            }
        }
        out
    }

    /// Entry `(i, j)` of `W²`; zero across different cones.
    pub fn w2_entry(&self, cones: &Cones, i: usize, j: usize) -> f64 {
        match (cones.row_soc(i), cones.row_soc(j)) {
            (None, None) if i == j => self.nonneg_w[i] * self.nonneg_w[i],
            (Some(a), Some(b)) if a == b => {
                let sc = &self.socs[a];
                let st = cones.socs[a].start;
                let (li, lj) = (i - st, j - st);
                let jkk = match (li == lj, li == 0) {
                    (true, true) => 1.0,
                    (true, false) => -1.0,
                    _ => 0.0,
                };
                sc.eta * sc.eta * (2.0 * sc.w[li] * sc.w[lj] - jkk)
            }
            _ => 0.0,
        }
    }

    /// Entry `(i, j)` of `W⁻²`; zero across different cones.
    pub fn winv2_entry(&self, cones: &Cones, i: usize, j: usize) -> f64 {
        match (cones.row_soc(i), cones.row_soc(j)) {
            (None, None) if i == j => 1.0 / (self.nonneg_w[i] * self.nonneg_w[i]),
            (Some(a), Some(b)) if a == b => {
                let sc = &self.socs[a];
                let st = cones.socs[a].start;
                let (li, lj) = (i - st, j - st);
                // W⁻² = η⁻² (2 J w̄ w̄ᵀ J − J)
                let jw = |k: usize| if k == 0 { sc.w[0] } else { -sc.w[k] };
                let jkk = if li == lj {
                    if li == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                };
                (2.0 * jw(li) * jw(lj) - jkk) / (sc.eta * sc.eta)
            }
            _ => 0.0,
        }
    }
}
