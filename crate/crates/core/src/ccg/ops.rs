use super::{Ccg, ConeSpec, Mat, MatrixCcg, Vector};
use crate::error::{check_dim, Error, Result};

/// Block-diagonal stacking of two matrices.
pub(crate) fn block_diag(x: &Mat, y: &Mat) -> Mat {
    let mut out = Mat::zeros(x.nrows() + y.nrows(), x.ncols() + y.ncols());
    out.view_mut((0, 0), x.shape()).copy_from(x);
    out.view_mut(x.shape(), y.shape()).copy_from(y);
    out
}

pub(crate) fn hstack(x: &Mat, y: &Mat) -> Mat {
    debug_assert_eq!(x.nrows(), y.nrows());
    let mut out = Mat::zeros(x.nrows(), x.ncols() + y.ncols());
    out.view_mut((0, 0), x.shape()).copy_from(x);
    out.view_mut((0, x.ncols()), y.shape()).copy_from(y);
    out
}

pub(crate) fn vstack(x: &Mat, y: &Mat) -> Mat {
    debug_assert_eq!(x.ncols(), y.ncols());
    let mut out = Mat::zeros(x.nrows() + y.nrows(), x.ncols());
    out.view_mut((0, 0), x.shape()).copy_from(x);
    out.view_mut((x.nrows(), 0), y.shape()).copy_from(y);
    out
}

pub(crate) fn vconcat(x: &Vector, y: &Vector) -> Vector {
    Vector::from_iterator(x.len() + y.len(), x.iter().chain(y.iter()).copied())
}

impl Ccg {
    /// `R Z + t`.
    pub fn linear_map(&self, r: &Mat, t: &Vector) -> Result<Ccg> {
        check_dim("linear map columns vs ambient dimension", self.dim(), r.ncols())?;
        check_dim("linear map offset vs rows", r.nrows(), t.len())?;
        Ccg::new(
            r * &self.g,
            r * &self.c + t,
            self.a.clone(),
            self.b.clone(),
            self.cones.clone(),
        )
    }

    /// `Z + t`.
    pub fn translate(&self, t: &Vector) -> Result<Ccg> {
        check_dim("translation vs ambient dimension", self.dim(), t.len())?;
        let mut out = self.clone();
        out.c += t;
        Ok(out)
    }

    /// `Z ⊕ W`.
    pub fn minkowski_sum(&self, w: &Ccg) -> Result<Ccg> {
        check_dim("Minkowski sum ambient dimensions", self.dim(), w.dim())?;
        Ccg::new(
            hstack(&self.g, &w.g),
            &self.c + &w.c,
            block_diag(&self.a, &w.a),
            vconcat(&self.b, &w.b),
            self.cones.iter().chain(&w.cones).cloned().collect(),
        )
    }

    /// Generalized intersection `{ z ∈ Z : R z ∈ Y }`; `R = I` when `None`.
    pub fn intersect(&self, y: &Ccg, r: Option<&Mat>) -> Result<Ccg> {
        let identity;
        let r = match r {
            Some(r) => r,
            None => {
                check_dim("intersection ambient dimensions", self.dim(), y.dim())?;
                identity = Mat::identity(self.dim(), self.dim());
                &identity
            }
        };
        check_dim("intersection map columns", self.dim(), r.ncols())?;
        check_dim("intersection map rows", y.dim(), r.nrows())?;
        let g = hstack(&self.g, &Mat::zeros(self.dim(), y.n_latent()));
        let coupling = hstack(&(r * &self.g), &(-&y.g));
        let a = vstack(&block_diag(&self.a, &y.a), &coupling);
        let b = vconcat(&vconcat(&self.b, &y.b), &(&y.c - r * &self.c));
        Ccg::new(g, self.c.clone(), a, b, self.cones.iter().chain(&y.cones).cloned().collect())
    }

    /// `Z × W`.
    pub fn cartesian_product(&self, w: &Ccg) -> Result<Ccg> {
        Ccg::new(
            block_diag(&self.g, &w.g),
            vconcat(&self.c, &w.c),
            block_diag(&self.a, &w.a),
            vconcat(&self.b, &w.b),
            self.cones.iter().chain(&w.cones).cloned().collect(),
        )
    }

    /// Coordinate projection onto zero-based indices `idx`, in the given order.
    pub fn project(&self, idx: &[usize]) -> Result<Ccg> {
        let n = self.dim();
        let mut sel = Mat::zeros(idx.len(), n);
        for (row, &i) in idx.iter().enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, dim: n });
            }
            sel[(row, i)] = 1.0;
        }
        self.linear_map(&sel, &Vector::zeros(idx.len()))
    }

    /// `Conv(Z ∪ W)`.
    pub fn convex_hull(&self, w: &Ccg) -> Result<Ccg> {
        Ccg::convex_hull_all(&[self.clone(), w.clone()])
    }

    /// Convex hull of a nonempty list of sets, concatenated in argument order.
    pub fn convex_hull_all(sets: &[Ccg]) -> Result<Ccg> {
        let first = sets.first().ok_or_else(|| Error::Invalid("convex hull of an empty list".into()))?;
        if sets.len() == 1 {
            return Ok(first.clone());
        }
        let n = first.dim();
        for s in sets {
            check_dim("convex hull ambient dimensions", n, s.dim())?;
        }
        let parts: Vec<Conified> = sets.iter().map(conify).collect();
        let total_latent: usize = parts.iter().map(|p| p.g.ncols() + 1).sum();
        let total_rows: usize = parts.iter().map(|p| p.a.nrows()).sum::<usize>() + 1;
        let mut g = Mat::zeros(n, total_latent);
        let mut a = Mat::zeros(total_rows, total_latent);
        let mut b = Vector::zeros(total_rows);
        let mut cones = Vec::new();
        let (mut col, mut row) = (0, 0);
        for (p, set) in parts.into_iter().zip(sets) {
            let k = p.g.ncols();
            g.view_mut((0, col), (n, k)).copy_from(&p.g);
            g.set_column(col + k, &(&p.g_lambda + &set.c));
            let m = p.a.nrows();
            a.view_mut((row, col), (m, k)).copy_from(&p.a);
            a.view_mut((row, col + k), (m, 1)).copy_from(&p.a_lambda);
            a[(total_rows - 1, col + k)] = 1.0;
            cones.extend(p.cones);
            cones.push(ConeSpec::NonNegative { dim: 1 });
            col += k + 1;
            row += m;
        }
        b[total_rows - 1] = 1.0;
        Ccg::new(g, Vector::zeros(n), a, b, cones)
    }
}

/// Homogenized operand: `{ G ξ + g_λ λ : A ξ + a_λ λ = 0, ξ ∈ K }` equals `λ·(Z − c)`
/// for `λ > 0`, with every factor of `K` a cone.
struct Conified {
    g: Mat,
    g_lambda: Vector,
    a: Mat,
    a_lambda: Vector,
    cones: Vec<ConeSpec>,
}

fn conify(z: &Ccg) -> Conified {
    let n = z.dim();
    let m0 = z.n_constraints();
    let mut g_cols: Vec<Vector> = Vec::new();
    let mut a_cols: Vec<Vector> = Vec::new();
    let mut extra_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut g_lambda = Vector::zeros(n);
    let mut a_lambda = -z.b.clone();
    let mut cones = Vec::new();
    let mut offset = 0;
    for cone in &z.cones {
        let d = cone.dim();
        let gcol = |j: usize| z.g.column(offset + j).into_owned();
        let acol = |j: usize| z.a.column(offset + j).into_owned();
        match cone {
            ConeSpec::Free { .. } | ConeSpec::NonNegative { .. } | ConeSpec::Soc { .. } => {
                for j in 0..d {
                    g_cols.push(gcol(j));
                    a_cols.push(acol(j));
                }
                cones.push(cone.clone());
            }
            ConeSpec::Box { lo, hi } => {
                // ξ_j = lo_j λ + s_j, s_j + s'_j = (hi_j − lo_j) λ, s, s' ≥ 0.
                let open: Vec<usize> = (0..d).filter(|&j| hi[j] > lo[j]).collect();
                for j in 0..d {
                    g_lambda.axpy(lo[j], &gcol(j), 1.0);
                    a_lambda.axpy(lo[j], &acol(j), 1.0);
                }
                let base = g_cols.len();
                for &j in &open {
                    g_cols.push(gcol(j));
                    a_cols.push(acol(j));
                }
                for _ in &open {
                    g_cols.push(Vector::zeros(n));
                    a_cols.push(Vector::zeros(m0));
                }
                let k = open.len();
                for (i, &j) in open.iter().enumerate() {
                    extra_rows.push((vec![(base + i, 1.0), (base + k + i, 1.0)], -(hi[j] - lo[j])));
                }
                if k > 0 {
                    cones.push(ConeSpec::NonNegative { dim: 2 * k });
                }
            }
            ConeSpec::Ball2 { radius, .. } => {
                if *radius > 0.0 {
                    // (ξ, τ) ∈ SOC with τ = r λ.
                    let base = g_cols.len();
                    for j in 0..d {
                        g_cols.push(gcol(j));
                        a_cols.push(acol(j));
                    }
                    g_cols.push(Vector::zeros(n));
                    a_cols.push(Vector::zeros(m0));
                    extra_rows.push((vec![(base + d, 1.0)], -radius));
                    cones.push(ConeSpec::Soc { dim: d + 1 });
                }
            }
        }
        offset += d;
    }
    let k = g_cols.len();
    let mut g = Mat::zeros(n, k);
    let mut a = Mat::zeros(m0 + extra_rows.len(), k);
    for (j, (gc, ac)) in g_cols.iter().zip(&a_cols).enumerate() {
        g.set_column(j, gc);
        a.view_mut((0, j), (m0, 1)).copy_from(ac);
    }
    let mut a_lam = Vector::zeros(m0 + extra_rows.len());
    a_lam.rows_mut(0, m0).copy_from(&a_lambda);
    for (r, (entries, lam)) in extra_rows.into_iter().enumerate() {
        for (j, v) in entries {
            a[(m0 + r, j)] = v;
        }
        a_lam[m0 + r] = lam;
    }
    Conified {
        g,
        g_lambda,
        a,
        a_lambda: a_lam,
        cones,
    }
}

/// Interval lower bound of each ambient coordinate, ignoring equality rows.
/// `None` when some factor is unbounded.
fn coordinate_lower_bounds(z: &Ccg) -> Option<Vector> {
    let mut lb = z.c.clone();
    let mut offset = 0;
    for cone in &z.cones {
        let d = cone.dim();
        let block = z.g.columns(offset, d);
        match cone {
            ConeSpec::Box { lo, hi } => {
                for i in 0..z.dim() {
                    for j in 0..d {
                        let gij = block[(i, j)];
                        lb[i] += (gij * lo[j]).min(gij * hi[j]);
                    }
                }
            }
            ConeSpec::Ball2 { radius, .. } => {
                for i in 0..z.dim() {
                    lb[i] -= radius * block.row(i).norm();
                }
            }
            _ => return None,
        }
        offset += d;
    }
    Some(lb)
}

/// Joint set over `(x, u) ∈ ℝ^{p+q}` containing `{ (B u, u) : B ∈ Bset, u ∈ U }`.
///
/// Each control coordinate `α` gets a block `(η_α, s_α) ∈ SOC` with
/// `s_α = ρ u_α`, where `ρ` bounds the latent norm of `Bset`. The block
/// stands for `ξ_B u_α`, which is why `U` must lie in the nonnegative orthant.
pub fn set_matrix_vector_product(bset: &MatrixCcg, u: &Ccg) -> Result<Ccg> {
    let (p, q) = bset.shape();
    check_dim("matrix set columns vs control dimension", q, u.dim())?;
    let bs = bset.set();
    if bs.n_constraints() > 0 {
        return Err(Error::UnsupportedCone("matrix set with equality constraints".into()));
    }
    let mut rho2 = 0.0;
    for cone in bs.cones().iter().chain(u.cones()) {
        if !cone.is_bounded() {
            return Err(Error::UnsupportedCone(format!(
                "{} factor in a set-matrix product operand",
                cone.variant_name()
            )));
        }
    }
    for cone in bs.cones() {
        rho2 += cone.max_norm().unwrap_or(0.0).powi(2);
    }
    let rho = rho2.sqrt();
    let lb = coordinate_lower_bounds(u).unwrap_or_else(|| Vector::zeros(q));
    if lb.iter().any(|v| *v < -1e-12) {
        return Err(Error::Invalid("control set must lie in the nonnegative orthant".into()));
    }

    let ngb = bs.n_latent();
    let ngu = u.n_latent();
    let block = if ngb > 0 { ngb + 1 } else { 0 };
    let n_latent = ngu + q * block;
    let gb = bs.g();
    let cb = bs.c();

    let mut g = Mat::zeros(p + q, n_latent);
    let mut c = Vector::zeros(p + q);
    for alpha in 0..q {
        let cba = cb.rows(alpha * p, p);
        let gua = u.g().row(alpha);
        // c_Bα u_α with u_α = G_uα ξ_u + c_uα.
        let mut gx = g.view_mut((0, 0), (p, ngu));
        gx += &cba * &gua;
        c.rows_mut(0, p).axpy(u.c()[alpha], &cba, 1.0);
        if block > 0 {
            let col = ngu + alpha * block;
            g.view_mut((0, col), (p, ngb)).copy_from(&gb.rows(alpha * p, p));
        }
    }
    g.view_mut((p, 0), (q, ngu)).copy_from(u.g());
    c.rows_mut(p, q).copy_from(u.c());

    let m_u = u.n_constraints();
    let extra = if block > 0 { q } else { 0 };
    let mut a = Mat::zeros(m_u + extra, n_latent);
    let mut b = Vector::zeros(m_u + extra);
    a.view_mut((0, 0), (m_u, ngu)).copy_from(u.a());
    b.rows_mut(0, m_u).copy_from(u.b());
    let mut cones: Vec<ConeSpec> = u.cones().to_vec();
    if block > 0 {
        for alpha in 0..q {
            let r = m_u + alpha;
            let s_col = ngu + alpha * block + ngb;
            a[(r, s_col)] = 1.0;
            for j in 0..ngu {
                a[(r, j)] = -rho * u.g()[(alpha, j)];
            }
            b[r] = rho * u.c()[alpha];
            cones.push(ConeSpec::Soc { dim: block });
        }
    }
    Ccg::new(g, c, a, b, cones)
}
