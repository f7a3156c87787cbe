use super::{Ccg, Mat, Vector};
use crate::conic::Backend;
use crate::error::{Error, Result};

/// Box over-approximation `{ Φ ξ + center : ‖ξ‖_∞ ≤ 1 }` with invertible `Φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderReduction {
    pub phi: Mat,
    pub center: Vector,
}

impl OrderReduction {
    pub fn as_ccg(&self) -> Ccg {
        Ccg::unit_box(self.center.len())
            .linear_map(&self.phi, &self.center)
            .expect("square generator matches the center")
    }
}

/// Left singular directions of `G` completed to an orthonormal basis.
fn singular_basis(g: &Mat) -> Mat {
    let n = g.nrows();
    let mut basis: Vec<Vector> = Vec::with_capacity(n);
    if g.ncols() > 0 {
        let svd = g.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        for k in order {
            if svd.singular_values[k] > 1e-12 * smax.max(1e-300) {
                basis.push(u.column(k).into_owned());
            }
        }
    }
    // Gram–Schmidt completion with the canonical basis.
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        for q in &basis {
            let c = q.dot(&e);
            e.axpy(-c, q, 1.0);
        }
        let norm = e.norm();
        if norm > 1e-8 {
            basis.push(e / norm);
        }
    }
    Mat::from_columns(&basis)
}

/// Square box over-approximation of a nonempty CCG.
///
/// `Φ = U · diag(h)` where the columns of `U` are the left singular vectors of
/// `G` and `h_i` is the larger support radius of `Z − c` along `±u_i`. Zero
/// radii become `1e-8·max h` (or `1e-8` for a singleton) so that `Φ` stays
/// invertible.
pub fn reduce_order(z: &Ccg, backend: &Backend) -> Result<OrderReduction> {
    let n = z.dim();
    if n == 0 {
        return Err(Error::Invalid("order reduction of a zero-dimensional set".into()));
    }
    if backend.is_empty(z)? {
        return Err(Error::EmptySet);
    }
    let u = singular_basis(z.g());
    let c = z.c();
    let mut h = Vector::zeros(n);
    for i in 0..n {
        let ui = u.column(i).into_owned();
        let up = backend.support(z, &ui)?.0 - ui.dot(c);
        let down = backend.support(z, &(-&ui))?.0 + ui.dot(c);
        h[i] = up.max(down).max(0.0);
    }
    let hmax = h.amax();
    let eps = if hmax > 0.0 { 1e-8 * hmax } else { 1e-8 };
    for v in h.iter_mut() {
        if *v <= eps {
            *v = eps;
        }
    }
    Ok(OrderReduction {
        phi: u * Mat::from_diagonal(&h),
        center: c.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_reduces_to_signed_permutation() {
        let be = Backend::default();
        let r = reduce_order(&Ccg::unit_box(2), &be).unwrap();
        let abs = r.phi.map(f64::abs);
        assert!((abs.clone() * abs.transpose() - Mat::identity(2, 2)).amax() < 1e-6);
        assert!(r.center.amax() < 1e-12);
    }

    #[test]
    fn segment_is_regularized() {
        let be = Backend::default();
        let seg = Ccg::boxed(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
        let r = reduce_order(&seg, &be).unwrap();
        assert_eq!(r.center, Vector::from_vec(vec![1.0, 0.0]));
        let sv = r.phi.clone().svd(false, false).singular_values;
        let (big, small) = (sv.max(), sv.min());
        assert!((big - 1.0).abs() < 1e-6, "{sv}");
        assert!(small > 0.0 && small < 1e-7);
        assert!(r.phi.clone().try_inverse().is_some());
    }

    #[test]
    fn singleton_gets_unit_regularization() {
        let be = Backend::default();
        let r = reduce_order(&Ccg::point(Vector::from_vec(vec![3.0])), &be).unwrap();
        assert!((r.phi[(0, 0)].abs() - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn empty_set_is_rejected() {
        let be = Backend::default();
        let z = Ccg::boxed(&[0.0], &[1.0]).unwrap().intersect(&Ccg::boxed(&[2.0], &[3.0]).unwrap(), None).unwrap();
        assert_eq!(reduce_order(&z, &be), Err(Error::EmptySet));
    }
}
