//! Box-constrained convex quadratic programs by projected coordinate descent.

use crate::ccg::{Mat, Vector};
use crate::error::{check_dim, Error, Result};

/// Minimizes `½ uᵀH u + gᵀu` over `lo ≤ u ≤ hi` with `H` positive semidefinite.
///
/// Sweeps coordinates in index order until no coordinate moves by more than
/// `tol`. Coordinates with `H_ii = 0` go to the bound selected by the sign of
/// their gradient.
pub fn box_qp(h: &Mat, g: &Vector, lo: &Vector, hi: &Vector, tol: f64, max_sweeps: usize) -> Result<Vector> {
    let n = g.len();
    check_dim("QP Hessian rows", n, h.nrows())?;
    check_dim("QP Hessian columns", n, h.ncols())?;
    check_dim("QP lower bound", n, lo.len())?;
    check_dim("QP upper bound", n, hi.len())?;
    if lo.iter().zip(hi.iter()).any(|(l, u)| l > u) {
        return Err(Error::Invalid("QP bounds cross".into()));
    }
    let mut u = Vector::from_iterator(n, (0..n).map(|i| 0.0_f64.clamp(lo[i], hi[i])));
    let mut grad = h * &u + g;
    for _ in 0..max_sweeps {
        let mut moved = 0.0_f64;
        for i in 0..n {
            let hii = h[(i, i)];
            let target = if hii > 0.0 {
                u[i] - grad[i] / hii
            } else if grad[i] > 0.0 {
                lo[i]
            } else if grad[i] < 0.0 {
                hi[i]
            } else {
                u[i]
            };
            let next = target.clamp(lo[i], hi[i]);
            let delta = next - u[i];
            if delta != 0.0 && delta.is_finite() {
                u[i] = next;
                grad.axpy(delta, &h.column(i), 1.0);
                moved = moved.max(delta.abs());
            }
        }
        if moved <= tol {
            return Ok(u);
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_clamps_to_bound() {
        let h = Mat::from_element(1, 1, 2.0);
        let u = box_qp(&h, &Vector::from_element(1, 4.0), &Vector::zeros(1), &Vector::from_element(1, 9.0), 1e-12, 100).unwrap();
        assert_eq!(u[0], 0.0);
        let u = box_qp(&h, &Vector::from_element(1, -1.0), &Vector::zeros(1), &Vector::from_element(1, 9.0), 1e-12, 100).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coupled_problem_matches_kkt() {
        let h = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let g = Vector::from_vec(vec![-3.0, 1.0]);
        let lo = Vector::zeros(2);
        let hi = Vector::from_element(2, 10.0);
        let u = box_qp(&h, &g, &lo, &hi, 1e-14, 1000).unwrap();
        // u1 = 0 active; 2 u0 = 3.
        assert!((u[0] - 1.5).abs() < 1e-10 && u[1] == 0.0, "{u}");
    }

    #[test]
    fn crossed_bounds_are_rejected() {
        let h = Mat::identity(1, 1);
        assert!(box_qp(&h, &Vector::zeros(1), &Vector::from_element(1, 1.0), &Vector::zeros(1), 1e-9, 10).is_err());
    }
}
