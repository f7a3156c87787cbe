//! Planar boundary samples by ray shooting.

use std::f64::consts::TAU;

use afdi_core::ccg::{Ccg, Vector};
use afdi_core::conic::Backend;
use afdi_core::reach::LiftedReachSet;
use afdi_core::Result;

/// Mean of the support maximizers along `±e₁, ±e₂`; a member of `z`.
fn interior_origin(z: &Ccg, backend: &Backend) -> Result<Vector> {
    let mut sum = Vector::zeros(2);
    for d in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
        sum += backend.support(z, &Vector::from_row_slice(&d))?.1;
    }
    Ok(sum / 4.0)
}

/// `n` boundary points of the planar set `z` at evenly spaced angles.
pub fn planar_boundary(z: &Ccg, n: usize, backend: &Backend) -> Result<Vec<[f64; 2]>> {
    let origin = interior_origin(z, backend)?;
    (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            let d = Vector::from_row_slice(&[a.cos(), a.sin()]);
            let t = backend.ray_max(z, &origin, &d)?;
            Ok([origin[0] + t * d[0], origin[1] + t * d[1]])
        })
        .collect()
}

/// Leading block of `reach` at the input sequence `u`, restricted to `coords`.
pub fn projected_block(reach: &LiftedReachSet, u: &Vector, coords: &[usize]) -> Result<Ccg> {
    reach.state_at(u)?.project(coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disc_boundary_is_round() {
        let backend = Backend::default();
        let disc = Ccg::ball(Vector::zeros(2), 1.0).unwrap();
        let pts = planar_boundary(&disc, 360, &backend).unwrap();
        assert_eq!(pts.len(), 360);
        let worst = pts.iter().map(|p| (p[0].hypot(p[1]) - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }
}
