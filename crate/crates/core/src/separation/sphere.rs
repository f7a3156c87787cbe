//! Deterministic low-discrepancy directions on the unit sphere.
//!
//! Halton points with a seeded Cranley–Patterson shift are pushed through the
//! Box–Muller transform and normalized. The first `n` directions do not depend
//! on how many are requested, so a larger ray budget only adds directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ccg::Vector;

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut k = 2_u64;
    while out.len() < count {
        if out.iter().take_while(|p| *p * *p <= k).all(|p| !k.is_multiple_of(*p)) {
            out.push(k);
        }
        k += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// `n` unit vectors in `ℝ^dim`.
pub fn directions(dim: usize, n: usize, seed: u64) -> Vec<Vector> {
    if dim == 0 {
        return Vec::new();
    }
    let pairs = dim.div_ceil(2);
    let bases = primes(2 * pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..2 * pairs).map(|_| rng.gen::<f64>()).collect();
    let mut out = Vec::with_capacity(n);
    let mut i = 1_u64;
    while out.len() < n {
        let mut g = Vec::with_capacity(2 * pairs);
        for k in 0..pairs {
            let u1 = (radical_inverse(i, bases[2 * k]) + shift[2 * k]).fract();
            let u2 = (radical_inverse(i, bases[2 * k + 1]) + shift[2 * k + 1]).fract();
            let r = (-2.0 * (1.0 - u1).ln()).sqrt();
            let a = std::f64::consts::TAU * u2;
            g.push(r * a.cos());
            g.push(r * a.sin());
        }
        i += 1;
        let v = Vector::from_iterator(dim, g.into_iter().take(dim));
        let norm = v.norm();
        if norm > 1e-12 {
            out.push(v / norm);
        }
    }
    out
}
