//! The separation direction attains the largest gain of `V`.

mod common;

use common::svd_probe_excess;
use proptest::prelude::*;

#[test]
fn no_probe_beats_the_top_singular_vector() {
    for seed in 0..50 {
        let excess = svd_probe_excess(seed, 1000).unwrap();
        assert!(excess <= 1e-9, "seed {seed}: probe exceeds by {excess:.3e}");
    }
}

proptest! {
    #[test]
    fn random_matrices(seed in any::<u64>()) {
        let excess = svd_probe_excess(seed, 200).map_err(TestCaseError::fail)?;
        prop_assert!(excess <= 1e-9);
    }
}
