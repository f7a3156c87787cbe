//! Properties of the separating inputs on the bundled vehicle scenario.

mod common;

use afdi_core::reach::reach;
use afdi_core::scenario::{load_scenario, Scenario};
use afdi_core::separation::{separation_input, svd_separation_input, PairSets, SamplingParams, SeparationResult};
use common::reference_support;

fn vehicle() -> Scenario {
    load_scenario("vehicle-s5").unwrap().build().unwrap()
}

fn sampled(s: &Scenario, rays: usize) -> SeparationResult {
    let sampling = SamplingParams {
        n_rays: Some(rays),
        refine: false,
        ..s.sampling.clone()
    };
    separation_input(&s.problem(), &sampling).unwrap()
}

/// Emptiness of every sliced pair according to the reference solver.
fn reference_separated(s: &Scenario, u: &[f64]) -> bool {
    let p = s.problem();
    let sets: Vec<_> = s.modes.iter().map(|m| reach(m, p.horizon, p.sets, p.schedule, p.space).unwrap()).collect();
    let u = afdi_core::ccg::Vector::from_column_slice(u);
    PairSets::build(&sets).unwrap().iter().all(|pair| {
        let z = pair.joint.slice_controls(&u).unwrap();
        let d = afdi_core::ccg::Vector::from_element(z.dim(), 1.0);
        reference_support(&z, &d).is_none()
    })
}

#[test]
fn same_seed_same_input() {
    let s = vehicle();
    let a = sampled(&s, 48);
    let b = sampled(&s, 48);
    assert_eq!(a.u_star, b.u_star);
    assert_eq!(a.cost.to_bits(), b.cost.to_bits());
}

#[test]
fn more_rays_never_cost_more() {
    let s = vehicle();
    let few = sampled(&s, 40);
    let many = sampled(&s, 120);
    assert!(few.certified && many.certified);
    assert!(many.cost <= few.cost + 1e-12, "{} > {}", many.cost, few.cost);
}

#[test]
fn certified_input_is_admissible_and_separating() {
    let s = vehicle();
    let r = sampled(&s, 64);
    assert!(r.certified);
    let (lo, hi) = s.problem().sequence_bounds().unwrap();
    for (i, u) in r.u_star.iter().enumerate() {
        assert!(*u >= lo[i] - 1e-12 && *u <= hi[i] + 1e-12, "u[{i}] = {u}");
    }
    assert!(r.certificates.iter().all(|c| c.empty && c.margin > 1e-7));
    assert!(reference_separated(&s, &r.u_star));
    assert!((s.cost.eval(&r.u_star()) - r.cost).abs() < 1e-12);
}

#[test]
fn sampling_stays_in_the_input_space() {
    let s = vehicle();
    let r = sampled(&s, 32);
    assert_eq!(r.ray_solves.lifted_space, 0);
    assert!(r.ray_solves.input_space >= 32);
    assert_eq!(r.rays_used, 32);
}

#[test]
fn svd_input_is_certified() {
    let s = vehicle();
    let svd = svd_separation_input(&s.problem(), &s.svd).unwrap();
    assert!(svd.certified);
    assert!(reference_separated(&s, &svd.u_star));
    assert_eq!(svd.sigma_history.len(), svd.iterations);
    assert!((s.cost.eval(&svd.u_star()) - svd.cost).abs() < 1e-12);
}
