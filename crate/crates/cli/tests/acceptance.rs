//! End-to-end acceptance criteria. Each criterion prints one PASS or FAIL
//! line; the test fails if any criterion does.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use afdi_core::ccg::Vector;
use afdi_core::reach::reach;
use afdi_core::scenario::load_scenario;
use afdi_core::separation::PairSets;
use serde_json::Value;

const VEHICLE_COST: f64 = 11.5632;
/// Reference second channel, listed last step first.
const VEHICLE_CHANNEL: [f64; 3] = [2.7253, 1.7442, 1.0458];
const QUAD_CCG_THRUST: [f64; 4] = [1.537, 0.965, 0.369, 0.052];
const QUAD_SVD_THRUST: [f64; 4] = [1.6036, 1.0690, 0.5345, 0.0];

struct Run {
    report: Value,
    status: i32,
    seconds: f64,
}

impl Run {
    fn u(&self) -> Vec<f64> {
        self.report["u_star"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    }

    fn channel(&self, i: usize, n_u: usize) -> Vec<f64> {
        self.u().iter().skip(i).step_by(n_u).copied().collect()
    }

    fn cost(&self) -> f64 {
        self.report["cost"].as_f64().unwrap()
    }

    fn certified(&self) -> bool {
        self.report["certified"].as_bool().unwrap()
    }
}

fn afdi(args: &[&str]) -> (i32, f64) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_afdi")).args(args).output().expect("binary runs");
    let seconds = start.elapsed().as_secs_f64();
    let code = out.status.code().unwrap_or(-1);
    if code != 0 && code != 2 {
        panic!("afdi {args:?} exited with {code}: {}", String::from_utf8_lossy(&out.stderr));
    }
    (code, seconds)
}

fn separate(dir: &Path, scenario: &str, method: &str) -> Run {
    let (status, seconds) = afdi(&["separate", scenario, "--method", method, "--out", dir.to_str().unwrap()]);
    let text = std::fs::read_to_string(dir.join(format!("{scenario}-{method}.json"))).unwrap();
    Run {
        report: serde_json::from_str(&text).unwrap(),
        status,
        seconds,
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs() + 1e-9
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

/// Every pairwise sliced intersection is infeasible for the reference solver.
fn reference_separated(scenario: &str, u: &[f64]) -> bool {
    let s = load_scenario(scenario).unwrap().build().unwrap();
    let p = s.problem();
    let sets: Vec<_> = s.modes.iter().map(|m| reach(m, p.horizon, p.sets, p.schedule, p.space).unwrap()).collect();
    let u = Vector::from_column_slice(u);
    PairSets::build(&sets).unwrap().iter().all(|pair| {
        let z = pair.joint.slice_controls(&u).unwrap();
        common::reference_support(&z, &Vector::from_element(z.dim(), 1.0)).is_none()
    })
}

fn certificate_ok(run: &Run) -> bool {
    let certs = run.report["certificates"].as_array().unwrap();
    run.certified()
        && !certs.is_empty()
        && certs.iter().all(|c| c["empty"].as_bool().unwrap() && c["margin"].as_f64().unwrap() >= 1e-7)
}

fn report(n: usize, pass: bool, detail: &str) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n:>2}: {verdict}  {detail}").unwrap();
    pass
}

/// Runs `check`, turning a panic into a FAIL line.
fn criterion(n: usize, check: impl FnOnce() -> (bool, String)) -> bool {
    match catch_unwind(AssertUnwindSafe(check)) {
        Ok((pass, detail)) => report(n, pass, &detail),
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            report(n, false, &format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let vehicle = separate(dir.path(), "vehicle-s5", "ccg");
    let quad_ccg = separate(dir.path(), "quadrotor-s5", "ccg");
    let quad_svd = separate(dir.path(), "quadrotor-s5", "svd");
    let mut results = Vec::new();

    results.push(criterion(1, || {
        let cost = vehicle.cost();
        let pass = within(cost, VEHICLE_COST, 0.10) && vehicle.certified() && vehicle.status == 0 && vehicle.seconds <= 300.0;
        let detail = format!(
            "vehicle ccg cost {cost:.4} vs {VEHICLE_COST} ±10%, certified {}, exit {}, {:.1} s",
            vehicle.certified(),
            vehicle.status,
            vehicle.seconds
        );
        (pass, detail)
    }));

    results.push(criterion(2, || {
        let first = vehicle.channel(0, 2);
        let mut second = vehicle.channel(1, 2);
        second.reverse();
        let pass = first.iter().all(|u| u.abs() <= 0.15) && second.iter().zip(VEHICLE_CHANNEL).all(|(&u, t)| within(u, t, 0.15));
        (pass, format!("channel 1 {}, channel 2 last step first {} vs {}", fmt(&first), fmt(&second), fmt(&VEHICLE_CHANNEL)))
    }));

    results.push(criterion(3, || {
        let (roll, pitch, thrust) = (quad_ccg.channel(0, 3), quad_ccg.channel(1, 3), quad_ccg.channel(2, 3));
        let small = roll.iter().chain(&pitch).all(|u| u.abs() <= 0.1);
        let close = thrust.iter().zip(QUAD_CCG_THRUST).all(|(&u, t)| within(u, t, 0.15));
        let decreasing = thrust.windows(2).all(|w| w[1] < w[0]);
        let status_ok = quad_ccg.status == if quad_ccg.certified() { 0 } else { 2 };
        let detail = format!(
            "quadrotor ccg roll {} pitch {} thrust {} vs {} ±15%, certified {}, exit {}",
            fmt(&roll),
            fmt(&pitch),
            fmt(&thrust),
            fmt(&QUAD_CCG_THRUST),
            quad_ccg.certified(),
            quad_ccg.status
        );
        (small && close && decreasing && status_ok, detail)
    }));

    results.push(criterion(4, || {
        let thrust = quad_svd.channel(2, 3);
        let close = thrust.iter().zip(QUAD_SVD_THRUST).all(|(&u, t)| within(u, t, 0.10));
        let dominated = quad_svd.cost() >= quad_ccg.cost();
        let detail = format!(
            "quadrotor svd thrust {} vs {} ±10%; svd cost {:.4} vs ccg cost {:.4}",
            fmt(&thrust),
            fmt(&QUAD_SVD_THRUST),
            quad_svd.cost(),
            quad_ccg.cost()
        );
        (close && dominated, detail)
    }));

    results.push(criterion(5, || {
        let runs = [("vehicle-s5", "ccg", &vehicle), ("quadrotor-s5", "ccg", &quad_ccg), ("quadrotor-s5", "svd", &quad_svd)];
        let mut pass = true;
        let mut parts = Vec::new();
        for (scenario, method, run) in runs {
            let ok = certificate_ok(run) && reference_separated(scenario, &run.u());
            pass &= ok;
            parts.push(format!("{scenario} {method}: {}", if ok { "empty" } else { "not certified" }));
        }
        (pass, parts.join("; "))
    }));

    results.push(criterion(6, || {
        let start = Instant::now();
        let mut worst: f64 = 0.0;
        let mut instances = 0;
        let mut errors = Vec::new();
        for op in common::OPS {
            for seed in 0..25 {
                match common::check_operation(op, 1000 + seed, 8) {
                    Ok(d) => worst = worst.max(d.max_abs),
                    Err(e) => errors.push(e),
                }
                instances += 1;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        let pass = errors.is_empty() && worst <= 1e-5 && instances >= 200 && secs <= 120.0;
        (pass, format!("{instances} instances, worst {worst:.2e}, {} errors, {secs:.1} s", errors.len()))
    }));

    results.push(criterion(7, || {
        let mut r = common::rng(7);
        let lp = (0..100).map(|_| common::lp_deviation(&common::random_lp(&mut r)).unwrap()).fold(0.0, f64::max);
        let ray = (0..50).map(|s| common::ray_deviation(500 + s).unwrap()).fold(0.0, f64::max);
        (lp <= 1e-7 && ray <= 1e-6, format!("100 LPs worst {lp:.2e}; 50 rays worst {ray:.2e}"))
    }));

    results.push(criterion(8, || {
        let excess = (0..50).map(|s| common::svd_probe_excess(s, 1000).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        (excess <= 1e-9, format!("50 matrices × 1000 probes, largest excess {excess:.2e}"))
    }));

    results.push(criterion(9, || {
        let report = dir.path().join("vehicle-s5-ccg.json");
        let out = dir.path().join("mc");
        let run = |plant: &str| -> Value {
            afdi(&[
                "simulate",
                "vehicle-s5",
                "--plant",
                plant,
                "--seeds",
                "100",
                "--excitation",
                report.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ]);
            let idx = if plant == "nominal" { 0 } else { 1 };
            serde_json::from_str(&std::fs::read_to_string(out.join(format!("vehicle-s5-plant{idx}-summary.json"))).unwrap()).unwrap()
        };
        let faulty = run("actuator-fault");
        let nominal = run("nominal");
        let rate = faulty["isolation_rate"].as_f64().unwrap();
        let wrong = faulty["true_mode_eliminations"].as_u64().unwrap() + nominal["true_mode_eliminations"].as_u64().unwrap();
        let detections = nominal["detection_rate"].as_f64().unwrap();
        let pass = rate >= 0.95 && wrong == 0 && detections == 0.0;
        (pass, format!("faulty isolation {:.2}, true-mode eliminations {wrong}, nominal detection rate {detections:.2}", rate))
    }));

    results.push(criterion(10, || {
        let rays = &vehicle.report["ray_solves"];
        let (input, lifted) = (rays["input_space"].as_u64().unwrap(), rays["lifted_space"].as_u64().unwrap());
        let quad_lifted = quad_ccg.report["ray_solves"]["lifted_space"].as_u64().unwrap();
        let pass = lifted == 0 && quad_lifted == 0 && input > 0;
        (pass, format!("vehicle ray solves: {input} input-space, {lifted} lifted; quadrotor lifted {quad_lifted}"))
    }));

    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &p)| !p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
