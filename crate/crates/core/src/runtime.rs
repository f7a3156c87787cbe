//! Closed-loop detection and isolation with a bank of mode-consistent sets.
//!
//! Each step runs predictor then corrector: every active mode pushes its set
//! through the dynamics under the applied input, then intersects it with the
//! states that could have produced the measurement. A mode whose set empties
//! is eliminated for the rest of the episode.

use std::fmt;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution, StandardNormal};
use serde::Serialize;

use crate::ccg::{reduce_order, Ccg, Mat, Vector};
use crate::conic::Backend;
use crate::error::{check_dim, Error, Result};
use crate::par::{self, Exec};
use crate::qp::box_qp;
use crate::reach::{controllability_matrix, LpvMode, Realization, UncertaintySets};
use crate::scenario::{Scenario, SetSpec};
use crate::separation::SeparationResult;

/// When bank sets are replaced by their box over-approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReductionPolicy {
    /// Steps between reductions; 0 disables the periodic trigger.
    pub every: usize,
    /// Reduce as soon as a set carries more latent variables than this.
    pub max_latent: usize,
}

impl Default for ReductionPolicy {
    fn default() -> Self {
        Self { every: 5, max_latent: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// The nominal mode was eliminated.
    Detected,
    /// Exactly one mode is left.
    Isolated { mode: usize },
    /// Every mode was eliminated.
    ModelInadequate,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Detected => f.write_str("detected"),
            Event::Isolated { mode } => write!(f, "isolated:{mode}"),
            Event::ModelInadequate => f.write_str("model_inadequate"),
        }
    }
}

/// Observer bank; `sets[i]` is meaningful only while mode `i` is active.
#[derive(Clone, Debug)]
pub struct ModeBank {
    pub modes: Vec<LpvMode>,
    pub sets: Vec<Ccg>,
    pub active: Vec<bool>,
    /// `(time, mode)` in elimination order.
    pub eliminations: Vec<(usize, usize)>,
    /// Mode whose elimination counts as a detection.
    pub nominal: usize,
    pub policy: ReductionPolicy,
    since_reduce: usize,
    isolated: bool,
}

impl ModeBank {
    /// Every mode active and starting from `x0`; mode 0 is nominal.
    pub fn new(modes: Vec<LpvMode>, x0: &Ccg, policy: ReductionPolicy) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Invalid("a mode bank needs at least one mode".into()));
        }
        for m in &modes {
            check_dim("initial set vs mode state dimension", m.n_x(), x0.dim())?;
        }
        let n = modes.len();
        Ok(Self {
            sets: vec![x0.clone(); n],
            active: vec![true; n],
            eliminations: Vec::new(),
            nominal: 0,
            policy,
            since_reduce: 0,
            isolated: n == 1,
            modes,
        })
    }

    pub fn active_modes(&self) -> Vec<usize> {
        (0..self.modes.len()).filter(|&i| self.active[i]).collect()
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// One-step prediction of every active set under `u`.
    pub fn propagate(&mut self, u: &Vector, sets: &UncertaintySets) -> Result<()> {
        let next = par::map(&self.modes, Exec::Auto, |i, mode| {
            self.active[i].then(|| propagate_set(mode, &self.sets[i], u, &sets.w)).transpose()
        });
        for (i, s) in next.into_iter().enumerate() {
            if let Some(s) = s? {
                self.sets[i] = s;
            }
        }
        Ok(())
    }

    /// Intersects every active set with the states consistent with `y` and
    /// eliminates the modes left empty.
    pub fn measurement_update(&mut self, t: usize, y: &Vector, sets: &UncertaintySets, backend: &Backend) -> Result<Vec<Event>> {
        let updated = par::map(&self.modes, Exec::Auto, |i, mode| -> Result<Option<(Ccg, bool)>> {
            if !self.active[i] {
                return Ok(None);
            }
            let z = correct_set(mode, &self.sets[i], y, &sets.v)?;
            let empty = backend.is_empty(&z)?;
            Ok(Some((z, empty)))
        });
        let mut events = Vec::new();
        for (i, r) in updated.into_iter().enumerate() {
            let Some((z, empty)) = r? else { continue };
            if empty {
                self.active[i] = false;
                self.eliminations.push((t, i));
                debug!("t = {t}: mode `{}` eliminated", self.modes[i].name);
                if i == self.nominal {
                    events.push(Event::Detected);
                }
            } else {
                self.sets[i] = z;
            }
        }
        match self.active_modes().as_slice() {
            [] => {
                warn!("t = {t}: every mode eliminated");
                events.push(Event::ModelInadequate);
            }
            [only] if !self.isolated => {
                self.isolated = true;
                // The isolated mode is the new reference for detection.
                self.nominal = *only;
                events.push(Event::Isolated { mode: *only });
            }
            _ => {}
        }
        if events.contains(&Event::ModelInadequate) {
            return Ok(events);
        }
        self.reduce(backend)?;
        Ok(events)
    }

    fn reduce(&mut self, backend: &Backend) -> Result<()> {
        self.since_reduce += 1;
        let periodic = self.policy.every > 0 && self.since_reduce >= self.policy.every;
        let reduced = par::map(&self.sets, Exec::Auto, |i, z| {
            let due = self.active[i] && (periodic || z.n_latent() > self.policy.max_latent);
            due.then(|| reduce_order(z, backend).map(|o| o.as_ccg())).transpose()
        });
        for (i, z) in reduced.into_iter().enumerate() {
            if let Some(z) = z? {
                self.sets[i] = z;
            }
        }
        if periodic {
            self.since_reduce = 0;
        }
        Ok(())
    }
}

/// Distinct realizations at the scheduling vertices.
fn distinct_realizations(mode: &LpvMode) -> Result<Vec<Realization>> {
    let mut out: Vec<Realization> = Vec::new();
    for r in mode.vertex_realizations()? {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    Ok(out)
}

/// Hull over the vertices of `A X + B u + r ⊕ E W`.
pub fn propagate_set(mode: &LpvMode, x: &Ccg, u: &Vector, w: &Ccg) -> Result<Ccg> {
    let parts = distinct_realizations(mode)?
        .into_iter()
        .map(|re| x.linear_map(&re.a, &(&re.b * u + &re.r))?.minkowski_sum(&w.linear_map(&re.e, &Vector::zeros(re.e.nrows()))?))
        .collect::<Result<Vec<_>>>()?;
    hull(parts)
}

/// `X ∩_C (y − s − F V)`, hulled over the vertices when the output map varies.
pub fn correct_set(mode: &LpvMode, x: &Ccg, y: &Vector, v: &Ccg) -> Result<Ccg> {
    let mut maps: Vec<(Mat, Vector, Mat)> = Vec::new();
    for re in mode.vertex_realizations()? {
        let key = (re.c, re.s, re.f);
        if !maps.contains(&key) {
            maps.push(key);
        }
    }
    let parts = maps
        .iter()
        .map(|(c, s, f)| {
            check_dim("measurement vs output dimension", c.nrows(), y.len())?;
            x.intersect(&v.linear_map(&-f, &(y - s))?, Some(c))
        })
        .collect::<Result<Vec<_>>>()?;
    hull(parts)
}

fn hull(mut parts: Vec<Ccg>) -> Result<Ccg> {
    if parts.len() == 1 {
        Ok(parts.pop().expect("one part"))
    } else {
        Ccg::convex_hull_all(&parts)
    }
}

/// Weights of the tracking problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingWeights {
    pub q: Mat,
    pub p: Mat,
    /// Per-step input weight.
    pub r1: Mat,
}

/// First input of the certainty-equivalent tracking problem at the centroid
/// of the scheduling set.
///
/// Minimizes `Σ_{k=1}^{N−1} x̃ₖᵀQx̃ₖ + x̃_NᵀPx̃_N + Σ_{k=0}^{N−1} uₖᵀR₁uₖ` with
/// `x̃ₖ = xₖ − x_ref` over `lo ≤ uₖ ≤ hi`. The disturbance is held at `w_nom`.
#[allow(clippy::too_many_arguments)]
pub fn tracking_input(
    mode: &LpvMode,
    x_est: &Vector,
    x_ref: &Vector,
    weights: &TrackingWeights,
    n: usize,
    w_nom: &Vector,
    lo: &Vector,
    hi: &Vector,
) -> Result<Vector> {
    if n == 0 {
        return Err(Error::Invalid("tracking horizon must be at least 1".into()));
    }
    let re = mode.at(&mode.centroid())?;
    let (nx, nu) = (re.a.nrows(), re.b.ncols());
    check_dim("state estimate", nx, x_est.len())?;
    check_dim("reference", nx, x_ref.len())?;
    check_dim("lower input bound", nu, lo.len())?;
    check_dim("upper input bound", nu, hi.len())?;
    let drift = &re.r + &re.e * w_nom;
    let mut h = Mat::zeros(n * nu, n * nu);
    for k in 0..n {
        h.view_mut((k * nu, k * nu), (nu, nu)).copy_from(&(&weights.r1 * 2.0));
    }
    let mut g = Vector::zeros(n * nu);
    // Free response, and the input map restricted to the first k steps.
    let mut free = x_est.clone();
    for k in 1..=n {
        free = &re.a * free + &drift;
        let wk = if k == n { &weights.p } else { &weights.q };
        // Columns ordered u_0..u_{k−1}.
        let gamma = controllability_matrix(&re.a, &re.b, k)?;
        let err = &free - x_ref;
        let gw = gamma.transpose() * wk;
        let hk = &gw * &gamma * 2.0;
        let gk = &gw * &err * 2.0;
        let mut hv = h.view_mut((0, 0), (k * nu, k * nu));
        hv += hk;
        let mut gv = g.rows_mut(0, k * nu);
        gv += gk;
    }
    let tile = |v: &Vector| Vector::from_iterator(n * nu, (0..n).flat_map(|_| v.iter().copied()));
    let u = box_qp(&h, &g, &tile(lo), &tile(hi), 1e-8, 100_000)?;
    Ok(u.rows(0, nu).into_owned())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub t: usize,
    pub u: Vec<f64>,
    /// Measurement after the input was applied.
    pub y: Vec<f64>,
    pub active: Vec<usize>,
    pub events: Vec<Event>,
    pub excited: bool,
    /// `‖x − x_ref‖` after the step.
    pub tracking_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeLog {
    pub scenario: String,
    pub plant: usize,
    pub seed: u64,
    pub rows: Vec<EpisodeRow>,
    pub detected_at: Option<usize>,
    pub isolated_at: Option<usize>,
    pub isolated_mode: Option<usize>,
    pub true_mode_eliminated: bool,
    pub alarm: bool,
}

impl EpisodeLog {
    pub fn isolated_correctly(&self) -> bool {
        self.isolated_mode == Some(self.plant)
    }

    /// Header `t,u0..,y0..,active_modes,event,excited,tracking_error`; lists
    /// inside a cell are separated by `|`.
    pub fn to_csv(&self) -> String {
        let n_u = self.rows.first().map_or(0, |r| r.u.len());
        let n_y = self.rows.first().map_or(0, |r| r.y.len());
        let mut out = String::from("t");
        (0..n_u).for_each(|i| out.push_str(&format!(",u{i}")));
        (0..n_y).for_each(|i| out.push_str(&format!(",y{i}")));
        out.push_str(",active_modes,event,excited,tracking_error\n");
        for r in &self.rows {
            out.push_str(&r.t.to_string());
            r.u.iter().chain(&r.y).for_each(|v| out.push_str(&format!(",{v:.12e}")));
            let active: Vec<String> = r.active.iter().map(usize::to_string).collect();
            let events: Vec<String> = r.events.iter().map(Event::to_string).collect();
            out.push_str(&format!(
                ",{},{},{},{:.12e}\n",
                active.join("|"),
                events.join("|"),
                u8::from(r.excited),
                r.tracking_error
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log fields serialize")
    }
}

/// Uniform draw from a box, a ball or a point.
pub fn sample_set(spec: &SetSpec, rng: &mut impl Rng) -> Vector {
    match spec {
        SetSpec::Point(p) => Vector::from_column_slice(p),
        SetSpec::Box { lo, hi } => {
            Vector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(&l, &h)| if h > l { rng.gen_range(l..=h) } else { l }))
        }
        SetSpec::Ball { center, radius } => {
            let n = center.len();
            let mut d = Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let norm = d.norm();
            if norm > 0.0 {
                d /= norm;
            }
            let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
            Vector::from_column_slice(center) + d * r
        }
    }
}

/// Plant matrices: a random convex combination of the vertex realizations.
fn plant_realization(mode: &LpvMode, rng: &mut impl Rng) -> Result<Realization> {
    let vertices = mode.vertex_realizations()?;
    let weights = match vertices.len() {
        0 => return mode.at(&mode.centroid()),
        1 => vec![1.0],
        k => Dirichlet::new(&vec![1.0; k]).expect("positive concentration").sample(rng),
    };
    let mix_m = |f: fn(&Realization) -> &Mat| vertices.iter().zip(&weights).fold(Mat::zeros(f(&vertices[0]).nrows(), f(&vertices[0]).ncols()), |acc, (r, &w)| acc + f(r) * w);
    let mix_v = |f: fn(&Realization) -> &Vector| vertices.iter().zip(&weights).fold(Vector::zeros(f(&vertices[0]).len()), |acc, (r, &w)| acc + f(r) * w);
    Ok(Realization {
        a: mix_m(|r| &r.a),
        b: mix_m(|r| &r.b),
        c: mix_m(|r| &r.c),
        e: mix_m(|r| &r.e),
        f: mix_m(|r| &r.f),
        r: mix_v(|r| &r.r),
        s: mix_v(|r| &r.s),
    })
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates the plant in mode `plant` for `scenario.config.runtime.steps`
/// steps. While more than one mode is active the next element of
/// `excitation` is applied, restarting it when exhausted; otherwise the
/// tracking input of the first active mode is used.
pub fn run_episode(scenario: &Scenario, plant: usize, seed: u64, excitation: Option<&SeparationResult>) -> Result<EpisodeLog> {
    let modes = &scenario.modes;
    if plant >= modes.len() {
        return Err(Error::Invalid(format!("plant mode {plant} outside the bank of {}", modes.len())));
    }
    let cfg = &scenario.config;
    let n_u = scenario.n_u();
    let (lo, hi) = scenario.sets.input_bounds(&scenario.backend)?;
    let excitation: Option<Vec<Vector>> = excitation.map(|r| (0..r.u_star.len() / n_u).map(|k| r.step(k, n_u)).collect());
    let weights = TrackingWeights {
        q: scenario.q.clone(),
        p: scenario.p.clone(),
        r1: scenario.cost.r1.view((0, 0), (n_u, n_u)).into_owned(),
    };
    let w_nom = scenario.sets.w.c().clone();
    let policy = ReductionPolicy {
        every: cfg.runtime.reduce_every,
        max_latent: cfg.runtime.max_latent,
    };

    let mut rng = substream(seed, 0);
    let plant_re = plant_realization(&modes[plant], &mut rng)?;
    let mut x = sample_set(&cfg.sets.x0, &mut rng);
    let measure = |x: &Vector, rng: &mut ChaCha8Rng| &plant_re.c * x + &plant_re.s + &plant_re.f * sample_set(&cfg.sets.v, rng);

    let mut bank = ModeBank::new(modes.clone(), &scenario.sets.x0, policy)?;
    let mut log = EpisodeLog {
        scenario: cfg.name.clone(),
        plant,
        seed,
        rows: Vec::new(),
        detected_at: None,
        isolated_at: None,
        isolated_mode: None,
        true_mode_eliminated: false,
        alarm: false,
    };
    let record = |log: &mut EpisodeLog, t: usize, events: &[Event], bank: &ModeBank| {
        for e in events {
            match *e {
                Event::Detected => {
                    log.detected_at.get_or_insert(t);
                }
                Event::Isolated { mode } => {
                    log.isolated_at.get_or_insert(t);
                    log.isolated_mode.get_or_insert(mode);
                }
                Event::ModelInadequate => log.alarm = true,
            }
        }
        log.true_mode_eliminated |= bank.eliminations.iter().any(|&(_, m)| m == plant);
    };

    let y0 = measure(&x, &mut rng);
    let events = bank.measurement_update(0, &y0, &scenario.sets, &scenario.backend)?;
    record(&mut log, 0, &events, &bank);

    let mut next_excitation = 0;
    for t in 0..cfg.runtime.steps {
        if log.alarm {
            break;
        }
        let mut rng = substream(seed, t as u64 + 1);
        let (u, excited) = match &excitation {
            Some(seq) if bank.n_active() > 1 && !seq.is_empty() => {
                let u = seq[next_excitation % seq.len()].clone();
                next_excitation += 1;
                (u, true)
            }
            _ => {
                let lead = bank.active_modes()[0];
                let x_est = bank.sets[lead].c().clone();
                let u = tracking_input(&modes[lead], &x_est, &scenario.reference, &weights, cfg.horizon, &w_nom, &lo, &hi)?;
                (u, false)
            }
        };
        bank.propagate(&u, &scenario.sets)?;
        let w = sample_set(&cfg.sets.w, &mut rng);
        x = &plant_re.a * &x + &plant_re.b * &u + &plant_re.r + &plant_re.e * w;
        let y = measure(&x, &mut rng);
        let events = bank.measurement_update(t + 1, &y, &scenario.sets, &scenario.backend)?;
        record(&mut log, t + 1, &events, &bank);
        log.rows.push(EpisodeRow {
            t: t + 1,
            u: u.iter().copied().collect(),
            y: y.iter().copied().collect(),
            active: bank.active_modes(),
            events,
            excited,
            tracking_error: (&x - &scenario.reference).norm(),
        });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reach::MatrixFn;
    use std::collections::BTreeMap;

    fn scalar_lpv(a: &[f64]) -> LpvMode {
        let vertices = a.iter().map(|&v| Vector::from_vec(vec![v])).collect();
        let cell = crate::reach::Cell::parse("th1").unwrap();
        LpvMode::new(
            "m",
            vertices,
            BTreeMap::new(),
            MatrixFn::new(1, 1, vec![cell]).unwrap(),
            MatrixFn::constant(&Mat::identity(1, 1)),
        )
        .unwrap()
    }

    fn interval(z: &Ccg) -> (f64, f64) {
        let b = Backend::default();
        let one = Vector::from_vec(vec![1.0]);
        (-b.support(z, &-&one).unwrap().0, b.support(z, &one).unwrap().0)
    }

    #[test]
    fn singleton_moves_to_a_singleton() {
        let mode = LpvMode::lti("m", &Mat::from_row_slice(1, 1, &[2.0]), &Mat::from_row_slice(1, 1, &[3.0])).unwrap();
        let x = Ccg::point(Vector::from_vec(vec![1.0]));
        let z = propagate_set(&mode, &x, &Vector::from_vec(vec![0.5]), &Ccg::point(Vector::zeros(1))).unwrap();
        let (lo, hi) = interval(&z);
        assert!((lo - 3.5).abs() < 1e-6 && (hi - 3.5).abs() < 1e-6);
    }

    #[test]
    fn scalar_vertices_give_an_interval() {
        let z = propagate_set(
            &scalar_lpv(&[0.5, 0.8]),
            &Ccg::point(Vector::from_vec(vec![1.0])),
            &Vector::zeros(1),
            &Ccg::point(Vector::zeros(1)),
        )
        .unwrap();
        let (lo, hi) = interval(&z);
        assert!((lo - 0.5).abs() < 1e-6 && (hi - 0.8).abs() < 1e-6, "[{lo}, {hi}]");
    }

    #[test]
    fn consistent_measurement_keeps_the_mode() {
        let mode = LpvMode::lti("m", &Mat::identity(1, 1), &Mat::identity(1, 1)).unwrap();
        let v = Ccg::boxed(&[-0.1], &[0.1]).unwrap();
        let sets = UncertaintySets {
            x0: Ccg::point(Vector::from_vec(vec![0.3])),
            u: Ccg::boxed(&[0.0], &[1.0]).unwrap(),
            w: Ccg::point(Vector::zeros(1)),
            v,
        };
        let mut bank = ModeBank::new(vec![mode.clone(), mode], &sets.x0, ReductionPolicy::default()).unwrap();
        let events = bank.measurement_update(0, &Vector::from_vec(vec![0.3]), &sets, &Backend::default()).unwrap();
        assert!(events.is_empty());
        assert_eq!(bank.active_modes(), vec![0, 1]);
    }

    #[test]
    fn far_measurement_detects() {
        let nominal = LpvMode::lti("nominal", &Mat::identity(1, 1), &Mat::identity(1, 1)).unwrap();
        let faulty = LpvMode::lti("faulty", &Mat::identity(1, 1), &Mat::identity(1, 1)).unwrap();
        let sets = UncertaintySets {
            x0: Ccg::boxed(&[0.0], &[1.0]).unwrap(),
            u: Ccg::boxed(&[0.0], &[1.0]).unwrap(),
            w: Ccg::point(Vector::zeros(1)),
            v: Ccg::boxed(&[-0.1], &[0.1]).unwrap(),
        };
        let mut bank = ModeBank::new(vec![nominal, faulty], &sets.x0, ReductionPolicy::default()).unwrap();
        bank.sets[1] = Ccg::boxed(&[4.0], &[6.0]).unwrap();
        let events = bank.measurement_update(3, &Vector::from_vec(vec![5.0]), &sets, &Backend::default()).unwrap();
        assert_eq!(events, vec![Event::Detected, Event::Isolated { mode: 1 }]);
        assert_eq!(bank.eliminations, vec![(3, 0)]);
        assert_eq!(bank.nominal, 1);
    }

    #[test]
    fn exhausting_the_bank_raises_the_alarm() {
        let mode = LpvMode::lti("m", &Mat::identity(1, 1), &Mat::identity(1, 1)).unwrap();
        let sets = UncertaintySets {
            x0: Ccg::boxed(&[0.0], &[1.0]).unwrap(),
            u: Ccg::boxed(&[0.0], &[1.0]).unwrap(),
            w: Ccg::point(Vector::zeros(1)),
            v: Ccg::boxed(&[-0.1], &[0.1]).unwrap(),
        };
        let mut bank = ModeBank::new(vec![mode.clone(), mode], &sets.x0, ReductionPolicy::default()).unwrap();
        let events = bank.measurement_update(0, &Vector::from_vec(vec![9.0]), &sets, &Backend::default()).unwrap();
        assert_eq!(events.last(), Some(&Event::ModelInadequate));
        assert_eq!(bank.n_active(), 0);
    }

    fn unit_weights() -> TrackingWeights {
        TrackingWeights {
            q: Mat::identity(1, 1),
            p: Mat::identity(1, 1),
            r1: Mat::identity(1, 1),
        }
    }

    #[test]
    fn on_reference_tracking_is_idle() {
        let mode = LpvMode::lti("m", &Mat::identity(1, 1), &Mat::identity(1, 1)).unwrap();
        let x = Vector::from_vec(vec![0.4]);
        let u = tracking_input(&mode, &x, &x, &unit_weights(), 3, &Vector::zeros(1), &Vector::zeros(1), &Vector::from_vec(vec![5.0]))
            .unwrap();
        assert!(u[0].abs() < 1e-8);
    }

    #[test]
    fn one_step_tracking_by_hand() {
        // min (−1 + u)² + u² over u ≥ 0.
        let mode = LpvMode::lti("m", &Mat::identity(1, 1), &Mat::identity(1, 1)).unwrap();
        let u = tracking_input(
            &mode,
            &Vector::from_vec(vec![-1.0]),
            &Vector::zeros(1),
            &unit_weights(),
            1,
            &Vector::zeros(1),
            &Vector::zeros(1),
            &Vector::from_vec(vec![5.0]),
        )
        .unwrap();
        assert!((u[0] - 0.5).abs() < 1e-7, "{u}");
    }

    #[test]
    fn ball_samples_stay_inside() {
        let spec = SetSpec::Ball {
            center: vec![1.0, -1.0, 0.0],
            radius: 0.1,
        };
        let mut rng = substream(7, 0);
        for _ in 0..500 {
            let p = sample_set(&spec, &mut rng);
            assert!((p - Vector::from_vec(vec![1.0, -1.0, 0.0])).norm() <= 0.1 + 1e-15);
        }
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let log = EpisodeLog {
            scenario: "s".into(),
            plant: 0,
            seed: 1,
            rows: vec![EpisodeRow {
                t: 1,
                u: vec![1.0],
                y: vec![2.0, 3.0],
                active: vec![0, 1],
                events: vec![Event::Isolated { mode: 1 }],
                excited: true,
                tracking_error: 0.5,
            }],
            detected_at: None,
            isolated_at: Some(1),
            isolated_mode: Some(1),
            true_mode_eliminated: false,
            alarm: false,
        };
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,u0,y0,y1,active_modes,event,excited,tracking_error");
        assert!(lines[1].starts_with("1,1.000000000000e0,"));
        assert!(lines[1].contains(",0|1,isolated:1,1,"));
    }
}
