//! Numerical property suites: Riccati/oracle equivalence, the
//! inequalities and the regret identity, each evaluated on random instances.
//!
//! A check records its slack `bound − value`; a suite passes when every slack
//! is at least [`SLACK_TOL`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bounds::{compute_bound_constants, BoundConstants, ExtremaSource};
use crate::costs::{frozen_index, random_uniform_schedule, CostBounds, CostSchedule, CostSource, FrozenView};
use crate::error::Result;
use crate::linalg::{self, Mat, Vector};
use crate::oracle::brute_force_lqr_oracle;
use crate::policies::{clairvoyant_policy, predict_trajectory, run_prediction_tracking, PolicyConfig};
use crate::regret::{regret, regret_via_lemma5, square_inequality_slack};
use crate::riccati::{affine_backward_riccati, backward_riccati, rollout, RiccatiSolution};
use crate::seed::{substream, Role};
use crate::system::{place_poles_single_input, real_poles, LinearSystem};

pub const SLACK_TOL: f64 = -1e-9;

/// Relative tolerance of the oracle comparisons.
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub checks: usize,
    pub min_slack: f64,
    pub failures: Vec<String>,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        Self { name, checks: 0, min_slack: f64::INFINITY, failures: Vec::new() }
    }

    fn check(&mut self, slack: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        self.min_slack = self.min_slack.min(slack);
        if !(slack >= SLACK_TOL) && self.failures.len() < 20 {
            self.failures.push(format!("{} (slack {slack:.3e})", what()));
        }
    }

    fn merge(&mut self, other: SuiteOutcome) {
        self.checks += other.checks;
        self.min_slack = self.min_slack.min(other.min_slack);
        self.failures.extend(other.failures);
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks > 0
    }
}

/// A disturbance-free test instance with a stabilizing tracking gain.
#[derive(Debug, Clone)]
pub struct Instance {
    pub sys: LinearSystem,
    pub schedule: CostSchedule,
    pub gain: Mat,
    pub preview: usize,
}

fn random_pd(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Mat {
    let m = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    linalg::symmetrize(&((&m * m.transpose()) * (scale / n as f64) + Mat::identity(n, n) * (0.1 * scale)))
}

fn random_single_input_system(n: usize, rng: &mut ChaCha8Rng) -> LinearSystem {
    loop {
        let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.5..1.5));
        let b = Mat::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let x0 = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        if let Ok(sys) = LinearSystem::new(a, b, x0) {
            if linalg::numerical_rank(&crate::system::controllability_matrix(sys.a(), sys.b())) == n {
                return sys;
            }
        }
    }
}

/// Random schedule with dense positive definite matrices, not necessarily
/// Loewner ordered.
fn random_dense_schedule(n: usize, horizon: usize, rng: &mut ChaCha8Rng) -> CostSchedule {
    let q = (0..horizon).map(|_| random_pd(n, 2.0, rng)).collect();
    let r = (0..horizon - 1).map(|_| random_pd(1, 1.0, rng)).collect();
    CostSchedule::new(q, r).expect("random matrices are positive definite")
}

/// Random instance whose schedule is a Loewner chain between random bounds,
/// so the sequence extrema exist.
pub fn random_instance(seed: u64, index: u64, max_n: usize, max_horizon: usize) -> Result<Instance> {
    let mut rng = substream(seed, &[index], Role::System);
    let n = rng.random_range(1..=max_n);
    let horizon = rng.random_range(5..=max_horizon);
    let sys = random_single_input_system(n, &mut rng);
    let poles: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let gain = place_poles_single_input(&sys, &real_poles(&poles))?;
    let q_min = random_pd(n, 1.0, &mut rng);
    let q_max = &q_min + random_pd(n, 3.0, &mut rng);
    let r_min = random_pd(1, 0.5, &mut rng);
    let r_max = &r_min + random_pd(1, 2.0, &mut rng);
    let bounds = CostBounds::new(q_min, q_max, r_min, r_max)?;
    let mut srng = substream(seed, &[index], Role::Schedule);
    let schedule = random_uniform_schedule(&bounds, horizon, &mut srng)?;
    let preview = rng.random_range(0..=(horizon - 2).min(5));
    Ok(Instance { sys, schedule, gain, preview })
}

fn rel_err(a: &[Vector], b: &[Vector]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.amax()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Plain (or, with `disturbed`, affine) Riccati solution against the
/// brute-force oracle on small random instances.
pub fn oracle_suite(seed: u64, instances: usize, disturbed: bool) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new(if disturbed { "affine oracle equivalence" } else { "oracle equivalence" });
    for i in 0..instances as u64 {
        let mut rng = substream(seed, &[i, disturbed as u64], Role::System);
        let n = rng.random_range(1..=3);
        let horizon = rng.random_range(2..=8);
        let sys = random_single_input_system(n, &mut rng);
        let schedule = random_dense_schedule(n, horizon, &mut rng);
        let w: Vec<Vector> = if disturbed {
            (0..horizon - 1).map(|_| Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).collect()
        } else {
            Vec::new()
        };
        let oracle = brute_force_lqr_oracle(&sys, &schedule, &w)?;
        let traj = if disturbed {
            rollout(&sys, &affine_backward_riccati(&sys, &schedule, &w)?, sys.x0(), &w, &schedule)?
        } else {
            rollout(&sys, &backward_riccati(&sys, &schedule)?, sys.x0(), &w, &schedule)?
        };
        let du = rel_err(&traj.u, &oracle.u);
        out.check(ORACLE_TOL - du, || format!("instance {i}: relative control error {du:.3e}"));
        let dc = (traj.cost - oracle.cost).abs() / oracle.cost.abs().max(f64::MIN_POSITIVE);
        out.check(ORACLE_TOL - dc, || format!("instance {i}: relative cost error {dc:.3e}"));
        if !disturbed {
            let sol = backward_riccati(&sys, &schedule)?;
            let value = linalg::quad(&sol.p[0], sys.x0());
            let dv = (value - traj.cost).abs() / traj.cost.abs().max(f64::MIN_POSITIVE);
            out.check(ORACLE_TOL - dv, || format!("instance {i}: x0ᵀP0x0 differs from the cost by {dv:.3e}"));
        }
    }
    Ok(out)
}

/// Solves on the schedule frozen at every index `s`.
fn all_frozen_solves(inst: &Instance) -> Result<Vec<RiccatiSolution>> {
    let horizon = inst.schedule.horizon();
    (0..horizon).map(|s| backward_riccati(&inst.sys, &FrozenView::new(&inst.schedule, s))).collect()
}

fn constants(inst: &Instance) -> Result<BoundConstants> {
    compute_bound_constants(&inst.sys, &inst.schedule, &inst.gain, inst.preview, ExtremaSource::Sequence, None)
}

/// `Q̄_min ⪯ P_{i|t} ⪯ P̄_max` for every frozen solve.
pub fn loewner_suite(inst: &Instance, c: &BoundConstants, solves: &[RiccatiSolution]) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("Loewner sandwich");
    for (t, sol) in solves.iter().enumerate() {
        for (i, p) in sol.p.iter().enumerate() {
            let lo = linalg::lambda_min(&(p - &c.extrema.q_min));
            out.check(lo, || format!("P_{{{i}|{t}}} ⋡ Q̄_min"));
            let hi = linalg::lambda_min(&(&c.pbar_max - p));
            out.check(hi, || format!("P_{{{i}|{t}}} ⋠ P̄_max"));
        }
    }
    let _ = inst;
    out
}

/// Value and gain perturbation bounds for all `i ≤ t ≤ t₀`.
pub fn perturbation_suite(inst: &Instance, c: &BoundConstants, solves: &[RiccatiSolution]) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("gain and value perturbation");
    let horizon = inst.schedule.horizon();
    let p_scale = linalg::lambda_max(&c.pbar_max).powi(2) / linalg::lambda_min(&c.extrema.q_min);
    for t0 in 0..horizon {
        for t in 0..=t0 {
            for i in 0..=t {
                let dp = linalg::spectral_norm(&(&solves[t].p[i] - &solves[t0].p[i]));
                let bound = p_scale * c.gamma.powi((t + 1 - i) as i32);
                out.check(bound - dp, || format!("‖P_{{{i}|{t}}} − P_{{{i}|{t0}}}‖ = {dp:.3e} > {bound:.3e}"));
                if i + 1 < horizon {
                    let dk = linalg::spectral_norm(&(&solves[t].k[i] - &solves[t0].k[i]));
                    let bound = c.c_k * c.gamma.powi((t - i) as i32);
                    out.check(bound - dk, || format!("‖K_{{{i}|{t}}} − K_{{{i}|{t0}}}‖ = {dk:.3e} > {bound:.3e}"));
                }
            }
        }
    }
    out
}

/// Closed-loop products `‖∏_{i=t₀}^{t₁}(A + BK_{i|t})‖ ≤ Cη^{t₁−t₀+1}`.
pub fn decay_suite(inst: &Instance, c: &BoundConstants, solves: &[RiccatiSolution]) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("product-norm decay");
    let horizon = inst.schedule.horizon();
    for (t, sol) in solves.iter().enumerate().take(horizon - 1) {
        for t0 in 0..=t {
            let mut prod = Mat::identity(inst.sys.n(), inst.sys.n());
            for t1 in t0..=t {
                prod = inst.sys.closed_loop(&sol.k[t1]) * prod;
                let norm = linalg::spectral_norm(&prod);
                let bound = c.c * c.eta.powi((t1 - t0 + 1) as i32);
                out.check(bound - norm, || format!("t={t}, [{t0}, {t1}]: {norm:.3e} > {bound:.3e}"));
            }
        }
    }
    out
}

/// State-deviation bounds along a prediction-tracking run.
pub fn deviation_suite(inst: &Instance, c: &BoundConstants) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("state deviation");
    let (sys, sched) = (&inst.sys, &inst.schedule);
    let horizon = sched.horizon();
    let cfg = PolicyConfig::new(sys, inst.preview, inst.gain.clone())?;
    let (traj, _) = run_prediction_tracking(sys, sched, &cfg, &[])?;
    let opt = clairvoyant_policy(sys, sched, &[])?;
    let (eta, gamma, q) = (c.eta, c.gamma, c.q);
    let eg = eta * gamma;
    let lead = c.c * c.c * c.c_k * sys.x0().norm() * gamma.powi(inst.preview as i32) / (gamma - 1.0);
    for t in 1..horizon {
        let tf = t as i32;
        let tracking = eta.powi(tf - 1) * gamma * (gamma.powi(tf) - 1.0);
        let transient = c.c_f
            * (eg / q * ((q.powi(tf - 1) - eg.powi(tf - 1)) / (q - eg))
                - eta / q * ((q.powi(tf - 1) - eta.powi(tf - 1)) / (q - eta)));
        let state_bound = lead * (tracking + transient);
        let dx = (&traj.x[t] - &opt.x[t]).norm();
        out.check(state_bound - dx, || format!("t={t}: ‖x_t − x*_t‖ = {dx:.3e} > {state_bound:.3e}"));
        if t + 2 <= horizon {
            let pred = predict_trajectory(sys, sched, t, inst.preview, &[])?;
            let pred_bound = lead * tracking;
            let dp = (&pred.states[t] - &opt.x[t]).norm();
            out.check(pred_bound - dp, || {
                format!(
                    "t={t}: ‖x_{{t|t+W}} − x*_t‖ = {dp:.3e} > {pred_bound:.3e} (s = {})",
                    frozen_index(t, inst.preview, horizon)
                )
            });
        }
    }
    Ok(out)
}

/// Regret equals the weighted control-deviation sum.
pub fn identity_suite(inst: &Instance) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("regret identity");
    let cfg = PolicyConfig::new(&inst.sys, inst.preview, inst.gain.clone())?;
    let (traj, _) = run_prediction_tracking(&inst.sys, &inst.schedule, &cfg, &[])?;
    let rep = regret(&traj, &inst.sys, &inst.schedule, &[])?;
    let l5 = regret_via_lemma5(&traj, &inst.sys, &inst.schedule)?;
    let tol = 1e-6 * rep.regret.abs().max(1.0);
    out.check(tol - (rep.regret - l5).abs(), || format!("regret {:.6e} vs identity {l5:.6e}", rep.regret));
    let floor = -1e-6 * rep.cost_optimal.max(1.0);
    out.check(rep.regret - floor, || format!("negative regret {:.3e}", rep.regret));
    Ok(out)
}

/// `(a₁ + a₂ + a₃)² ≤ (10/3)(a₁² + a₂² + a₃²)` on random reals.
pub fn square_inequality_suite(seed: u64, samples: usize) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("three-term square inequality");
    let mut rng = substream(seed, &[6], Role::System);
    for _ in 0..samples {
        let scale = 10f64.powi(rng.random_range(-3..=3));
        let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0) * scale);
        let slack = square_inequality_slack(a[0], a[1], a[2]) / (scale * scale);
        out.check(slack, || format!("a = {a:?}"));
    }
    out
}

/// Property suites accumulated over `instances` random instances.
pub fn property_suites(seed: u64, instances: usize, max_n: usize, max_horizon: usize) -> Result<Vec<SuiteOutcome>> {
    let mut l1 = SuiteOutcome::new("Loewner sandwich");
    let mut l2 = SuiteOutcome::new("gain and value perturbation");
    let mut l3 = SuiteOutcome::new("product-norm decay");
    let mut l4 = SuiteOutcome::new("state deviation");
    let mut l5 = SuiteOutcome::new("regret identity");
    for i in 0..instances as u64 {
        let inst = random_instance(seed, i, max_n, max_horizon)?;
        let c = constants(&inst)?;
        let solves = all_frozen_solves(&inst)?;
        l1.merge(loewner_suite(&inst, &c, &solves));
        l2.merge(perturbation_suite(&inst, &c, &solves));
        l3.merge(decay_suite(&inst, &c, &solves));
        l4.merge(deviation_suite(&inst, &c)?);
        l5.merge(identity_suite(&inst)?);
    }
    Ok(vec![l1, l2, l3, l4, l5, square_inequality_suite(seed, 10_000)])
}

/// Everything `verify` runs.
pub fn all_suites(seed: u64) -> Result<Vec<SuiteOutcome>> {
    let mut v = vec![oracle_suite(seed, 50, false)?, oracle_suite(seed, 50, true)?];
    v.extend(property_suites(seed, 20, 4, 40)?);
    Ok(v)
}
