//! Costs, dynamic regret against the clairvoyant comparator, Monte-Carlo
//! expected regret and the paired comparison metric `Φ`.

use rayon::prelude::*;

use crate::costs::{random_uniform_schedule, CostBounds, CostSource};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::policies::{clairvoyant_policy, prediction_tracking_policy, MpcBaseline, PolicyConfig};
use crate::riccati::{backward_riccati, Trajectory};
use crate::seed::{substream, Role};
use crate::system::{DisturbanceModel, LinearSystem};

/// Quadratic cost of a state/control sequence under `schedule`.
pub fn total_cost<S: CostSource>(x: &[Vector], u: &[Vector], schedule: &S) -> f64 {
    let stage: f64 = u
        .iter()
        .enumerate()
        .map(|(t, ut)| linalg::quad(schedule.state_cost(t), &x[t]) + linalg::quad(schedule.input_cost(t), ut))
        .sum();
    let last = x.len() - 1;
    stage + linalg::quad(schedule.state_cost(last), &x[last])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub regret: f64,
    pub cost_policy: f64,
    pub cost_optimal: f64,
    pub lemma5_value: Option<f64>,
    pub trials: usize,
    pub stderr: Option<f64>,
    pub excluded: usize,
}

/// Dynamic regret of `policy_traj` against the clairvoyant trajectory for the
/// same system, schedule and disturbances.
pub fn regret<S: CostSource>(
    policy_traj: &Trajectory,
    sys: &LinearSystem,
    schedule: &S,
    w: &[Vector],
) -> Result<RegretReport> {
    let optimal = clairvoyant_policy(sys, schedule, w)?;
    let noiseless = w.iter().all(|wi| wi.iter().all(|&v| v == 0.0));
    let lemma5_value = if noiseless { Some(regret_via_lemma5(policy_traj, sys, schedule)?) } else { None };
    Ok(RegretReport {
        regret: policy_traj.cost - optimal.cost,
        cost_policy: policy_traj.cost,
        cost_optimal: optimal.cost,
        lemma5_value,
        trials: 1,
        stderr: None,
        excluded: 0,
    })
}

/// Regret as the weighted distance of the applied controls from the optimal
/// feedback evaluated along the policy's own states:
/// `Σ (u_t − K*_t x_t)ᵀ (R_t + BᵀP*_{t+1}B) (u_t − K*_t x_t)`.
pub fn regret_via_lemma5<S: CostSource>(policy_traj: &Trajectory, sys: &LinearSystem, schedule: &S) -> Result<f64> {
    let sol = backward_riccati(sys, schedule)?;
    let b = sys.b();
    let mut total = 0.0;
    for (t, ut) in policy_traj.u.iter().enumerate() {
        let d = ut - &sol.k[t] * &policy_traj.x[t];
        let g = schedule.input_cost(t) + b.transpose() * &sol.p[t + 1] * b;
        total += linalg::quad(&g, &d);
    }
    Ok(total)
}

/// `(10/3)(a₁² + a₂² + a₃²) − (a₁ + a₂ + a₃)²`, nonnegative for all reals.
pub fn square_inequality_slack(a1: f64, a2: f64, a3: f64) -> f64 {
    10.0 / 3.0 * (a1 * a1 + a2 * a2 + a3 * a3) - (a1 + a2 + a3).powi(2)
}

/// Which policy to evaluate.
#[derive(Debug, Clone)]
pub enum Policy {
    Clairvoyant,
    PredictionTracking(PolicyConfig),
    Mpc(MpcBaseline),
}

impl Policy {
    pub fn run<S: CostSource>(&self, sys: &LinearSystem, schedule: &S, w: &[Vector]) -> Result<Trajectory> {
        match self {
            Policy::Clairvoyant => clairvoyant_policy(sys, schedule, w),
            Policy::PredictionTracking(cfg) => prediction_tracking_policy(sys, schedule, cfg, w),
            Policy::Mpc(mpc) => mpc.run(sys, schedule, w),
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn is_overflow(e: &Error) -> bool {
    matches!(e, Error::Overflow { .. })
}

/// Monte-Carlo estimate of the expected regret under i.i.d. disturbances.
/// Trial `i` draws its disturbances from the substream `(master_seed, i)`.
pub fn expected_regret_mc<S: CostSource + Sync>(
    sys: &LinearSystem,
    schedule: &S,
    policy: &Policy,
    dist: &DisturbanceModel,
    trials: usize,
    master_seed: u64,
) -> Result<RegretReport> {
    if trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let horizon = schedule.horizon();
    let outcomes: Vec<Result<Option<(f64, f64, f64)>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(master_seed, &[i as u64], Role::Disturbance);
            let w = dist.sample_sequence(horizon - 1, &mut rng);
            let traj = match policy.run(sys, schedule, &w) {
                Err(e) if is_overflow(&e) => return Ok(None),
                other => other?,
            };
            let opt = match clairvoyant_policy(sys, schedule, &w) {
                Err(e) if is_overflow(&e) => return Ok(None),
                other => other?,
            };
            Ok(Some((traj.cost - opt.cost, traj.cost, opt.cost)))
        })
        .collect();
    let mut kept = Vec::with_capacity(trials);
    for o in outcomes {
        if let Some(v) = o? {
            kept.push(v);
        }
    }
    if kept.is_empty() {
        return Err(Error::DegenerateResult { trials });
    }
    let regrets: Vec<f64> = kept.iter().map(|v| v.0).collect();
    let (mean, stderr) = mean_stderr(&regrets);
    let k = kept.len() as f64;
    Ok(RegretReport {
        regret: mean,
        cost_policy: kept.iter().map(|v| v.1).sum::<f64>() / k,
        cost_optimal: kept.iter().map(|v| v.2).sum::<f64>() / k,
        lemma5_value: None,
        trials,
        stderr: Some(stderr),
        excluded: trials - kept.len(),
    })
}

/// Regrets of both policies on one shared realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedOutcome {
    pub regret_ours: f64,
    pub regret_mpc: f64,
    pub cost_optimal: f64,
}

impl PairedOutcome {
    pub fn phi(&self) -> f64 {
        self.regret_mpc - self.regret_ours
    }
}

/// Runs the prediction-tracking policy and the baseline on the same system,
/// schedule and disturbances. `Ok(None)` means some run overflowed and the
/// trial is dropped for both policies.
pub fn paired_trial<S: CostSource>(
    sys: &LinearSystem,
    schedule: &S,
    cfg: &PolicyConfig,
    mpc: &MpcBaseline,
    w: &[Vector],
) -> Result<Option<PairedOutcome>> {
    let run = |r: Result<Trajectory>| match r {
        Err(e) if is_overflow(&e) => Ok(None),
        other => other.map(Some),
    };
    let Some(opt) = run(clairvoyant_policy(sys, schedule, w))? else { return Ok(None) };
    let Some(ours) = run(prediction_tracking_policy(sys, schedule, cfg, w))? else { return Ok(None) };
    let Some(base) = run(mpc.run(sys, schedule, w))? else { return Ok(None) };
    Ok(Some(PairedOutcome {
        regret_ours: ours.cost - opt.cost,
        regret_mpc: base.cost - opt.cost,
        cost_optimal: opt.cost,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiReport {
    pub phi_mean: f64,
    pub phi_stderr: f64,
    pub regret_ours_mean: f64,
    pub regret_mpc_mean: f64,
    pub trials: usize,
    pub excluded: usize,
}

/// Mean of `regret(baseline) − regret(ours)` over paired trials on a fixed
/// system. Each trial draws a fresh schedule within `bounds` and, when `dist`
/// is given, a fresh disturbance sequence.
#[allow(clippy::too_many_arguments)]
pub fn phi_metric(
    sys: &LinearSystem,
    bounds: &CostBounds,
    tracking_gain: &Mat,
    horizon: usize,
    preview: usize,
    trials: usize,
    master_seed: u64,
    dist: Option<&DisturbanceModel>,
) -> Result<PhiReport> {
    if trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let cfg = PolicyConfig::new(sys, preview, tracking_gain.clone())?;
    cfg.check_horizon(horizon)?;
    let mpc = MpcBaseline::new(sys, bounds, preview)?;
    let outcomes: Vec<Result<Option<PairedOutcome>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let coords = [horizon as u64, preview as u64, i as u64];
            let schedule =
                random_uniform_schedule(bounds, horizon, &mut substream(master_seed, &coords, Role::Schedule))?;
            let w = match dist {
                Some(d) => d.sample_sequence(horizon - 1, &mut substream(master_seed, &coords, Role::Disturbance)),
                None => Vec::new(),
            };
            paired_trial(sys, &schedule, &cfg, &mpc, &w)
        })
        .collect();
    summarize_pairs(outcomes, trials)
}

pub(crate) fn summarize_pairs(outcomes: Vec<Result<Option<PairedOutcome>>>, trials: usize) -> Result<PhiReport> {
    let mut kept = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        if let Some(p) = o? {
            kept.push(p);
        }
    }
    if kept.is_empty() {
        return Err(Error::DegenerateResult { trials });
    }
    let phis: Vec<f64> = kept.iter().map(PairedOutcome::phi).collect();
    let (phi_mean, phi_stderr) = mean_stderr(&phis);
    let k = kept.len() as f64;
    Ok(PhiReport {
        phi_mean,
        phi_stderr,
        regret_ours_mean: kept.iter().map(|p| p.regret_ours).sum::<f64>() / k,
        regret_mpc_mean: kept.iter().map(|p| p.regret_mpc).sum::<f64>() / k,
        trials,
        excluded: trials - kept.len(),
    })
}
