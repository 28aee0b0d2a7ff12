//! The regret-bound constants, the disturbance-free regret bound, the
//! sufficient condition for beating the bound-based baseline and an empirical
//! check of the linear-in-`T` expected regret scaling under disturbances.

use crate::costs::{
    frozen_index, random_uniform_schedule, sequence_extrema, CostBounds, CostExtrema, CostSchedule, CostSource,
};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::policies::{run_prediction_tracking, FrozenSolves, PolicyConfig};
use crate::regret::{expected_regret_mc, regret, Policy};
use crate::riccati::{backward_riccati, solve_dare, DareOptions, RiccatiSolution};
use crate::seed::{substream, Role};
use crate::system::{spectral_radius, DisturbanceModel, LinearSystem};

/// Denominators closer to zero than this are reported as degenerate.
pub const POLE_TOL: f64 = 1e-12;

/// Norms below this end the search for the transient constant `C_f`.
pub const CF_FLOOR: f64 = 1e-30;

/// Upper limit on the number of powers examined for `C_f`.
pub const CF_MAX_POWERS: usize = 1_000_000;

/// `Σ_{t=0}^{T−1} zᵗ`.
pub fn geometric_sum(z: f64, horizon: usize) -> f64 {
    if (1.0 - z).abs() <= 1e-12 {
        horizon as f64
    } else {
        (1.0 - z.powf(horizon as f64)) / (1.0 - z)
    }
}

/// Where the cost extrema come from: the realized sequence or the a priori
/// Loewner bounds.
#[derive(Debug, Clone, Copy)]
pub enum ExtremaSource<'a> {
    Sequence,
    Bounds(&'a CostBounds),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundConstants {
    pub extrema: CostExtrema,
    pub pbar_max: Mat,
    pub d: f64,
    pub c_k: f64,
    pub c: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub c_f: f64,
    pub q: f64,
    pub epsilon: f64,
    pub rho: f64,
}

/// `max_{n ≥ 0} ‖Mⁿ‖ / baseⁿ`, stopping once `‖Mⁿ‖` falls below [`CF_FLOOR`].
pub fn transient_constant(m: &Mat, base: f64) -> f64 {
    let mut power = Mat::identity(m.nrows(), m.ncols());
    let mut scale = 1.0;
    let mut best: f64 = 1.0;
    for _ in 0..CF_MAX_POWERS {
        power = m * power;
        scale *= base;
        let norm = linalg::spectral_norm(&power);
        if norm < CF_FLOOR {
            break;
        }
        best = best.max(norm / scale);
    }
    best
}

/// Frozen solves the prediction-tracking policy performs for preview `w`.
pub fn frozen_solves_for(sys: &LinearSystem, schedule: &CostSchedule, preview: usize) -> Result<FrozenSolves> {
    let horizon = schedule.horizon();
    let mut solves = FrozenSolves::new();
    for t in 0..horizon - 1 {
        solves.get_or_solve(sys, schedule, frozen_index(t, preview, horizon))?;
    }
    Ok(solves)
}

/// Every constant of the disturbance-free bound for one instance and preview.
/// `solves` are the frozen solves of the run under test; `None` recomputes
/// exactly those the policy would perform.
pub fn compute_bound_constants(
    sys: &LinearSystem,
    schedule: &CostSchedule,
    tracking_gain: &Mat,
    preview: usize,
    source: ExtremaSource<'_>,
    solves: Option<&FrozenSolves>,
) -> Result<BoundConstants> {
    let (a, b) = (sys.a(), sys.b());
    let horizon = schedule.horizon();
    if preview + 2 > horizon {
        return Err(Error::Argument(format!("preview {preview} exceeds T − 2 for horizon {horizon}")));
    }
    let closed = sys.closed_loop(tracking_gain);
    let rho = spectral_radius(&closed)?;
    if !(rho < 1.0) {
        return Err(Error::Precondition(format!("tracking gain is not stabilizing: ρ(A + BK) = {rho}")));
    }
    let extrema = match source {
        ExtremaSource::Bounds(bounds) => CostExtrema::from(bounds),
        ExtremaSource::Sequence => sequence_extrema(schedule).map_err(|e| match e {
            Error::IncomparableSequence { which } => Error::Precondition(format!(
                "the cost sequence has no Loewner {which}; supply a priori cost bounds instead"
            )),
            other => other,
        })?,
    };
    let pbar_max = solve_dare(a, b, &extrema.q_max, &extrema.r_max, DareOptions::default())?;
    let lmax_p = linalg::lambda_max(&pbar_max);
    let lmin_q = linalg::lambda_min(&extrema.q_min);
    let d = linalg::spectral_norm(&(&extrema.r_max + b.transpose() * &pbar_max * b));
    let g_min = &extrema.r_min + b.transpose() * &extrema.q_min * b;
    let g_min_inv =
        g_min.clone().try_inverse().ok_or_else(|| Error::Numerical("R̄_min + BᵀQ̄_min B is singular".into()))?;
    let c_k = linalg::spectral_norm(&g_min_inv).powi(2)
        * linalg::spectral_norm(&(&extrema.r_max * b.transpose()))
        * lmax_p.powi(2)
        / lmin_q;
    let c = lmax_p / lmin_q;
    let eta = (1.0 - lmin_q / lmax_p).sqrt();

    let owned;
    let solves = match solves {
        Some(s) => s,
        None => {
            owned = frozen_solves_for(sys, schedule, preview)?;
            &owned
        }
    };
    let optimal = backward_riccati(sys, schedule)?;
    let spread = |sol: &RiccatiSolution| {
        sol.p[1..].iter().map(|p| linalg::lambda_max(&(a.transpose() * p * a))).fold(f64::NEG_INFINITY, f64::max)
    };
    let alpha = solves.iter().map(|(_, sol)| spread(sol)).fold(spread(&optimal), f64::max);
    let beta = (0..horizon - 1).map(|t| linalg::lambda_min(&schedule.state_costs()[t])).fold(f64::INFINITY, f64::min);
    let gamma = alpha / (alpha + beta);

    let mut alpha1: f64 = 0.0;
    for t in 0..horizon - 1 {
        let s = frozen_index(t, preview, horizon);
        let sol = solves.get(s).ok_or_else(|| Error::Argument(format!("frozen solve for index {s} is missing")))?;
        alpha1 = alpha1.max(linalg::spectral_norm(&(&sol.k[t] - tracking_gain)).powi(2));
    }
    let alpha2 =
        optimal.k.iter().map(|k| 2.0 * linalg::spectral_norm(&(k - tracking_gain)).powi(2)).fold(0.0, f64::max);

    let epsilon = (1.0 - rho) / 2.0;
    let q = rho + epsilon;
    let c_f = transient_constant(&closed, q + epsilon);
    Ok(BoundConstants { extrema, pbar_max, d, c_k, c, eta, alpha, beta, gamma, alpha1, alpha2, c_f, q, epsilon, rho })
}

fn check_poles(c: &BoundConstants) -> Result<()> {
    let eg = c.eta * c.gamma;
    if (c.q - eg).abs() <= POLE_TOL {
        return Err(Error::DegenerateConstants(format!("q = ηγ = {eg}")));
    }
    if (c.q - c.eta).abs() <= POLE_TOL {
        return Err(Error::DegenerateConstants(format!("q = η = {}", c.eta)));
    }
    if (c.gamma - 1.0).abs() <= POLE_TOL {
        return Err(Error::DegenerateConstants("γ = 1".into()));
    }
    Ok(())
}

/// Disturbance-free regret bound. The `(α₁ + α₂)` factor multiplies both the
/// tracking-error block and the `C_f` block; the `(C_K C²)²` term stands alone.
pub fn regret_upper_bound(c: &BoundConstants, horizon: usize, preview: usize, x0: &Vector) -> Result<f64> {
    check_poles(c)?;
    let s = |z: f64| geometric_sum(z, horizon);
    let (eta, gamma, q) = (c.eta, c.gamma, c.q);
    let eg = eta * gamma;
    let lead = 10.0 * c.d * gamma.powi(2 * preview as i32) * x0.norm_squared() / 3.0;
    let tracking = gamma * gamma * s(eg * eg) - 2.0 * gamma * s(eta * eta * gamma) + s(eta * eta);
    let transient = 10.0 * c.c_f.powi(2) / 3.0
        * ((eg / (q * (q - eg)) - eta / (q * (q - eta))).powi(2) * s(q * q)
            + eg * eg * s(eg * eg) / (q * q * (q - eg).powi(2))
            + eta * eta * s(eta * eta) / (q * q * (q - eta).powi(2)));
    let scale = (c.c * c.c * c.c_k * gamma / (gamma - 1.0)).powi(2);
    let bracket = (c.alpha1 + c.alpha2) * (scale * tracking + transient) + (c.c_k * c.c * c.c).powi(2) * s(eta * eta);
    Ok(lead * bracket)
}

/// Whether `λ_max(Q_max)¹⁰` reaches the threshold above which the bound is
/// tighter than the bound-based baseline's.
pub fn sufficient_condition_check(c: &BoundConstants, bounds: &CostBounds, sys: &LinearSystem) -> Result<bool> {
    Ok(sufficient_condition_sides(c, bounds, sys)?.0)
}

/// `(holds, lhs, rhs)` of the sufficient condition.
pub fn sufficient_condition_sides(
    c: &BoundConstants,
    bounds: &CostBounds,
    sys: &LinearSystem,
) -> Result<(bool, f64, f64)> {
    check_poles(c)?;
    let (a, b) = (sys.a(), sys.b());
    let (eta, gamma, q) = (c.eta, c.gamma, c.q);
    let eg = eta * gamma;
    let e2 = eta * eta;
    let numerator = 5.0
        * ((1.0 + (c.alpha1 + c.alpha2) / (1.0 - gamma).powi(2)) / (1.0 - e2)
            + 10.0 * c.c_f.powi(2)
                / (q * q * (q - eg).powi(2) * (q - eta).powi(2) * (1.0 - e2) * (1.0 - eg * eg) * (1.0 - q * q)));
    let r_min_inv =
        c.extrema.r_min.clone().try_inverse().ok_or_else(|| Error::Numerical("R̄_min is singular".into()))?;
    let weight =
        c.c_k.powi(2) * linalg::lambda_min(&c.extrema.r_min).powi(2) * linalg::lambda_min(&c.extrema.q_min).powi(4);
    let denominator = 6.0
        * linalg::spectral_norm(a).powi(2)
        * linalg::spectral_norm(b).powi(2)
        * linalg::spectral_norm(&(b * r_min_inv * b.transpose())).powi(2)
        / weight;
    let lhs = linalg::lambda_max(&bounds.q_max).powi(10);
    let rhs = numerator / denominator;
    Ok((lhs >= rhs, lhs, rhs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub constants: BoundConstants,
    pub bound_value: f64,
    pub realized_regret: f64,
    pub margin: f64,
    pub sufficient_condition_holds: bool,
}

/// Runs the prediction-tracking policy once without disturbances and compares
/// its regret with the bound evaluated on the same instance.
pub fn bound_report(
    sys: &LinearSystem,
    schedule: &CostSchedule,
    cfg: &PolicyConfig,
    source: ExtremaSource<'_>,
    bounds: &CostBounds,
) -> Result<BoundReport> {
    let horizon = schedule.horizon();
    let (traj, solves) = run_prediction_tracking(sys, schedule, cfg, &[])?;
    let realized = regret(&traj, sys, schedule, &[])?.regret;
    let constants = compute_bound_constants(sys, schedule, cfg.tracking_gain(), cfg.preview(), source, Some(&solves))?;
    let bound_value = regret_upper_bound(&constants, horizon, cfg.preview(), sys.x0())?;
    let sufficient_condition_holds = sufficient_condition_check(&constants, bounds, sys)?;
    Ok(BoundReport {
        constants,
        bound_value,
        realized_regret: realized,
        margin: bound_value - realized,
        sufficient_condition_holds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingEntry {
    pub horizon: usize,
    pub expected_regret: f64,
    pub stderr: f64,
    pub gamma: f64,
    pub ratio: f64,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCertificate {
    pub entries: Vec<ScalingEntry>,
    pub spread: f64,
    pub certified: bool,
}

/// Largest ratio between normalized expected regrets that still certifies
/// linear scaling.
pub const SCALING_THRESHOLD: f64 = 10.0;

/// For each horizon draws one schedule within `bounds`, estimates the expected
/// regret of the prediction-tracking policy and normalizes it by `T·γ^{2W}`.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_scaling_certificate(
    sys: &LinearSystem,
    bounds: &CostBounds,
    tracking_gain: &Mat,
    dist: &DisturbanceModel,
    horizons: &[usize],
    preview: usize,
    trials: usize,
    seed: u64,
) -> Result<ScalingCertificate> {
    if horizons.is_empty() {
        return Err(Error::Argument("at least one horizon is required".into()));
    }
    let cfg = PolicyConfig::new(sys, preview, tracking_gain.clone())?;
    let mut entries = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        cfg.check_horizon(horizon)?;
        let mut rng = substream(seed, &[horizon as u64], Role::Schedule);
        let schedule = random_uniform_schedule(bounds, horizon, &mut rng)?;
        let constants =
            compute_bound_constants(sys, &schedule, tracking_gain, preview, ExtremaSource::Bounds(bounds), None)?;
        let mc_seed = crate::seed::derive(seed, &[horizon as u64]);
        let rep = expected_regret_mc(sys, &schedule, &Policy::PredictionTracking(cfg.clone()), dist, trials, mc_seed)?;
        let ratio = rep.regret / (horizon as f64 * constants.gamma.powi(2 * preview as i32));
        entries.push(ScalingEntry {
            horizon,
            expected_regret: rep.regret,
            stderr: rep.stderr.unwrap_or(0.0),
            gamma: constants.gamma,
            ratio,
            excluded: rep.excluded,
        });
    }
    let max = entries.iter().map(|e| e.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let (spread, certified) = if max == 0.0 && min == 0.0 {
        (1.0, true)
    } else if min > 0.0 {
        (max / min, max / min <= SCALING_THRESHOLD)
    } else {
        (f64::INFINITY, false)
    };
    Ok(ScalingCertificate { entries, spread, certified })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{inverted_pendulum, place_poles_single_input, real_poles, DEFAULT_POLES};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn scalar() -> (LinearSystem, CostSchedule) {
        let sys = LinearSystem::new(s(0.5), s(1.0), Vector::from_element(1, 1.0)).unwrap();
        (sys, CostSchedule::constant(s(1.0), s(1.0), 40).unwrap())
    }

    #[test]
    fn geometric_sum_examples() {
        assert_eq!(geometric_sum(0.0, 5), 1.0);
        assert_eq!(geometric_sum(1.0, 7), 7.0);
        assert!((geometric_sum(0.5, 4) - 1.875).abs() < 1e-15);
    }

    #[test]
    fn scalar_constants_by_hand() {
        let (sys, sched) = scalar();
        let c = compute_bound_constants(&sys, &sched, &s(0.0), 2, ExtremaSource::Sequence, None).unwrap();
        let p = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        assert!((c.pbar_max[(0, 0)] - p).abs() < 1e-9);
        assert!((c.eta * c.eta - (1.0 - 1.0 / p)).abs() < 1e-9);
        assert!((c.alpha - 0.25 * p).abs() < 1e-9);
        assert!((c.gamma - c.alpha / (c.alpha + 1.0)).abs() < 1e-15);
        assert!((c.q - 0.75).abs() < 1e-12 && (c.epsilon - 0.25).abs() < 1e-12);
        assert_eq!(c.c_f, 1.0);
        assert!((c.d - (1.0 + p)).abs() < 1e-9);
        assert!((c.c - p).abs() < 1e-9);
        assert!((c.c_k - 0.25 * p * p).abs() < 1e-9);
    }

    #[test]
    fn constant_schedule_plateau_is_independent_of_preview() {
        let (sys, sched) = scalar();
        let a = compute_bound_constants(&sys, &sched, &s(0.0), 0, ExtremaSource::Sequence, None).unwrap();
        let b = compute_bound_constants(&sys, &sched, &s(0.0), 7, ExtremaSource::Sequence, None).unwrap();
        assert_eq!(a.alpha1, b.alpha1);
    }

    #[test]
    fn preview_scales_bound_by_gamma_squared() {
        let (sys, sched) = scalar();
        let c = compute_bound_constants(&sys, &sched, &s(0.0), 2, ExtremaSource::Sequence, None).unwrap();
        let x0 = sys.x0();
        let b3 = regret_upper_bound(&c, 40, 3, x0).unwrap();
        let b4 = regret_upper_bound(&c, 40, 4, x0).unwrap();
        assert!((b4 / b3 - c.gamma * c.gamma).abs() < 1e-12);
        assert_eq!(regret_upper_bound(&c, 40, 3, &Vector::zeros(1)).unwrap(), 0.0);
        assert!(b3 > 0.0);
    }

    #[test]
    fn bound_converges_in_horizon() {
        let (sys, sched) = scalar();
        let c = compute_bound_constants(&sys, &sched, &s(0.0), 1, ExtremaSource::Sequence, None).unwrap();
        let b = |t| regret_upper_bound(&c, t, 1, sys.x0()).unwrap();
        assert!(b(100) <= b(1000) && b(1000) <= b(10_000));
        assert!((b(10_000) - b(1000)).abs() <= 1e-6 * b(1000));
    }

    #[test]
    fn degenerate_poles_are_reported() {
        let (sys, sched) = scalar();
        let mut c = compute_bound_constants(&sys, &sched, &s(0.0), 1, ExtremaSource::Sequence, None).unwrap();
        c.q = c.eta;
        assert!(matches!(regret_upper_bound(&c, 10, 1, sys.x0()), Err(Error::DegenerateConstants(_))));
    }

    #[test]
    fn sufficient_condition_is_monotone_in_q_max() {
        let (sys, sched) = scalar();
        let c = compute_bound_constants(&sys, &sched, &s(0.0), 1, ExtremaSource::Sequence, None).unwrap();
        let bounds = CostBounds::scaled_identity(1, 1, 1.0, 1.0, 1.0, 1.0).unwrap();
        let (_, lhs, rhs) = sufficient_condition_sides(&c, &bounds, &sys).unwrap();
        let bigger = CostBounds::scaled_identity(1, 1, 1.0, 10.0, 1.0, 1.0).unwrap();
        let (_, lhs10, rhs10) = sufficient_condition_sides(&c, &bigger, &sys).unwrap();
        assert_eq!(rhs, rhs10);
        assert!(lhs10 > lhs);
        assert!((lhs10 / lhs - 1e10).abs() < 1e-2);
    }

    #[test]
    fn pendulum_constants_lie_in_unit_interval() {
        let sys = inverted_pendulum(Vector::from_element(4, 1.0)).unwrap();
        let k = place_poles_single_input(&sys, &real_poles(&DEFAULT_POLES)).unwrap();
        let bounds = CostBounds::benchmark(4, 1);
        let sched = random_uniform_schedule(&bounds, 30, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for source in [ExtremaSource::Sequence, ExtremaSource::Bounds(&bounds)] {
            let c = compute_bound_constants(&sys, &sched, &k, 3, source, None).unwrap();
            for v in [c.eta, c.gamma, c.q] {
                assert!(v > 0.0 && v < 1.0, "{v}");
            }
            assert!(c.c_f >= 1.0 && c.d > 0.0 && c.c > 0.0);
        }
    }

    #[test]
    fn incomparable_sequence_needs_bounds() {
        let sys = LinearSystem::new(Mat::identity(2, 2), Mat::identity(2, 2), Vector::from_element(2, 1.0)).unwrap();
        let q1 = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let q2 = Mat::from_diagonal(&Vector::from_vec(vec![2.0, 1.0]));
        let sched = CostSchedule::new(vec![q1, q2.clone(), q2], vec![Mat::identity(2, 2); 2]).unwrap();
        let k = -Mat::identity(2, 2) * 0.5;
        let err = compute_bound_constants(&sys, &sched, &k, 0, ExtremaSource::Sequence, None).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn zero_noise_certificate_is_trivial() {
        let sys = inverted_pendulum(Vector::zeros(4)).unwrap();
        let k = place_poles_single_input(&sys, &real_poles(&DEFAULT_POLES)).unwrap();
        let bounds = CostBounds::benchmark(4, 1);
        let dist = DisturbanceModel::isotropic(4, 0.0).unwrap();
        let cert = theorem2_scaling_certificate(&sys, &bounds, &k, &dist, &[10, 20], 2, 2, 1).unwrap();
        assert!(cert.certified);
        assert!(cert.entries.iter().all(|e| e.ratio == 0.0));
    }
}
