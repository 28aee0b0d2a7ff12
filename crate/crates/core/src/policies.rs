//! The three policies compared by the benchmark: the clairvoyant optimum, the
//! prediction-tracking policy and the receding-horizon baseline that uses the
//! DARE solution of the worst-case costs as terminal value.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use crate::costs::{frozen_index, CostBounds, CostSource, FrozenView};
use crate::error::{dim_check, Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::riccati::{
    affine_backward_riccati, affine_terms, backward_riccati, check_disturbances, disturbance, finish_trajectory,
    rollout, solve_dare, DareOptions, RiccatiSolution, Trajectory,
};
use crate::system::{spectral_radius, LinearSystem};

/// Preview length `W` and the fixed tracking gain `K` (`ρ(A + BK) < 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    preview: usize,
    tracking_gain: Mat,
}

impl PolicyConfig {
    pub fn new(sys: &LinearSystem, preview: usize, tracking_gain: Mat) -> Result<Self> {
        dim_check(tracking_gain.shape() == (sys.m(), sys.n()), || {
            format!("tracking gain must be {}×{}", sys.m(), sys.n())
        })?;
        let rho = spectral_radius(&sys.closed_loop(&tracking_gain))?;
        if !(rho < 1.0) {
            return Err(Error::Precondition(format!("tracking gain is not stabilizing: ρ(A + BK) = {rho}")));
        }
        Ok(Self { preview, tracking_gain })
    }

    pub fn preview(&self) -> usize {
        self.preview
    }

    pub fn tracking_gain(&self) -> &Mat {
        &self.tracking_gain
    }

    /// Checks `W ≤ T − 2`.
    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        if horizon < 2 || self.preview + 2 > horizon {
            return Err(Error::Argument(format!("preview {} exceeds T − 2 for horizon {horizon}", self.preview)));
        }
        Ok(())
    }
}

/// Clairvoyant comparator: full knowledge of costs and of the disturbance
/// sequence.
pub fn clairvoyant_policy(sys: &LinearSystem, schedule: &impl CostSource, w: &[Vector]) -> Result<Trajectory> {
    check_disturbances(w, schedule.horizon(), sys.n())?;
    if w.iter().all(|wi| wi.iter().all(|&v| v == 0.0)) {
        let sol = backward_riccati(sys, schedule)?;
        rollout(sys, &sol, sys.x0(), w, schedule)
    } else {
        let sol = affine_backward_riccati(sys, schedule, w)?;
        rollout(sys, &sol, sys.x0(), w, schedule)
    }
}

/// Backward passes on frozen schedules, keyed by the frozen index `s`.
#[derive(Debug, Clone, Default)]
pub struct FrozenSolves {
    solves: BTreeMap<usize, RiccatiSolution>,
    plans: BTreeMap<usize, Vec<Vector>>,
}

impl FrozenSolves {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_solve<S: CostSource>(
        &mut self,
        sys: &LinearSystem,
        source: &S,
        s: usize,
    ) -> Result<&RiccatiSolution> {
        let s = s.min(source.horizon() - 1);
        match self.solves.entry(s) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => Ok(e.insert(backward_riccati(sys, &FrozenView::new(source, s))?)),
        }
    }

    pub fn get(&self, s: usize) -> Option<&RiccatiSolution> {
        self.solves.get(&s)
    }

    /// Iterates `(s, solution)` in increasing `s`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &RiccatiSolution)> {
        self.solves.iter().map(|(&s, sol)| (s, sol))
    }

    pub fn len(&self) -> usize {
        self.solves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solves.is_empty()
    }

    /// Disturbance-free predicted states `x_{j|s}` from `x̄_0`.
    fn plan<S: CostSource>(&mut self, sys: &LinearSystem, source: &S, s: usize) -> Result<&[Vector]> {
        let s = s.min(source.horizon() - 1);
        if !self.plans.contains_key(&s) {
            let sol = self.get_or_solve(sys, source, s)?;
            let mut states = Vec::with_capacity(sol.p.len());
            states.push(sys.x0().clone());
            for k in &sol.k {
                let last = states.last().expect("nonempty");
                states.push((sys.a() + sys.b() * k) * last);
            }
            self.plans.insert(s, states);
        }
        Ok(&self.plans[&s])
    }
}

/// Predicted optimal plan `(x_{j|t+W}, u_{j|t+W})` over the whole horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
}

/// Plans from `x̄_0` on the schedule frozen at `t + W`, with the disturbances
/// `known_w[0..=t]` applied and zero disturbance afterwards.
pub fn predict_trajectory<S: CostSource>(
    sys: &LinearSystem,
    source: &S,
    t: usize,
    preview: usize,
    known_w: &[Vector],
) -> Result<Prediction> {
    let horizon = source.horizon();
    if t + 2 > horizon {
        return Err(Error::Argument(format!("time {t} is past the last decision step")));
    }
    let n = sys.n();
    let view = FrozenView::new(source, frozen_index(t, preview, horizon));
    let sol = backward_riccati(sys, &view)?;
    let padded = pad_known(known_w, t, horizon, n);
    let terms = affine_terms(sys, &view, &sol, &padded)?;
    let mut states = vec![sys.x0().clone()];
    let mut controls = Vec::with_capacity(horizon - 1);
    for i in 0..horizon - 1 {
        let u = &sol.k[i] * &states[i] + &terms.feedforward[i];
        let next = sys.a() * &states[i] + sys.b() * &u + &padded[i];
        controls.push(u);
        states.push(next);
    }
    Ok(Prediction { states, controls })
}

fn pad_known(known_w: &[Vector], t: usize, horizon: usize, n: usize) -> Vec<Vector> {
    (0..horizon - 1).map(|i| if i <= t { disturbance(known_w, i, n) } else { Vector::zeros(n) }).collect()
}

/// Online prediction-tracking controller. At time `t` it plans on the schedule
/// frozen at `t + W` and applies `u_t = K (x_t − x_{t|t+W}) + u_{t|t+W}`.
pub struct PredictionTracker<'a> {
    sys: &'a LinearSystem,
    cfg: &'a PolicyConfig,
    solves: FrozenSolves,
}

impl<'a> PredictionTracker<'a> {
    pub fn new(sys: &'a LinearSystem, cfg: &'a PolicyConfig) -> Self {
        Self { sys, cfg, solves: FrozenSolves::new() }
    }

    /// Control at time `t` given the realized state and the disturbances
    /// `w_0..w_t` revealed so far. Only cost indices `≤ t + W` are read.
    pub fn control<S: CostSource>(&mut self, t: usize, x_t: &Vector, source: &S, known_w: &[Vector]) -> Result<Vector> {
        let horizon = source.horizon();
        self.cfg.check_horizon(horizon)?;
        if t + 2 > horizon {
            return Err(Error::Argument(format!("time {t} is past the last decision step")));
        }
        let (sys, n) = (self.sys, self.sys.n());
        let s = frozen_index(t, self.cfg.preview(), horizon);
        let known = &known_w[..known_w.len().min(t + 1)];
        let noisy = known.iter().any(|w| w.iter().any(|&v| v != 0.0));
        let (x_pred, u_pred) = if noisy {
            let padded = pad_known(known, t, horizon, n);
            let view = FrozenView::new(source, s);
            let sol = self.solves.get_or_solve(sys, source, s)?;
            let terms = affine_terms(sys, &view, sol, &padded)?;
            let mut xi = sys.x0().clone();
            for (i, w) in padded.iter().enumerate().take(t) {
                let u = &sol.k[i] * &xi + &terms.feedforward[i];
                xi = sys.a() * &xi + sys.b() * u + w;
            }
            let u = &sol.k[t] * &xi + &terms.feedforward[t];
            (xi, u)
        } else {
            let x_pred = self.solves.plan(sys, source, s)?[t].clone();
            let u = &self.solves.get(s).expect("solved by plan").k[t] * &x_pred;
            (x_pred, u)
        };
        Ok(self.cfg.tracking_gain() * (x_t - x_pred) + u_pred)
    }

    pub fn solves(&self) -> &FrozenSolves {
        &self.solves
    }

    pub fn into_solves(self) -> FrozenSolves {
        self.solves
    }
}

/// Runs the prediction-tracking policy over the whole horizon and returns the
/// trajectory together with the frozen solves it performed.
pub fn run_prediction_tracking<S: CostSource>(
    sys: &LinearSystem,
    schedule: &S,
    cfg: &PolicyConfig,
    w: &[Vector],
) -> Result<(Trajectory, FrozenSolves)> {
    let horizon = schedule.horizon();
    cfg.check_horizon(horizon)?;
    check_disturbances(w, horizon, sys.n())?;
    let mut tracker = PredictionTracker::new(sys, cfg);
    let mut x = vec![sys.x0().clone()];
    let mut u = Vec::with_capacity(horizon - 1);
    for t in 0..horizon - 1 {
        let known = &w[..w.len().min(t + 1)];
        let ut = tracker.control(t, &x[t], schedule, known)?;
        let next = sys.a() * &x[t] + sys.b() * &ut + disturbance(w, t, sys.n());
        if !linalg::vec_finite(&next) {
            return Err(Error::Overflow { step: t + 1 });
        }
        u.push(ut);
        x.push(next);
    }
    Ok((finish_trajectory(x, u, schedule)?, tracker.into_solves()))
}

pub fn prediction_tracking_policy<S: CostSource>(
    sys: &LinearSystem,
    schedule: &S,
    cfg: &PolicyConfig,
    w: &[Vector],
) -> Result<Trajectory> {
    run_prediction_tracking(sys, schedule, cfg, w).map(|(traj, _)| traj)
}

/// Receding-horizon baseline: at each `t` solve the `W + 1` step problem with
/// terminal value `x_{t+W+1}ᵀ P_max x_{t+W+1}` and apply the first control.
/// When the window reaches `T − 1` the true terminal cost `Q_{T−1}` is used.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcBaseline {
    p_max: Mat,
    preview: usize,
}

impl MpcBaseline {
    pub fn new(sys: &LinearSystem, bounds: &CostBounds, preview: usize) -> Result<Self> {
        let p_max = solve_dare(sys.a(), sys.b(), &bounds.q_max, &bounds.r_max, DareOptions::default())?;
        Ok(Self { p_max, preview })
    }

    /// Baseline with a precomputed terminal matrix, shared across previews.
    pub fn with_p_max(p_max: Mat, preview: usize) -> Self {
        Self { p_max, preview }
    }

    pub fn p_max(&self) -> &Mat {
        &self.p_max
    }

    pub fn preview(&self) -> usize {
        self.preview
    }

    /// First control of the window problem at `t`; `w_t` is the disturbance
    /// revealed at `t` and enters the plan's first transition.
    pub fn control<S: CostSource>(
        &self,
        sys: &LinearSystem,
        t: usize,
        x_t: &Vector,
        source: &S,
        w_t: Option<&Vector>,
    ) -> Result<Vector> {
        let horizon = source.horizon();
        let end = (t + self.preview + 1).min(horizon - 1);
        let (a, b) = (sys.a(), sys.b());
        let mut p = if end < horizon - 1 { self.p_max.clone() } else { source.state_cost(horizon - 1).clone() };
        let mut first = None;
        for k in (t..end).rev() {
            let bt_p = b.transpose() * &p;
            let g = source.input_cost(k) + &bt_p * b;
            if k == t {
                let mut rhs = &bt_p * a * x_t;
                if let Some(w) = w_t {
                    rhs += &bt_p * w;
                }
                let rhs = Mat::from_column_slice(rhs.len(), 1, rhs.as_slice());
                first = Some(-linalg::solve_spd(&g, &rhs)?.column(0).into_owned());
                break;
            }
            let gain = -linalg::solve_spd(&g, &(&bt_p * a))?;
            let at_p = a.transpose() * &p;
            p = linalg::symmetrize(&(&at_p * a + source.state_cost(k) + &at_p * b * &gain));
        }
        Ok(first.expect("window has at least one step"))
    }

    pub fn run<S: CostSource>(&self, sys: &LinearSystem, schedule: &S, w: &[Vector]) -> Result<Trajectory> {
        let horizon = schedule.horizon();
        check_disturbances(w, horizon, sys.n())?;
        let mut x = vec![sys.x0().clone()];
        let mut u = Vec::with_capacity(horizon - 1);
        for t in 0..horizon - 1 {
            let ut = self.control(sys, t, &x[t], schedule, w.get(t))?;
            let next = sys.a() * &x[t] + sys.b() * &ut + disturbance(w, t, sys.n());
            if !linalg::vec_finite(&next) {
                return Err(Error::Overflow { step: t + 1 });
            }
            u.push(ut);
            x.push(next);
        }
        finish_trajectory(x, u, schedule)
    }
}

pub fn mpc_baseline_policy<S: CostSource>(
    sys: &LinearSystem,
    schedule: &S,
    bounds: &CostBounds,
    preview: usize,
    w: &[Vector],
) -> Result<Trajectory> {
    MpcBaseline::new(sys, bounds, preview)?.run(sys, schedule, w)
}
