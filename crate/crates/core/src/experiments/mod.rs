//! Grid sweeps over `(T, W)` comparing the prediction-tracking policy with the
//! receding-horizon baseline, with deterministic seeding and flat-file output.

mod csv;
mod svg;

pub use csv::{emit_csv, parse_csv, render_csv, CSV_HEADER};
pub use svg::{emit_heatmap_svg, render_heatmap_svg, METRICS};

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Deserialize;

use crate::bounds::{compute_bound_constants, regret_upper_bound, sufficient_condition_check, ExtremaSource};
use crate::costs::{random_uniform_schedule, CostBounds};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::policies::{clairvoyant_policy, run_prediction_tracking, MpcBaseline, PolicyConfig};
use crate::regret::mean_stderr;
use crate::riccati::{solve_dare, DareOptions};
use crate::seed::{derive, substream, Role};
use crate::system::{
    inverted_pendulum, place_poles_single_input, random_controllable_system, real_poles, DisturbanceModel,
    LinearSystem, DEFAULT_POLES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Pendulum,
    Random,
    PendulumDisturbance,
    RandomDisturbance,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Pendulum => "pendulum",
            Scenario::Random => "random",
            Scenario::PendulumDisturbance => "pendulum-disturbance",
            Scenario::RandomDisturbance => "random-disturbance",
        }
    }

    pub fn is_random(self) -> bool {
        matches!(self, Scenario::Random | Scenario::RandomDisturbance)
    }

    pub fn is_noisy(self) -> bool {
        matches!(self, Scenario::PendulumDisturbance | Scenario::RandomDisturbance)
    }

    fn id(self) -> u64 {
        self as u64 + 1
    }
}

/// Grid configuration. Every field has a default; a config file may set any
/// subset of them.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub t_min: usize,
    pub t_max: usize,
    pub t_step: usize,
    pub w_min: usize,
    pub w_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub q_min: f64,
    pub q_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub poles: Vec<f64>,
    pub disturbance_cov_scale: f64,
    pub x0: Vec<f64>,
    pub random_entry_min: f64,
    pub random_entry_max: f64,
    pub output_dir: PathBuf,
    pub svg: bool,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Pendulum,
            t_min: 20,
            t_max: 200,
            t_step: 20,
            w_min: 0,
            w_max: 19,
            trials: 20,
            seed: 1,
            q_min: 8e3,
            q_max: 3.2e4,
            r_min: 2e3,
            r_max: 9.8e4,
            poles: DEFAULT_POLES.to_vec(),
            disturbance_cov_scale: 25.0,
            x0: vec![1.0; 4],
            random_entry_min: 0.0,
            random_entry_max: 10.0,
            output_dir: PathBuf::from("results"),
            svg: false,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        Self { scenario, ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    pub fn bounds(&self) -> Result<CostBounds> {
        CostBounds::scaled_identity(self.n(), 1, self.q_min, self.q_max, self.r_min, self.r_max)
    }

    pub fn horizons(&self) -> Vec<usize> {
        (self.t_min..=self.t_max).step_by(self.t_step.max(1)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.t_step == 0 || self.t_min > self.t_max {
            return bad(format!("empty horizon range {}..={} step {}", self.t_min, self.t_max, self.t_step));
        }
        if self.t_min < 2 {
            return bad("horizons must be at least 2".into());
        }
        if self.w_min > self.w_max {
            return bad(format!("empty preview range {}..={}", self.w_min, self.w_max));
        }
        if self.w_min + 2 > self.t_min {
            return bad(format!("w_min = {} exceeds T − 2 for T = {}", self.w_min, self.t_min));
        }
        if self.poles.len() != self.n() {
            return bad(format!("{} poles given for a {}-dimensional state", self.poles.len(), self.n()));
        }
        if !self.scenario.is_random() && self.n() != 4 {
            return bad("the pendulum has a 4-dimensional state; x0 must have 4 entries".into());
        }
        if self.scenario.is_random() && !(self.random_entry_min < self.random_entry_max) {
            return bad("random_entry_min must be below random_entry_max".into());
        }
        if self.scenario.is_noisy() && !(self.disturbance_cov_scale >= 0.0) {
            return bad("disturbance_cov_scale must be nonnegative".into());
        }
        self.bounds()?;
        Ok(())
    }
}

/// One aggregated `(T, W)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub horizon: usize,
    pub preview: usize,
    pub phi_mean: f64,
    pub phi_stderr: f64,
    pub regret_ours_mean: f64,
    pub regret_mpc_mean: f64,
    pub bound: f64,
    pub margin_min: f64,
    pub sufficient_condition: bool,
    pub excluded_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub horizon: usize,
    pub preview: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub failures: Vec<CellFailure>,
    /// Cells with `W > T − 2`, which are not run.
    pub skipped: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    regret_ours: f64,
    regret_mpc: f64,
    bound: f64,
    margin: f64,
    sufficient: bool,
}

/// Errors that drop a single trial instead of failing its cell.
fn excludable(e: &Error, scenario: Scenario) -> bool {
    match e {
        Error::Overflow { .. } => true,
        Error::NonConvergence { .. } | Error::Numerical(_) | Error::Precondition(_) => scenario.is_random(),
        _ => false,
    }
}

struct Shared {
    bounds: CostBounds,
    x0: Vector,
    poles: Vec<f64>,
    dist: Option<DisturbanceModel>,
    pendulum: Option<(LinearSystem, Mat, Mat)>,
}

impl Shared {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let bounds = cfg.bounds()?;
        let x0 = Vector::from_vec(cfg.x0.clone());
        let dist = if cfg.scenario.is_noisy() {
            Some(DisturbanceModel::isotropic(cfg.n(), cfg.disturbance_cov_scale)?)
        } else {
            None
        };
        let pendulum = if cfg.scenario.is_random() {
            None
        } else {
            let sys = inverted_pendulum(x0.clone())?;
            let gain = place_poles_single_input(&sys, &real_poles(&cfg.poles))?;
            let p_max = solve_dare(sys.a(), sys.b(), &bounds.q_max, &bounds.r_max, DareOptions::default())?;
            Some((sys, gain, p_max))
        };
        Ok(Self { bounds, x0, poles: cfg.poles.clone(), dist, pendulum })
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    shared: &Shared,
    horizon: usize,
    preview: usize,
    trial: usize,
) -> Result<TrialOutcome> {
    let coords = [cfg.scenario.id(), horizon as u64, preview as u64, trial as u64];
    let (sys, gain, mpc) = match &shared.pendulum {
        Some((sys, gain, p_max)) => (sys.clone(), gain.clone(), MpcBaseline::with_p_max(p_max.clone(), preview)),
        None => {
            let mut rng = substream(cfg.seed, &coords, Role::System);
            let sys = random_controllable_system(
                cfg.n(),
                1,
                cfg.random_entry_min,
                cfg.random_entry_max,
                shared.x0.clone(),
                &mut rng,
            )?;
            let gain = place_poles_single_input(&sys, &real_poles(&shared.poles))?;
            let mpc = MpcBaseline::new(&sys, &shared.bounds, preview)?;
            (sys, gain, mpc)
        }
    };
    let schedule = random_uniform_schedule(&shared.bounds, horizon, &mut substream(cfg.seed, &coords, Role::Schedule))?;
    let w = match &shared.dist {
        Some(d) => d.sample_sequence(horizon - 1, &mut substream(cfg.seed, &coords, Role::Disturbance)),
        None => Vec::new(),
    };
    let policy = PolicyConfig::new(&sys, preview, gain.clone())?;
    let opt = clairvoyant_policy(&sys, &schedule, &w)?;
    let (ours, solves) = run_prediction_tracking(&sys, &schedule, &policy, &w)?;
    let base = mpc.run(&sys, &schedule, &w)?;
    let regret_ours = ours.cost - opt.cost;
    let regret_mpc = base.cost - opt.cost;
    let (bound, margin, sufficient) = if w.is_empty() {
        let c = compute_bound_constants(&sys, &schedule, &gain, preview, ExtremaSource::Sequence, Some(&solves))?;
        let bound = regret_upper_bound(&c, horizon, preview, sys.x0())?;
        (bound, bound - regret_ours, sufficient_condition_check(&c, &shared.bounds, &sys)?)
    } else {
        (f64::NAN, f64::NAN, false)
    };
    Ok(TrialOutcome { regret_ours, regret_mpc, bound, margin, sufficient })
}

fn aggregate(horizon: usize, preview: usize, outcomes: &[TrialOutcome], excluded: usize) -> GridRow {
    let phis: Vec<f64> = outcomes.iter().map(|o| o.regret_mpc - o.regret_ours).collect();
    let (phi_mean, phi_stderr) = mean_stderr(&phis);
    let k = outcomes.len() as f64;
    GridRow {
        horizon,
        preview,
        phi_mean,
        phi_stderr,
        regret_ours_mean: outcomes.iter().map(|o| o.regret_ours).sum::<f64>() / k,
        regret_mpc_mean: outcomes.iter().map(|o| o.regret_mpc).sum::<f64>() / k,
        bound: outcomes.iter().map(|o| o.bound).sum::<f64>() / k,
        margin_min: outcomes.iter().map(|o| o.margin).fold(f64::INFINITY, f64::min),
        sufficient_condition: outcomes.iter().all(|o| o.sufficient),
        excluded_trials: excluded,
    }
}

/// Runs every `(T, W)` cell of the grid. Cells with `W > T − 2` are skipped and
/// listed in [`GridResult::skipped`].
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridResult> {
    cfg.validate()?;
    let shared = Shared::new(cfg)?;
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for horizon in cfg.horizons() {
        for preview in cfg.w_min..=cfg.w_max {
            if preview + 2 > horizon {
                skipped.push((horizon, preview));
            } else {
                cells.push((horizon, preview));
            }
        }
    }
    let jobs: Vec<(usize, usize, usize)> =
        cells.iter().flat_map(|&(t, w)| (0..cfg.trials).map(move |i| (t, w, i))).collect();
    let compute = || -> Vec<Result<TrialOutcome>> {
        jobs.par_iter().map(|&(t, w, i)| run_trial(cfg, &shared, t, w, i)).collect()
    };
    let results = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?
            .install(compute)
    } else {
        compute()
    };

    let mut out = GridResult { skipped, ..GridResult::default() };
    for (cell, chunk) in cells.iter().zip(results.chunks(cfg.trials)) {
        let (horizon, preview) = *cell;
        let mut kept = Vec::with_capacity(cfg.trials);
        let mut excluded = 0;
        let mut failure = None;
        for r in chunk {
            match r {
                Ok(o) => kept.push(*o),
                Err(e) if excludable(e, cfg.scenario) => excluded += 1,
                Err(e) => {
                    failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        match failure {
            Some(reason) => out.failures.push(CellFailure { horizon, preview, reason }),
            None if kept.is_empty() => out.failures.push(CellFailure {
                horizon,
                preview,
                reason: Error::DegenerateResult { trials: cfg.trials }.to_string(),
            }),
            None => out.rows.push(aggregate(horizon, preview, &kept, excluded)),
        }
    }
    out.rows.sort_by_key(|r| (r.horizon, r.preview));
    Ok(out)
}

/// Seed for a derived sub-experiment, exposed for reproducibility reports.
pub fn cell_seed(cfg: &ExperimentConfig, horizon: usize, preview: usize, trial: usize) -> u64 {
    derive(cfg.seed, &[cfg.scenario.id(), horizon as u64, preview as u64, trial as u64])
}
