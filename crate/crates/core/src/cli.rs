//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{bound_report, ExtremaSource};
use crate::costs::{random_uniform_schedule, CostBounds};
use crate::error::{Error, Result};
use crate::experiments::{emit_csv, emit_heatmap_svg, run_grid, ExperimentConfig, Scenario};
use crate::invariants::all_suites;
use crate::linalg::Vector;
use crate::policies::PolicyConfig;
use crate::seed::{substream, Role};
use crate::system::{inverted_pendulum, place_poles_single_input, real_poles, DEFAULT_POLES};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "preview-lqr", version, about = "Online LQR with cost preview: grids, bounds and self-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Φ grid on the inverted pendulum without disturbances.
    PendulumGrid(GridArgs),
    /// Φ grid on random controllable systems without disturbances.
    RandomGrid(GridArgs),
    /// Φ grid with Gaussian process noise.
    DisturbanceGrid {
        /// Plant to drive; defaults to the config file's scenario, else the pendulum.
        #[arg(long, value_enum)]
        system: Option<SystemKind>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Print every regret-bound constant for one pendulum instance.
    BoundCheck(BoundArgs),
    /// Run the oracle-equivalence and bound property suites.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SystemKind {
    Pendulum,
    Random,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    t_min: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    t_step: Option<usize>,
    #[arg(long)]
    w_max: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with any subset of the experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write a Φ heat map.
    #[arg(long)]
    svg: bool,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 50)]
    horizon: usize,
    #[arg(long, default_value_t = 5)]
    preview: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl GridArgs {
    fn resolve(&self, scenario: impl FnOnce(&ExperimentConfig) -> Scenario) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.scenario = scenario(&cfg);
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(t_min, t_max, t_step, w_max, trials, seed, workers);
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.svg |= self.svg;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Paths of the files a grid run writes.
pub fn output_paths(cfg: &ExperimentConfig) -> (PathBuf, PathBuf) {
    let name = cfg.scenario.name();
    (cfg.output_dir.join(format!("{name}.csv")), cfg.output_dir.join(format!("{name}_phi.svg")))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn grid(cfg: &ExperimentConfig) -> Result<u8> {
    let result = run_grid(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let (csv, svg) = output_paths(cfg);
    emit_csv(&result, &csv)?;
    println!("wrote {} ({} cells)", csv.display(), result.rows.len());
    if cfg.svg && !result.rows.is_empty() {
        let title = format!("Φ = regret(MPC) − regret(prediction tracking), {}", cfg.scenario.name());
        emit_heatmap_svg(&result, "phi_mean", &title, &svg)?;
        println!("wrote {}", svg.display());
    }
    for (t, w) in &result.skipped {
        eprintln!("skipped T={t} W={w}: W > T - 2");
    }
    for f in &result.failures {
        eprintln!("failed T={} W={}: {}", f.horizon, f.preview, f.reason);
    }
    let excluded: usize = result.rows.iter().map(|r| r.excluded_trials).sum();
    if excluded > 0 {
        eprintln!("{excluded} trials excluded after numerical failure");
    }
    Ok(EXIT_OK)
}

fn bound_check(args: &BoundArgs) -> Result<u8> {
    let sys = inverted_pendulum(Vector::repeat(4, 1.0))?;
    let bounds = CostBounds::benchmark(4, 1);
    let schedule = random_uniform_schedule(&bounds, args.horizon, &mut substream(args.seed, &[0], Role::Schedule))?;
    let gain = place_poles_single_input(&sys, &real_poles(&DEFAULT_POLES))?;
    let cfg = PolicyConfig::new(&sys, args.preview, gain)?;
    cfg.check_horizon(args.horizon)?;
    let r = bound_report(&sys, &schedule, &cfg, ExtremaSource::Bounds(&bounds), &bounds)?;
    let c = &r.constants;
    println!("instance      pendulum T={} W={} seed={}", args.horizon, args.preview, args.seed);
    for (name, v) in [
        ("rho", c.rho),
        ("epsilon", c.epsilon),
        ("q", c.q),
        ("C_f", c.c_f),
        ("D", c.d),
        ("C_K", c.c_k),
        ("C", c.c),
        ("eta", c.eta),
        ("alpha", c.alpha),
        ("beta", c.beta),
        ("gamma", c.gamma),
        ("alpha1", c.alpha1),
        ("alpha2", c.alpha2),
        ("bound", r.bound_value),
        ("regret", r.realized_regret),
        ("margin", r.margin),
    ] {
        println!("{name:<13} {v:.10e}");
    }
    println!("sufficient    {}", r.sufficient_condition_holds);
    Ok(EXIT_OK)
}

fn verify(seed: u64) -> Result<u8> {
    let suites = all_suites(seed)?;
    let mut ok = true;
    for s in &suites {
        let status = if s.passed() { "PASS" } else { "FAIL" };
        println!("{status} {:<24} checks={:<7} min_slack={:.3e}", s.name, s.checks, s.min_slack);
        for f in &s.failures {
            println!("     {f}");
        }
        ok &= s.passed();
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::PendulumGrid(g) => grid(&g.resolve(|_| Scenario::Pendulum)?),
        Command::RandomGrid(g) => grid(&g.resolve(|_| Scenario::Random)?),
        Command::DisturbanceGrid { system, grid: g } => grid(&g.resolve(|cfg| match system {
            Some(SystemKind::Pendulum) => Scenario::PendulumDisturbance,
            Some(SystemKind::Random) => Scenario::RandomDisturbance,
            None if cfg.scenario.is_random() => Scenario::RandomDisturbance,
            None => Scenario::PendulumDisturbance,
        })?),
        Command::BoundCheck(args) => bound_check(&args),
        Command::Verify { seed } => verify(seed),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e @ (Error::Config(_) | Error::Argument(_) | Error::Precondition(_))) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
