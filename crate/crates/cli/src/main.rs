//! `lab`: simulation and property-verification laboratory for random circle
//! maps.

use clap::{Args, Parser, Subcommand};
use lab_cli::commands::{self, CommonArgs};
use lab_cli::config::parse_config;
use lab_core::measure::{Direction, Estimator};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lab", version, about = "random circle-map laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Run configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: String,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's output.dir).
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_name = "INT")]
    n_back: Option<usize>,
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Dump one orbit as CSV.
    Simulate(Shared),
    /// Ensemble Lyapunov-exponent estimate.
    Lyapunov(Shared),
    /// Hyperbolic- and sparse-time counts per path.
    Hyp(Shared),
    /// Young-time densities and the theta1 estimate.
    Young(Shared),
    /// Expansion-event hit rate on an interval.
    Event {
        #[command(flatten)]
        shared: Shared,
        /// Interval endpoints.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        interval: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Pathwise return-time partitions and survival curves.
    Tower(Shared),
    /// Pullback sample density.
    Density(Shared),
    /// Quenched correlation curve and decay fit.
    Corr {
        #[command(flatten)]
        shared: Shared,
        /// Observable pair (cos | one).
        #[arg(long, default_value = "cos")]
        obs: String,
        #[arg(long, default_value_t = 40)]
        n_max: usize,
        #[arg(long, value_parser = parse_direction, default_value = "backward")]
        direction: Direction,
        /// Estimator for the first term (operator | mc).
        #[arg(long, value_parser = parse_estimator, default_value = "operator")]
        estimator: Estimator,
    },
    /// Large-deviation probe quantities.
    Ldp(Shared),
    /// Structural verification battery (exit 2 on violations).
    Verify(Shared),
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    match s {
        "forward" => Ok(Direction::Forward),
        "backward" => Ok(Direction::Backward),
        other => Err(format!("unknown direction `{other}`")),
    }
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    match s {
        "operator" => Ok(Estimator::Operator),
        "mc" => Ok(Estimator::Mc),
        other => Err(format!("unknown estimator `{other}`")),
    }
}

fn shared(cmd: &Command) -> &Shared {
    match cmd {
        Command::Simulate(s)
        | Command::Lyapunov(s)
        | Command::Hyp(s)
        | Command::Young(s)
        | Command::Tower(s)
        | Command::Density(s)
        | Command::Ldp(s)
        | Command::Verify(s) => s,
        Command::Event { shared, .. } => shared,
        Command::Corr { shared, .. } => shared,
    }
}

fn run() -> anyhow::Result<i32> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // usage text on stderr, exit 1
            eprint!("{e}");
            return Ok(1);
        }
    };
    // worker pool size from LAB_THREADS (default: logical cores)
    if let Ok(threads) = std::env::var("LAB_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
                .ok();
        }
    }
    let s = shared(&cli.command);
    let text = std::fs::read_to_string(&s.config)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", s.config))?;
    let mut resolved = parse_config(&text)?;
    if let Some(seed) = s.seed {
        resolved.config.seed = seed;
    }
    if resolved.derived.regime_warning {
        eprintln!(
            "warning: epsilon <= alpha^(c-1); outside the theorem regime (epsilon = {}, alpha^(c-1) = {})",
            resolved.config.epsilon,
            resolved.config.alpha.powf(resolved.config.c - 1.0)
        );
    }
    let args = CommonArgs {
        out_dir: s.out.clone(),
        n: s.n,
        ensemble: s.ensemble,
        bins: s.bins,
        n_back: s.n_back,
        mc: s.mc,
        horizon: s.horizon,
    };
    match &cli.command {
        Command::Simulate(_) => commands::simulate(&resolved, &args),
        Command::Lyapunov(_) => commands::lyapunov(&resolved, &args),
        Command::Hyp(_) => commands::hyp(&resolved, &args),
        Command::Young(_) => commands::young(&resolved, &args),
        Command::Event {
            interval, trials, ..
        } => {
            anyhow::ensure!(interval.len() == 2, "--interval takes two endpoints");
            commands::event(&resolved, &args, (interval[0], interval[1]), *trials)
        }
        Command::Tower(_) => commands::tower(&resolved, &args),
        Command::Density(_) => commands::density(&resolved, &args),
        Command::Corr {
            obs,
            n_max,
            direction,
            estimator,
            ..
        } => commands::corr(&resolved, &args, obs, *n_max, *direction, *estimator),
        Command::Ldp(_) => commands::ldp(&resolved, &args),
        Command::Verify(_) => commands::verify(&resolved, &args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
