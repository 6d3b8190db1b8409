use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rhc_lq::harness::{self, ExperimentConfig, Format, HarnessError, Kind};

#[derive(Parser)]
#[command(name = "rhc-lq", version, about = "Receding-horizon LQ control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Riccati equation of the configured system.
    Dare(Common),
    /// Compute the receding-horizon gain on a (nominal) model.
    Synthesize(Common),
    /// Closed-loop cost and gap of a gain on the true system.
    Evaluate(Common),
    /// Evaluate the performance-gap bounds over a horizon grid.
    Bound(Common),
    /// Horizon sweep over randomly perturbed nominal models.
    Sweep(Common),
    /// Identification error against the number of rollouts.
    Identify(Common),
    /// Regret of the adaptive controller under several horizon policies.
    Adaptive(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<Format>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(kind: Kind, args: Common) -> Result<(), HarnessError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default_for(kind),
    };
    if cfg.kind() != kind {
        return Err(HarnessError::Config(format!(
            "kind: config is for `{}` but the subcommand is `{}`",
            cfg.kind().name(),
            kind.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(HarnessError::Config("--jobs: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("--jobs: {e}")))?;
    }
    let format = args
        .format
        .or(cfg.output.format)
        .unwrap_or_else(|| kind.default_format());
    let out = args.out.or_else(|| cfg.output.path.clone());
    let result = harness::execute(&cfg)?;
    harness::emit(&result, out.as_deref(), format)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Dare(a) => (Kind::Dare, a),
        Command::Synthesize(a) => (Kind::Synthesize, a),
        Command::Evaluate(a) => (Kind::Evaluate, a),
        Command::Bound(a) => (Kind::Bound, a),
        Command::Sweep(a) => (Kind::Sweep, a),
        Command::Identify(a) => (Kind::Identify, a),
        Command::Adaptive(a) => (Kind::Adaptive, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rhc-lq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
