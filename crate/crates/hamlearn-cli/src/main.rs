//! Command line front end: single learning runs, scaling sweeps, bound
//! verification, and self checks. Reports are deterministic for a fixed
//! seed, so files written by two identical invocations are byte-identical.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hamlearn::protocol::{
    self, RunConfig, TimeSweepConfig,
};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "hamlearn",
    version,
    about = "Simulate a phase-estimation protocol that learns few-qubit Hamiltonian coefficients"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One full learning run; prints the result as JSON.
    Learn(LearnArgs),
    /// Error-versus-time scaling over a ladder of accuracy targets.
    SweepTime(SweepTimeArgs),
    /// The time sweep repeated across readout-noise levels.
    SweepSpam(SweepSpamArgs),
    /// Solver convergence versus initial-guess offset.
    SweepGuess(SweepGuessArgs),
    /// Evaluate the evolution-time lower bounds and their verifiers.
    Bounds(BoundsArgs),
    /// Run the built-in end-to-end self checks.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Instance {
    /// Three-coefficient single-qubit demonstration system.
    OneQubit,
    /// Fifteen-coefficient two-qubit demonstration system.
    TwoQubit,
}

impl Instance {
    fn default_nu(self) -> f64 {
        match self {
            Instance::OneQubit => 3.0,
            Instance::TwoQubit => 5.0,
        }
    }

    fn default_eta(self) -> f64 {
        match self {
            Instance::OneQubit => 0.05,
            Instance::TwoQubit => 0.03,
        }
    }

    fn run(self, nu: Option<f64>, eta: Option<f64>, epsilon: f64, seed: u64) -> RunConfig {
        let (truth, guess) = match self {
            Instance::OneQubit => protocol::one_qubit_instance(),
            Instance::TwoQubit => protocol::two_qubit_instance(),
        };
        let mut run = RunConfig::new(truth, guess, nu.unwrap_or(self.default_nu()), epsilon);
        run.eta = eta.unwrap_or(self.default_eta());
        run.seed = seed;
        run
    }
}

#[derive(Args)]
struct CommonRunArgs {
    /// JSON run description; overrides the built-in instance flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in system to simulate.
    #[arg(long, value_enum, default_value_t = Instance::OneQubit)]
    instance: Instance,
    /// Control field strength (default depends on the instance).
    #[arg(long)]
    nu: Option<f64>,
    /// Readout bit-flip probability (default depends on the instance).
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CommonRunArgs {
    fn build(&self, epsilon: f64) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let run: RunConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            return Ok(run);
        }
        Ok(self.instance.run(self.nu, self.eta, epsilon, self.seed))
    }
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Accuracy target for the recovered coefficients (l2).
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Write the per-configuration gap table (CSV) here.
    #[arg(long)]
    gaps_out: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LadderArgs {
    /// Largest accuracy target of the ladder.
    #[arg(long, default_value_t = 1e-2)]
    eps_max: f64,
    /// Smallest accuracy target of the ladder.
    #[arg(long, default_value_t = 1e-5)]
    eps_min: f64,
    /// Number of log-spaced ladder points.
    #[arg(long, default_value_t = 4)]
    points: usize,
    /// Independent seeds per ladder point.
    #[arg(long, default_value_t = 20)]
    runs: usize,
}

impl LadderArgs {
    fn epsilons(&self) -> Result<Vec<f64>> {
        if self.points < 2 || self.eps_min <= 0.0 || self.eps_min >= self.eps_max {
            bail!("ladder needs points >= 2 and 0 < eps_min < eps_max");
        }
        let (lo, hi) = (self.eps_min.ln(), self.eps_max.ln());
        Ok((0..self.points)
            .map(|i| (hi + (lo - hi) * i as f64 / (self.points - 1) as f64).exp())
            .collect())
    }

    fn seeds(&self, base: u64) -> Vec<u64> {
        (0..self.runs as u64).map(|i| base.wrapping_add(i)).collect()
    }
}

#[derive(Args)]
struct SweepTimeArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    #[command(flatten)]
    ladder: LadderArgs,
    /// Write the CSV report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepSpamArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    #[command(flatten)]
    ladder: LadderArgs,
    /// Readout-noise levels to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25])]
    etas: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepGuessArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Initial-guess offset norms.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.4, 0.6, 0.8, 1.0])]
    offsets: Vec<f64>,
    /// Independent gap measurements (seeds).
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// Per-gap measurement precision.
    #[arg(long, default_value_t = 1e-4)]
    gap_epsilon: f64,
    /// l2 error below which a solve counts as successful.
    #[arg(long, default_value_t = 2e-2)]
    success_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Random instances for the unitary-difference check.
    #[arg(long, default_value_t = 10_000)]
    samples: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Learn(args) => {
            let run = args.common.build(args.epsilon)?;
            let result = protocol::learn(&run)?;
            if let Some(path) = &args.gaps_out {
                emit(Some(path), &result.gaps_csv())?;
            }
            let mut json = serde_json::to_string_pretty(&result)?;
            json.push('\n');
            emit(args.out.as_deref(), &json)?;
        }
        Command::SweepTime(args) => {
            let cfg = TimeSweepConfig {
                base: args.common.build(args.ladder.eps_max)?,
                epsilons: args.ladder.epsilons()?,
                seeds: args.ladder.seeds(args.common.seed),
            };
            let sweep = protocol::sweep_error_vs_time(&cfg)?;
            eprintln!("log-log slope of median error vs median time: {:.4}", sweep.slope);
            emit(args.out.as_deref(), &sweep.to_csv())?;
        }
        Command::SweepSpam(args) => {
            let cfg = TimeSweepConfig {
                base: args.common.build(args.ladder.eps_max)?,
                epsilons: args.ladder.epsilons()?,
                seeds: args.ladder.seeds(args.common.seed),
            };
            let sweep = protocol::sweep_spam(&cfg, &args.etas)?;
            for (eta, sub) in sweep.etas.iter().zip(&sweep.sweeps) {
                eprintln!("eta={eta}: slope {:.4}", sub.slope);
            }
            emit(args.out.as_deref(), &sweep.to_csv())?;
        }
        Command::SweepGuess(args) => {
            let run = args.common.build(args.gap_epsilon)?;
            let seeds: Vec<u64> =
                (0..args.runs as u64).map(|i| args.common.seed.wrapping_add(i)).collect();
            let sweep = protocol::sweep_initial_guess(
                &run,
                &args.offsets,
                &seeds,
                args.gap_epsilon,
                args.success_tol,
            )?;
            emit(args.out.as_deref(), &sweep.to_csv())?;
        }
        Command::Bounds(args) => {
            let report = protocol::bounds_report(args.samples, args.seed)?;
            emit(args.out.as_deref(), &report.to_text())?;
            if report.unitary_fraction < 1.0 {
                bail!("unitary-difference bound violated on sampled instances");
            }
        }
        Command::Verify(args) => {
            let outcomes = protocol::verify_all(args.seed);
            let mut failures = 0;
            for check in &outcomes {
                let status = if check.pass { "PASS" } else { "FAIL" };
                println!("{status}  {}: {}", check.name, check.detail);
                if !check.pass {
                    failures += 1;
                }
            }
            if failures > 0 {
                bail!("{failures} of {} checks failed", outcomes.len());
            }
        }
    }
    Ok(())
}
