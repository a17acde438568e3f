use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use regbal::harness::{self, config::ExperimentConfig, verify};
use regbal::Error;

#[derive(Parser)]
#[command(name = "regbal", version, about = "Model selection for linear bandits by regret balancing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML file or a built-in preset.
    Run {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of seeds.
        #[arg(long)]
        seeds: Option<u64>,
        /// Override the horizon.
        #[arg(long)]
        horizon: Option<u64>,
        /// Output directory (defaults to the config's `out_dir`, then `runs/<scenario>`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Recompute summaries from the traces in a run directory.
    Summarize {
        #[arg(long = "in")]
        dir: PathBuf,
    },
    /// Run a verification suite; exits with 3 if any check fails.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Scale the number of Monte Carlo trials (1.0 is the full suite).
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Invariants,
    Coverage,
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::Input(_) | Error::Parameter(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => exit_for(&e),
    }
}

fn run(cli: Cli) -> regbal::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            preset,
            seed,
            seeds,
            horizon,
            out,
            threads,
        } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => ExperimentConfig::load(&path)?,
                (None, Some(name)) => harness::preset(&name)?,
                (None, None) => return Err(Error::Config("pass --config or --preset".into())),
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(t) = horizon {
                cfg.horizon = t;
                cfg.slope_window = None;
            }
            let dir = out
                .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.scenario));
            let output = harness::run_experiment(&cfg, Some(&dir), threads)?;
            print!("{}", harness::summary::render(&cfg.scenario, &output.aggregate));
            println!("output: {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { dir } => {
            let agg = harness::summary::summarize_dir(&dir)?;
            let name = ExperimentConfig::load(&dir.join("config.toml"))
                .map(|c| c.scenario)
                .unwrap_or_else(|_| "unknown".into());
            print!("{}", harness::summary::render(&name, &agg));
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, scale, threads } => {
            if !(scale > 0.0 && scale <= 1.0) {
                return Err(Error::Config("--scale must be in (0, 1]".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let checks = pool.install(|| match suite {
                Suite::Invariants => verify::invariant_suite(scale),
                Suite::Coverage => verify::coverage_suite(scale),
            })?;
            let mut ok = true;
            for c in &checks {
                println!("{c}");
                ok &= c.pass;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
        Command::Presets => {
            for name in harness::PRESETS {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
