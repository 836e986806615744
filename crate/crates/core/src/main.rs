use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use otafl::harness::{run_experiment, sweep, validate, ExperimentConfig, Method, Scale};

#[derive(Parser)]
#[command(version, about = "Federated learning over a simulated multi-antenna uplink")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write per-round metrics as CSV.
    Run(RunArgs),
    /// Run the built-in numerical self-checks.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Repeat `run` for several seeds; outputs get a `-seed<N>` suffix.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with configuration keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    pilot_len: Option<usize>,
    /// Base configuration the file and flags are applied to.
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: otafl::Error| e.to_string())
}

impl RunArgs {
    fn resolve(&self) -> otafl::Result<ExperimentConfig> {
        let base = ExperimentConfig::for_scale(match self.scale {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        });
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path, base)?,
            None => base,
        };
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(v) = self.snr_db {
            cfg.snr_db = v;
        }
        if let Some(v) = self.pilot_len {
            cfg.pilot_len = v;
        }
        if let Some(v) = &self.mnist_dir {
            cfg.mnist_dir = v.clone();
        }
        if let Some(v) = &self.output {
            cfg.output = v.clone();
        }
        Ok(cfg)
    }
}

fn report(rows: &[otafl::harness::MetricsRow]) {
    if let Some(last) = rows.last() {
        eprintln!(
            "{} seed {}: round {} accuracy {:.4} loss {:.4}",
            last.method, last.seed, last.round, last.test_accuracy, last.test_loss
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args.resolve().and_then(|cfg| {
            let rows = run_experiment(&cfg)?;
            report(&rows);
            eprintln!("wrote {}", cfg.output.display());
            Ok(true)
        }),
        Command::Sweep { run, seeds } => run.resolve().and_then(|cfg| {
            let rows = sweep(&cfg, &seeds)?;
            for seed in &seeds {
                let per_seed: Vec<_> = rows.iter().filter(|r| r.seed == *seed).cloned().collect();
                report(&per_seed);
            }
            Ok(true)
        }),
        Command::Validate { seed } => {
            let reports = validate::run_all(seed);
            for r in &reports {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(reports.iter().all(|r| r.passed))
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
