use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sparse_ukf_harness::config::{BenchmarkKind, LibrarySpec};
use sparse_ukf_harness::export::{export_trace, report_text};
use sparse_ukf_harness::run::run_experiment;
use sparse_ukf_harness::ExperimentConfig;

#[derive(Parser)]
#[command(name = "sparse-ukf", version, about = "Joint square-root UKF with sparse identification of unknown dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a built-in benchmark with default settings.
    Demo {
        #[arg(value_enum)]
        benchmark: DemoKind,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Library key, e.g. duffing_psi2.
        #[arg(long)]
        library: Option<String>,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DemoKind {
    Duffing,
    Golf,
}

impl From<DemoKind> for BenchmarkKind {
    fn from(k: DemoKind) -> Self {
        match k {
            DemoKind::Duffing => BenchmarkKind::Duffing,
            DemoKind::Golf => BenchmarkKind::Golf,
        }
    }
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TERMINATED: u8 = 3;

fn default_out(config: &ExperimentConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("out/{}-seed{}", config.benchmark.key(), config.seed)))
}

fn execute(config: &ExperimentConfig, out: &Path) -> ExitCode {
    let (trace, summary) = match run_experiment(config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    if let Err(e) = export_trace(&trace, Some(&summary), out) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAILURE);
    }
    if let Err(e) = std::fs::write(out.join("config.toml"), config.to_toml()) {
        eprintln!("error: cannot write config copy: {e}");
        return ExitCode::from(EXIT_FAILURE);
    }
    println!("{} / {} / seed {}", config.benchmark.key(), config.library_label(), config.seed);
    print!("{}", report_text(&trace, Some(&summary)));
    println!("artifacts written to {}", out.display());
    match &trace.termination {
        Some(t) => {
            eprintln!("warning: {t}");
            ExitCode::from(EXIT_TERMINATED)
        }
        None => ExitCode::SUCCESS,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out.unwrap_or_else(|| default_out(&cfg));
            execute(&cfg, &out)
        }
        Command::Demo { benchmark, seed, out, library } => {
            let mut cfg = ExperimentConfig::demo(benchmark.into(), seed);
            if let Some(key) = library {
                cfg.library = Some(LibrarySpec::Key(key));
            }
            if let Err(e) = cfg.validate() {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            let out = out.unwrap_or_else(|| default_out(&cfg));
            execute(&cfg, &out)
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("{}: ok ({} / {}, {} steps)", config.display(), cfg.benchmark.key(), cfg.library_label(), cfg.steps());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", config.display());
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
