use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use questa_cli::{ablate, analyze, prepare, CliError, Overrides};
use questa_core::AnalysisConfig;

#[derive(Debug, Parser)]
#[command(name = "questa", version, about = "Evolutionary quantum architecture search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, env = "QUESTA_THREADS")]
    threads: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the evolutionary search described by a config file.
    Run(RunArgs),
    /// Score a circuit file with the untrained proxies.
    Analyze {
        /// Circuit JSON file.
        circuit: PathBuf,
        /// Directory for the report and histogram (default: next to the circuit).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = AnalysisConfig::default().samples)]
        samples: usize,
        #[arg(long, default_value_t = AnalysisConfig::default().bins)]
        bins: usize,
    },
    /// Compare random, path-count-filtered and fully filtered starting circuits.
    Ablate(RunArgs),
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, out) = prepare(&args.config, &args.overrides())?;
            let report = questa_cli::run(&cfg, &out)?;
            println!("generations: {}", report.generations);
            println!(
                "best task fitness: {}",
                report.best.task_fitness.map_or("none".into(), |f| f.to_string())
            );
            println!("metric: {}", serde_json::to_string(&report.best.metric).unwrap_or_default());
            println!("report: {}", out.join("report.json").display());
        }
        Command::Analyze {
            circuit,
            out,
            seed,
            samples,
            bins,
        } => {
            let (report, hist) = analyze(&circuit, out.as_deref(), &AnalysisConfig { samples, bins }, seed)?;
            println!("path_count: {}", report.dag.path_count);
            println!("ln_path_count: {}", report.dag.log_path_count);
            println!("expressivity: {}", report.expressivity.expressivity);
            println!("histogram: {}", hist.display());
        }
        Command::Ablate(args) => {
            let (cfg, out) = prepare(&args.config, &args.overrides())?;
            let outcome = ablate(&cfg, &out)?;
            for s in &outcome.summary {
                println!(
                    "{}: median epochs to target {} ({}/{} reached)",
                    s.case.label(),
                    s.median_epochs,
                    s.reached,
                    s.runs
                );
            }
            println!("ordering dag-kl <= dag-only <= random: {}", outcome.ordering_holds());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {:#}", anyhow::Error::from(e));
            ExitCode::from(code as u8)
        }
    }
}
