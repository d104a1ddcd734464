use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use admission_lab::config::{parse_config, Experiment, ExperimentConfig, Suite, VerifyConfig};
use admission_lab::experiment::{emit_outputs, replay_run, run_experiment_with, RunRecord};
use admission_lab::{Error, Result};

/// Growing-group admission rules and fixed-size committees: simulations,
/// closed forms, exact constructions and the acceptance suite.
#[derive(Parser)]
#[command(name = "admission-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a group under an admission rule.
    Grow(RunArgs),
    /// Replay a schedule on a committee or fuzz it with monitors attached.
    Committee(RunArgs),
    /// Build and verify an adversarial construction.
    Adversary(RunArgs),
    /// Tabulate the closed-form admission probability and fixed point.
    Oracle(RunArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
    /// Run a grow config over a parameter axis and a list of seeds.
    Sweep(RunArgs),
    /// Re-run a recorded experiment and compare its outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; nothing is written without it (or `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `quick` or `full`.
    #[arg(long)]
    suite: Option<String>,
}

#[derive(Args)]
struct ReplayArgs {
    /// A run directory or its `summary.json`.
    #[arg(long)]
    config: PathBuf,
}

fn load(path: &PathBuf, seed: Option<u64>, out: Option<PathBuf>, expected: &str) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    if config.kind() != expected {
        return Err(Error::Config {
            path: "kind".into(),
            message: format!("`{}` config given to the {expected} command", config.kind()),
        });
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if out.is_some() {
        config.out = out;
    }
    Ok(config)
}

fn verify_config(args: VerifyArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => load(path, args.seed, args.out, "verify")?,
        None => {
            let mut c = ExperimentConfig::new(args.seed.unwrap_or(1), Experiment::Verify(VerifyConfig::default()))?;
            c.out = args.out;
            c
        }
    };
    if let (Some(name), Experiment::Verify(v)) = (&args.suite, &mut config.experiment) {
        v.suite = name.parse::<Suite>()?;
    }
    Ok(config)
}

fn report(record: &RunRecord) {
    for v in &record.verdicts {
        println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    eprintln!("{} finished in {:.1} s", record.config.kind(), record.wall_clock.as_secs_f64());
}

fn execute(command: Command) -> Result<bool> {
    let config = match command {
        Command::Grow(a) => load(&a.config, a.seed, a.out, "grow")?,
        Command::Committee(a) => load(&a.config, a.seed, a.out, "committee")?,
        Command::Adversary(a) => load(&a.config, a.seed, a.out, "adversary")?,
        Command::Oracle(a) => load(&a.config, a.seed, a.out, "oracle")?,
        Command::Sweep(a) => load(&a.config, a.seed, a.out, "sweep")?,
        Command::Verify(a) => verify_config(a)?,
        Command::Replay(a) => {
            let record = replay_run(&a.config)?;
            report(&record);
            return Ok(record.passed());
        }
    };
    let record = run_experiment_with(&config, &mut |c| {
        eprintln!(
            "criterion {:>2} {} ({:.1} s): {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.elapsed.as_secs_f64(),
            c.title
        );
    })?;
    report(&record);
    if let Some(dir) = &config.out {
        for path in emit_outputs(&record, dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(record.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
