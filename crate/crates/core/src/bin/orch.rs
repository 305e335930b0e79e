use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use warehouse_orch::config::RunConfig;
use warehouse_orch::error::{Error, Result};
use warehouse_orch::stages::{self, TrainTarget, Workdir};

/// Help text for a flag backed by config key `key`, quoting its built-in default.
fn config_help(what: &str, key: &str) -> String {
    let defaults = RunConfig::default().to_text();
    let value = defaults
        .lines()
        .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
        .unwrap_or_default();
    format!("{what} (config key `{key}`) [default: {value}]")
}

#[derive(Parser)]
#[command(name = "orch", version, about = "Warehouse orchestration benchmark pipeline")]
struct Cli {
    /// Directory that every relative path is resolved against
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// Flat key = value config file, relative to the working directory
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra config override as key=value; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true, help = config_help("Seed; ORCH_SEED in the environment wins over it", "seed"))]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic transaction dataset
    Generate(GenerateArgs),
    /// Clean, encode and split a dataset
    Preprocess(PreprocessArgs),
    /// Train the DQN and/or the forest
    Train(TrainArgs),
    /// Evaluate every policy on the test shifts
    Evaluate,
    /// Rerun the whole pipeline across schema widths
    Sweep(SweepArgs),
    /// Summarize metrics.csv (and sweep.csv when present)
    Report,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, help = config_help("Number of records", "n_records"))]
    n: Option<usize>,
    #[arg(long, help = config_help("Share of disrupted records", "disruption_rate"))]
    disruption_rate: Option<String>,
    #[arg(long, help = config_help("Share of Spanish records", "multilingual_rate"))]
    multilingual_rate: Option<String>,
    #[arg(long, help = config_help("Share of records with a missing priority", "missing_rate"))]
    missing_rate: Option<String>,
    #[arg(long, help = config_help("Share of outlier quantities", "outlier_rate"))]
    outlier_rate: Option<String>,
    #[arg(long, help = config_help("Fields per record", "fields"))]
    fields: Option<usize>,
    /// Output dataset path; the manifest is written beside it
    #[arg(long, default_value = stages::DATASET)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Dataset to preprocess
    #[arg(long, default_value = stages::DATASET)]
    input: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Which model to train: dqn, forest or all
    #[arg(long, default_value = "all")]
    policy: String,
    #[arg(long, help = config_help("DQN training steps", "train_steps"))]
    steps: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated field counts
    #[arg(long, value_delimiter = ',', default_value = "100,300,500,700,900")]
    fields: Vec<usize>,
    #[arg(long, help = config_help("Records per sweep point", "n_records"))]
    n: Option<usize>,
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    if let Some(seed) = cli.seed {
        out.push(("seed".to_string(), seed.to_string()));
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects key=value, got `{kv}`")))?;
        out.push((k.trim().to_string(), v.to_string()));
    }
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            out.push((k.to_string(), v));
        }
    };
    match &cli.command {
        Command::Generate(a) => {
            push("n_records", a.n.map(|v| v.to_string()));
            push("disruption_rate", a.disruption_rate.clone());
            push("multilingual_rate", a.multilingual_rate.clone());
            push("missing_rate", a.missing_rate.clone());
            push("outlier_rate", a.outlier_rate.clone());
            push("fields", a.fields.map(|v| v.to_string()));
        }
        Command::Train(a) => push("train_steps", a.steps.map(|v| v.to_string())),
        Command::Sweep(a) => push("n_records", a.n.map(|v| v.to_string())),
        _ => {}
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<()> {
    let wd = Workdir::new(&cli.workdir)?;
    let config_path = cli.config.as_ref().map(|p| wd.path(p));
    let cfg = RunConfig::resolve(config_path.as_deref(), &overrides(cli)?)?;
    match &cli.command {
        Command::Generate(a) => {
            let path = stages::generate(&wd, &cfg, &a.out)?;
            println!("wrote {}", path.display());
        }
        Command::Preprocess(a) => {
            let p = stages::preprocess_stage(&wd, &cfg, &a.input)?;
            println!(
                "prepared {} records, {} key features, {} train / {} test shifts",
                p.pre.records.len(),
                p.pre.features.column_names.len(),
                p.split.train_indices.len(),
                p.split.test_indices.len()
            );
        }
        Command::Train(a) => {
            stages::train(&wd, &cfg, a.policy.parse::<TrainTarget>()?)?;
            println!("trained {}", a.policy);
        }
        Command::Evaluate => {
            for r in stages::evaluate(&wd, &cfg)? {
                println!("{:<8} recovery {:.4}  auc {:.4}", r.policy, r.recovery_accuracy(), r.auc);
            }
        }
        Command::Sweep(a) => {
            for p in stages::sweep(&wd, &cfg, &a.fields)? {
                println!("{:>4} {:<8} {:.4}", p.field_count, p.policy, p.accuracy);
            }
        }
        Command::Report => print!("{}", stages::report(&wd)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(stages::exit_code(&e) as u8)
        }
    }
}
