use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use crosslayer::graph::EdgeListFormat;

mod config;
mod manifest;
mod stages;

use config::{ExperimentArgs, RunConfig, CONFIG_FILE};

/// A bad invocation or configuration.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser)]
#[command(name = "crosslayer", version, about = "Cross-layer link prediction on multiplex networks")]
struct Cli {
    /// Run directory holding every stage's outputs.
    #[arg(long, global = true, default_value = "runs/default")]
    out: PathBuf,
    /// JSON config; defaults to the one saved in the run directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use this single seed instead of the configured seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dataset, build the candidate pool and the splits.
    Prepare {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// layer_first or mpx
        #[arg(long)]
        format: Option<EdgeListFormat>,
        /// Name used in reports.
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Node2Vec embeddings for every target and seed.
    Embed {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    Train {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Score the test splits with the trained checkpoints.
    Evaluate {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Aggregate evaluated runs, optionally with reports from other run directories.
    Report {
        #[arg(long = "from")]
        from: Vec<PathBuf>,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prepare { .. } => "prepare",
            Command::Embed { .. } => "embed",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Report { .. } => "report",
        }
    }

    fn exp(&self) -> &ExperimentArgs {
        match self {
            Command::Prepare { exp, .. }
            | Command::Embed { exp }
            | Command::Train { exp }
            | Command::Evaluate { exp }
            | Command::Report { exp, .. } => exp,
        }
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref(), &cli.out)?;
    if let Command::Prepare {
        dataset, format, name, ..
    } = &cli.command
    {
        if let Some(d) = dataset {
            cfg.dataset.path = Some(d.clone());
        }
        if let Some(f) = format {
            cfg.dataset.format = *f;
        }
        if name.is_some() {
            cfg.dataset.name = name.clone();
        }
    }
    cli.command.exp().apply(&mut cfg.experiment);
    if let Some(s) = cli.seed {
        cfg.experiment.seeds = vec![s];
    }
    if cfg.experiment.seeds.is_empty() {
        return Err(Usage("no seeds configured".into()).into());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn save_config(out: &Path, stage: &str, cfg: &RunConfig) -> Result<()> {
    let json = cfg.to_json();
    std::fs::create_dir_all(out.join(stage))?;
    std::fs::write(out.join(CONFIG_FILE), &json)?;
    std::fs::write(out.join(stage).join(CONFIG_FILE), &json)?;
    Ok(())
}

/// Timestamped log lines go to `<out>/logs/<stage>.log` as well as stderr.
fn init_logging(out: &Path, stage: &str) -> Result<()> {
    let dir = out.join("logs");
    std::fs::create_dir_all(&dir)?;
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(format!("{stage}.log")))?;
    let file = std::sync::Mutex::new(file);
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(move |buf, record| {
            let line = format!("{} {:<5} {}", buf.timestamp(), record.level(), record.args());
            if let Ok(mut f) = file.lock() {
                let _ = writeln!(f, "{line}");
            }
            writeln!(buf, "{line}")
        })
        .try_init()
        .ok();
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli)?;
    let stage = cli.command.name();
    std::fs::create_dir_all(&cli.out)?;
    init_logging(&cli.out, stage)?;
    save_config(&cli.out, stage, &cfg)?;
    let ctx = stages::Ctx {
        out: cli.out.clone(),
        cfg,
        workers: cli.workers.max(1),
    };
    match &cli.command {
        Command::Prepare { .. } => {
            let s = stages::prepare(&ctx)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Embed { .. } => {
            let n = stages::embed(&ctx)?;
            println!("embedded {n} runs");
        }
        Command::Train { .. } => {
            let (trained, mut failures) = stages::train(&ctx)?;
            println!("trained {trained} runs, {} failed", failures.len());
            if trained == 0 {
                if let Some((_, e)) = failures.pop() {
                    return Err(e);
                }
            }
        }
        Command::Evaluate { .. } => {
            let records = stages::evaluate(&ctx)?;
            for r in &records {
                let auc = r.roc_auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
                println!(
                    "layer {} ({}) seed {}: macro-F1 {:.4} ROC-AUC {auc}",
                    r.target_layer, r.layer_name, r.seed, r.macro_f1
                );
            }
        }
        Command::Report { from, .. } => {
            let (_, table) = stages::report(&ctx, from)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<crosslayer::Error>() {
            use crosslayer::Error as E;
            return match e {
                E::NonFinite { .. } | E::Overflow(_) => 3,
                E::InvalidArgument(_) | E::Json(_) => 1,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
