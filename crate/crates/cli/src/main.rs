//! `condlcr`: runs the misprediction-detection pipeline from a TOML config.
//!
//! Exit codes: 0 success, 1 usage error, 2 config or data error, 3 stage
//! failure (including `report` before the stages it needs have run).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use condlcr::pipeline::{self, RunConfig, RunManifest, RunOptions, Stage, MANIFEST_FILE};
use condlcr::Error;

#[derive(Parser)]
#[command(
    name = "condlcr",
    version,
    about = "Flag likely-wrong CNN predictions from conductance and label change rate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split the data and train the CNN.
    Train(Common),
    /// Record per-sample predictions of the trained CNN.
    Predict(Common),
    /// Compute feature-map conductance for every split.
    Conductance(Common),
    /// Train the conductance error detector and its validation ROC.
    Detect(Common),
    /// Sweep mutation rates and keep the chosen mutant population.
    Mutate(Common),
    /// Compute label change rates for every split.
    Lcr(Common),
    /// Validation ROC and threshold of the label change rate.
    Roc(Common),
    /// Train the unified classifiers and issue test-set verdicts.
    Combine(Common),
    /// Run every stage, report included.
    Run(Common),
    /// Render tables and figures from a completed run.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reuse stages already recorded in the manifest.
    #[arg(long)]
    resume: bool,
}

impl Command {
    fn parts(&self) -> (&Common, Stage) {
        match self {
            Command::Train(c) => (c, Stage::Train),
            Command::Predict(c) => (c, Stage::Predict),
            Command::Conductance(c) => (c, Stage::Conductance),
            Command::Detect(c) => (c, Stage::Detector),
            Command::Mutate(c) => (c, Stage::Mutants),
            Command::Lcr(c) => (c, Stage::Lcr),
            Command::Roc(c) => (c, Stage::LcrThreshold),
            Command::Combine(c) => (c, Stage::Verdict),
            Command::Run(c) | Command::Report(c) => (c, Stage::Report),
        }
    }
}

fn load_config(c: &Common) -> condlcr::Result<RunConfig> {
    if !c.config.exists() {
        return Err(Error::Config(format!(
            "config file {} does not exist",
            c.config.display()
        )));
    }
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cmd: &Command) -> condlcr::Result<(RunConfig, RunManifest)> {
    let (common, until) = cmd.parts();
    let cfg = load_config(common)?;
    let manifest = if matches!(cmd, Command::Report(_)) {
        pipeline::render_report(&cfg)?
    } else {
        let opts = RunOptions {
            resume: common.resume,
            until,
            require_upstream: false,
        };
        pipeline::run_pipeline(&cfg, &opts)?
    };
    Ok((cfg, manifest))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { .. } | Error::MissingStages(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    match execute(&cli.command) {
        Ok((cfg, manifest)) => {
            for s in &manifest.stages {
                let metrics: Vec<String> = s
                    .metrics
                    .iter()
                    .filter(|(k, _)| k.starts_with("auroc") || k.starts_with("accuracy"))
                    .map(|(k, v)| format!("{k}={v:.4}"))
                    .collect();
                println!("{:<14} {:>8.1}s  {}", s.name, s.seconds, metrics.join(" "));
            }
            println!("manifest: {}", cfg.out_dir.join(MANIFEST_FILE).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                // Stage and sample errors already print their source inline
                if !msg.contains(&s.to_string()) {
                    msg.push_str(&format!("\n  caused by: {s}"));
                }
                src = s.source();
            }
            eprintln!("{msg}");
            log::debug!("exit code {}", exit_code(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
