//! Command-line front end for the quality-aware imitation pipeline.
//!
//! ```text
//! demoforge init-config --preset standard --out config.json
//! demoforge gen-corpus --config config.json --workdir run/
//! demoforge curate     --config config.json --workdir run/
//! demoforge pretrain   --config config.json --workdir run/
//! demoforge compute-logpi ...
//! demoforge train-disc ...
//! demoforge score ...
//! demoforge posttrain [--no-weights] ...
//! demoforge eval [--rollouts N] ...
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 stage-order violation,
//! 4 numerical failure (non-finite values surfaced).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use demoforge::error::Error;
use demoforge::pipeline::stages::{run_stage, Workdir};
use demoforge::pipeline::PipelineConfig;

/// Environment variable overriding the master seed from the config file.
const SEED_ENV: &str = "DEMOFORGE_SEED";

#[derive(Parser)]
#[command(name = "demoforge", version)]
#[command(about = "Quality-aware demonstration curation and diffusion-policy training")]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "demoforge.json")]
    config: PathBuf,

    /// Working directory holding episodes, manifest, checkpoints, reports.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,

    /// Re-run the stage even when its outputs are already stamped.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a starter configuration file.
    InitConfig {
        /// Preset: "standard" (400-episode corpus) or "mini" (smoke test).
        #[arg(long, default_value = "standard")]
        preset: String,
        /// Output path.
        #[arg(long, default_value = "demoforge.json")]
        out: PathBuf,
    },
    /// Generate the synthetic demonstration corpus and a fresh manifest.
    GenCorpus,
    /// Compute smoothness metrics, pre-screen, replay-validate.
    Curate,
    /// Pretrain the diffusion policy on the clean subset.
    Pretrain,
    /// Compute denoising energies and log-pi proxies under the frozen policy.
    ComputeLogpi,
    /// Train the positive-unlabeled quality discriminator.
    TrainDisc,
    /// Score every episode's clips and assign training weights.
    Score,
    /// Post-train the policy on the full mixed corpus.
    Posttrain {
        /// Vanilla ablation arm: uniform weights instead of scores.
        #[arg(long)]
        no_weights: bool,
    },
    /// Roll out trained checkpoints and write the evaluation report.
    Eval {
        /// Override the configured number of rollouts per task.
        #[arg(long)]
        rollouts: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(output) => {
            println!("{output}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<String, Error> {
    if let Command::InitConfig { preset, out } = &cli.command {
        let cfg = match preset.as_str() {
            "standard" => PipelineConfig::standard(),
            "mini" => PipelineConfig::mini(),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; expected \"standard\" or \"mini\""
                )))
            }
        };
        cfg.save(out)?;
        return Ok(format!("wrote {preset} preset to {}", out.display()));
    }

    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Ok(seed) = std::env::var(SEED_ENV) {
        cfg.seed = seed
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV} must be a u64, got {seed:?}")))?;
    }
    let wd = Workdir::new(&cli.workdir);
    let stage = match &cli.command {
        Command::InitConfig { .. } => unreachable!("handled above"),
        Command::GenCorpus => "gen-corpus",
        Command::Curate => "curate",
        Command::Pretrain => "pretrain",
        Command::ComputeLogpi => "compute-logpi",
        Command::TrainDisc => "train-disc",
        Command::Score => "score",
        Command::Posttrain { no_weights } => {
            if *no_weights {
                "posttrain-vanilla"
            } else {
                "posttrain"
            }
        }
        Command::Eval { rollouts } => {
            if let Some(n) = rollouts {
                cfg.eval.rollouts_per_task = *n;
            }
            "eval"
        }
    };
    run_stage(&cfg, &wd, stage, cli.force)
}
