use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use contractnet::experiment::{
    cmd_ablate, cmd_certify, cmd_eval, cmd_report, cmd_train, exit_code, ExperimentConfig,
    TrainOptions, EXIT_CERTIFICATION, EXIT_CONFIG, EXIT_OK,
};
use contractnet::Error;

#[derive(Parser)]
#[command(
    name = "contractnet",
    version,
    about = "Build, certify, train and dissect contracting multi-area RNNs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (defaults to the config's `out_dir`, else `runs/<name>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Checkpoint to read (eval, ablate) or write and resume from (train).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Continue training from the checkpoint.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Certify subnets and the assembled network.
    Certify,
    /// Train, writing a checkpoint and history every epoch.
    Train,
    /// Evaluate a checkpoint on the test set.
    Eval,
    /// Run the ablation sweep on a checkpoint.
    Ablate,
    /// Consolidate a run directory into report.json and plot-ready CSVs.
    Report,
}

fn load_config(cli: &Cli) -> contractnet::Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(cli: &Cli) -> contractnet::Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Command::Report = cli.command {
        let dir = cli
            .out
            .clone()
            .ok_or_else(|| Error::Config("report needs --out RUN_DIR".into()))?;
        cmd_report(&dir)?;
        return Ok(EXIT_OK);
    }
    let cfg = load_config(cli)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir());
    let checkpoint = cli
        .checkpoint
        .clone()
        .unwrap_or_else(|| out.join("checkpoint.bin"));
    match cli.command {
        Command::Certify => {
            let rep = cmd_certify(&cfg, &out)?;
            if let Some(e) = &rep.error {
                log::error!("{e}");
            }
            if let Some(v) = &rep.verifier {
                log::info!(
                    "max symmetric Jacobian eigenvalue {:e} over {} probes",
                    v.max_sym_eig,
                    v.probes
                );
            }
            Ok(if rep.pass {
                EXIT_OK
            } else {
                EXIT_CERTIFICATION
            })
        }
        Command::Train => {
            let opts = TrainOptions {
                resume: cli.resume,
                checkpoint: Some(checkpoint),
                max_epochs: None,
            };
            let outcome = cmd_train(&cfg, &out, &opts)?;
            if let Some(acc) = outcome.history.final_test_acc() {
                log::info!("final test accuracy {acc:.4}");
            }
            Ok(EXIT_OK)
        }
        Command::Eval => {
            let rep = cmd_eval(&cfg, &checkpoint, &out)?;
            println!("{}", serde_json::to_string(&rep)?);
            Ok(EXIT_OK)
        }
        Command::Ablate => {
            let rep = cmd_ablate(&cfg, &checkpoint, &out)?;
            log::info!(
                "baseline accuracy {:.4}, {} ablations",
                rep.baseline.accuracy,
                rep.rows.len()
            );
            Ok(EXIT_OK)
        }
        Command::Report => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CONTRACTNET_LOG", "info"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_CONFIG as u8
            } else {
                EXIT_OK as u8
            });
        }
    };
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
