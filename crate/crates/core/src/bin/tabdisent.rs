use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tabdisent::experiment::{
    attention_from_csv, run_experiment_with, score_csv, validate_config, write_attention_maps,
    ExperimentConfig, RunEvent,
};
use tabdisent::metrics::{auc_pr, auc_roc};
use tabdisent::model::load_checkpoint;

/// One-class tabular anomaly detection with disentangled attention heads.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every trial of an experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Base seed; trials use seed, seed+1, ...
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Also write one checkpoint per trial.
        #[arg(long)]
        save_checkpoints: bool,
    },
    /// Print anomaly scores for every row of a CSV file.
    Score { checkpoint: PathBuf, csv: PathBuf },
    /// Check a config and print it with all defaults filled in.
    Validate { config: PathBuf },
    /// Write mean attention maps over the rows of a CSV file, one file per head.
    ExportAttn {
        checkpoint: PathBuf,
        csv: PathBuf,
        /// Output directory.
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> tabdisent::Result<()> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            seed,
            trials,
            save_checkpoints,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.override_with(output_dir, seed, trials);
            if save_checkpoints {
                cfg.save_checkpoints = Some(true);
            }
            let exp = validate_config(&cfg)?;
            eprintln!(
                "{}: {} trial(s), {} epochs, batch {}, C = {}, {} -> {}",
                exp.dataset,
                exp.trial_seeds.len(),
                exp.hyper.epochs,
                exp.hyper.batch_size,
                exp.hyper.latent_channels,
                exp.hyper.ablation.as_str(),
                exp.output_dir.display()
            );
            let outcome = run_experiment_with(&exp, |event| match event {
                RunEvent::TrialStarted { trial, seed } => {
                    eprintln!("trial {trial} (seed {seed}) started")
                }
                RunEvent::TrialFinished { trial, report } => eprintln!(
                    "trial {trial} (seed {}): AUC-PR {:.4}  AUC-ROC {:.4}",
                    report.trial_seed, report.auc_pr, report.auc_roc
                ),
            })?;
            let s = outcome.summary;
            println!(
                "AUC-PR {:.4} ± {:.4}  AUC-ROC {:.4} ± {:.4}",
                s.auc_pr.mean, s.auc_pr.std, s.auc_roc.mean, s.auc_roc.std
            );
        }
        Command::Score { checkpoint, csv } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let (scores, labels) = score_csv(&ckpt, &csv)?;
            println!("row,score");
            for (i, s) in scores.iter().enumerate() {
                println!("{i},{s:?}");
            }
            if let Some(labels) = labels {
                if let (Ok(pr), Ok(roc)) = (auc_pr(&scores, &labels), auc_roc(&scores, &labels)) {
                    eprintln!("AUC-PR {pr:.4}  AUC-ROC {roc:.4}");
                }
            }
        }
        Command::Validate { config } => {
            let exp = validate_config(&ExperimentConfig::from_file(&config)?)?;
            print!("{}", exp.to_toml());
        }
        Command::ExportAttn {
            checkpoint,
            csv,
            out,
        } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let maps = attention_from_csv(&ckpt, &csv)?;
            std::fs::create_dir_all(&out).map_err(|e| tabdisent::Error::Io {
                path: out.clone(),
                source: e,
            })?;
            for path in write_attention_maps(&maps, &out, "attention")? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}
