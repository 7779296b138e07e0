use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mdti::{checkpoint, config::TrainConfig, trainer};
use mdti_traj::io::{load_dataset_dir, save_dataset_dir};
use mdti_traj::{generate_synthetic, split_dataset};

#[derive(Parser)]
#[command(name = "mdti", about = "Multimodal trajectory representation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Self-supervised pretraining; writes the best-validation checkpoint.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Travel-time finetuning from a pretrained checkpoint.
    Finetune {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Update only the prediction head.
        #[arg(long)]
        freeze_encoder: bool,
    },
    /// Evaluate a finetuned model on one split; prints a JSON report.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Generate { config, out } => {
            let cfg = TrainConfig::load(&config)?;
            let (samples, net, spec) = generate_synthetic(&cfg.generator, cfg.effective_seed())?;
            save_dataset_dir(&out, &samples, &net, &spec)?;
            println!("wrote {} trajectories to {}", samples.len(), out.display());
        }
        Command::Pretrain { config, data, out } => {
            let cfg = TrainConfig::load(&config)?;
            let (samples, net, spec) = load_dataset_dir(&data)?;
            let (train, val, _) = split_dataset(samples, (0.6, 0.2, 0.2), cfg.effective_seed())?;
            trainer::pretrain(&cfg, &train, &val, &net, &spec, Some(&out))?;
            println!("best checkpoint in {}", out.display());
        }
        Command::Finetune {
            ckpt,
            data,
            out,
            freeze_encoder,
        } => {
            let (mut model, cfg) = checkpoint::load(&ckpt)?;
            let reference = mdti::MdtiModel::new(
                cfg.dims(),
                model.vocab,
                model.lib.clone(),
                cfg.effective_seed(),
            )?;
            checkpoint::check_compatible(&model, &reference)?;
            let (samples, net, spec) = load_dataset_dir(&data)?;
            let (train, _, _) = split_dataset(samples, (0.6, 0.2, 0.2), cfg.effective_seed())?;
            trainer::finetune_tte(&mut model, &cfg, &train, &net, &spec, freeze_encoder)?;
            checkpoint::save(&out, &model, &cfg)?;
            println!("finetuned model in {}", out.display());
        }
        Command::Evaluate {
            model,
            data,
            split,
            out,
        } => {
            let (model, cfg) = checkpoint::load(&model)?;
            let (samples, net, spec) = load_dataset_dir(&data)?;
            let (train, val, test) =
                split_dataset(samples, (0.6, 0.2, 0.2), cfg.effective_seed())?;
            let chosen = match split.as_str() {
                "train" => train,
                "val" => val,
                "test" => test,
                other => anyhow::bail!("unknown split: {other}"),
            };
            let report = trainer::evaluate(&model, &cfg, &chosen, &net, &spec, &split)?;
            let json = serde_json::to_string_pretty(&report)?;
            if let Some(path) = out {
                std::fs::write(&path, &json)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{json}");
        }
    }
    Ok(())
}
