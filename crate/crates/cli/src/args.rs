use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mamsr::model::IcdStatistic;
use mamsr::{NetworkConfig, Paths, PoolStatistic};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mamsr", version, about = "Super-resolution with multi-path adaptive modulation blocks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a folder of HR images.
    Train(TrainArgs),
    /// Upscale an image or every PNG in a folder.
    Sr(SrArgs),
    /// Report luma PSNR/SSIM over a dataset.
    Eval(EvalArgs),
    /// Print parameter counts.
    Params(ParamsArgs),
    /// Dump the modulation maps of one block.
    Inspect(InspectArgs),
}

/// Architecture flags. Unset flags take the defaults (or, with `--ckpt`, the
/// checkpoint's values).
#[derive(Debug, Clone, Default, Args)]
pub struct NetworkArgs {
    /// Upscaling factor.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=4))]
    pub scale: Option<u64>,
    /// Number of modulation blocks [default: 16].
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Feature channels [default: 64].
    #[arg(long)]
    pub channels: Option<usize>,
    /// "none" or a comma-separated subset of csi,icd,csd [default: csi,icd,csd].
    #[arg(long)]
    pub paths: Option<Paths>,
    /// CSI statistic: max, avg, var, stdvar, power [default: stdvar].
    #[arg(long)]
    pub csi_stat: Option<PoolStatistic>,
    /// ICD input statistic: max, avg, var, stdvar, power, maxavg [default: stdvar].
    #[arg(long)]
    pub icd_stat: Option<IcdStatistic>,
    /// ICD bottleneck reduction ratio [default: 16].
    #[arg(long)]
    pub reduction: Option<usize>,
}

impl NetworkArgs {
    /// Applies the flags that were given on top of `base`.
    pub fn apply(&self, base: &NetworkConfig) -> NetworkConfig {
        let mut cfg = base.clone();
        if let Some(v) = self.scale {
            cfg.scale = v as usize;
        }
        if let Some(v) = self.blocks {
            cfg.blocks = v;
        }
        if let Some(v) = self.channels {
            cfg.channels = v;
        }
        if let Some(v) = self.paths {
            cfg.paths = v;
        }
        if let Some(v) = self.csi_stat {
            cfg.csi_stat = v;
        }
        if let Some(v) = self.icd_stat {
            cfg.icd_stat = v;
        }
        if let Some(v) = self.reduction {
            cfg.reduction = v;
        }
        cfg
    }

    pub fn resolve(&self) -> Result<NetworkConfig, CliError> {
        let cfg = self.apply(&NetworkConfig::default());
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fails when an explicitly given flag contradicts the checkpoint.
    pub fn check_against(&self, ckpt: &NetworkConfig) -> Result<(), CliError> {
        let wanted = self.apply(ckpt);
        if &wanted != ckpt {
            return Err(CliError::Config(format!(
                "flags request {wanted} but the checkpoint holds {ckpt}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub net: NetworkArgs,
    /// Folder of HR training PNGs.
    #[arg(long)]
    pub hr_dir: PathBuf,
    /// Folder of matching LR PNGs (same file names); bicubic downscaling otherwise.
    #[arg(long)]
    pub lr_dir: Option<PathBuf>,
    /// Folder of HR validation PNGs.
    #[arg(long)]
    pub val_hr_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub iters: u64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// LR patch side.
    #[arg(long, default_value_t = 48)]
    pub patch: usize,
    /// Initial learning rate.
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Iterations between learning-rate halvings.
    #[arg(long, default_value_t = 200_000)]
    pub halve_every: u64,
    #[arg(long, default_value_t = 100)]
    pub log_every: u64,
    /// Iterations between validation runs.
    #[arg(long, default_value_t = 1000)]
    pub val_every: u64,
    /// Iterations between numbered checkpoints (the final one is always written).
    #[arg(long)]
    pub ckpt_every: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output folder for checkpoints and the training log.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SrArgs {
    #[command(flatten)]
    pub net: NetworkArgs,
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Input PNG or folder of PNGs.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output folder; each result is written as `{stem}_x{scale}.png`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Bicubic,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub net: NetworkArgs,
    /// Checkpoint to evaluate (not needed with --baseline or --identity-check).
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub hr_dir: PathBuf,
    #[arg(long)]
    pub lr_dir: Option<PathBuf>,
    /// Evaluate a fixed upscaler instead of a model.
    #[arg(long, value_enum, conflicts_with = "identity_check")]
    pub baseline: Option<Baseline>,
    /// Score the ground truth against itself (metric pipeline check).
    #[arg(long)]
    pub identity_check: bool,
    /// CSV report path.
    #[arg(long, default_value = "eval.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub net: NetworkArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub net: NetworkArgs,
    #[arg(long)]
    pub ckpt: PathBuf,
    /// LR input PNG.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// 1-based block index.
    #[arg(long, default_value_t = 1)]
    pub block: usize,
    /// Output folder.
    #[arg(long)]
    pub out: PathBuf,
}
