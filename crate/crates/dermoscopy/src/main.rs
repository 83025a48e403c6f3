//! Batch CLI over the library: feature extraction, training, prediction,
//! evaluation, selection, fusion, mask fusion, topology info, and
//! augmentation previews.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dermoscopy::nettopo::UNetConfig;
use dermoscopy::pipeline::commands;
use dermoscopy::pipeline::manifest::Split;
use dermoscopy::pipeline::{FusionMode, SelectionMode};

#[derive(Parser)]
#[command(name = "dermoscopy", version, about = "Skin lesion recognition ensemble")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
    /// Feature store file (newline-delimited records).
    #[arg(long)]
    store: PathBuf,
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's fold count.
    #[arg(long)]
    folds: Option<usize>,
}

impl DataArgs {
    fn overrides(&self) -> commands::ConfigOverrides {
        commands::ConfigOverrides { seed: self.seed, folds: self.folds }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute configured features into the store.
    Extract {
        #[command(flatten)]
        data: DataArgs,
        /// External descriptor files to ingest before extraction.
        #[arg(long)]
        external: Vec<PathBuf>,
    },
    /// Train one calibrated SVM per configured component.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Directory for model JSON files.
        #[arg(long, default_value = "models")]
        out: PathBuf,
    },
    /// Score samples with trained models.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        /// Directory holding model JSON files.
        #[arg(long, default_value = "models")]
        models: PathBuf,
        /// Output score CSV.
        #[arg(long, default_value = "scores.csv")]
        out: PathBuf,
        /// Restrict to one split.
        #[arg(long)]
        split: Option<Split>,
    },
    /// Classification metrics for a score CSV column.
    EvaluateCls {
        /// Score CSV (from predict or fuse).
        #[arg(long)]
        scores: PathBuf,
        /// Column to evaluate (component id or "fused").
        #[arg(long)]
        column: Option<String>,
        #[arg(long, default_value = "evaluation")]
        out: PathBuf,
    },
    /// Pixel-wise segmentation metrics.
    EvaluateSeg {
        /// Manifest with mask_path and pred_mask_path columns.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Directory of predicted masks (used with --gt-dir).
        #[arg(long)]
        pred_dir: Option<PathBuf>,
        /// Directory of ground-truth masks.
        #[arg(long)]
        gt_dir: Option<PathBuf>,
        #[arg(long, default_value = "seg_report.json")]
        out: PathBuf,
    },
    /// Ensemble component selection over a labeled score CSV.
    Select {
        /// greedy or forward.
        mode: SelectionMode,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "selection.csv")]
        out: PathBuf,
    },
    /// Fuse component columns of a score CSV.
    Fuse {
        /// avg or vote.
        mode: FusionMode,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value = "fused.csv")]
        out: PathBuf,
        /// Vote threshold.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Average per-sample confidence masks and binarize at 128.
    SegmentFuse {
        #[arg(long)]
        mask_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the segmentation network layer table and parameter counts.
    NetInfo {
        /// Topology config JSON; flags below override the defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input_size: Option<usize>,
        #[arg(long)]
        kernel_size: Option<usize>,
        #[arg(long)]
        pool_size: Option<usize>,
        #[arg(long)]
        filters: Option<usize>,
        #[arg(long)]
        fc_dim: Option<usize>,
    },
    /// Write augmented previews of an image (and optional mask).
    AugmentPreview {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value = "previews")]
        out_dir: PathBuf,
        /// Experiment config supplying augmentation ranges.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> dermoscopy::Result<()> {
    match cli.command {
        Command::Extract { data, external } => {
            let overrides = data.overrides();
            commands::extract(&data.manifest, &data.store, &data.config, &external, overrides)
        }
        Command::Train { data, out } => {
            let overrides = data.overrides();
            commands::train(&data.manifest, &data.store, &data.config, &out, overrides)
        }
        Command::Predict { data, models, out, split } => {
            let overrides = data.overrides();
            commands::predict(&data.manifest, &data.store, &data.config, &models, &out, split, overrides)
        }
        Command::EvaluateCls { scores, column, out } => {
            commands::evaluate_cls(&scores, column.as_deref(), &out)
        }
        Command::EvaluateSeg { manifest, pred_dir, gt_dir, out } => {
            commands::evaluate_seg(manifest.as_deref(), pred_dir.as_deref(), gt_dir.as_deref(), &out)
        }
        Command::Select { mode, scores, folds, seed, out } => {
            commands::select(mode, &scores, folds, seed, &out)
        }
        Command::Fuse { mode, scores, out, threshold } => {
            commands::fuse(mode, &scores, &out, threshold)
        }
        Command::SegmentFuse { mask_dir, out_dir } => commands::segment_fuse(&mask_dir, &out_dir),
        Command::NetInfo { config, input_size, kernel_size, pool_size, filters, fc_dim } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| dermoscopy::Error::io(&path, e))?;
                    serde_json::from_str::<UNetConfig>(&text)?
                }
                None => UNetConfig::default(),
            };
            if let Some(v) = input_size {
                cfg.input_size = v;
            }
            if let Some(v) = kernel_size {
                cfg.kernel_size = v;
            }
            if let Some(v) = pool_size {
                cfg.pool_size = v;
            }
            if let Some(v) = filters {
                cfg.n_filters_stage1 = v;
            }
            if let Some(v) = fc_dim {
                cfg.fc_dim = v;
            }
            commands::net_info(&cfg, &mut std::io::stdout())
        }
        Command::AugmentPreview { image, mask, seed, count, out_dir, config } => {
            commands::augment_preview(&image, mask.as_deref(), seed, count, &out_dir, config.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
