use clap::Args;
use meshfree_core::nemdo::{
    checkpoint_save, train_resumable, Dataset, ModelConfig, TrainConfig, TrainState,
};
use meshfree_core::taylor::{target_moments, OperatorKind};
use meshfree_core::Error;
use std::io::Write;
use std::path::PathBuf;

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset file produced by gen-data.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Target operator: dx, dy, laplacian or hyperviscous.
    #[arg(long, default_value = "dx")]
    pub operator: String,
    /// Consistency order of the moment targets (defaults to the dataset
    /// header value).
    #[arg(long)]
    pub p: Option<usize>,
    /// Latent width.
    #[arg(long, default_value_t = 32)]
    pub f_h: usize,
    /// Message-passing rounds.
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Hidden layers per MLP.
    #[arg(long, default_value_t = 1)]
    pub mlp_hidden: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    /// Plateau scheduler: lr multiplier on stagnation.
    #[arg(long, default_value_t = 0.5)]
    pub plateau_factor: f64,
    /// Epochs without improvement before the scheduler acts.
    #[arg(long, default_value_t = 50)]
    pub plateau_patience: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub min_lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Continue from the training state saved in the output directory.
    #[arg(long, default_value_t = false)]
    pub resume: bool,
    /// Output directory (defaults to $MESHFREE_OUT/train).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: TrainArgs) -> Result<(), Error> {
    let out_dir = args.out.clone().unwrap_or_else(|| super::default_out("train"));
    let kind: OperatorKind = args.operator.parse()?;
    let dataset = Dataset::load(&args.dataset)?;
    let order_p = args.p.unwrap_or(dataset.order_p);
    let model_config = ModelConfig {
        stencil_n: dataset.stencil_n,
        order_p,
        kind,
        f_h: args.f_h,
        graph_layers: args.layers,
        mlp_hidden: args.mlp_hidden,
    };
    model_config.validate()?;
    let train_config = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        plateau_factor: args.plateau_factor,
        plateau_patience: args.plateau_patience,
        min_lr: args.min_lr,
        seed: args.seed,
        ..TrainConfig::default()
    };
    super::write_manifest(
        &out_dir,
        "train",
        args.seed,
        serde_json::json!({
            "dataset": args.dataset.to_string_lossy(),
            "dataset_len": dataset.len(),
            "model": model_config,
            "train": train_config,
            "target_moments": target_moments(kind, order_p)?,
            "resume": args.resume,
        }),
    )?;

    let state_path = out_dir.join("train_state.bin");
    let resume_state = if args.resume {
        if !state_path.exists() {
            return Err(Error::invalid(format!(
                "--resume requested but {} does not exist",
                state_path.display()
            )));
        }
        Some(TrainState::load(&state_path)?)
    } else {
        None
    };

    let (result, state) = train_resumable(&dataset, &model_config, &train_config, resume_state)?;

    checkpoint_save(&out_dir.join("model.ckpt"), &model_config, &result.params)?;
    checkpoint_save(&out_dir.join("model_last.ckpt"), &model_config, &state.params)?;
    state.save(&state_path)?;

    let mut log = std::io::BufWriter::new(std::fs::File::create(out_dir.join("loss_log.csv"))?);
    writeln!(log, "epoch,lr,train_loss,val_loss")?;
    for e in &result.log {
        writeln!(log, "{},{:.6e},{:.9e},{:.9e}", e.epoch, e.lr, e.train_loss, e.val_loss)?;
    }
    log.flush()?;

    println!(
        "trained {} epochs; best val loss {:.4e} at epoch {}; checkpoint {}",
        result.log.len(),
        result.best_val_loss,
        result.best_epoch,
        out_dir.join("model.ckpt").display()
    );
    if let Some(epoch) = result.diverged_at {
        return Err(Error::NumericalFailure(format!(
            "training diverged at epoch {epoch}; best checkpoint kept"
        )));
    }
    Ok(())
}
