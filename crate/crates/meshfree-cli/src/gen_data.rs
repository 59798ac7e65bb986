use clap::Args;
use meshfree_core::nemdo::generate_dataset;
use meshfree_core::Error;
use std::path::PathBuf;

#[derive(Args)]
pub struct GenDataArgs {
    /// Grid nodes per axis of each source cloud.
    #[arg(long, default_value_t = 48)]
    pub nx: usize,
    #[arg(long, default_value_t = 48)]
    pub ny: usize,
    /// Mean node spacing of the source clouds.
    #[arg(long, default_value_t = 1.0 / 48.0)]
    pub spacing: f64,
    /// Disorder level: per-coordinate uniform noise on (-eps*s/2, eps*s/2).
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Neighbors per stencil.
    #[arg(long, default_value_t = 10)]
    pub stencil_n: usize,
    /// Consistency order recorded in the dataset header.
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Number of stencils to sample.
    #[arg(long, default_value_t = 25_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (defaults to $MESHFREE_OUT/gen-data).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: GenDataArgs) -> Result<(), Error> {
    let out_dir = args.out.clone().unwrap_or_else(|| super::default_out("gen-data"));
    super::write_manifest(
        &out_dir,
        "gen-data",
        args.seed,
        serde_json::json!({
            "nx": args.nx,
            "ny": args.ny,
            "spacing": args.spacing,
            "epsilon": args.epsilon,
            "stencil_n": args.stencil_n,
            "p": args.p,
            "count": args.count,
        }),
    )?;
    let dataset = generate_dataset(
        args.nx,
        args.ny,
        args.spacing,
        args.epsilon,
        args.stencil_n,
        args.p,
        args.count,
        args.seed,
    )?;
    let path = out_dir.join("dataset.mfds");
    dataset.save(&path)?;
    println!(
        "wrote {} stencils (n = {}, epsilon = {}) to {}",
        dataset.len(),
        dataset.stencil_n,
        dataset.epsilon,
        path.display()
    );
    Ok(())
}
