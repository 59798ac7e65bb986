use clap::Args;
use meshfree_core::diagnostics::{
    assemble_global, convergence_study, dump_weights_csv, eigen_spectrum, field_error,
    modal_response, moment_table, timing_harness, write_sidecar, LabfmProvider, NemdoProvider,
    OperatorProvider, SphProvider,
};
use meshfree_core::classical::SphKernel;
use meshfree_core::geometry::{generate_perturbed_grid, save_cloud_csv};
use meshfree_core::nemdo::NemdoModel;
use meshfree_core::pde::{dump_snapshot, run_tgv_with, write_error_series, SolverConfig};
use meshfree_core::taylor::OperatorKind;
use meshfree_core::Error;
use std::path::{Path, PathBuf};

#[derive(Args)]
pub struct DiagnoseArgs {
    /// One of: moments, convergence, spectrum, modal, timing, tgv.
    #[arg(long)]
    pub suite: String,
    /// Comma-separated providers: sph-quintic, sph-wendland, labfm, nemdo.
    #[arg(long, default_value = "sph-quintic,sph-wendland,labfm")]
    pub providers: String,
    /// Operator under study (moments defaults to dx plus laplacian).
    #[arg(long)]
    pub operator: Option<String>,
    /// LABFM consistency order.
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// LABFM stencil size.
    #[arg(long, default_value_t = 35)]
    pub labfm_n: usize,
    /// Node disorder level.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Checkpoint for the nemdo provider (x-derivative or suite operator).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Additional nemdo checkpoints for the tgv suite.
    #[arg(long)]
    pub checkpoint_dy: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_lap: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_hyp: Option<PathBuf>,
    /// Grid nodes per axis for single-cloud suites.
    #[arg(long)]
    pub nx: Option<usize>,
    /// Independently seeded clouds for the moments ensemble.
    #[arg(long, default_value_t = 4)]
    pub clouds: usize,
    /// Comma-separated spacings for the convergence suite.
    #[arg(long, default_value = "0.025,0.0125,0.00625,0.003125")]
    pub resolutions: String,
    /// Clouds averaged per resolution.
    #[arg(long, default_value_t = 2)]
    pub trials: usize,
    /// Timing repetitions.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Time weight construction only, excluding neighbor search.
    #[arg(long, default_value_t = false)]
    pub weights_only: bool,
    /// Also dump per-node stencil weights for overlay plots.
    #[arg(long, default_value_t = false)]
    pub dump_stencils: bool,
    /// Mean node spacing for the tgv suite.
    #[arg(long, default_value_t = 0.03125)]
    pub s: f64,
    #[arg(long, default_value_t = 100.0)]
    pub re: f64,
    #[arg(long, default_value_t = 0.1)]
    pub ma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub cfl: f64,
    #[arg(long, default_value_t = 0.01)]
    pub filter_coeff: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Error samples along the tgv run.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (defaults to $MESHFREE_OUT/diagnose-<suite>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct ProviderSet {
    providers: Vec<Box<dyn OperatorProvider>>,
}

impl ProviderSet {
    fn refs(&self) -> Vec<&dyn OperatorProvider> {
        self.providers.iter().map(|p| p.as_ref()).collect()
    }
}

fn load_nemdo(args: &DiagnoseArgs) -> Result<NemdoProvider, Error> {
    let base = args.checkpoint.as_ref().ok_or_else(|| {
        Error::invalid("the nemdo provider needs --checkpoint pointing at a trained model")
    })?;
    let mut provider = NemdoProvider::single(NemdoModel::load(base)?);
    for extra in [&args.checkpoint_dy, &args.checkpoint_lap, &args.checkpoint_hyp]
        .into_iter()
        .flatten()
    {
        provider = provider.with_model(NemdoModel::load(extra)?);
    }
    Ok(provider)
}

fn build_providers(args: &DiagnoseArgs) -> Result<ProviderSet, Error> {
    let mut providers: Vec<Box<dyn OperatorProvider>> = Vec::new();
    for tag in args.providers.split(',').map(str::trim) {
        match tag {
            "sph-quintic" => providers.push(Box::new(SphProvider::new(SphKernel::QuinticSpline))),
            "sph-wendland" => providers.push(Box::new(SphProvider::new(SphKernel::WendlandC2))),
            "labfm" => providers.push(Box::new(
                LabfmProvider::new(args.p).with_stencil_n(args.labfm_n),
            )),
            "nemdo" => providers.push(Box::new(load_nemdo(args)?)),
            other => return Err(Error::invalid(format!("unknown provider '{other}'"))),
        }
    }
    if providers.is_empty() {
        return Err(Error::invalid("no providers selected"));
    }
    Ok(ProviderSet { providers })
}

fn parse_kind(args: &DiagnoseArgs, default: OperatorKind) -> Result<OperatorKind, Error> {
    match &args.operator {
        Some(s) => s.parse(),
        None => Ok(default),
    }
}

fn sidecar(
    args: &DiagnoseArgs,
    set: &ProviderSet,
    config_hash: u64,
    extra: serde_json::Value,
) -> serde_json::Value {
    serde_json::json!({
        "providers": set.providers.iter().map(|p| p.name()).collect::<Vec<_>>(),
        "epsilon": args.epsilon,
        "seed": args.seed,
        "config_hash": format!("{config_hash:016x}"),
        "manifest": "manifest.json",
        "detail": extra,
    })
}

pub fn run(args: DiagnoseArgs) -> Result<(), Error> {
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| super::default_out(&format!("diagnose-{}", args.suite)));
    let config_hash = super::write_manifest(
        &out_dir,
        &format!("diagnose-{}", args.suite),
        args.seed,
        serde_json::json!({
            "suite": args.suite,
            "providers": args.providers,
            "operator": args.operator,
            "p": args.p,
            "labfm_n": args.labfm_n,
            "epsilon": args.epsilon,
            "nx": args.nx,
            "clouds": args.clouds,
            "resolutions": args.resolutions,
            "trials": args.trials,
            "repeats": args.repeats,
            "weights_only": args.weights_only,
            "s": args.s,
            "re": args.re,
            "ma": args.ma,
            "cfl": args.cfl,
            "filter_coeff": args.filter_coeff,
            "t_end": args.t_end,
            "checkpoint": args.checkpoint.as_ref().map(|p| p.to_string_lossy().into_owned()),
        }),
    )?;
    let set = build_providers(&args)?;
    match args.suite.as_str() {
        "moments" => moments_suite(&args, &set, &out_dir, config_hash),
        "convergence" => convergence_suite(&args, &set, &out_dir, config_hash),
        "spectrum" => spectrum_suite(&args, &set, &out_dir, config_hash),
        "modal" => modal_suite(&args, &set, &out_dir, config_hash),
        "timing" => timing_suite(&args, &set, &out_dir, config_hash),
        "tgv" => tgv_suite(&args, &set, &out_dir, config_hash),
        other => Err(Error::invalid(format!(
            "unknown suite '{other}' (expected moments, convergence, spectrum, modal, timing or tgv)"
        ))),
    }
}

fn moments_suite(
    args: &DiagnoseArgs,
    set: &ProviderSet,
    out_dir: &Path,
    config_hash: u64,
) -> Result<(), Error> {
    let nx = args.nx.unwrap_or(40);
    let clouds: Vec<_> = (0..args.clouds.max(1))
        .map(|k| {
            generate_perturbed_grid(nx, nx, 1.0 / nx as f64, args.epsilon, args.seed + k as u64)
        })
        .collect::<Result<_, _>>()?;
    let kinds = match &args.operator {
        Some(s) => vec![s.parse::<OperatorKind>()?],
        None => vec![OperatorKind::Dx, OperatorKind::Laplacian],
    };
    let report = moment_table(&set.refs(), &kinds, &clouds, args.p)?;
    let csv = out_dir.join("moments.csv");
    report.write_csv(&csv)?;
    write_sidecar(
        &csv,
        &sidecar(args, set, config_hash, serde_json::json!({"nx": nx, "clouds": args.clouds})),
    )?;
    for row in &report.rows {
        println!(
            "{:<16} {:<12} mae[0] {:.3e}  mean mae {:.3e}  ({} stencils)",
            row.provider,
            row.kind.tag(),
            row.mae[0],
            row.mean_mae(),
            row.stencil_count
        );
    }
    if args.dump_stencils {
        let nodes: Vec<usize> = (0..clouds[0].len()).step_by(17).take(60).collect();
        for (pi, provider) in set.refs().iter().enumerate() {
            for &kind in &kinds {
                if !provider.supports(kind) {
                    continue;
                }
                let path = out_dir.join(format!("stencils_{}_{}.csv", pi, kind.tag()));
                dump_weights_csv(*provider, &clouds[0], kind, &nodes, &path)?;
            }
        }
    }
    println!("wrote {}", csv.display());
    Ok(())
}

fn convergence_suite(
    args: &DiagnoseArgs,
    set: &ProviderSet,
    out_dir: &Path,
    config_hash: u64,
) -> Result<(), Error> {
    let kind = parse_kind(args, OperatorKind::Dx)?;
    let resolutions: Vec<f64> = args
        .resolutions
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad resolution: {e}"))))
        .collect::<Result<_, _>>()?;
    let report = convergence_study(
        &set.refs(),
        kind,
        &resolutions,
        args.epsilon,
        args.trials,
        args.seed,
        None,
    )?;
    let csv = out_dir.join("convergence.csv");
    report.write_csv(&csv)?;
    write_sidecar(
        &csv,
        &sidecar(args, set, config_hash, serde_json::json!({"kind": kind.tag(), "trials": args.trials})),
    )?;
    for s in &report.series {
        println!("{:<16} slope {:+.3}  errors {:?}", s.provider, s.slope, s.errors);
    }
    println!("wrote {}", csv.display());
    Ok(())
}

fn spectrum_suite(
    args: &DiagnoseArgs,
    set: &ProviderSet,
    out_dir: &Path,
    config_hash: u64,
) -> Result<(), Error> {
    let kind = parse_kind(args, OperatorKind::Dx)?;
    let nx = args.nx.unwrap_or(30);
    let s = 1.0 / nx as f64;
    let cloud = generate_perturbed_grid(nx, nx, s, args.epsilon, args.seed)?;
    for provider in set.refs() {
        let g = assemble_global(provider, &cloud, kind)?;
        let report = eigen_spectrum(&g, s, args.epsilon, kind)?;
        let csv = out_dir.join(format!("spectrum_{}_{}.csv", provider.name(), kind.tag()));
        report.write_csv(&csv)?;
        write_sidecar(
            &csv,
            &sidecar(
                args,
                set,
                config_hash,
                serde_json::json!({
                    "provider": provider.name(),
                    "kind": kind.tag(),
                    "nodes": report.node_count,
                    "normalization": report.normalization,
                }),
            ),
        )?;
        println!(
            "{:<16} {} nodes: max Re {:.3e}, max |Im| {:.3e} -> {}",
            provider.name(),
            report.node_count,
            report.max_re(),
            report.max_abs_im(),
            csv.display()
        );
    }
    Ok(())
}

fn modal_suite(
    args: &DiagnoseArgs,
    set: &ProviderSet,
    out_dir: &Path,
    config_hash: u64,
) -> Result<(), Error> {
    let kind = parse_kind(args, OperatorKind::Dx)?;
    let nx = args.nx.unwrap_or(48);
    let cloud = generate_perturbed_grid(nx, nx, 1.0 / nx as f64, args.epsilon, args.seed)?;
    let k_hats: Vec<f64> = (1..=32).map(|k| k as f64 / 32.0).collect();
    for provider in set.refs() {
        for ratio in [0.0, 1.0] {
            let report = modal_response(provider, kind, &cloud, &k_hats, ratio)?;
            let csv = out_dir.join(format!(
                "modal_{}_{}_ratio{}.csv",
                provider.name(),
                kind.tag(),
                ratio as u8
            ));
            report.write_csv(&csv)?;
            write_sidecar(
                &csv,
                &sidecar(
                    args,
                    set,
                    config_hash,
                    serde_json::json!({
                        "provider": provider.name(),
                        "kind": kind.tag(),
                        "ratio": ratio,
                        "stencils": report.stencil_count,
                        "k_nyquist": report.k_nyquist,
                    }),
                ),
            )?;
            println!(
                "{:<16} ratio {}: {} stencils -> {}",
                provider.name(),
                ratio,
                report.stencil_count,
                csv.display()
            );
        }
    }
    Ok(())
}

fn timing_suite(
    args: &DiagnoseArgs,
    set: &ProviderSet,
    out_dir: &Path,
    config_hash: u64,
) -> Result<(), Error> {
    let kind = parse_kind(args, OperatorKind::Dx)?;
    let nx = args.nx.unwrap_or(40);
    let s = 1.0 / nx as f64;
    let cloud = generate_perturbed_grid(nx, nx, s, args.epsilon, args.seed)?;
    // pair each timing row with the provider's field error at the same
    // resolution, measured on a bounded clone of the cloud
    let refs = set.refs();
    let bounded = meshfree_core::geometry::GridSpec::new(nx, nx, s, args.epsilon, args.seed)
        .with_origin([-0.5, -0.5])
        .with_periodic([false, false])
        .generate()?;
    let errors: Vec<Option<f64>> = refs
        .iter()
        .map(|p| field_error(*p, kind, &bounded).map(|(e, _)| Some(e)))
        .collect::<Result<_, _>>()?;
    let report = timing_harness(&refs, &cloud, kind, args.repeats, args.weights_only, &errors)?;
    let csv = out_dir.join("timing.csv");
    report.write_csv(&csv)?;
    write_sidecar(
        &csv,
        &sidecar(
            args,
            set,
            config_hash,
            serde_json::json!({
                "kind": kind.tag(),
                "nx": nx,
                "repeats": args.repeats,
                "weights_only": args.weights_only,
            }),
        ),
    )?;
    for r in &report.rows {
        println!(
            "{:<16} median {:.4e} s over {} nodes, error {:.3e}",
            r.provider,
            r.median_seconds,
            r.nodes,
            r.error.unwrap_or(f64::NAN)
        );
    }
    println!("wrote {}", csv.display());
    Ok(())
}

fn tgv_suite(
    args: &DiagnoseArgs,
    set: &ProviderSet,
    out_dir: &Path,
    config_hash: u64,
) -> Result<(), Error> {
    let nx = (1.0 / args.s).round() as usize;
    if nx < 8 {
        return Err(Error::invalid("tgv spacing is too coarse"));
    }
    let cloud = generate_perturbed_grid(nx, nx, 1.0 / nx as f64, args.epsilon, args.seed)?;
    save_cloud_csv(&cloud, &out_dir.join("cloud.csv"))?;
    let config = SolverConfig {
        reynolds: args.re,
        mach: args.ma,
        cfl: args.cfl,
        filter_coefficient: args.filter_coeff,
        end_time: args.t_end,
    };
    let sample_times: Vec<f64> = (1..=args.samples.max(1))
        .map(|k| args.t_end * k as f64 / args.samples.max(1) as f64)
        .collect();
    // the dealiasing filter needs a biharmonic-moment operator; LABFM at
    // p = 4 provides it whenever the main provider cannot
    let fallback_filter = LabfmProvider::new(4);
    for provider in set.refs() {
        let filter: Option<&dyn OperatorProvider> =
            if provider.supports(OperatorKind::Hyperviscous) {
                None
            } else {
                Some(&fallback_filter)
            };
        let name = provider.name();
        let samples = run_tgv_with(provider, filter, &cloud, &config, &sample_times, |state, sample| {
            dump_snapshot(
                &cloud,
                state,
                &out_dir.join(format!("tgv_{}_t{:.3}.csv", name, sample.t)),
            )
        })?;
        let csv = out_dir.join(format!("tgv_{}.csv", provider.name()));
        write_error_series(&samples, &csv)?;
        write_sidecar(
            &csv,
            &sidecar(
                args,
                set,
                config_hash,
                serde_json::json!({
                    "provider": provider.name(),
                    "nx": nx,
                    "re": args.re,
                    "ma": args.ma,
                    "cfl": args.cfl,
                    "filter_coeff": args.filter_coeff,
                    "t_end": args.t_end,
                }),
            ),
        )?;
        let last = samples.last().unwrap();
        println!(
            "{:<16} error {:.4e} at t* = {:.3} -> {}",
            provider.name(),
            last.velocity_error,
            last.t,
            csv.display()
        );
    }
    Ok(())
}
