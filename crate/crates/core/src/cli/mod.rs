//! Command-line front end: data generation, training, factorization reports,
//! transfer pipelines and PCA, all writing CSV/JSON for downstream analysis.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

pub mod model_file;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::baselines::pca;
use crate::data::{
    gen_shared_private, gen_slam_scene, gen_trajectories, load_csv, save_bundle, save_csv,
    SyntheticBundle, ViewMatrix,
};
use crate::error::{MrdError, Result};
use crate::gplvm::{bgplvm_fit, gplvm_map_fit, FitMode, KernelChoice};
use crate::multiview::{
    factorize, label_dimensions, mrd_fit, view_relevance, FactorizationReport, ViewRelevance,
};
use crate::optimize::{Direction, TrainConfig};
use crate::transfer::{cross_reconstruct, default_delta, tracking_density};

pub use model_file::{ModelFile, FORMAT_VERSION};

#[derive(Debug, Parser)]
#[command(
    name = "mrd",
    version,
    about = "Multi-view GP latent variable models with shared/private factorization",
    after_help = "Every command is deterministic given its flags, including --seed.\n\
                  Exit codes: 0 success, 1 runtime failure, 2 usage error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with ground truth.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Train a GPLVM (one view) or an MRD model (two or more views).
    Train(TrainArgs),
    /// Report per-view relevance and SHARED/PRIVATE/IRRELEVANT labels.
    Factorize(FactorizeArgs),
    /// Infer latents for novel observations and reconstruct another view.
    Transfer(TransferArgs),
    /// Principal component analysis of one CSV matrix.
    Pca(PcaArgs),
}

#[derive(Debug, Args)]
pub struct GenCommon {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// File name prefix; defaults to the generator name.
    #[arg(long)]
    pub stem: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// One shared and one private latent signal per view (views Y and Z).
    SharedPrivate {
        #[arg(long, default_value_t = 60)]
        n: usize,
        #[arg(long, default_value_t = 12)]
        d_y: usize,
        #[arg(long, default_value_t = 12)]
        d_z: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    /// Paired trajectory classes S and T driven by one path variable.
    Trajectories {
        #[arg(long, default_value_t = 50)]
        n_pairs: usize,
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    /// Two agents sharing a pose, plus a held-out third-agent sweep.
    SlamScene {
        #[arg(long, default_value_t = 40)]
        n_poses: usize,
        #[arg(long, default_value_t = 10)]
        d_obs: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[command(flatten)]
        common: GenCommon,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Map,
    Variational,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Linear,
    ArdRbf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Lbfgs,
    Steepest,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// A training view as NAME=PATH; repeat for multi-view training.
    #[arg(long = "view", required = true, value_name = "NAME=PATH")]
    pub views: Vec<String>,
    /// Latent dimensionality.
    #[arg(long)]
    pub q: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Variational)]
    pub mode: ModeArg,
    /// Covariance function (linear is available in MAP mode only).
    #[arg(long, value_enum, default_value_t = KernelArg::ArdRbf)]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file to write; `trace.csv` and `relevance.csv` go next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    /// Relative objective change counted as no progress.
    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,
    /// Latent-only warm-up iterations (variational mode).
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    /// Inducing points per view (default min(N, 20)).
    #[arg(long)]
    pub inducing: Option<usize>,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Lbfgs)]
    pub optimizer: OptimizerArg,
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = crate::multiview::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SubspaceArg {
    /// Dimensions labeled SHARED.
    Shared,
    /// Dimensions relevant to the --from view.
    Active,
    /// Every latent dimension.
    All,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// View the input rows are observed in.
    #[arg(long)]
    pub from: String,
    /// View to reconstruct (not needed with --track).
    #[arg(long)]
    pub to: Option<String>,
    /// CSV of novel observations (one row each, with header).
    #[arg(long)]
    pub input: PathBuf,
    /// Neighborhood radius: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    pub delta: String,
    /// Latent dimensions used for the neighbor search.
    #[arg(long, value_enum, default_value_t = SubspaceArg::Shared)]
    pub subspace: SubspaceArg,
    /// Relevance threshold used to find SHARED and active dimensions.
    #[arg(long, default_value_t = crate::multiview::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Write per-row latent posteriors (tracking density) instead of a reconstruction.
    #[arg(long)]
    pub track: bool,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub q: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Messages go to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Train(args) => cmd_train(args),
        Command::Factorize(args) => cmd_factorize(args),
        Command::Transfer(args) => cmd_transfer(args),
        Command::Pca(args) => cmd_pca(args),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| MrdError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| MrdError::io(path, e))
}

fn matrix_view(name: &str, values: DMatrix<f64>, columns: Vec<String>) -> ViewMatrix {
    let mut v = ViewMatrix::new(name, values);
    v.columns = columns;
    v
}

fn latent_columns(prefix: &str, q: usize) -> Vec<String> {
    (0..q).map(|k| format!("{prefix}{k}")).collect()
}

fn cmd_gen(kind: &GenKind) -> Result<()> {
    let (bundle, common, default_stem): (SyntheticBundle, &GenCommon, &str) = match kind {
        GenKind::SharedPrivate {
            n,
            d_y,
            d_z,
            noise,
            common,
        } => (
            gen_shared_private(*n, *d_y, *d_z, *noise, common.seed)?,
            common,
            "shared_private",
        ),
        GenKind::Trajectories {
            n_pairs,
            horizon,
            noise,
            common,
        } => (
            gen_trajectories(*n_pairs, *horizon, *noise, common.seed)?,
            common,
            "trajectories",
        ),
        GenKind::SlamScene {
            n_poses,
            d_obs,
            noise,
            common,
        } => (
            gen_slam_scene(*n_poses, *d_obs, *noise, common.seed)?,
            common,
            "slam_scene",
        ),
    };
    let stem = common.stem.as_deref().unwrap_or(default_stem);
    let files = save_bundle(&bundle, &common.out, stem)?;
    let shapes: Vec<String> = bundle
        .views
        .iter()
        .map(|v| format!("{}={}x{}", v.name, v.nrows(), v.ncols()))
        .collect();
    println!(
        "generated {default_stem} seed={} views=[{}] files={} dir={}",
        common.seed,
        shapes.join(","),
        files.len(),
        common.out.display()
    );
    Ok(())
}

fn parse_view_flag(flag: &str) -> Result<ViewMatrix> {
    let (name, path) = flag
        .split_once('=')
        .ok_or_else(|| MrdError::invalid(format!("--view expects NAME=PATH, got `{flag}`")))?;
    if name.is_empty() {
        return Err(MrdError::invalid(format!(
            "--view `{flag}` has an empty name"
        )));
    }
    let mut view = load_csv(path)?;
    view.name = name.to_string();
    Ok(view)
}

fn train_config(args: &TrainArgs) -> TrainConfig {
    TrainConfig {
        max_iterations: args.max_iterations,
        tolerance: args.tolerance,
        warmup_iterations: args.warmup,
        num_inducing: args.inducing,
        direction: match args.optimizer {
            OptimizerArg::Lbfgs => TrainConfig::default().direction,
            OptimizerArg::Steepest => Direction::Steepest,
        },
        seed: args.seed,
        ..TrainConfig::default()
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let views = args
        .views
        .iter()
        .map(|f| parse_view_flag(f))
        .collect::<Result<Vec<_>>>()?;
    let n = views[0].nrows();
    if let Some(bad) = views.iter().find(|v| v.nrows() != n) {
        return Err(MrdError::Alignment(format!(
            "view `{}` has {} rows but `{}` has {n}; multi-view models need row-aligned views",
            bad.name,
            bad.nrows(),
            views[0].name
        )));
    }
    let config = train_config(args);
    config.validate()?;
    let mode = match args.mode {
        ModeArg::Map => FitMode::Map,
        ModeArg::Variational => FitMode::Variational,
    };
    let kernel = match args.kernel {
        KernelArg::Linear => KernelChoice::Linear,
        KernelArg::ArdRbf => KernelChoice::ArdRbf,
    };
    let file = match (mode, views.len()) {
        (FitMode::Map, 1) => {
            let model = gplvm_map_fit(&views[0], args.q, kernel, &config)?;
            let centered = model.center(&views[0].values)?;
            ModelFile::from_gplvm(
                &model,
                &views[0].name,
                &views[0].columns,
                &centered,
                &config,
            )
        }
        (FitMode::Map, _) => {
            return Err(MrdError::invalid(
                "MAP mode trains a single view; use --mode variational for multi-view models",
            ))
        }
        (FitMode::Variational, _) if kernel == KernelChoice::Linear => {
            return Err(MrdError::invalid(
                "the linear kernel is only available with --mode map",
            ))
        }
        (FitMode::Variational, 1) => {
            let model = bgplvm_fit(&views[0], args.q, &config)?;
            let centered = model.center(&views[0].values)?;
            ModelFile::from_gplvm(
                &model,
                &views[0].name,
                &views[0].columns,
                &centered,
                &config,
            )
        }
        (FitMode::Variational, _) => {
            let model = mrd_fit(&views, args.q, &config)?;
            let columns: Vec<Vec<String>> = views.iter().map(|v| v.columns.clone()).collect();
            ModelFile::from_mrd(&model, &columns, &config)
        }
    };
    let dir = args.out.parent().unwrap_or(Path::new("."));
    let dir = if dir.as_os_str().is_empty() {
        Path::new(".")
    } else {
        dir
    };
    create_dir(dir)?;
    file.save(&args.out)?;
    let mut trace = String::from("iteration,objective\n");
    for (it, value) in &file.training_trace {
        trace.push_str(&format!("{it},{}\n", crate::data::format_number(*value)));
    }
    write_text(&dir.join("trace.csv"), &trace)?;

    let final_objective = file.training_trace.last().map(|t| t.1).unwrap_or(f64::NAN);
    println!(
        "trained {} model: views={} q={} iterations={} final objective {}",
        match mode {
            FitMode::Map => "map",
            FitMode::Variational => "variational",
        },
        file.views.len(),
        args.q,
        file.training_trace.last().map(|t| t.0).unwrap_or(0),
        crate::data::format_number(final_objective)
    );
    if kernel == KernelChoice::ArdRbf {
        let mut relevance = String::from("view,dimension,relevance\n");
        for v in &file.views {
            let r = view_relevance(&v.kernel);
            let cells: Vec<String> = r.iter().map(|x| format!("{x:.4}")).collect();
            println!("relevance {}: [{}]", v.name, cells.join(", "));
            for (k, x) in r.iter().enumerate() {
                relevance.push_str(&format!(
                    "{},{k},{}\n",
                    v.name,
                    crate::data::format_number(*x)
                ));
            }
        }
        write_text(&dir.join("relevance.csv"), &relevance)?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Factorization report for any ARD-kernel model file.
pub fn file_factorization(file: &ModelFile, threshold: f64) -> Result<FactorizationReport> {
    if file.mode == FitMode::Variational {
        return factorize(&file.to_mrd()?, threshold);
    }
    if file.kernel != KernelChoice::ArdRbf {
        return Err(MrdError::invalid(
            "the model has a linear kernel and therefore no relevance weights",
        ));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MrdError::invalid(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let relevance: Vec<ViewRelevance> = file
        .views
        .iter()
        .map(|v| ViewRelevance {
            view: v.name.clone(),
            relevance: view_relevance(&v.kernel),
        })
        .collect();
    let labels = label_dimensions(&relevance, threshold);
    Ok(FactorizationReport {
        relevance,
        labels,
        threshold,
    })
}

fn report_table(report: &FactorizationReport) -> String {
    let mut out = format!("{:<6}", "dim");
    for r in &report.relevance {
        out.push_str(&format!("{:>12}", r.view));
    }
    out.push_str("  label\n");
    for (k, label) in report.labels.iter().enumerate() {
        out.push_str(&format!("{:<6}", format!("x{k}")));
        for r in &report.relevance {
            out.push_str(&format!("{:>12.4}", r.relevance[k]));
        }
        out.push_str(&format!("  {label}\n"));
    }
    out.push_str(&format!("threshold {}\n", report.threshold));
    out
}

#[derive(Serialize)]
struct ReportJson<'a> {
    threshold: f64,
    relevance: &'a [ViewRelevance],
    labels: Vec<String>,
}

fn report_json(report: &FactorizationReport) -> Result<String> {
    model_file::to_canonical_json(&ReportJson {
        threshold: report.threshold,
        relevance: &report.relevance,
        labels: report.labels.iter().map(|l| l.to_string()).collect(),
    })
}

fn cmd_factorize(args: &FactorizeArgs) -> Result<()> {
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(MrdError::invalid(format!(
            "--threshold must lie in (0, 1), got {}",
            args.threshold
        )));
    }
    let file = ModelFile::load(&args.model)?;
    let report = file_factorization(&file, args.threshold)?;
    let json = report_json(&report)?;
    if args.json {
        print!("{json}");
    } else {
        print!("{}", report_table(&report));
    }
    if let Some(out) = &args.out {
        write_text(out, &json)?;
    }
    Ok(())
}

fn parse_delta(text: &str) -> Result<Option<f64>> {
    if text == "auto" {
        return Ok(None);
    }
    let delta: f64 = text.parse().map_err(|_| {
        MrdError::invalid(format!("--delta expects `auto` or a number, got `{text}`"))
    })?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(MrdError::invalid(format!(
            "--delta must be positive, got {delta}"
        )));
    }
    Ok(Some(delta))
}

fn cmd_transfer(args: &TransferArgs) -> Result<()> {
    let delta = parse_delta(&args.delta)?;
    let file = ModelFile::load(&args.model)?;
    let model = file.to_mrd()?;
    model.view_index(&args.from)?;
    let input = load_csv(&args.input)?;
    create_dir(&args.out)?;
    let q = model.q();

    if args.track {
        let posteriors = tracking_density(&model, &args.from, &input.values)?;
        let mut columns = vec!["step".to_string()];
        columns.extend(latent_columns("mean_x", q));
        columns.extend(latent_columns("var_x", q));
        columns.push("objective".into());
        let table = DMatrix::from_fn(posteriors.len(), 2 * q + 2, |t, c| {
            let p = &posteriors[t];
            match c {
                0 => t as f64,
                c if c <= q => p.means[(0, c - 1)],
                c if c <= 2 * q => p.variances[(0, c - 1 - q)],
                _ => p.objective[0],
            }
        });
        save_csv(
            &matrix_view("tracking", table, columns),
            args.out.join("tracking.csv"),
        )?;
        println!(
            "tracked {} observations through view {} -> {}",
            posteriors.len(),
            args.from,
            args.out.join("tracking.csv").display()
        );
        return Ok(());
    }

    let to = args
        .to
        .as_deref()
        .ok_or_else(|| MrdError::invalid("--to is required unless --track is given"))?;
    let target = model.view(to)?;
    let subspace: Vec<usize> = match args.subspace {
        SubspaceArg::All => (0..q).collect(),
        SubspaceArg::Active => {
            let active = factorize(&model, args.threshold)?.active_dims(&args.from);
            if active.is_empty() {
                return Err(MrdError::Degenerate(format!(
                    "view `{}` has no relevant latent dimension",
                    args.from
                )));
            }
            active
        }
        SubspaceArg::Shared => {
            let shared = factorize(&model, args.threshold)?.shared_dims();
            if shared.is_empty() {
                return Err(MrdError::NoSharedDimensions);
            }
            shared
        }
    };
    let delta = match delta {
        Some(d) => d,
        None => default_delta(&model, &subspace)?,
    };
    let result = cross_reconstruct(&model, &args.from, &input.values, to, delta, &subspace)?;
    let target_columns = file
        .views
        .iter()
        .find(|v| v.name == to)
        .map(|v| v.columns.clone())
        .unwrap_or_else(|| latent_columns("y", target.dim()));

    save_csv(
        &matrix_view(
            "mean",
            result.reconstruction.mean.clone(),
            target_columns.clone(),
        ),
        args.out.join("reconstruction_mean.csv"),
    )?;
    save_csv(
        &matrix_view(
            "variance",
            result.reconstruction.variance.clone(),
            target_columns,
        ),
        args.out.join("reconstruction_variance.csv"),
    )?;
    save_csv(
        &matrix_view("means", result.x_star.means.clone(), latent_columns("x", q)),
        args.out.join("latent_means.csv"),
    )?;
    save_csv(
        &matrix_view(
            "variances",
            result.x_star.variances.clone(),
            latent_columns("x", q),
        ),
        args.out.join("latent_variances.csv"),
    )?;
    let mut neighbors = String::from("row,rank,index\n");
    for (r, list) in result.neighbor_indices.iter().enumerate() {
        for (rank, idx) in list.iter().enumerate() {
            neighbors.push_str(&format!("{r},{rank},{idx}\n"));
        }
    }
    write_text(&args.out.join("neighbors.csv"), &neighbors)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        from: &'a str,
        to: &'a str,
        rows: usize,
        subspace: &'a [usize],
        delta_requested: f64,
        delta_used: f64,
    }
    let summary = model_file::to_canonical_json(&Summary {
        from: &args.from,
        to,
        rows: input.nrows(),
        subspace: &subspace,
        delta_requested: delta,
        delta_used: result.delta_used,
    })?;
    write_text(&args.out.join("summary.json"), &summary)?;
    println!(
        "reconstructed {} rows of {to} from {} (subspace {:?}, delta used {}) -> {}",
        input.nrows(),
        args.from,
        subspace,
        crate::data::format_number(result.delta_used),
        args.out.display()
    );
    Ok(())
}

fn cmd_pca(args: &PcaArgs) -> Result<()> {
    let input = load_csv(&args.input)?;
    let result = pca(&input.values, args.q)?;
    create_dir(&args.out)?;
    let scores = result.transform(&input.values);
    save_csv(
        &matrix_view("scores", scores, latent_columns("x", args.q)),
        args.out.join("pca_scores.csv"),
    )?;
    save_csv(
        &matrix_view(
            "projection",
            result.projection.clone(),
            latent_columns("w", args.q),
        ),
        args.out.join("pca_projection.csv"),
    )?;
    save_csv(
        &matrix_view(
            "eigenvalues",
            DMatrix::from_column_slice(args.q, 1, result.eigenvalues.as_slice()),
            vec!["eigenvalue".into()],
        ),
        args.out.join("pca_eigenvalues.csv"),
    )?;
    let ev: Vec<String> = result
        .eigenvalues
        .iter()
        .map(|v| format!("{v:.6}"))
        .collect();
    println!(
        "pca q={} eigenvalues [{}] -> {}",
        args.q,
        ev.join(", "),
        args.out.display()
    );
    Ok(())
}
