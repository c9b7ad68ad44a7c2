//! `hgssl`: run, sweep, and check hypergraph label propagation.
//!
//! Exit status: 0 success, 1 other failure, 2 input or parameter error,
//! 3 solver non-convergence, 4 invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hgssl::checks::run_checks;
use hgssl::io::{format_features, format_labels, format_predictions, ingest, read_labels};
use hgssl::synthetic::{gaussian_blobs, rng, split_labeled};
use hgssl::{
    Bandwidth, Dataset, Error, Method, RunSpec, SolverConfig, SolverMode, SweepGrid, WeightingRule,
};

const EXIT_OTHER: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "hgssl",
    version,
    about = "Semi-supervised label propagation on k-means hypergraphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method and write predictions, metrics, and timing.
    Run(RunArgs),
    /// Run a parameter grid and print a comparison report.
    Sweep(SweepArgs),
    /// Run the randomized invariant suite.
    Check(CheckArgs),
    /// Write a labeled Gaussian blob dataset.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Iterative,
    Closed,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Unit,
    InverseVariance,
}

#[derive(Args)]
struct DataArgs {
    /// Feature file: one comma-separated row per sample.
    #[arg(long)]
    features: PathBuf,
    /// Labeled samples as `sample,class` lines.
    #[arg(long)]
    labels: PathBuf,
    /// Scored samples as `sample,class` lines.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Number of classes (default: largest class index seen + 1).
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, value_enum, default_value = "closed")]
    solver: SolverArg,
    /// Stopping tolerance of the propagation iteration.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Gaussian bandwidth for graph methods: `auto` or a positive number.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    bandwidth: Bandwidth,
    #[arg(long, value_enum, default_value = "unit")]
    weighting: WeightingArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    kmeans_max_iter: usize,
    /// Largest sample count solved with dense matrices.
    #[arg(long, default_value_t = 10_000)]
    dense_cap: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "hyper-sym", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 0.96)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 250)]
    clusters: usize,
    #[arg(long, default_value_t = 10)]
    knn: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated methods (default: all six).
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    method: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "0.96")]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    gamma: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "250")]
    clusters: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    knn: Vec<usize>,
    /// Also write report.txt and report.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Standard deviation of each blob.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Distance of each blob center from the origin.
    #[arg(long, default_value_t = 2.5)]
    radius: f64,
    #[arg(long, default_value_t = 0.1)]
    labeled_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "data")]
    out_dir: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_bandwidth(s: &str) -> std::result::Result<Bandwidth, String> {
    if s == "auto" {
        return Ok(Bandwidth::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(Bandwidth::Fixed(v)),
        _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
    }
}

impl CommonArgs {
    fn spec(&self, classes: Option<usize>) -> RunSpec {
        RunSpec {
            solver: SolverConfig {
                tolerance: self.tol,
                max_iterations: self.max_iter,
                mode: match self.solver {
                    SolverArg::Iterative => SolverMode::Iterative,
                    SolverArg::Closed => SolverMode::ClosedForm,
                },
                ..SolverConfig::default()
            },
            weighting: match self.weighting {
                WeightingArg::Unit => WeightingRule::Unit,
                WeightingArg::InverseVariance => WeightingRule::InverseVariance,
            },
            bandwidth: self.bandwidth,
            seed: self.seed,
            kmeans_max_iter: self.kmeans_max_iter,
            dense_cap: self.dense_cap,
            classes,
            ..RunSpec::default()
        }
    }
}

fn load(args: &DataArgs) -> Result<Dataset> {
    let (features, labels) = ingest(&args.features, &args.labels)?;
    let truth = match &args.truth {
        Some(path) => Some(read_labels(path, features.rows())?),
        None => None,
    };
    Ok(Dataset {
        features,
        labels,
        truth,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run_cmd(args: &RunArgs) -> Result<u8> {
    let mut spec = args.common.spec(args.data.classes);
    spec.method = args.method;
    spec.solver.alpha = args.alpha;
    spec.solver.gamma = args.gamma;
    spec.clusters = args.clusters;
    spec.knn = args.knn;
    spec.validate()?;

    let data = load(&args.data)?;
    let out = hgssl::run(&spec, &data)?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    write(
        &args.out_dir,
        "predictions.csv",
        &format_predictions(&out.estimates, &out.prediction.classes),
    )?;
    let metrics = json!({
        "inputs": {
            "features": args.data.features,
            "labels": args.data.labels,
            "truth": args.data.truth,
        },
        "run": out.metrics,
    });
    write(
        &args.out_dir,
        "metrics.json",
        &(serde_json::to_string_pretty(&metrics)? + "\n"),
    )?;
    write(
        &args.out_dir,
        "timing.json",
        &(serde_json::to_string_pretty(&out.timing)? + "\n"),
    )?;

    for w in &out.metrics.warnings {
        eprintln!("warning: {w}");
    }
    let q = out
        .micro_q()
        .map_or_else(|| "n/a".to_string(), |q| format!("{:.2}%", 100.0 * q));
    println!(
        "{}: {} samples, {} labeled, sensitivity {q}, outputs in {}",
        spec.method,
        out.metrics.data.samples,
        out.metrics.data.labeled,
        args.out_dir.display()
    );
    Ok(if out.converged() {
        0
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn sweep_cmd(args: &SweepArgs) -> Result<u8> {
    let base = args.common.spec(args.data.classes);
    let grid = SweepGrid {
        methods: if args.method.is_empty() {
            Method::ALL.to_vec()
        } else {
            args.method.clone()
        },
        clusters: args.clusters.clone(),
        knn: args.knn.clone(),
        alphas: args.alpha.clone(),
        gammas: args.gamma.clone(),
    };
    let data = load(&args.data)?;
    let report = hgssl::sweep(&base, &grid, &data)?;
    let text = report.to_text();
    print!("{text}");
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "{}: {}",
            row.method,
            row.error.as_deref().unwrap_or_default()
        );
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write(dir, "report.txt", &text)?;
        write(
            dir,
            "report.json",
            &(serde_json::to_string_pretty(&report)? + "\n"),
        )?;
    }
    Ok(0)
}

fn check_cmd(args: &CheckArgs) -> Result<u8> {
    if args.instances == 0 {
        return Err(Error::InvalidInput("--instances must be at least 1".into()).into());
    }
    let report = run_checks(args.instances, args.seed);
    print!("{}", report.to_text());
    Ok(if report.passed() { 0 } else { EXIT_INVARIANT })
}

fn generate_cmd(args: &GenerateArgs) -> Result<u8> {
    if args.classes < 2 || args.dim == 0 || args.per_class == 0 {
        return Err(Error::InvalidInput(
            "need at least 2 classes, 1 dimension, and 1 sample per class".into(),
        )
        .into());
    }
    if !(args.spread > 0.0 && args.spread.is_finite())
        || !(0.0..=1.0).contains(&args.labeled_fraction)
    {
        return Err(Error::InvalidInput(
            "spread must be positive and labeled fraction in [0, 1]".into(),
        )
        .into());
    }
    // centers evenly spaced on a circle in the first two coordinates
    let centers: Vec<Vec<f64>> = (0..args.classes)
        .map(|j| {
            let angle = std::f64::consts::TAU * j as f64 / args.classes as f64;
            let mut c = vec![0.0; args.dim];
            c[0] = args.radius * angle.cos();
            if args.dim > 1 {
                c[1] = args.radius * angle.sin();
            }
            c
        })
        .collect();
    let mut r = rng(args.seed);
    let (x, classes) = gaussian_blobs(&mut r, &centers, args.per_class, args.spread);
    let (labeled, rest) = split_labeled(&mut r, x.rows(), args.labeled_fraction);
    let pairs = |idx: &[usize]| idx.iter().map(|&i| (i, classes[i])).collect::<Vec<_>>();

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    write(&args.out_dir, "features.csv", &format_features(&x))?;
    write(
        &args.out_dir,
        "labels.csv",
        &format_labels(&pairs(&labeled)),
    )?;
    write(&args.out_dir, "truth.csv", &format_labels(&pairs(&rest)))?;
    println!(
        "{} samples ({} labeled) written to {}",
        x.rows(),
        labeled.len(),
        args.out_dir.display()
    );
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::KrylovStalled { .. }) => EXIT_NOT_CONVERGED,
        Some(Error::Singular(_)) | None => EXIT_OTHER,
        Some(_) => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Check(a) => check_cmd(a),
        Command::Generate(a) => generate_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
