//! Command-line front end: dataset generation, neighbor tables, single
//! estimates, and scale sweeps, all reproducible from the seed recorded in
//! the run manifest written next to every output file.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use idest::estimators::{
    self, twonn_bayes, twonn_ls, twonn_mle, EstimateRecord, IdEstimate, Uncertainty,
};
use idest::geometry::{
    consecutive_ratios, generic_ratios, knn_table, load_point_cloud, InputFormat, Metric,
    NeighborTable, PointCloud,
};
use idest::scale::{geometric_orders, gride_sweep, twonn_decimation_sweep};
use idest::synthgen;

use manifest::{file_digest, RunManifest};

#[derive(Parser)]
#[command(
    name = "idest",
    version,
    about = "Intrinsic dimension estimation from nearest-neighbor distance ratios"
)]
struct Cli {
    /// Base random seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker thread count (default: IDEST_THREADS env var, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Remove exact duplicate rows before analysis.
    #[arg(long, global = true)]
    dedupe: bool,

    /// Neighbor table order; defaults to the smallest order the method needs.
    #[arg(long, global = true)]
    k: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Compute the exact k-nearest-neighbor table and export it as CSV.
    Knn {
        input: PathBuf,
        #[command(flatten)]
        reader: ReaderArgs,
        /// Output CSV path (default: <input stem>.knn.csv).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate the intrinsic dimension of a dataset.
    Estimate {
        input: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Interval level.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Top fraction of ratios dropped by the least-squares fit.
        #[arg(long, default_value_t = estimators::DEFAULT_TRIM_FRACTION)]
        trim: f64,
        /// Gamma prior shape (Bayesian methods).
        #[arg(long, default_value_t = estimators::DEFAULT_PRIOR_SHAPE)]
        prior_shape: f64,
        /// Gamma prior rate (Bayesian methods).
        #[arg(long, default_value_t = estimators::DEFAULT_PRIOR_RATE)]
        prior_rate: f64,
        /// Largest consecutive order L (required for cride).
        #[arg(long)]
        l: Option<usize>,
        /// Lower neighbor order (gride).
        #[arg(long, default_value_t = 1)]
        n1: usize,
        /// Upper neighbor order (gride).
        #[arg(long, default_value_t = 2)]
        n2: usize,
        #[arg(long, value_enum, default_value_t = UncertaintyArg::Fisher)]
        uncertainty: UncertaintyArg,
        #[arg(long, default_value_t = 500)]
        bootstrap_reps: usize,
        #[command(flatten)]
        reader: ReaderArgs,
        /// Cache the kNN table in a sidecar file keyed by input digest,
        /// order, and metric.
        #[arg(long)]
        knn_cache: bool,
        /// Output JSON path (default: <input stem>.estimate.json); the CSV
        /// twin replaces the extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Scale-dependent sweep of estimates.
    Sweep {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Gride)]
        protocol: ProtocolArg,
        /// Fixed order ratio n2/n1 of the gride protocol.
        #[arg(long, default_value_t = 2)]
        ratio: usize,
        /// Largest n1 of the default geometric grid 1, 2, 4, ...
        #[arg(long, default_value_t = 256)]
        n1_max: usize,
        /// Explicit comma-separated n1 grid (overrides --n1-max).
        #[arg(long, value_delimiter = ',')]
        n1_values: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = UncertaintyArg::Fisher)]
        uncertainty: UncertaintyArg,
        #[arg(long, default_value_t = 500)]
        bootstrap_reps: usize,
        /// Interval level.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Number of halving steps of the decimation protocol.
        #[arg(long, default_value_t = 5)]
        halvings: usize,
        /// Independent subsets per decimation step.
        #[arg(long, default_value_t = 10)]
        replicates: usize,
        #[command(flatten)]
        reader: ReaderArgs,
        #[arg(long)]
        knn_cache: bool,
        /// Output CSV path (default: <input stem>.sweep.csv).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Noisy 3-D spiral driven by one uniform degree of freedom.
    Spiral {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = synthgen::DEFAULT_SPIRAL_NOISE_SD)]
        noise_sd: f64,
        output: PathBuf,
    },
    /// Homogeneous-process realization around a pivot at the origin.
    Pivot {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        output: PathBuf,
    },
    /// Standard Gaussian signal with orthogonal Gaussian noise columns.
    Gaussian {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        signal_dim: usize,
        #[arg(long, default_value_t = 0)]
        noise_dim: usize,
        #[arg(long, default_value_t = 1e-4)]
        sigma2: f64,
        output: PathBuf,
    },
    /// Uniform draws on the unit hypercube.
    Hypercube {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        output: PathBuf,
    },
}

#[derive(clap::Args)]
struct ReaderArgs {
    /// Input delimiter.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Skip one header row.
    #[arg(long)]
    has_header: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    TwonnLs,
    TwonnMle,
    TwonnBayes,
    Cride,
    Gride,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UncertaintyArg {
    Fisher,
    Bootstrap,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    Gride,
    Decimation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Whitespace,
}

impl From<FormatArg> for InputFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Csv => InputFormat::Csv,
            FormatArg::Whitespace => InputFormat::Whitespace,
        }
    }
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<idest::Error> for CliError {
    fn from(err: idest::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Global flags shared by every subcommand.
struct Globals {
    seed: u64,
    dedupe: bool,
    k: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_thread_pool(cli.threads);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn configure_thread_pool(requested: Option<usize>) {
    let from_env = std::env::var("IDEST_THREADS")
        .ok()
        .and_then(|v| v.parse().ok());
    if let Some(n) = requested.or(from_env) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// `<input stem>.<suffix>.<ext>` next to the input file.
fn derived_path(input: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    input.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

fn load_input(input: &Path, reader: &ReaderArgs, dedupe: bool) -> CliResult<(PointCloud, usize)> {
    let cloud = load_point_cloud(input, reader.format.into(), reader.has_header)?;
    if dedupe {
        let (deduped, dropped) = cloud.dedupe()?;
        Ok((deduped, dropped))
    } else {
        Ok((cloud, 0))
    }
}

/// Computes the kNN table, optionally through a sidecar cache keyed by the
/// input digest, the order, and the metric.
fn obtain_table(
    cloud: &PointCloud,
    k: usize,
    input: &Path,
    digest: &str,
    use_cache: bool,
) -> CliResult<NeighborTable> {
    if !use_cache {
        return Ok(knn_table(cloud, k, Metric::Euclidean)?);
    }
    let cache_path = input.with_file_name(format!(
        "{}.knn-{}-k{k}-euclidean.csv",
        input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "input".to_string()),
        &digest[..12.min(digest.len())]
    ));
    if cache_path.is_file() {
        let text = std::fs::read_to_string(&cache_path)?;
        let table = NeighborTable::parse_csv(&text, Metric::Euclidean)?;
        if table.len() == cloud.len() && table.k() == k {
            eprintln!("using cached kNN table {}", cache_path.display());
            return Ok(table);
        }
        eprintln!(
            "cached kNN table {} does not match the input; recomputing",
            cache_path.display()
        );
    }
    let table = knn_table(cloud, k, Metric::Euclidean)?;
    table.write_csv(&cache_path)?;
    eprintln!("cached kNN table at {}", cache_path.display());
    Ok(table)
}

fn run(cli: Cli) -> CliResult<()> {
    let globals = Globals {
        seed: cli.seed,
        dedupe: cli.dedupe,
        k: cli.k,
    };
    match cli.command {
        Command::Generate { kind } => run_generate(kind, globals.seed),
        Command::Knn {
            input,
            reader,
            output,
        } => run_knn(&input, reader, output, &globals),
        Command::Estimate {
            input,
            method,
            level,
            trim,
            prior_shape,
            prior_rate,
            l,
            n1,
            n2,
            uncertainty,
            bootstrap_reps,
            reader,
            knn_cache,
            output,
        } => {
            let args = EstimateArgs {
                input,
                method,
                level,
                trim,
                prior_shape,
                prior_rate,
                l,
                n1,
                n2,
                uncertainty,
                bootstrap_reps,
                reader,
                knn_cache,
                output,
            };
            run_estimate(args, &globals)
        }
        Command::Sweep {
            input,
            protocol,
            ratio,
            n1_max,
            n1_values,
            uncertainty,
            bootstrap_reps,
            level,
            halvings,
            replicates,
            reader,
            knn_cache,
            output,
        } => {
            let args = SweepArgs {
                input,
                protocol,
                ratio,
                n1_max,
                n1_values,
                uncertainty,
                bootstrap_reps,
                level,
                halvings,
                replicates,
                reader,
                knn_cache,
                output,
            };
            run_sweep(args, &globals)
        }
    }
}

fn run_generate(kind: GenerateKind, seed: u64) -> CliResult<()> {
    let (cloud, label, output, params) = match kind {
        GenerateKind::Spiral {
            n,
            noise_sd,
            output,
        } => (
            synthgen::spiral3d(n, noise_sd, seed)?,
            "spiral",
            output,
            serde_json::json!({ "n": n, "noise_sd": noise_sd }),
        ),
        GenerateKind::Pivot { n, d, rho, output } => (
            synthgen::pivot_process(n, d, rho, seed)?.cloud,
            "pivot",
            output,
            serde_json::json!({ "n": n, "d": d, "rho": rho }),
        ),
        GenerateKind::Gaussian {
            n,
            signal_dim,
            noise_dim,
            sigma2,
            output,
        } => (
            synthgen::gaussian_orthonoise(n, signal_dim, noise_dim, sigma2, seed)?,
            "gaussian",
            output,
            serde_json::json!({
                "n": n, "signal_dim": signal_dim, "noise_dim": noise_dim, "sigma2": sigma2
            }),
        ),
        GenerateKind::Hypercube { n, d, output } => (
            synthgen::uniform_hypercube(n, d, seed)?,
            "hypercube",
            output,
            serde_json::json!({ "n": n, "d": d }),
        ),
    };
    cloud.write_csv(&output)?;
    let mut parameters = params;
    parameters["kind"] = serde_json::json!(label);
    RunManifest::new(seed, None, parameters).write_for(&output)?;
    println!(
        "generated {label}: {} x {} -> {}",
        cloud.len(),
        cloud.dim(),
        output.display()
    );
    Ok(())
}

fn run_knn(
    input: &Path,
    reader: ReaderArgs,
    output: Option<PathBuf>,
    cli: &Globals,
) -> CliResult<()> {
    let k = cli
        .k
        .ok_or_else(|| CliError::Usage("--k is required for the knn subcommand".to_string()))?;
    let (cloud, dropped) = load_input(input, &reader, cli.dedupe)?;
    let digest = file_digest(input)?;
    let table = knn_table(&cloud, k, Metric::Euclidean)?;
    let output = output.unwrap_or_else(|| derived_path(input, "knn", "csv"));
    table.write_csv(&output)?;
    RunManifest::new(
        cli.seed,
        Some(digest),
        serde_json::json!({ "k": k, "metric": "euclidean", "dedupe_dropped": dropped }),
    )
    .write_for(&output)?;
    println!("knn: {} points, k={k} -> {}", cloud.len(), output.display());
    Ok(())
}

struct EstimateArgs {
    input: PathBuf,
    method: MethodArg,
    level: f64,
    trim: f64,
    prior_shape: f64,
    prior_rate: f64,
    l: Option<usize>,
    n1: usize,
    n2: usize,
    uncertainty: UncertaintyArg,
    bootstrap_reps: usize,
    reader: ReaderArgs,
    knn_cache: bool,
    output: Option<PathBuf>,
}

fn run_estimate(args: EstimateArgs, cli: &Globals) -> CliResult<()> {
    let cride_order = match (args.method, args.l) {
        (MethodArg::Cride, None) => {
            return Err(CliError::Usage(
                "--l is required for --method cride".to_string(),
            ))
        }
        (MethodArg::Cride, Some(l)) if l < 2 => {
            return Err(CliError::Usage(format!("--l must be at least 2, got {l}")))
        }
        (_, l) => l.unwrap_or(2),
    };
    if args.method == MethodArg::Gride && (args.n1 < 1 || args.n2 <= args.n1) {
        return Err(CliError::Usage(format!(
            "gride needs 1 <= n1 < n2, got n1={}, n2={}",
            args.n1, args.n2
        )));
    }

    let needed_k = match args.method {
        MethodArg::TwonnLs | MethodArg::TwonnMle | MethodArg::TwonnBayes => 2,
        MethodArg::Cride => cride_order,
        MethodArg::Gride => args.n2,
    };
    let k = cli.k.unwrap_or(needed_k);
    if k < needed_k {
        return Err(CliError::Usage(format!(
            "kNN table order K={k} is insufficient for this method; rerun with --k {needed_k}"
        )));
    }

    let (cloud, dropped) = load_input(&args.input, &args.reader, cli.dedupe)?;
    let digest = file_digest(&args.input)?;
    let table = obtain_table(&cloud, k, &args.input, &digest, args.knn_cache)?;
    let d_max = 10.0 * cloud.dim() as f64;

    let (estimate, record) = match args.method {
        MethodArg::TwonnLs => {
            let ratios = generic_ratios(&table, 1, 2)?;
            let est = twonn_ls(&ratios, args.trim, args.level)?;
            let record = EstimateRecord::from_estimate(
                &est,
                Some(1),
                Some(2),
                None,
                Some(args.trim),
                Some(cli.seed),
            );
            (est, record)
        }
        MethodArg::TwonnMle => {
            let ratios = generic_ratios(&table, 1, 2)?;
            let est = twonn_mle(&ratios, args.level)?;
            let record =
                EstimateRecord::from_estimate(&est, Some(1), Some(2), None, None, Some(cli.seed));
            (est, record)
        }
        MethodArg::TwonnBayes => {
            let ratios = generic_ratios(&table, 1, 2)?;
            let fit = twonn_bayes(&ratios, args.prior_shape, args.prior_rate, args.level)?;
            let est = IdEstimate {
                d_hat: fit.posterior.mean(),
                interval_low: fit.credible_low,
                interval_high: fit.credible_high,
                level: fit.level,
                method: "twonn-bayes".to_string(),
                n_eff: ratios.len(),
                scale: ratios.mean_scale(),
            };
            let record =
                EstimateRecord::from_estimate(&est, Some(1), Some(2), None, None, Some(cli.seed));
            (est, record)
        }
        MethodArg::Cride => {
            let ratios = consecutive_ratios(&table, cride_order)?;
            let est = estimators::cride_mle(&ratios, args.level)?;
            let record = EstimateRecord::from_estimate(
                &est,
                None,
                None,
                Some(cride_order),
                None,
                Some(cli.seed),
            );
            (est, record)
        }
        MethodArg::Gride => {
            let ratios = generic_ratios(&table, args.n1, args.n2)?;
            let uncertainty = match args.uncertainty {
                UncertaintyArg::Fisher => Uncertainty::Fisher,
                UncertaintyArg::Bootstrap => Uncertainty::Bootstrap {
                    replicates: args.bootstrap_reps,
                },
            };
            let est =
                estimators::gride_mle_bounded(&ratios, args.level, uncertainty, cli.seed, d_max)?;
            let record = EstimateRecord::from_estimate(
                &est,
                Some(args.n1),
                Some(args.n2),
                None,
                None,
                Some(cli.seed),
            );
            (est, record)
        }
    };

    let json_path = args
        .output
        .unwrap_or_else(|| derived_path(&args.input, "estimate", "json"));
    let csv_path = json_path.with_extension("csv");
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    std::fs::write(&json_path, json + "\n")?;
    std::fs::write(
        &csv_path,
        format!(
            "{}\n{}\n",
            EstimateRecord::csv_header(),
            record.to_csv_row()
        ),
    )?;
    RunManifest::new(
        cli.seed,
        Some(digest),
        serde_json::json!({
            "method": record.method,
            "level": args.level,
            "trim": args.trim,
            "prior_shape": args.prior_shape,
            "prior_rate": args.prior_rate,
            "L": args.l,
            "n1": args.n1,
            "n2": args.n2,
            "k": k,
            "d_max": d_max,
            "bootstrap_reps": args.bootstrap_reps,
            "dedupe_dropped": dropped,
        }),
    )
    .write_for(&json_path)?;

    println!(
        "{}: d_hat={:.4}  interval=[{:.4}, {:.4}] @ {:.0}%  n_eff={}  scale={:.6}",
        estimate.method,
        estimate.d_hat,
        estimate.interval_low,
        estimate.interval_high,
        estimate.level * 100.0,
        estimate.n_eff,
        estimate.scale
    );
    Ok(())
}

struct SweepArgs {
    input: PathBuf,
    protocol: ProtocolArg,
    ratio: usize,
    n1_max: usize,
    n1_values: Option<Vec<usize>>,
    uncertainty: UncertaintyArg,
    bootstrap_reps: usize,
    level: f64,
    halvings: usize,
    replicates: usize,
    reader: ReaderArgs,
    knn_cache: bool,
    output: Option<PathBuf>,
}

fn run_sweep(args: SweepArgs, cli: &Globals) -> CliResult<()> {
    let (cloud, dropped) = load_input(&args.input, &args.reader, cli.dedupe)?;
    let digest = file_digest(&args.input)?;
    let dataset = args.input.display().to_string();
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| derived_path(&args.input, "sweep", "csv"));

    let table = match args.protocol {
        ProtocolArg::Gride => {
            let orders = args
                .n1_values
                .clone()
                .unwrap_or_else(|| geometric_orders(args.n1_max));
            let needed_k = orders.iter().max().copied().unwrap_or(1) * args.ratio;
            let k = cli.k.unwrap_or(needed_k);
            if k < needed_k {
                return Err(CliError::Usage(format!(
                    "kNN table order K={k} is insufficient for this sweep; rerun with --k {needed_k}"
                )));
            }
            let neighbor_table = obtain_table(&cloud, k, &args.input, &digest, args.knn_cache)?;
            let uncertainty = match args.uncertainty {
                UncertaintyArg::Fisher => Uncertainty::Fisher,
                UncertaintyArg::Bootstrap => Uncertainty::Bootstrap {
                    replicates: args.bootstrap_reps,
                },
            };
            gride_sweep(
                &neighbor_table,
                args.ratio,
                &orders,
                args.level,
                uncertainty,
                cli.seed,
                &dataset,
            )?
        }
        ProtocolArg::Decimation => twonn_decimation_sweep(
            &cloud,
            args.halvings,
            args.replicates,
            args.level,
            cli.seed,
            &dataset,
        )?,
    };

    table.write_csv(&output)?;
    RunManifest::new(
        cli.seed,
        Some(digest),
        serde_json::json!({
            "protocol": match args.protocol {
                ProtocolArg::Gride => "gride",
                ProtocolArg::Decimation => "decimation",
            },
            "ratio": args.ratio,
            "n1_max": args.n1_max,
            "n1_values": args.n1_values,
            "level": args.level,
            "halvings": args.halvings,
            "replicates": args.replicates,
            "bootstrap_reps": args.bootstrap_reps,
            "dedupe_dropped": dropped,
        }),
    )
    .write_for(&output)?;

    println!("sweep: {} rows -> {}", table.rows.len(), output.display());
    Ok(())
}
