//! Command-line front end for correspondence filtering: synthesize
//! ground-truth scenes, filter correspondence sets, and run benchmark
//! sweeps.
//!
//! Exit codes: 0 success, 2 invalid flags or configuration, 3 I/O
//! failure, 4 input parse error (reported with its line), 5 algorithm
//! degeneracy.

mod io;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use vtm_core::{
    estimate_affine_lsm, generate_scene, ransac_affine, rfvtm, rms_error,
    sweep, vtm_subdivided, write_report_csv, Algorithm, CorrespondenceSet, FilterError,
    FilterResult, GroundTruth, RansacConfig, RfvtmConfig, SceneConfig, SceneDocument, SweepSpec,
    SynthError, TraceRecord, VtmConfig,
};

#[derive(Parser)]
#[command(name = "vtm", version, about = "Vertex-trichotomy correspondence filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Filter a correspondence set and write residual/report files.
    Filter(FilterArgs),
    /// Run a Monte-Carlo sweep and write the report CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of inlier correspondences.
    #[arg(long, default_value_t = 100)]
    inliers: u32,
    /// Outlier fraction of the final scene, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    outlier_ratio: f64,
    /// Rotation in degrees.
    #[arg(long, default_value_t = 0.0)]
    rotation: f64,
    /// Uniform scale factor (> 0).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0.0)]
    shear_h: f64,
    #[arg(long, default_value_t = 0.0)]
    shear_v: f64,
    /// Gaussian noise sigma on sensed inliers, pixels per coordinate.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Field width in pixels.
    #[arg(long, default_value_t = 512.0)]
    width: f64,
    /// Field height in pixels.
    #[arg(long, default_value_t = 512.0)]
    height: f64,
    #[arg(long, default_value_t = 0.0)]
    tx: f64,
    #[arg(long, default_value_t = 0.0)]
    ty: f64,
    /// Mirror the reference x-axis (negative-determinant scene).
    #[arg(long)]
    reflect: bool,
    /// Output scene file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Algorithm: vtm, rfvtm or ransac.
    #[arg(long)]
    algo: Algorithm,
    /// Input scene (JSON) or correspondence text file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Group count for subdivided filtering.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// RMS convergence threshold for rfvtm, pixels.
    #[arg(long, default_value_t = 0.5)]
    th_err: f64,
    /// Orientation tolerance override (default: scale-aware automatic).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-instance descriptor vertex cap.
    #[arg(long, default_value_t = 600)]
    max_vertices: usize,
    /// RANSAC inlier radius, pixels.
    #[arg(long, default_value_t = 2.0)]
    ransac_threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    ransac_iterations: u32,
    #[arg(long, default_value_t = 0.99)]
    ransac_confidence: f64,
    /// Residual correspondences output (text); default `<input>.residual.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Result document output (JSON); default `<input>.result.json`.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Optional SVG overlay of residual vs deleted matches.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Outlier percentages: `start:end:step` or a comma list (e.g. `5:95:10` or `15,55,95`).
    #[arg(long, default_value = "5:95:10")]
    ratios: String,
    #[arg(long, default_value_t = 100)]
    repeats: u32,
    /// Comma list of inlier counts.
    #[arg(long, default_value = "100")]
    inliers: String,
    /// Comma list of algorithms.
    #[arg(long, default_value = "vtm,rfvtm,ransac")]
    algos: String,
    #[arg(long, default_value_t = 0.0)]
    rotation: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0.0)]
    shear_h: f64,
    #[arg(long, default_value_t = 0.0)]
    shear_v: f64,
    /// Gaussian noise sigma on sensed inliers.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed subdivision group count for the trichotomy filters.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Io(String),
    Parse(String),
    Algorithm(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Parse(_) => 4,
            CliError::Algorithm(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Parse(m) | CliError::Algorithm(m) => m,
        }
    }
}

fn io_err(context: &str, e: std::io::Error) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}

fn filter_err(e: FilterError) -> CliError {
    match e {
        FilterError::InvalidGroupCount { .. } | FilterError::InvalidConfig(_) => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Algorithm(other.to_string()),
    }
}

fn main() -> ExitCode {
    if let Err(e) = configure_threads() {
        eprintln!("vtm: {}", e.message());
        return ExitCode::from(e.code());
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Filter(args) => cmd_filter(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vtm: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// `VTM_THREADS` caps internal parallelism (integer >= 1).
fn configure_threads() -> Result<(), CliError> {
    let Some(raw) = std::env::var_os("VTM_THREADS") else {
        return Ok(());
    };
    let parsed = raw
        .to_str()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .ok_or_else(|| {
            CliError::Usage(format!("VTM_THREADS must be an integer >= 1, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(parsed)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let config = SceneConfig {
        n_inliers: args.inliers,
        outlier_ratio: args.outlier_ratio,
        field_width: args.width,
        field_height: args.height,
        rotation_deg: args.rotation,
        scale: args.scale,
        shear_h: args.shear_h,
        shear_v: args.shear_v,
        translation: (args.tx, args.ty),
        noise_sigma: args.noise,
        seed: args.seed,
        reflect: args.reflect,
        ..SceneConfig::default()
    };
    let (corr, truth) = generate_scene(&config).map_err(|e| match e {
        SynthError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        SynthError::Document(_) => CliError::Parse(e.to_string()),
    })?;
    let doc = SceneDocument::new(config.clone(), &corr, &truth);
    io::write_atomic(&args.out, &doc.to_json()).map_err(|e| io_err("writing scene", e))?;
    let n_out = corr.len() - config.n_inliers as usize;
    println!(
        "{}: {} pairs ({} inliers, {} outliers), det {:.6}, seed {}",
        args.out.display(),
        corr.len(),
        config.n_inliers,
        n_out,
        truth.transform.determinant(),
        config.seed
    );
    Ok(())
}

/// Parameter echo embedded in the result document.
#[derive(Serialize)]
struct ReportParameters {
    m: usize,
    th_err: f64,
    eps: Option<f64>,
    seed: u64,
    max_vertices: usize,
    ransac_threshold: f64,
    ransac_iterations: u32,
    ransac_confidence: f64,
}

#[derive(Serialize)]
struct FilterReport<'a> {
    algorithm: Algorithm,
    input: String,
    parameters: &'a ReportParameters,
    residual_ids: &'a [u64],
    deleted_ids: &'a [u64],
    recovered_ids: &'a [u64],
    model: Option<vtm_core::AffineTransform>,
    rms_error: Option<f64>,
    termination: vtm_core::Termination,
    orientation_evals: u64,
    trace: &'a [TraceRecord],
}

fn load_input(path: &Path) -> Result<(CorrespondenceSet, Option<GroundTruth>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_err(&format!("reading {}", path.display()), e))?;
    if text.trim_start().starts_with('{') {
        let doc = SceneDocument::from_json(&text).map_err(|e| CliError::Parse(e.to_string()))?;
        Ok((doc.correspondences(), Some(doc.ground_truth())))
    } else {
        let corr = io::parse_correspondences(&text).map_err(|e| {
            CliError::Parse(format!("{}: {e}", path.display()))
        })?;
        Ok((corr, None))
    }
}

fn with_suffix(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().unwrap_or_default().to_string_lossy();
    input.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_filter(args: FilterArgs) -> Result<(), CliError> {
    let (corr, _truth) = load_input(&args.input)?;
    let descriptor = vtm_core::DescriptorOptions {
        max_vertices: args.max_vertices,
        detect_reflection: true,
    };
    let mut result: FilterResult = match args.algo {
        Algorithm::Vtm => {
            let cfg = VtmConfig {
                eps: args.eps,
                descriptor,
            };
            vtm_subdivided(&corr, args.m.max(1), args.seed, &cfg).map_err(filter_err)?
        }
        Algorithm::Rfvtm => {
            let cfg = RfvtmConfig {
                th_err: args.th_err,
                eps: args.eps,
                m: args.m.max(1),
                seed: args.seed,
                descriptor,
                ..RfvtmConfig::default()
            };
            rfvtm(&corr, &cfg).map_err(filter_err)?
        }
        Algorithm::Ransac => {
            let cfg = RansacConfig {
                max_iterations: args.ransac_iterations,
                inlier_threshold: args.ransac_threshold,
                confidence: args.ransac_confidence,
                seed: args.seed,
            };
            ransac_affine(&corr, &cfg).map_err(filter_err)?
        }
    };
    // The report always carries a transform estimate when one is
    // attainable from the residual set.
    if result.model.is_none() {
        if let Ok(theta) = estimate_affine_lsm(&result.residual) {
            result.rms = rms_error(&result.residual, &theta).ok();
            result.model = Some(theta);
        }
    }

    let parameters = ReportParameters {
        m: args.m,
        th_err: args.th_err,
        eps: args.eps,
        seed: args.seed,
        max_vertices: args.max_vertices,
        ransac_threshold: args.ransac_threshold,
        ransac_iterations: args.ransac_iterations,
        ransac_confidence: args.ransac_confidence,
    };
    let report = FilterReport {
        algorithm: args.algo,
        input: args.input.display().to_string(),
        parameters: &parameters,
        residual_ids: result.residual.ids(),
        deleted_ids: result.deleted.ids(),
        recovered_ids: result.recovered.ids(),
        model: result.model,
        rms_error: result.rms,
        termination: result.termination,
        orientation_evals: result.orientation_evals,
        trace: &result.trace,
    };

    let out_path = args.out.unwrap_or_else(|| with_suffix(&args.input, "residual.txt"));
    let json_path = args.json.unwrap_or_else(|| with_suffix(&args.input, "result.json"));
    io::write_atomic(&out_path, &io::write_correspondences(&result.residual))
        .map_err(|e| io_err("writing residual", e))?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    io::write_atomic(&json_path, &json).map_err(|e| io_err("writing result document", e))?;
    if let Some(svg_path) = &args.svg {
        let svg = svg::render(&result.residual, &result.deleted);
        io::write_atomic(svg_path, &svg).map_err(|e| io_err("writing overlay", e))?;
    }

    println!(
        "{}: kept {} of {} pairs ({} deleted, {} recovered), rms {}, {}",
        args.algo,
        result.residual.len(),
        corr.len(),
        result.deleted.len(),
        result.recovered.len(),
        result
            .rms
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into()),
        match result.termination {
            vtm_core::Termination::Converged => "converged",
            vtm_core::Termination::Stall => "stalled",
            vtm_core::Termination::IterationCap => "iteration cap",
            vtm_core::Termination::PassThrough => "passed through",
        }
    );
    Ok(())
}

fn parse_ratios(spec: &str) -> Result<Vec<f64>, CliError> {
    let to_percent = |s: &str| -> Result<f64, CliError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("`{s}` is not a number in --ratios")))
    };
    let percents: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(
                "--ratios range form is start:end:step (percent)".into(),
            ));
        }
        let (start, end, step) = (to_percent(parts[0])?, to_percent(parts[1])?, to_percent(parts[2])?);
        if step <= 0.0 || end < start {
            return Err(CliError::Usage("--ratios range must ascend with a positive step".into()));
        }
        let mut out = Vec::new();
        let mut v = start;
        while v <= end + 1e-9 {
            out.push(v);
            v += step;
        }
        out
    } else {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(to_percent)
            .collect::<Result<_, _>>()?
    };
    if percents.is_empty() {
        return Err(CliError::Usage("--ratios selects no values".into()));
    }
    percents
        .into_iter()
        .map(|p| {
            if (0.0..100.0).contains(&p) {
                Ok(p / 100.0)
            } else {
                Err(CliError::Usage(format!(
                    "outlier percentage {p} must lie in [0, 100)"
                )))
            }
        })
        .collect()
}

fn parse_list<T: std::str::FromStr>(spec: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>, _> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<T>())
        .collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        Ok(_) => Err(CliError::Usage(format!("--{what} selects no values"))),
        Err(e) => Err(CliError::Usage(format!("invalid --{what}: {e}"))),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    if args.repeats < 1 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let ratios = parse_ratios(&args.ratios)?;
    let inlier_counts: Vec<u32> = parse_list(&args.inliers, "inliers")?;
    let algorithms: Vec<Algorithm> = parse_list(&args.algos, "algos")?;

    let mut rows = Vec::new();
    for &n_inliers in &inlier_counts {
        let base = SceneConfig {
            n_inliers,
            rotation_deg: args.rotation,
            scale: args.scale,
            shear_h: args.shear_h,
            shear_v: args.shear_v,
            noise_sigma: args.noise,
            seed: args.seed,
            ..SceneConfig::default()
        };
        let mut spec = SweepSpec::new(base, ratios.clone(), args.repeats, algorithms.clone());
        spec.m = args.m;
        rows.extend(sweep(&spec).map_err(|e| CliError::Usage(e.to_string()))?);
    }

    let mut csv = Vec::new();
    write_report_csv(&rows, &mut csv).expect("in-memory write");
    let csv = String::from_utf8(csv).expect("csv is utf-8");
    io::write_atomic(&args.out, &csv).map_err(|e| io_err("writing report", e))?;

    for &algorithm in &algorithms {
        let algo_rows: Vec<_> = rows.iter().filter(|r| r.algorithm == algorithm).collect();
        let mean_of = |f: fn(&vtm_core::SweepRow) -> Option<f64>| {
            let vals: Vec<f64> = algo_rows.iter().filter_map(|r| f(r)).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        };
        let failures: u32 = algo_rows.iter().map(|r| r.failures).sum();
        println!(
            "{algorithm}: precision {:.4}, recall {:.4} over {} cells ({} repeats each, {} failures)",
            mean_of(|r| r.pre_mean),
            mean_of(|r| r.rec_mean),
            algo_rows.len(),
            args.repeats,
            failures
        );
    }
    Ok(())
}
