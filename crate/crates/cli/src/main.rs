use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dqi_core::dataset::load_stereo_with;
use dqi_core::features::{write_csv_header, write_csv_row};
use dqi_core::protocol::{extract_features, labels};
use dqi_core::svr::grid_search;
use dqi_core::synth::SynthConfig;
use dqi_core::{
    depth_features, overall_features, plcc, run_protocol, srocc, svr_train, Dataset, DepthFeatureVector, Error,
    ExtractionConfig, FeatureOptions, GeometryChoice, IqaMetric, OverallFeatureVector, ProtocolOptions,
    SamplingScheme, SplitMode, SvrModel, SvrParams, Task, DEPTH_FEATURE_DIM, OVERALL_FEATURE_DIM,
};

const EXIT_USAGE: u8 = 2;
const EXIT_MODEL_MISMATCH: u8 = 3;
const EXIT_INSUFFICIENT: u8 = 4;

/// No-reference depth quality index for stereoscopic 360° and planar images.
#[derive(Debug, Parser)]
#[command(name = "dqi", version, about)]
struct Cli {
    /// Seed for evaluation splits and synthesis (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for feature extraction and evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Suppress log lines on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Predict the depth quality of a stereo pair.
    ScoreDepth(ScoreDepthArgs),
    /// Predict the overall quality of experience of a distorted stereo pair.
    ScoreOverall(ScoreOverallArgs),
    /// Train an SVR model on every row of a manifest.
    Train(TrainArgs),
    /// Run the repeated 80/20 train/test protocol and write a report.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic labelled dataset.
    Synth(SynthArgs),
    /// Export feature vectors of a manifest as CSV.
    Features(FeaturesArgs),
}

#[derive(Debug, Args)]
struct ExtractionArgs {
    /// auto treats 2:1 images as equirectangular.
    #[arg(long, default_value = "auto")]
    geometry: GeometryChoice,
    /// Viewport layout for equirectangular inputs: equatorialN or six.
    #[arg(long, default_value = "equatorial4")]
    sampling: SamplingScheme,
    /// Viewport field of view in degrees.
    #[arg(long, default_value_t = 90.0)]
    fov: f64,
    /// Viewport edge in pixels; defaults to min(height/2, 512).
    #[arg(long)]
    out_size: Option<usize>,
}

impl ExtractionArgs {
    fn config(&self) -> anyhow::Result<ExtractionConfig> {
        let config = ExtractionConfig {
            fov: self.fov,
            out_size: self.out_size,
            ..ExtractionConfig::omnidirectional(self.sampling)
        };
        config.validate()?;
        Ok(config)
    }

    fn feature_options(&self, metric: IqaMetric) -> anyhow::Result<FeatureOptions> {
        Ok(FeatureOptions {
            extraction: self.config()?,
            metric,
            geometry: self.geometry,
        })
    }
}

#[derive(Debug, Args)]
struct HyperArgs {
    /// SVR box constraint.
    #[arg(long = "svr-c", default_value_t = 100.0)]
    c: f64,
    /// Width of the epsilon-insensitive tube.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// RBF kernel width; defaults to 1/feature_dim.
    #[arg(long)]
    gamma: Option<f64>,
    /// Select C and gamma by 5-fold cross-validation.
    #[arg(long)]
    grid_search: bool,
}

impl HyperArgs {
    fn params(&self) -> SvrParams {
        SvrParams {
            c: self.c,
            epsilon: self.epsilon,
            gamma: self.gamma,
            ..SvrParams::default()
        }
    }
}

#[derive(Debug, Args)]
struct ScoreDepthArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    extraction: ExtractionArgs,
    /// Also print the 24 feature values as a CSV row.
    #[arg(long)]
    dump_features: bool,
}

#[derive(Debug, Args)]
struct ScoreOverallArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    ref_left: PathBuf,
    #[arg(long)]
    ref_right: PathBuf,
    #[arg(long, default_value = "msssim")]
    metric: IqaMetric,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    extraction: ExtractionArgs,
    /// Also print the 26 feature values as a CSV row.
    #[arg(long)]
    dump_features: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "depth")]
    task: Task,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "msssim")]
    metric: IqaMetric,
    #[command(flatten)]
    extraction: ExtractionArgs,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "depth")]
    task: Task,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value = "random")]
    split: SplitMode,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value = "msssim")]
    metric: IqaMetric,
    #[command(flatten)]
    extraction: ExtractionArgs,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// key=value configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "depth")]
    task: Task,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "msssim")]
    metric: IqaMetric,
    #[command(flatten)]
    extraction: ExtractionArgs,
}

struct Session {
    seed: Option<u64>,
    quiet: bool,
}

impl Session {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// `%g`-style formatting with six significant digits.
fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let text = if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, v)
    } else {
        let s = format!("{v:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        return format!("{}e{e}", trim_zeros(mantissa));
    };
    trim_zeros(&text).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_line(values: &[f64]) -> String {
    values.iter().map(|v| sig6(*v)).collect::<Vec<_>>().join(",")
}

fn load_model_for(path: &Path, dim: usize) -> anyhow::Result<SvrModel> {
    let model = dqi_core::load_model(path)?;
    if model.feature_dim != dim {
        return Err(Error::FeatureDim {
            expected: dim,
            got: model.feature_dim,
        }
        .into());
    }
    Ok(model)
}

fn score_depth(args: &ScoreDepthArgs, ctx: &Session) -> anyhow::Result<()> {
    let model = load_model_for(&args.model, DEPTH_FEATURE_DIM)?;
    let config = args.extraction.config()?;
    let stereo = load_stereo_with(&args.left, &args.right, args.extraction.geometry)?;
    ctx.log(format!(
        "loaded {}x{} {} pair",
        stereo.width(),
        stereo.height(),
        stereo.geometry()
    ));
    let features = depth_features(&stereo, &config.for_geometry(stereo.geometry()))?;
    if args.dump_features {
        println!("{}", csv_line(features.values()));
    }
    println!("score={}", sig6(model.predict(features.values())?));
    Ok(())
}

fn score_overall(args: &ScoreOverallArgs, ctx: &Session) -> anyhow::Result<()> {
    let model = load_model_for(&args.model, OVERALL_FEATURE_DIM)?;
    let config = args.extraction.config()?;
    let distorted = load_stereo_with(&args.left, &args.right, args.extraction.geometry)?;
    let reference = load_stereo_with(&args.ref_left, &args.ref_right, args.extraction.geometry)?;
    ctx.log(format!(
        "loaded {}x{} {} pair with reference",
        distorted.width(),
        distorted.height(),
        distorted.geometry()
    ));
    let features = overall_features(&reference, &distorted, args.metric, &config.for_geometry(distorted.geometry()))?;
    if args.dump_features {
        println!("{}", csv_line(features.values()));
    }
    println!("score={}", sig6(model.predict(features.values())?));
    Ok(())
}

fn feature_matrix(
    manifest: &Path,
    task: Task,
    options: &FeatureOptions,
    ctx: &Session,
) -> anyhow::Result<(Dataset, Vec<Vec<f64>>)> {
    let dataset = Dataset::load(manifest)?;
    if dataset.is_empty() {
        return Err(Error::Manifest(format!("{} has no rows", manifest.display())).into());
    }
    ctx.log(format!("extracting {task:?} features for {} entries", dataset.len()));
    let x = extract_features(&dataset, task, options)?;
    Ok((dataset, x))
}

fn train(args: &TrainArgs, ctx: &Session) -> anyhow::Result<()> {
    let options = args.extraction.feature_options(args.metric)?;
    let (dataset, x) = feature_matrix(&args.manifest, args.task, &options, ctx)?;
    let y = labels(&dataset, args.task)?;
    let mut params = args.hyper.params();
    if args.hyper.grid_search {
        params = grid_search(&x, &y, &params)?;
        println!(
            "selected C={} gamma={}",
            sig6(params.c),
            sig6(params.gamma_for(x[0].len()))
        );
    }
    let model = svr_train(&x, &y, &params)?;
    let predicted = model.predict_many(&x)?;
    dqi_core::save_model(&model, &args.out)?;
    ctx.log(format!(
        "wrote model with {} support vectors to {}",
        model.support_vectors.len(),
        args.out.display()
    ));
    let or_nan = |r: dqi_core::Result<f64>| r.unwrap_or(f64::NAN);
    println!("train_srocc={}", sig6(or_nan(srocc(&predicted, &y))));
    println!("train_plcc={}", sig6(or_nan(plcc(&predicted, &y, true))));
    Ok(())
}

fn evaluate(args: &EvaluateArgs, ctx: &Session) -> anyhow::Result<()> {
    let features = args.extraction.feature_options(args.metric)?;
    let dataset = Dataset::load(&args.manifest)?;
    let options = ProtocolOptions {
        iterations: args.iterations,
        seed: ctx.seed.unwrap_or(0),
        split: args.split,
        svr: args.hyper.params(),
        grid_search: args.hyper.grid_search,
    };
    ctx.log(format!(
        "evaluating {} entries over {} iterations",
        dataset.len(),
        options.iterations
    ));
    let report = run_protocol(&dataset, args.task, &features, &options)?;
    report.save(&args.report)?;
    ctx.log(format!("wrote report to {}", args.report.display()));
    println!("median_srocc={}", sig6(report.median_srocc));
    println!("median_krocc={}", sig6(report.median_krocc));
    println!("median_plcc={}", sig6(report.median_plcc));
    Ok(())
}

fn synth(args: &SynthArgs, ctx: &Session) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SynthConfig::parse(&text)?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    let dataset = dqi_core::build_dataset(&config, &args.out)?;
    ctx.log(format!("wrote {} pairs to {}", dataset.len(), args.out.display()));
    Ok(())
}

fn features(args: &FeaturesArgs, ctx: &Session) -> anyhow::Result<()> {
    let options = args.extraction.feature_options(args.metric)?;
    let (dataset, x) = feature_matrix(&args.manifest, args.task, &options, ctx)?;
    let names = match args.task {
        Task::Depth => DepthFeatureVector::names(),
        Task::Overall => OverallFeatureVector::names(),
    };
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    write_csv_header(&mut out, &names, true)?;
    for (entry, row) in dataset.entries.iter().zip(&x) {
        write_csv_row(&mut out, Some(&entry.id), row)?;
    }
    out.flush()?;
    ctx.log(format!("wrote {} rows to {}", x.len(), args.out.display()));
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::FeatureDim { .. }) => EXIT_MODEL_MISMATCH,
        Some(Error::InsufficientData(_)) => EXIT_INSUFFICIENT,
        _ => EXIT_USAGE,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.threads == 0 {
        anyhow::bail!(Error::InvalidArgument("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build()?;
    let ctx = Session {
        seed: cli.seed,
        quiet: cli.quiet,
    };
    pool.install(|| match &cli.command {
        Command::ScoreDepth(a) => score_depth(a, &ctx),
        Command::ScoreOverall(a) => score_overall(a, &ctx),
        Command::Train(a) => train(a, &ctx),
        Command::Evaluate(a) => evaluate(a, &ctx),
        Command::Synth(a) => synth(a, &ctx),
        Command::Features(a) => features(a, &ctx),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
