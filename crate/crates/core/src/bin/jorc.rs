//! `jorc` command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, bad config
//! values), 2 when a pipeline stage fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use jorc_umap::curvature::{edge_curvatures, Solver};
use jorc_umap::eval::{evaluate, MetricParams};
use jorc_umap::pipeline::{
    self, derive_seed, GeneratorKind, GeneratorSpec, InputSpec, KnnMethod, Manifest, PipelineConfig, RectifyMode,
    SweepGrid, CURVATURE_FILE, METRICS_FILE, REPORT_FILE,
};
use jorc_umap::rectify::reweight;

#[derive(Parser)]
#[command(name = "jorc", version, about = "Curvature- and overlap-rectified UMAP embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a point cloud and write embedding, metrics and manifest.
    Embed(EmbedArgs),
    /// Run the pipeline over a parameter grid and write summary.csv.
    Sweep(SweepArgs),
    /// Write a synthetic dataset as CSV.
    GenData(GenArgs),
    /// Dump per-edge curvature and overlap reports without embedding.
    Curvature(RunArgs),
    /// Score an existing embedding against its source cloud.
    Metrics(MetricsArgs),
    /// Render a 2-D embedding CSV as an SVG scatter plot.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RectifyArg {
    On,
    Off,
    Identity,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Sinkhorn,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum KnnArg {
    Exact,
    Approx,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Point cloud CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Integer label column in the input CSV (`label` is picked up automatically).
    #[arg(long)]
    label_column: Option<String>,
    /// swiss_roll, s_curve, trefoil or three_rings.
    #[arg(long)]
    generator: Option<String>,
    /// Generated points (points per ring for three_rings).
    #[arg(long)]
    n: Option<usize>,
    /// Standard deviation of the Gaussian noise added by the generator.
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Bridge points per gap for three_rings.
    #[arg(long)]
    n_bridge: Option<usize>,
    /// Neighbors per point in the kNN graph.
    #[arg(long)]
    k: Option<usize>,
    /// Exact brute-force or approximate kNN search.
    #[arg(long, value_enum)]
    knn: Option<KnnArg>,
    /// Jaccard threshold at or below which negative-curvature edges are cut.
    #[arg(long)]
    delta: Option<f64>,
    /// Laziness of the random-walk measures (mass kept on the center).
    #[arg(long)]
    alpha: Option<f64>,
    /// Rectification strength S.
    #[arg(long)]
    strength: Option<f64>,
    /// Estimate the strength from the curvature distribution.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    dynamic_strength: Option<bool>,
    /// tanh value the typical curvature should reach under dynamic strength.
    #[arg(long)]
    target_tanh: Option<f64>,
    /// Damping factor for positive-curvature edges.
    #[arg(long)]
    beta: Option<f64>,
    /// Multiplier applied to cut edges.
    #[arg(long)]
    eps_floor: Option<f64>,
    /// Layout optimization epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Minimum distance between embedded points.
    #[arg(long)]
    min_dist: Option<f64>,
    /// Run seed; stage seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Rectified graph, plain UMAP graph, or rectifier with unchanged weights.
    #[arg(long, value_enum)]
    rectify: Option<RectifyArg>,
    /// Transport solver for curvature.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Sinkhorn regularization as a fraction of the median ground cost.
    #[arg(long)]
    reg: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Start from the configuration recorded in a run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Also write plot.svg.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated Jaccard thresholds.
    #[arg(long, value_delimiter = ',')]
    deltas: Vec<f64>,
    /// Comma-separated neighbor counts.
    #[arg(long, value_delimiter = ',')]
    ks: Vec<usize>,
    /// Comma-separated rectification strengths.
    #[arg(long, value_delimiter = ',')]
    strengths: Vec<f64>,
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    generator: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 10)]
    n_bridge: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Source point cloud CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    label_column: Option<String>,
    /// Embedding CSV.
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory for metrics.json; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Embedding CSV; a `label` column colors the points.
    #[arg(long)]
    embedding: PathBuf,
    /// Output SVG file.
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Runtime(jorc_umap::Error),
}

impl From<jorc_umap::Error> for CliError {
    fn from(e: jorc_umap::Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

const CONFIG_KEYS: &[&str] = &[
    "input",
    "label-column",
    "generator",
    "n",
    "noise-sd",
    "n-bridge",
    "k",
    "knn",
    "delta",
    "alpha",
    "strength",
    "dynamic-strength",
    "target-tanh",
    "beta",
    "eps-floor",
    "epochs",
    "min-dist",
    "seed",
    "rectify",
    "solver",
    "reg",
    "out",
];

/// Values from a `key = value` config file, keyed by flag name.
#[derive(Default)]
struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}:{}: expected key=value", path.display(), lineno + 1)))?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(usage(format!("{}:{}: unknown key {key:?}", path.display(), lineno + 1)));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self(map))
    }

    /// Flag value if given, else the file value, else `None`.
    fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("invalid value {raw:?} for config key {key}"))),
        }
    }

    fn pick_enum<T: ValueEnum>(&self, key: &str, flag: Option<T>) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => T::from_str(raw, true)
                .map(Some)
                .map_err(|_| usage(format!("invalid value {raw:?} for config key {key}"))),
        }
    }
}

/// Layers flags over the config file over `base`.
fn resolve(args: &RunArgs, base: Option<PipelineConfig>) -> CliResult<PipelineConfig> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let input_path: Option<PathBuf> = file.pick("input", args.input.clone())?;
    let generator: Option<String> = file.pick("generator", args.generator.clone())?;
    let label_column: Option<String> = file.pick("label-column", args.label_column.clone())?;
    let n: Option<usize> = file.pick("n", args.n)?;
    let noise_sd: Option<f64> = file.pick("noise-sd", args.noise_sd)?;
    let n_bridge: Option<usize> = file.pick("n-bridge", args.n_bridge)?;

    let input = match (input_path, generator) {
        (Some(_), Some(_)) => return Err(usage("--input and --generator are mutually exclusive")),
        (Some(path), None) => {
            let label_column = match label_column {
                Some(c) => Some(c),
                None => pipeline::detect_label_column(&path)?,
            };
            Some(InputSpec::Csv { path, label_column })
        }
        (None, Some(name)) => {
            let kind = GeneratorKind::parse(&name).map_err(|e| usage(e.to_string()))?;
            let prior = match &base {
                Some(PipelineConfig {
                    input: InputSpec::Generator(g),
                    ..
                }) => Some(*g),
                _ => None,
            };
            Some(InputSpec::Generator(GeneratorSpec {
                kind,
                n: n.or(prior.map(|g| g.n)).unwrap_or(1000),
                noise_sd: noise_sd.or(prior.map(|g| g.noise_sd)).unwrap_or(0.0),
                n_bridge: n_bridge.or(prior.map(|g| g.n_bridge)).unwrap_or(10),
            }))
        }
        (None, None) => None,
    };
    let mut cfg = match (base, input) {
        (Some(mut b), Some(input)) => {
            b.input = input;
            b
        }
        (Some(mut b), None) => {
            if let InputSpec::Generator(g) = &mut b.input {
                g.n = n.unwrap_or(g.n);
                g.noise_sd = noise_sd.unwrap_or(g.noise_sd);
                g.n_bridge = n_bridge.unwrap_or(g.n_bridge);
            }
            b
        }
        (None, Some(input)) => PipelineConfig::new(input),
        (None, None) => return Err(usage("one of --input or --generator is required")),
    };

    if let Some(k) = file.pick("k", args.k)? {
        cfg.k = k;
    }
    if let Some(m) = file.pick_enum("knn", args.knn)? {
        cfg.knn = match m {
            KnnArg::Exact => KnnMethod::Exact,
            KnnArg::Approx => KnnMethod::Approx,
        };
    }
    let r = &mut cfg.rectifier;
    r.delta = file.pick("delta", args.delta)?.unwrap_or(r.delta);
    r.s_base = file.pick("strength", args.strength)?.unwrap_or(r.s_base);
    r.dynamic_strength = file.pick("dynamic-strength", args.dynamic_strength)?.unwrap_or(r.dynamic_strength);
    r.target_tanh = file.pick("target-tanh", args.target_tanh)?.unwrap_or(r.target_tanh);
    r.beta = file.pick("beta", args.beta)?.unwrap_or(r.beta);
    r.eps_floor = file.pick("eps-floor", args.eps_floor)?.unwrap_or(r.eps_floor);
    cfg.curvature.alpha = file.pick("alpha", args.alpha)?.unwrap_or(cfg.curvature.alpha);
    let reg: Option<f64> = file.pick("reg", args.reg)?;
    match file.pick_enum("solver", args.solver)? {
        Some(SolverArg::Exact) => cfg.curvature.solver = Solver::Exact,
        Some(SolverArg::Sinkhorn) if !matches!(cfg.curvature.solver, Solver::Sinkhorn { .. }) => {
            cfg.curvature.solver = Solver::default();
        }
        _ => {}
    }
    if let Some(reg) = reg {
        match &mut cfg.curvature.solver {
            Solver::Sinkhorn { reg_scale, .. } => *reg_scale = reg,
            Solver::Exact => return Err(usage("--reg only applies to the sinkhorn solver")),
        }
    }
    cfg.layout.n_epochs = file.pick("epochs", args.epochs)?.unwrap_or(cfg.layout.n_epochs);
    cfg.layout.min_dist = file.pick("min-dist", args.min_dist)?.unwrap_or(cfg.layout.min_dist);
    cfg.seed = file.pick("seed", args.seed)?.unwrap_or(cfg.seed);
    if let Some(mode) = file.pick_enum("rectify", args.rectify)? {
        cfg.rectify = match mode {
            RectifyArg::On => RectifyMode::On,
            RectifyArg::Off => RectifyMode::Off,
            RectifyArg::Identity => RectifyMode::Identity,
        };
    }
    if let Some(out) = file.pick("out", args.out.clone())? {
        cfg.out_dir = Some(out);
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn require_out(cfg: &PipelineConfig) -> CliResult<&Path> {
    cfg.out_dir.as_deref().ok_or_else(|| usage("--out is required"))
}

fn embed(args: EmbedArgs) -> CliResult<()> {
    let base = match &args.manifest {
        Some(p) => Some(Manifest::load(p).map_err(|e| usage(e.to_string()))?.config),
        None => None,
    };
    let mut cfg = resolve(&args.run, base)?;
    cfg.plot |= args.plot;
    require_out(&cfg)?;
    let out = pipeline::run_pipeline(&cfg)?;
    let m = &out.metrics;
    println!(
        "mode={} rte={:.4} components={} largest_fraction={:.4}",
        out.manifest.mode, m.rte, m.components, m.largest_fraction
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> CliResult<()> {
    let mut cfg = resolve(&args.run, None)?;
    cfg.plot = args.plot;
    require_out(&cfg)?;
    let grid = SweepGrid {
        k: args.ks,
        delta: args.deltas,
        strength: args.strengths,
    };
    if grid.is_empty() {
        return Err(usage("sweep needs at least one of --deltas, --ks, --strengths"));
    }
    let rows = pipeline::sweep(&cfg, &grid)?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    println!("{} runs, {} failed", rows.len(), failed);
    Ok(())
}

fn gen_data(args: GenArgs) -> CliResult<()> {
    let kind = GeneratorKind::parse(&args.generator).map_err(|e| usage(e.to_string()))?;
    let spec = GeneratorSpec {
        kind,
        n: args.n,
        noise_sd: args.noise_sd,
        n_bridge: args.n_bridge,
    };
    let cloud = spec.generate(derive_seed(args.seed, "data"))?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Runtime(io_error(parent, e)))?;
    }
    cloud.write_csv(&args.out)?;
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> jorc_umap::Error {
    jorc_umap::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn curvature(args: RunArgs) -> CliResult<()> {
    let cfg = resolve(&args, None)?;
    let dir = require_out(&cfg)?.to_path_buf();
    let cloud = pipeline::load_input(&cfg)?;
    let prepared = pipeline::prepare(&cfg, cloud)?;
    let mut curv = edge_curvatures(&prepared.graph, &prepared.cloud, &cfg.curvature)?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(io_error(&dir, e)))?;
    if cfg.rectify != RectifyMode::Off {
        let rect = reweight(&prepared.graph, &curv, &prepared.index, &cfg.rectifier)?;
        curv = rect.curvatures_with_jaccard(&curv);
        pipeline::write_rectification_report(&rect, &dir.join(REPORT_FILE))?;
    }
    pipeline::write_curvature_csv(&prepared.graph, &curv, &dir.join(CURVATURE_FILE))?;
    let negative = curv.iter().filter(|c| c.kappa < 0.0).count();
    println!("{} edges, {} with negative curvature", curv.len(), negative);
    Ok(())
}

fn metrics(args: MetricsArgs) -> CliResult<()> {
    let cloud = pipeline::load_cloud(&args.input, args.label_column.as_deref())?;
    let (emb, _) = pipeline::load_embedding(&args.embedding)?;
    let params = MetricParams::for_size(cloud.len(), derive_seed(args.seed, "metrics"));
    let report = evaluate(&cloud, &emb, params)?;
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(io_error(dir, e)))?;
            pipeline::write_json(&dir.join(METRICS_FILE), &report)?;
        }
        None => println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.into()))?
        ),
    }
    Ok(())
}

fn plot(args: PlotArgs) -> CliResult<()> {
    let (emb, labels) = pipeline::load_embedding(&args.embedding)?;
    if emb.dim() != 2 {
        return Err(usage(format!("plot needs a 2-D embedding, got {} columns", emb.dim())));
    }
    pipeline::plot_scatter(&emb, labels.as_deref(), &args.out)?;
    Ok(())
}

fn report(e: &jorc_umap::Error) {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(cause) = source {
        eprintln!("  caused by: {cause}");
        source = cause.source();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Embed(a) => embed(a),
        Command::Sweep(a) => sweep(a),
        Command::GenData(a) => gen_data(a),
        Command::Curvature(a) => curvature(a),
        Command::Metrics(a) => metrics(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            report(&e);
            ExitCode::from(2)
        }
    }
}
