//! End-to-end orchestration: data, graph, curvature, rectification, layout,
//! metrics and on-disk artifacts.

mod config;
mod plot;
mod sweep;

pub use config::{derive_seed, GeneratorKind, GeneratorSpec, InputSpec, KnnMethod, PipelineConfig, RectifyMode};
pub use plot::{plot_scatter, render_svg, PALETTE};
pub use sweep::{sweep, write_summary, SweepGrid, SweepRow};

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curvature::{edge_curvatures, EdgeCurvature};
use crate::dataio::{self, PointCloud};
use crate::embed::{optimize, pca_init, Embedding, LayoutConfig};
use crate::eval::{evaluate, MetricParams, MetricsReport};
use crate::neighbors::{fuzzy_weights, knn_approx, knn_exact, FuzzyGraph, NeighborIndex};
use crate::rectify::{reweight, Branch, Rectification, StrengthEstimate};
use crate::{Error, Result};

pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "run-manifest.json";
pub const PLOT_FILE: &str = "plot.svg";
pub const REPORT_FILE: &str = "rectification-report.csv";
pub const CURVATURE_FILE: &str = "curvature.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub(crate) fn stage<T>(name: &'static str, result: Result<T>) -> Result<T> {
    result.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Stage seeds derived from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub data: u64,
    pub knn: u64,
    pub init: u64,
    pub layout: u64,
    pub metrics: u64,
}

impl StageSeeds {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            data: derive_seed(seed, "data"),
            knn: derive_seed(seed, "knn"),
            init: derive_seed(seed, "init"),
            layout: derive_seed(seed, "layout"),
            metrics: derive_seed(seed, "metrics"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounts {
    pub skeleton: usize,
    pub intra_cluster: usize,
    pub noise: usize,
}

impl BranchCounts {
    pub fn of(rect: &Rectification) -> Self {
        Self {
            skeleton: rect.count(Branch::Skeleton),
            intra_cluster: rect.count(Branch::IntraCluster),
            noise: rect.count(Branch::Noise),
        }
    }
}

/// Everything needed to reproduce a run, plus a few run facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: String,
    pub config: PipelineConfig,
    pub seeds: StageSeeds,
    pub n_points: usize,
    pub n_edges: usize,
    pub unconverged_edges: usize,
    pub strength: Option<StrengthEstimate>,
    pub branches: Option<BranchCounts>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Stages shared by every run over the same data and `k`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub cloud: PointCloud,
    pub index: NeighborIndex,
    pub graph: FuzzyGraph,
    pub init: Embedding,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub cloud: PointCloud,
    pub embedding: Embedding,
    pub metrics: MetricsReport,
    pub curvatures: Option<Vec<EdgeCurvature>>,
    pub rectification: Option<Rectification>,
    pub manifest: Manifest,
}

pub fn load_input(config: &PipelineConfig) -> Result<PointCloud> {
    let seeds = StageSeeds::from_seed(config.seed);
    let cloud = match &config.input {
        InputSpec::Csv { path, label_column } => dataio::load_csv(path, label_column.as_deref()),
        InputSpec::Generator(spec) => spec.generate(seeds.data),
    };
    stage("data", cloud)
}

/// kNN, fuzzy graph and PCA initialization.
pub fn prepare(config: &PipelineConfig, cloud: PointCloud) -> Result<Prepared> {
    let seeds = StageSeeds::from_seed(config.seed);
    let index = stage(
        "knn",
        match config.knn {
            KnnMethod::Exact => knn_exact(&cloud, config.k),
            KnnMethod::Approx => knn_approx(&cloud, config.k, seeds.knn),
        },
    )?;
    let graph = stage("fuzzy", fuzzy_weights(&index))?;
    let init = stage("init", pca_init(&cloud, config.layout.d, seeds.init))?;
    Ok(Prepared {
        cloud,
        index,
        graph,
        init,
    })
}

/// Curvature for the prepared graph, or `None` when rectification is off.
pub fn curvature_stage(config: &PipelineConfig, prepared: &Prepared) -> Result<Option<Vec<EdgeCurvature>>> {
    if config.rectify == RectifyMode::Off {
        return Ok(None);
    }
    stage(
        "curvature",
        edge_curvatures(&prepared.graph, &prepared.cloud, &config.curvature),
    )
    .map(Some)
}

/// Rectification, layout and metrics on top of shared stages.
pub fn finish(
    config: &PipelineConfig,
    prepared: &Prepared,
    curvatures: Option<&[EdgeCurvature]>,
) -> Result<RunOutput> {
    let seeds = StageSeeds::from_seed(config.seed);
    let rectification = match (config.rectify, curvatures) {
        (RectifyMode::On, Some(c)) => Some(stage(
            "rectify",
            reweight(&prepared.graph, c, &prepared.index, &config.rectifier),
        )?),
        (RectifyMode::On, None) | (RectifyMode::Identity, None) => {
            return Err(Error::invalid("rectification requested without curvature"));
        }
        _ => None,
    };
    let graph = rectification.as_ref().map_or(&prepared.graph, |r| &r.graph);
    let layout = LayoutConfig {
        seed: seeds.layout,
        ..config.layout
    };
    let embedding = stage("layout", optimize(graph, &prepared.init, &layout))?;
    let params = MetricParams::for_size(prepared.cloud.len(), seeds.metrics);
    let metrics = stage("metrics", evaluate(&prepared.cloud, &embedding, params))?;

    let curvatures = curvatures.map(|c| match &rectification {
        Some(r) => r.curvatures_with_jaccard(c),
        None => c.to_vec(),
    });
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: config.rectify.label().to_string(),
        config: config.clone(),
        seeds,
        n_points: prepared.cloud.len(),
        n_edges: prepared.graph.n_edges(),
        unconverged_edges: curvatures.as_ref().map_or(0, |c| c.iter().filter(|e| !e.converged).count()),
        strength: rectification.as_ref().map(|r| r.strength),
        branches: rectification.as_ref().map(BranchCounts::of),
    };
    Ok(RunOutput {
        cloud: prepared.cloud.clone(),
        embedding,
        metrics,
        curvatures,
        rectification,
        manifest,
    })
}

/// Runs every stage and, when `config.out_dir` is set, writes the artifacts.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutput> {
    stage("config", config.validate())?;
    let cloud = load_input(config)?;
    let prepared = prepare(config, cloud)?;
    let curvatures = curvature_stage(config, &prepared)?;
    let out = finish(config, &prepared, curvatures.as_deref())?;
    if let Some(dir) = &config.out_dir {
        write_run(&out, dir, config.plot)?;
    }
    Ok(out)
}

/// Tracks written files so a failed write leaves nothing behind.
pub(crate) struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<PathBuf>,
    created_dir: bool,
}

impl ArtifactWriter {
    pub(crate) fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            created_dir,
        })
    }

    pub(crate) fn write(&mut self, name: &str, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        f(&path)
    }

    pub(crate) fn rollback(self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes embedding, metrics, manifest and the optional plot and report.
pub fn write_run(out: &RunOutput, dir: &Path, plot: bool) -> Result<()> {
    let mut writer = stage("write", ArtifactWriter::new(dir))?;
    let result = (|| {
        let labels = out.cloud.labels();
        writer.write(EMBEDDING_FILE, |p| out.embedding.write_csv(p, labels))?;
        writer.write(METRICS_FILE, |p| write_json(p, &out.metrics))?;
        writer.write(MANIFEST_FILE, |p| write_json(p, &out.manifest))?;
        if let Some(rect) = &out.rectification {
            writer.write(REPORT_FILE, |p| write_rectification_report(rect, p))?;
        }
        if plot && out.embedding.dim() == 2 {
            writer.write(PLOT_FILE, |p| plot_scatter(&out.embedding, labels, p))?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        writer.rollback();
        return Err(Error::Stage {
            stage: "write",
            source: Box::new(e),
        });
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Columns `i,j,w,kappa,jaccard,branch,w_new`.
pub fn write_rectification_report(rect: &Rectification, path: &Path) -> Result<()> {
    let mut out = csv_writer(path)?;
    out.write_record(["i", "j", "w", "kappa", "jaccard", "branch", "w_new"])?;
    for r in &rect.records {
        out.write_record([
            r.i.to_string(),
            r.j.to_string(),
            r.w.to_string(),
            r.kappa.to_string(),
            r.jaccard.to_string(),
            r.branch.as_str().to_string(),
            r.w_new.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Columns `i,j,w,w1,kappa,jaccard,degenerate,converged`.
pub fn write_curvature_csv(graph: &FuzzyGraph, curvatures: &[EdgeCurvature], path: &Path) -> Result<()> {
    let mut out = csv_writer(path)?;
    out.write_record(["i", "j", "w", "w1", "kappa", "jaccard", "degenerate", "converged"])?;
    for c in curvatures {
        let w = graph.weight(c.i, c.j).ok_or(Error::MissingCurvature(c.i, c.j))?;
        out.write_record([
            c.i.to_string(),
            c.j.to_string(),
            w.to_string(),
            c.w1.to_string(),
            c.kappa.to_string(),
            c.jaccard.map_or_else(String::new, |v| v.to_string()),
            c.degenerate.to_string(),
            c.converged.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn header_has(path: &Path, column: &str) -> Result<bool> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first).map_err(|e| Error::io(path, e))?;
    Ok(first.trim().split(',').any(|c| c.trim() == column))
}

/// Reads an embedding CSV; a `label` column, when present, is returned
/// separately.
pub fn load_embedding(path: &Path) -> Result<(Embedding, Option<Vec<i64>>)> {
    let label = header_has(path, "label")?.then_some("label");
    let cloud = dataio::load_csv(path, label)?;
    let labels = cloud.labels().map(<[i64]>::to_vec);
    Ok((Embedding::new(cloud.points().clone(), 0)?, labels))
}

/// `Some("label")` when the CSV header has a `label` column.
pub fn detect_label_column(path: &Path) -> Result<Option<String>> {
    Ok(stage("data", header_has(path, "label"))?.then(|| "label".to_string()))
}

/// Loads a point cloud, picking up a `label` column when the header has one.
pub fn load_cloud(path: &Path, label_column: Option<&str>) -> Result<PointCloud> {
    let label = match label_column {
        Some(col) => Some(col),
        None => stage("data", header_has(path, "label"))?.then_some("label"),
    };
    stage("data", dataio::load_csv(path, label))
}
