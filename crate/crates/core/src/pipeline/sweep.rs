use std::collections::BTreeMap;
use std::path::Path;

use crate::curvature::EdgeCurvature;
use crate::par;
use crate::{Error, Result};

use super::{
    curvature_stage, finish, load_input, prepare, stage, write_run, BranchCounts, PipelineConfig, Prepared,
    RunOutput, SUMMARY_FILE,
};

/// Parameter lists to cross. An empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub k: Vec<usize>,
    pub delta: Vec<f64>,
    pub strength: Vec<f64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.k.is_empty() && self.delta.is_empty() && self.strength.is_empty()
    }

    /// Cartesian product in `k`, `delta`, `strength` order.
    pub fn configs(&self, base: &PipelineConfig) -> Vec<PipelineConfig> {
        let ks = if self.k.is_empty() { vec![base.k] } else { self.k.clone() };
        let deltas = if self.delta.is_empty() {
            vec![base.rectifier.delta]
        } else {
            self.delta.clone()
        };
        let strengths = if self.strength.is_empty() {
            vec![base.rectifier.s_base]
        } else {
            self.strength.clone()
        };
        let mut out = Vec::with_capacity(ks.len() * deltas.len() * strengths.len());
        for &k in &ks {
            for &delta in &deltas {
                for &strength in &strengths {
                    let mut cfg = base.clone();
                    cfg.k = k;
                    cfg.rectifier.delta = delta;
                    cfg.rectifier.s_base = strength;
                    out.push(cfg);
                }
            }
        }
        out
    }
}

/// One sweep run; `outcome` holds the error text when the run failed.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub run: usize,
    pub config: PipelineConfig,
    pub outcome: std::result::Result<RunOutput, String>,
}

fn run_dir_name(run: usize) -> String {
    format!("run-{run:03}")
}

/// Runs every grid point. Data loading, kNN, PCA initialization and curvature
/// are computed once per distinct `k`. With `base.out_dir` set, each run
/// writes its artifacts to `run-NNN/` and `summary.csv` lists all runs.
pub fn sweep(base: &PipelineConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    stage("config", base.validate())?;
    let cloud = load_input(base)?;

    let mut configs = grid.configs(base);
    for (run, cfg) in configs.iter_mut().enumerate() {
        cfg.out_dir = base.out_dir.as_ref().map(|d| d.join(run_dir_name(run)));
    }

    let mut distinct_k: Vec<usize> = configs.iter().map(|c| c.k).collect();
    distinct_k.sort_unstable();
    distinct_k.dedup();
    type Shared = std::result::Result<(Prepared, Option<Vec<EdgeCurvature>>), String>;
    let shared: BTreeMap<usize, Shared> = distinct_k
        .iter()
        .map(|&k| {
            let cfg = PipelineConfig { k, ..base.clone() };
            let built = prepare(&cfg, cloud.clone()).and_then(|p| {
                let c = curvature_stage(&cfg, &p)?;
                Ok((p, c))
            });
            (k, built.map_err(|e| e.to_string()))
        })
        .collect();

    let indexed: Vec<(usize, PipelineConfig)> = configs.into_iter().enumerate().collect();
    let rows = par::map_slice(&indexed, |(run, cfg)| {
        let outcome = match &shared[&cfg.k] {
            Err(msg) => Err(msg.clone()),
            Ok((prepared, curv)) => cfg
                .validate()
                .and_then(|_| finish(cfg, prepared, curv.as_deref()))
                .and_then(|out| {
                    if let Some(dir) = &cfg.out_dir {
                        write_run(&out, dir, cfg.plot)?;
                    }
                    Ok(out)
                })
                .map_err(|e| e.to_string()),
        };
        SweepRow {
            run: *run,
            config: cfg.clone(),
            outcome,
        }
    });

    if let Some(dir) = &base.out_dir {
        write_summary(&rows, &dir.join(SUMMARY_FILE))?;
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One CSV row per run with every metric field.
pub fn write_summary(rows: &[SweepRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = csv::Writer::from_writer(file);
    out.write_record([
        "run",
        "k",
        "delta",
        "strength",
        "mode",
        "status",
        "n_edges",
        "skeleton",
        "intra_cluster",
        "noise",
        "rte",
        "rte_stddev",
        "cte",
        "knn_acc",
        "components",
        "largest_fraction",
        "error",
    ])?;
    for row in rows {
        let cfg = &row.config;
        let mut record = vec![
            row.run.to_string(),
            cfg.k.to_string(),
            cfg.rectifier.delta.to_string(),
            cfg.rectifier.s_base.to_string(),
            cfg.rectify.label().to_string(),
        ];
        match &row.outcome {
            Ok(out) => {
                let counts = out.rectification.as_ref().map(BranchCounts::of);
                let count = |f: fn(&BranchCounts) -> usize| counts.as_ref().map_or_else(String::new, |c| f(c).to_string());
                let m = &out.metrics;
                record.extend([
                    "ok".to_string(),
                    out.manifest.n_edges.to_string(),
                    count(|c| c.skeleton),
                    count(|c| c.intra_cluster),
                    count(|c| c.noise),
                    m.rte.to_string(),
                    m.rte_stddev.to_string(),
                    opt(m.cte),
                    opt(m.knn_acc),
                    m.components.to_string(),
                    m.largest_fraction.to_string(),
                    String::new(),
                ]);
            }
            Err(msg) => {
                record.push("failed".to_string());
                record.extend(std::iter::repeat_n(String::new(), 10));
                record.push(msg.clone());
            }
        }
        out.write_record(&record)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
