use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureConfig;
use crate::dataio::{self, PointCloud};
use crate::embed::LayoutConfig;
use crate::rectify::RectifierConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    SwissRoll,
    SCurve,
    Trefoil,
    ThreeRings,
}

impl GeneratorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "swiss_roll" => Ok(Self::SwissRoll),
            "s_curve" => Ok(Self::SCurve),
            "trefoil" => Ok(Self::Trefoil),
            "three_rings" => Ok(Self::ThreeRings),
            other => Err(Error::invalid(format!(
                "unknown generator {other:?} (expected swiss_roll, s_curve, trefoil or three_rings)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    /// Sample count; points per ring for the three-ring dataset.
    pub n: usize,
    /// Coordinate noise; bridge jitter for the three-ring dataset.
    pub noise_sd: f64,
    /// Bridge points per gap (three-ring dataset only).
    pub n_bridge: usize,
}

impl GeneratorSpec {
    pub fn generate(&self, seed: u64) -> Result<PointCloud> {
        match self.kind {
            GeneratorKind::SwissRoll => dataio::gen_swiss_roll(self.n, self.noise_sd, seed),
            GeneratorKind::SCurve => dataio::gen_s_curve(self.n, self.noise_sd, seed),
            GeneratorKind::Trefoil => dataio::gen_trefoil(self.n, self.noise_sd, seed),
            GeneratorKind::ThreeRings => dataio::gen_three_rings(self.n, self.n_bridge, self.noise_sd, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    Csv {
        path: PathBuf,
        label_column: Option<String>,
    },
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectifyMode {
    /// Curvature + overlap reweighting.
    On,
    /// Plain UMAP; curvature is never computed.
    Off,
    /// Curvature is computed but weights are passed through unchanged.
    Identity,
}

impl RectifyMode {
    pub fn label(self) -> &'static str {
        match self {
            RectifyMode::On => "jorc",
            RectifyMode::Off => "baseline",
            RectifyMode::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnMethod {
    Exact,
    Approx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: InputSpec,
    pub k: usize,
    pub knn: KnnMethod,
    pub rectify: RectifyMode,
    pub rectifier: RectifierConfig,
    pub curvature: CurvatureConfig,
    /// `layout.seed` is ignored; the layout seed derives from `seed`.
    pub layout: LayoutConfig,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub plot: bool,
}

impl PipelineConfig {
    pub fn new(input: InputSpec) -> Self {
        Self {
            input,
            k: 15,
            knn: KnnMethod::Exact,
            rectify: RectifyMode::On,
            rectifier: RectifierConfig::default(),
            curvature: CurvatureConfig::default(),
            layout: LayoutConfig::default(),
            seed: 42,
            out_dir: None,
            plot: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        self.layout.validate()?;
        if self.rectify != RectifyMode::Off {
            self.rectifier.validate()?;
            if !(0.0..=1.0).contains(&self.curvature.alpha) {
                return Err(Error::invalid(format!("alpha must lie in [0, 1], got {}", self.curvature.alpha)));
            }
        }
        Ok(())
    }
}

/// Stable 64-bit seed for a named stage.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    // FNV-1a over the stage name, then a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in stage.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
