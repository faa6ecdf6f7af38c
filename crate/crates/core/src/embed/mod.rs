//! Low-dimensional layout: PCA initialization and cross-entropy SGD.

mod kernel;
mod layout;
mod pca;

pub use kernel::{fit_ab, kernel, FIT_GRID_POINTS};
pub use layout::{
    attractive_gradient, attractive_loss, epochs_per_sample, optimize, EdgeSchedule, repulsive_gradient, repulsive_loss, CLIP,
};
pub use pca::{pca_init, pca_project, PcaProjection, PCA_SCALE};

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataio::write_matrix_csv;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: Array2<f64>,
    pub seed: u64,
    pub epochs_run: usize,
}

impl Embedding {
    pub fn new(coords: Array2<f64>, seed: u64) -> Result<Self> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding has non-finite coordinates"));
        }
        Ok(Self {
            coords,
            seed,
            epochs_run: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    /// CSV with columns `dim0..dim{d-1}[,label]`.
    pub fn write_csv(&self, path: &Path, labels: Option<&[i64]>) -> Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|c| format!("dim{c}")).collect();
        write_matrix_csv(path, &header, &self.coords, labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub d: usize,
    pub n_epochs: usize,
    pub learning_rate: f64,
    pub min_dist: f64,
    pub spread: f64,
    pub negative_sample_rate: usize,
    pub seed: u64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            d: 2,
            n_epochs: 500,
            learning_rate: 1.0,
            min_dist: 0.1,
            spread: 1.0,
            negative_sample_rate: 5,
            seed: 0,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("target dimension must be >= 1"));
        }
        if self.n_epochs == 0 {
            return Err(Error::invalid("n_epochs must be >= 1"));
        }
        if !(self.min_dist > 0.0 && self.spread > 0.0) {
            return Err(Error::invalid(format!(
                "min_dist and spread must be positive, got {} and {}",
                self.min_dist, self.spread
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}
