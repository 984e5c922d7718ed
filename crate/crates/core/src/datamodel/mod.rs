//! Feature matrices, labels, and the partially corresponded two-modality dataset.
//!
//! Correspondence is positional: rows `0..n_corr` of `x` and `y` describe the
//! same objects, every later row is unpaired.

mod io;
pub(crate) mod split;
mod synthetic;

pub use io::{
    load_feature_matrix, load_labels, read_manifest, save_feature_matrix, save_labels,
    write_manifest, MatrixFormat,
};
pub use split::split_dataset;
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Dense row-major matrix of finite reals, one row per item.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "feature matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
                row: None,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: pos / cols });
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                    row: Some(i),
                });
            }
            data.extend_from_slice(r);
        }
        FeatureMatrix::new(rows.len(), cols, data)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        let data = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| m[(i, j)]))
            .collect();
        FeatureMatrix::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix::new(idx.len(), self.cols, data)
    }
}

/// Class labels per item. Single-label data holds one id per item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    sets: Vec<Vec<i64>>,
}

impl Labels {
    pub fn single(ids: impl IntoIterator<Item = i64>) -> Self {
        Labels {
            sets: ids.into_iter().map(|id| vec![id]).collect(),
        }
    }

    /// Multi-label data; each set is sorted and deduplicated.
    pub fn multi(sets: Vec<Vec<i64>>) -> Self {
        let sets = sets
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        Labels { sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, i: usize) -> &[i64] {
        &self.sets[i]
    }

    pub fn is_multi(&self) -> bool {
        self.sets.iter().any(|s| s.len() != 1)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Labels {
            sets: idx.iter().map(|&i| self.sets[i].clone()).collect(),
        }
    }

    pub fn map_ids(&self, f: impl Fn(i64) -> i64) -> Self {
        Labels::multi(
            self.sets
                .iter()
                .map(|s| s.iter().map(|&id| f(id)).collect())
                .collect(),
        )
    }

    pub(crate) fn sets(&self) -> &[Vec<i64>] {
        &self.sets
    }
}

/// Two modalities whose first `n_corr` rows are corresponded pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModalDataset {
    pub x: FeatureMatrix,
    pub y: FeatureMatrix,
    n_corr: usize,
    pub labels_x: Option<Labels>,
    pub labels_y: Option<Labels>,
}

impl MultiModalDataset {
    pub fn new(
        x: FeatureMatrix,
        y: FeatureMatrix,
        n_corr: usize,
        labels_x: Option<Labels>,
        labels_y: Option<Labels>,
    ) -> Result<Self> {
        if n_corr > x.rows().min(y.rows()) {
            return Err(Error::InvalidParameter(format!(
                "n_corr {n_corr} exceeds rows ({}, {})",
                x.rows(),
                y.rows()
            )));
        }
        for (labels, m, name) in [(&labels_x, &x, "x"), (&labels_y, &y, "y")] {
            if let Some(l) = labels {
                if l.len() != m.rows() {
                    return Err(Error::InvalidParameter(format!(
                        "labels_{name} has {} entries for {} rows",
                        l.len(),
                        m.rows()
                    )));
                }
            }
        }
        Ok(MultiModalDataset {
            x,
            y,
            n_corr,
            labels_x,
            labels_y,
        })
    }

    pub fn n_corr(&self) -> usize {
        self.n_corr
    }

    /// Fraction of the larger modality that is corresponded.
    pub fn corr_ratio(&self) -> f64 {
        self.n_corr as f64 / self.x.rows().max(self.y.rows()) as f64
    }

    /// Same data with only the first `n_corr` rows treated as paired.
    pub fn with_n_corr(&self, n_corr: usize) -> Result<Self> {
        MultiModalDataset::new(
            self.x.clone(),
            self.y.clone(),
            n_corr,
            self.labels_x.clone(),
            self.labels_y.clone(),
        )
    }
}
