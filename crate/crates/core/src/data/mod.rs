//! Sparse binary-labelled datasets: the LIBSVM text format, feature scaling,
//! seeded splits and label noise, and synthetic data.

mod libsvm;
mod synth;
mod transform;

pub use libsvm::{
    parse_libsvm, parse_libsvm_str, read_libsvm_file, write_libsvm, write_libsvm_file,
};
pub use synth::synth_gaussian;
pub use transform::{
    flip_count, flip_labels, kfold_indices, normalize_apply, normalize_fit, shuffle,
    split_train_test, NormalizationParams,
};

use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid sparse vector: {0}")]
    InvalidVector(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature map with 1-based, strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: Vec<(u32, f64)>) -> Result<Self, DataError> {
        let mut prev = 0u32;
        for &(i, _) in &pairs {
            if i == 0 {
                return Err(DataError::InvalidVector(
                    "index 0 (indices are 1-based)".into(),
                ));
            }
            if i <= prev {
                return Err(DataError::InvalidVector(format!(
                    "indices not strictly increasing: {prev} then {i}"
                )));
            }
            prev = i;
        }
        let (indices, values) = pairs.into_iter().unzip();
        Ok(Self { indices, values })
    }

    /// Dense slice to sparse form, skipping exact zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i as u32 + 1, v))
            .unzip();
        Self { indices, values }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_index(&self) -> u32 {
        self.indices.last().copied().unwrap_or(0)
    }

    /// Value at 1-based `index`, zero when absent.
    pub fn get(&self, index: u32) -> f64 {
        self.indices
            .binary_search(&index)
            .map_or(0.0, |pos| self.values[pos])
    }

    /// `<w, x>` against a dense vector indexed from 0; indices past the end
    /// of `w` contribute nothing.
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.entries()
            .filter_map(|(i, v)| w.get(i as usize - 1).map(|wi| wi * v))
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_sign(v: f64) -> Self {
        if v >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "+1",
            Label::Negative => "-1",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: SparseVector,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub source: String,
    /// Fraction of labels flipped relative to the source.
    pub noise_fraction: f64,
    /// Seed of the last seeded transformation applied.
    pub seed: Option<u64>,
}

impl DatasetMeta {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            noise_fraction: 0.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    /// At least the largest feature index present.
    pub dimension: usize,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Builds a dataset whose dimension is the largest index present.
    pub fn new(instances: Vec<Instance>, meta: DatasetMeta) -> Self {
        let dimension = instances
            .iter()
            .map(|x| x.features.max_index() as usize)
            .max()
            .unwrap_or(0);
        Self {
            instances,
            dimension,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// New dataset holding the instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            dimension: self.dimension,
            meta: self.meta.clone(),
        }
    }

    /// Dataset without the instances at `excluded`, original order kept.
    pub fn without(&self, excluded: &[usize]) -> Dataset {
        let mut keep = vec![true; self.len()];
        for &i in excluded {
            keep[i] = false;
        }
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep[i]).collect();
        self.subset(&idx)
    }

    pub fn with_dimension(mut self, dimension: usize) -> Dataset {
        self.dimension = self.dimension.max(dimension);
        self
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let pos = self
            .instances
            .iter()
            .filter(|x| x.label == Label::Positive)
            .count();
        pos as f64 / self.len() as f64
    }
}
