use super::{DataError, Dataset, Instance, SparseVector};
use crate::rng::SeededRng;
use serde::{Deserialize, Serialize};

/// Per-feature `[min, max]` over the training rows. Absent entries count as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormalizationParams {
    pub fn dimension(&self) -> usize {
        self.mins.len()
    }

    /// Image of `v` for 1-based feature `index`, clipped to `[0, 1]`.
    /// Constant features and features unseen in training map to 0.
    pub fn scale(&self, index: u32, v: f64) -> f64 {
        let i = index as usize - 1;
        if i >= self.mins.len() {
            return 0.0;
        }
        let (lo, hi) = (self.mins[i], self.maxs[i]);
        if hi <= lo {
            return 0.0;
        }
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

pub fn normalize_fit(train: &Dataset) -> NormalizationParams {
    let d = train.dimension;
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    let mut present = vec![0usize; d];
    for inst in &train.instances {
        for (i, v) in inst.features.entries() {
            let k = i as usize - 1;
            mins[k] = mins[k].min(v);
            maxs[k] = maxs[k].max(v);
            present[k] += 1;
        }
    }
    for k in 0..d {
        if present[k] < train.len() {
            mins[k] = mins[k].min(0.0);
            maxs[k] = maxs[k].max(0.0);
        }
        if present[k] == 0 {
            (mins[k], maxs[k]) = (0.0, 0.0);
        }
    }
    NormalizationParams { mins, maxs }
}

/// Maps every feature into `[0, 1]` with training statistics. Features whose
/// zero maps to a positive value (negative training minimum) are written
/// explicitly even when absent from the input row; zero outputs are dropped.
pub fn normalize_apply(data: &Dataset, params: &NormalizationParams) -> Dataset {
    let zero_images: Vec<(u32, f64)> = (1..=params.dimension() as u32)
        .map(|i| (i, params.scale(i, 0.0)))
        .filter(|&(_, v)| v != 0.0)
        .collect();
    let instances = data
        .instances
        .iter()
        .map(|inst| {
            let mut out: Vec<(u32, f64)> = Vec::with_capacity(inst.features.len());
            let mut implicit = zero_images.iter().peekable();
            for (i, v) in inst.features.entries() {
                while let Some(&&(j, z)) = implicit.peek() {
                    if j >= i {
                        break;
                    }
                    out.push((j, z));
                    implicit.next();
                }
                if implicit.peek().is_some_and(|&&(j, _)| j == i) {
                    implicit.next();
                }
                out.push((i, params.scale(i, v)));
            }
            out.extend(implicit.copied());
            out.retain(|&(_, v)| v != 0.0);
            Instance {
                features: SparseVector::from_pairs(out).expect("indices stay sorted"),
                label: inst.label,
            }
        })
        .collect();
    Dataset {
        instances,
        dimension: data.dimension,
        meta: data.meta.clone(),
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Number of labels [`flip_labels`] negates: `round_half_up(fraction * n)`.
pub fn flip_count(n: usize, fraction: f64) -> usize {
    round_half_up(fraction * n as f64).min(n)
}

/// Seeded split; both parts keep the original relative order.
pub fn split_train_test(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = round_half_up(test_fraction * data.len() as f64).min(data.len());
    let mut rng = SeededRng::new(seed);
    let mut test_idx = rng.sample_indices(data.len(), n_test);
    test_idx.sort_unstable();
    let mut test = data.subset(&test_idx);
    let mut train = data.without(&test_idx);
    train.meta.seed = Some(seed);
    test.meta.seed = Some(seed);
    Ok((train, test))
}

/// Negates exactly `round_half_up(fraction * n)` labels chosen uniformly
/// without replacement. Features and order are untouched.
pub fn flip_labels(data: &Dataset, fraction: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DataError::InvalidArgument(format!(
            "noise fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let k = flip_count(data.len(), fraction);
    let mut rng = SeededRng::new(seed);
    let mut out = data.clone();
    for i in rng.sample_indices(data.len(), k) {
        out.instances[i].label = out.instances[i].label.flipped();
    }
    out.meta.noise_fraction = fraction;
    out.meta.seed = Some(seed);
    Ok(out)
}

pub fn shuffle(data: &Dataset, seed: u64) -> Dataset {
    let perm = SeededRng::new(seed).permutation(data.len());
    let mut out = data.subset(&perm);
    out.meta.seed = Some(seed);
    out
}

/// `k` disjoint folds covering `0..n`; the first `n % k` folds get one extra
/// index. Each fold is sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, DataError> {
    if k < 2 || k > n {
        return Err(DataError::InvalidArgument(format!(
            "fold count must satisfy 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let perm = SeededRng::new(seed).permutation(n);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}
