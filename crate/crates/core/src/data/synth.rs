use super::{DataError, Dataset, DatasetMeta, Instance, Label, SparseVector};
use crate::rng::SeededRng;

/// Two unit-variance spherical Gaussians centred at `±(separation / 2) e_1`,
/// `n / 2` points each. Labels alternate `+1, -1, ...`; every row stores all
/// `dim` coordinates.
pub fn synth_gaussian(
    n: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(DataError::InvalidArgument(format!(
            "n must be positive and even, got {n}"
        )));
    }
    if dim == 0 {
        return Err(DataError::InvalidArgument("dim must be at least 1".into()));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(DataError::InvalidArgument(format!(
            "separation must be positive, got {separation}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let half = separation / 2.0;
    let instances = (0..n)
        .map(|i| {
            let label = if i % 2 == 0 {
                Label::Positive
            } else {
                Label::Negative
            };
            let pairs = (0..dim)
                .map(|k| {
                    let shift = if k == 0 { half * label.as_f64() } else { 0.0 };
                    (k as u32 + 1, rng.next_normal() + shift)
                })
                .collect();
            Instance {
                features: SparseVector::from_pairs(pairs).expect("indices are 1..=dim"),
                label,
            }
        })
        .collect();
    let mut meta = DatasetMeta::new(format!("synth_gaussian(n={n},dim={dim},sep={separation})"));
    meta.seed = Some(seed);
    Ok(Dataset {
        instances,
        dimension: dim,
        meta,
    })
}
