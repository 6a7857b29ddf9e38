//! Datasets: the synthetic Gaussian mixture, sparse benchmark files, splits and scaling.

mod dataset;
pub mod sparse;
pub mod synthetic;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dataset::Dataset;
pub use sparse::{parse_sparse, parse_sparse_str, write_sparse, write_sparse_string, SparseFile};
pub use synthetic::{bayes_risk_mc, generate_synthetic, sample_mixture, true_eta, SyntheticSpec};

use crate::error::{Error, Result};

/// Seeded shuffle, then the first `round(fraction · n)` rows go to the first
/// part. Both parts need not contain every class.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (fraction * data.len() as f64).round() as usize;
    Ok((data.subset(&idx[..cut]), data.subset(&idx[cut..])))
}

/// Per-feature centering and scaling fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation; constant features get scale 1.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("cannot standardize an empty dataset".into()));
        }
        let d = train.dim();
        let n = train.len() as f64;
        let mut mean = vec![0.0; d];
        for (x, _) in train.rows() {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for (x, _) in train.rows() {
            for j in 0..d {
                let t = x[j] - mean[j];
                var[j] += t * t;
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 * m.abs().max(1.0) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    /// Applies `(x − mean) / scale`. Not idempotent: applying twice shifts again.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: data.dim(),
            });
        }
        let mut out = data.clone();
        let d = self.mean.len();
        for (i, v) in out.features_mut().iter_mut().enumerate() {
            let j = i % d;
            *v = (*v - self.mean[j]) / self.scale[j];
        }
        Ok(out)
    }
}

/// Fits on `train` and transforms it together with `others`.
pub fn standardize(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>, Standardizer)> {
    let s = Standardizer::fit(train)?;
    let t = s.apply(train)?;
    let rest = others.iter().map(|o| s.apply(o)).collect::<Result<_>>()?;
    Ok((t, rest, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::Label;

    fn ramp(n: usize) -> Dataset {
        let feats: Vec<f64> = (0..n).flat_map(|i| [i as f64, 5.0]).collect();
        let labels = (0..n).map(|i| Label::from_index(i % 2)).collect();
        Dataset::new(feats, labels, 2, 2).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = ramp(100);
        let (a, b) = split(&d, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));
        assert_eq!(split(&d, 0.8, 3).unwrap(), (a.clone(), b.clone()));
        let mut all: Vec<f64> = a.rows().chain(b.rows()).map(|(x, _)| x[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..100).map(|i| i as f64).collect::<Vec<_>>());
        assert!(split(&d, 1.0, 3).is_err());
        assert!(split(&d, 0.0, 3).is_err());
    }

    #[test]
    fn standardize_rules() {
        let d = ramp(10);
        let (t, _, s) = standardize(&d, &[]).unwrap();
        assert_eq!(s.scale[1], 1.0);
        for j in 0..2 {
            let m: f64 = t.rows().map(|(x, _)| x[j]).sum::<f64>() / 10.0;
            assert!(m.abs() <= 1e-10);
        }
        assert!(t.rows().all(|(x, _)| x[1] == 0.0));
        let twice = s.apply(&t).unwrap();
        assert_ne!(twice, t);
    }
}
