use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::losses::{Label, ProbVector, RejectionCost};
use crate::numeric::{derive_seed, softmax};

/// Isotropic Gaussian mixture with known class posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub means: Vec<Vec<f64>>,
    pub variance: f64,
    pub priors: Vec<f64>,
}

impl SyntheticSpec {
    pub const DEFAULT_CLASSES: usize = 8;
    pub const DEFAULT_VARIANCE: f64 = 0.2;
    pub const MEAN_BOX: f64 = 3.0;

    pub fn new(means: Vec<Vec<f64>>, variance: f64, priors: ProbVector) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        if priors.classes() != means.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                found: priors.classes(),
            });
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(Error::InvalidArgument("means must share one positive dimension".into()));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture means".into()));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
        }
        Ok(SyntheticSpec {
            means,
            variance,
            priors: priors.into_inner(),
        })
    }

    /// Means drawn uniformly from `[−3, 3]²`, variance 0.2, uniform priors.
    pub fn random(classes: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Self::MEAN_BOX;
        let means = (0..classes)
            .map(|_| vec![rng.random_range(-b..b), rng.random_range(-b..b)])
            .collect();
        Self::new(means, Self::DEFAULT_VARIANCE, ProbVector::uniform(classes))
    }

    pub fn classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn sample_point<R: Rng + ?Sized>(&self, class: usize, noise: &Normal<f64>, rng: &mut R, out: &mut Vec<f64>) {
        for &m in &self.means[class] {
            out.push(m + noise.sample(rng));
        }
    }

    fn noise(&self) -> Normal<f64> {
        Normal::new(0.0, self.variance.sqrt()).expect("positive variance")
    }
}

/// Exactly `n_per_class` draws from each component, grouped by class.
pub fn generate_synthetic(spec: &SyntheticSpec, n_per_class: usize, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = spec.noise();
    let k = spec.classes();
    let mut features = Vec::with_capacity(k * n_per_class * spec.dim());
    let mut labels = Vec::with_capacity(k * n_per_class);
    for class in 0..k {
        for _ in 0..n_per_class {
            spec.sample_point(class, &noise, &mut rng, &mut features);
            labels.push(Label::from_index(class));
        }
    }
    Dataset::new(features, labels, spec.dim(), k)
}

/// `n` draws from the mixture with labels drawn from the priors.
pub fn sample_mixture(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = spec.noise();
    let pick = WeightedIndex::new(&spec.priors).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut features = Vec::with_capacity(n * spec.dim());
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = pick.sample(&mut rng);
        spec.sample_point(class, &noise, &mut rng, &mut features);
        labels.push(Label::from_index(class));
    }
    Dataset::new(features, labels, spec.dim(), spec.classes())
}

/// Class posterior `η_y(x) ∝ π_y exp(−‖x − μ_y‖² / 2σ²)`.
pub fn true_eta(spec: &SyntheticSpec, x: &[f64]) -> Result<ProbVector> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: x.len(),
        });
    }
    let logits: Vec<f64> = spec
        .means
        .iter()
        .zip(&spec.priors)
        .map(|(m, &p)| {
            let d2: f64 = m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            p.ln() - d2 / (2.0 * spec.variance)
        })
        .collect();
    ProbVector::normalized(softmax(&logits))
}

const MC_CHUNK: usize = 1 << 16;

/// Monte-Carlo estimate of the Bayes 0-1-c risk `E[min{c, 1 − max η(x)}]` with its standard error.
pub fn bayes_risk_mc(spec: &SyntheticSpec, c: RejectionCost, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be at least 1".into()));
    }
    let chunks = n_mc.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let n = MC_CHUNK.min(n_mc - i * MC_CHUNK);
            let draws = sample_mixture(spec, n, derive_seed(seed, i as u64))?;
            let mut s = 0.0;
            let mut s2 = 0.0;
            for (x, _) in draws.rows() {
                let eta = true_eta(spec, x)?;
                let v = c.value().min(1.0 - eta.max());
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect::<Result<_>>()?;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_mc as f64;
    let mean = s / n;
    let var = if n_mc > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_far_classes() -> SyntheticSpec {
        SyntheticSpec::new(
            vec![vec![0.0, 0.0], vec![100.0, 0.0]],
            0.2,
            ProbVector::uniform(2),
        )
        .unwrap()
    }

    #[test]
    fn generation_is_seeded_and_balanced() {
        let spec = SyntheticSpec::random(8, 1).unwrap();
        let a = generate_synthetic(&spec, 10, 4).unwrap();
        assert_eq!(a, generate_synthetic(&spec, 10, 4).unwrap());
        assert_eq!(a.class_counts(), vec![10; 8]);
        assert!(spec.means.iter().flatten().all(|m| m.abs() <= 3.0));
        assert!(generate_synthetic(&spec, 0, 4).is_err());
    }

    #[test]
    fn class_means_converge() {
        let spec = SyntheticSpec::random(3, 2).unwrap();
        let n = 10_000;
        let data = generate_synthetic(&spec, n, 7).unwrap();
        let sigma = spec.variance.sqrt();
        for class in 0..3 {
            let rows: Vec<&[f64]> = data.rows().filter(|(_, l)| l.index() == class).map(|(x, _)| x).collect();
            for j in 0..2 {
                let mean = rows.iter().map(|x| x[j]).sum::<f64>() / n as f64;
                assert!((mean - spec.means[class][j]).abs() < 3.0 * sigma / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn posterior_examples() {
        let spec = SyntheticSpec::new(
            vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![50.0, 50.0]],
            0.2,
            ProbVector::uniform(3),
        )
        .unwrap();
        let eta = true_eta(&spec, &[0.0, 0.7]).unwrap();
        assert!((eta[0] - eta[1]).abs() < 1e-12);
        let eta = true_eta(&spec, &[-1.0, 0.0]).unwrap();
        assert!(eta[0] > 0.999);
        let far = true_eta(&spec, &[1e6, -1e6]).unwrap();
        assert!((far.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bayes_risk_examples() {
        let spec = SyntheticSpec::random(8, 3).unwrap();
        let (est, se) = bayes_risk_mc(&spec, RejectionCost::new(0.0).unwrap(), 1000, 1).unwrap();
        assert_eq!((est, se), (0.0, 0.0));
        let (est, _) = bayes_risk_mc(&two_far_classes(), RejectionCost::new(0.2).unwrap(), 10_000, 1).unwrap();
        assert!(est < 0.005);
        let c = RejectionCost::new(0.3).unwrap();
        let (est, _) = bayes_risk_mc(&spec, c, 5000, 2).unwrap();
        assert!((0.0..=0.3).contains(&est));
    }
}
