use crate::error::{Error, Result};
use crate::losses::Label;

/// Dense labelled examples, features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<Label>,
    dim: usize,
    classes: usize,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<Label>, dim: usize, classes: usize) -> Result<Self> {
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|l| l.index() >= classes) {
            return Err(Error::InvalidLabel {
                label: bad.one_based(),
                classes,
            });
        }
        Ok(Dataset {
            features,
            labels,
            dim,
            classes,
            feature_names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub(crate) fn features_mut(&mut self) -> &mut [f64] {
        &mut self.features
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], Label)> {
        self.features.chunks_exact(self.dim.max(1)).zip(self.labels.iter().copied())
    }

    /// Examples at the given positions, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
            classes: self.classes,
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }
}
