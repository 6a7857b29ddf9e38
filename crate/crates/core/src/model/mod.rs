//! Networks, the AMSGRAD optimizer and the training loop for every method.

pub mod amsgrad;
pub mod checkpoint;
pub mod mlp;

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use amsgrad::{Amsgrad, AmsgradConfig};
pub use mlp::Mlp;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::links::{classify, confidence_rejector, hinge_threshold_rejector, inverse_link_ce, inverse_link_ova};
use crate::losses::{Label, MarginLoss, PairwiseLossSpec, RejectionCost, Surrogate};

/// A learning method with all of its loss parameters fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    OvaLogistic,
    OvaExponential,
    /// OVA hinge with the rejector `max g − τ`.
    OvaHinge {
        tau: f64,
    },
    Ce,
    Apc {
        phi: MarginLoss,
        psi: MarginLoss,
        alpha: f64,
        beta: f64,
    },
    Mpc {
        phi: MarginLoss,
        psi: MarginLoss,
        psi_gate: MarginLoss,
        alpha: f64,
        beta: f64,
    },
}

impl Method {
    /// The surrogate minimized during training.
    pub fn surrogate(&self, c: RejectionCost) -> Result<Surrogate> {
        Ok(match *self {
            Method::OvaLogistic => Surrogate::Ova(MarginLoss::Logistic),
            Method::OvaExponential => Surrogate::Ova(MarginLoss::Exponential),
            Method::OvaHinge { .. } => Surrogate::Ova(MarginLoss::Hinge),
            Method::Ce => Surrogate::Ce,
            Method::Apc { phi, psi, alpha, beta } => Surrogate::Apc(PairwiseLossSpec::new(phi, psi, alpha, beta, c)?),
            Method::Mpc {
                phi,
                psi,
                psi_gate,
                alpha,
                beta,
            } => Surrogate::Mpc(PairwiseLossSpec::new(phi, psi, alpha, beta, c)?.with_gate(psi_gate)),
        })
    }

    /// Classifier-rejector methods learn a separate rejector network.
    pub fn has_rejector_net(&self) -> bool {
        matches!(self, Method::Apc { .. } | Method::Mpc { .. })
    }

    /// Whether the trained model depends on the rejection cost.
    pub fn depends_on_cost(&self) -> bool {
        matches!(self, Method::Apc { .. } | Method::Mpc { .. } | Method::OvaHinge { .. })
    }

    pub fn name(&self) -> String {
        match self {
            Method::OvaLogistic => "ova_logistic".into(),
            Method::OvaExponential => "ova_exponential".into(),
            Method::OvaHinge { .. } => "ova_hinge".into(),
            Method::Ce => "ce".into(),
            Method::Apc { phi, .. } => format!("apc_{phi}"),
            Method::Mpc { phi, .. } => format!("mpc_{phi}"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A classifier network, optionally paired with a scalar rejector network.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub method: Method,
    pub classifier: Mlp,
    pub rejector: Option<Mlp>,
}

impl TrainedModel {
    pub fn new(method: Method, classifier: Mlp, rejector: Option<Mlp>) -> Result<Self> {
        if method.has_rejector_net() != rejector.is_some() {
            return Err(Error::InvalidArgument(format!(
                "method {method} {} a rejector network",
                if method.has_rejector_net() { "needs" } else { "does not take" }
            )));
        }
        if let Some(r) = &rejector {
            if r.output_dim() != 1 || r.input_dim() != classifier.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: classifier.input_dim(),
                    found: r.input_dim(),
                });
            }
        }
        Ok(TrainedModel {
            method,
            classifier,
            rejector,
        })
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.classifier.forward(x)?.into_inner())
    }

    /// Predicted label and rejector value (reject when `<= 0`) at cost `c`.
    pub fn decide(&self, x: &[f64], c: RejectionCost) -> Result<(Label, f64)> {
        let g = self.scores(x)?;
        let r = match self.method {
            Method::OvaLogistic => confidence_rejector(&inverse_link_ova(MarginLoss::Logistic, &g), c)?,
            Method::OvaExponential => confidence_rejector(&inverse_link_ova(MarginLoss::Exponential, &g), c)?,
            Method::Ce => confidence_rejector(&inverse_link_ce(&g), c)?,
            Method::OvaHinge { tau } => hinge_threshold_rejector(&g, tau)?,
            Method::Apc { .. } | Method::Mpc { .. } => {
                let net = self.rejector.as_ref().expect("checked at construction");
                net.forward(x)?[0]
            }
        };
        Ok((classify(&g), r))
    }
}

/// Gradients for the classifier and, when present, the rejector network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub classifier: Vec<f64>,
    pub rejector: Option<Vec<f64>>,
}

/// Mean surrogate loss over `batch` (positions into `data`) and its gradient.
///
/// A non-finite loss is reported as [`Error::Divergence`] with the offending
/// example position and epoch 0; the trainer fills in the epoch.
pub fn loss_and_grad(
    method: &Method,
    c: RejectionCost,
    classifier: &Mlp,
    rejector: Option<&Mlp>,
    data: &Dataset,
    batch: &[usize],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if classifier.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: classifier.input_dim(),
            found: data.dim(),
        });
    }
    if classifier.output_dim() != data.classes() {
        return Err(Error::DimensionMismatch {
            expected: classifier.output_dim(),
            found: data.classes(),
        });
    }
    let surrogate = method.surrogate(c)?;
    if surrogate.uses_rejector() != rejector.is_some() {
        return Err(Error::InvalidArgument("rejector network does not match the method".into()));
    }
    let k = classifier.output_dim();
    let mut grad_c = vec![0.0; classifier.params().len()];
    let mut grad_r = rejector.map(|r| vec![0.0; r.params().len()]);
    let mut hidden = vec![0.0; classifier.hidden_dim()];
    let mut out = vec![0.0; k];
    let mut dg = vec![0.0; k];
    let mut rej_hidden = vec![0.0; rejector.map_or(0, |r| r.hidden_dim())];
    let mut rej_out = [0.0];
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;

    for &i in batch {
        let x = data.row(i);
        classifier.forward_into(x, &mut hidden, &mut out);
        let r = rejector.map(|net| {
            net.forward_into(x, &mut rej_hidden, &mut rej_out);
            rej_out[0]
        });
        let (loss, dr) = surrogate.loss_grad(&out, r, data.label(i), &mut dg)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch: 0, index: i });
        }
        total += loss;
        dg.iter_mut().for_each(|d| *d *= scale);
        classifier.backward(x, &hidden, &dg, &mut grad_c);
        if let (Some(net), Some(gr)) = (rejector, grad_r.as_mut()) {
            net.backward(x, &rej_hidden, &[dr * scale], gr);
        }
    }
    Ok((
        total * scale,
        Gradients {
            classifier: grad_c,
            rejector: grad_r,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    /// Cost the classifier-rejector losses are trained for; unused otherwise.
    pub cost: RejectionCost,
    pub epochs: usize,
    /// `None` means the full batch up to 1024 examples, 256 beyond.
    pub batch_size: Option<usize>,
    pub hidden: usize,
    pub optimizer: AmsgradConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub const FULL_BATCH_LIMIT: usize = 1024;
    pub const MINI_BATCH: usize = 256;

    pub fn new(method: Method, cost: RejectionCost) -> Self {
        TrainConfig {
            method,
            cost,
            epochs: 100,
            batch_size: None,
            hidden: 3,
            optimizer: AmsgradConfig::default(),
            seed: 0,
        }
    }

    pub fn effective_batch(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.clamp(1, n.max(1)),
            None if n <= Self::FULL_BATCH_LIMIT => n,
            None => Self::MINI_BATCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    /// Mean training loss per epoch.
    pub trace: Vec<f64>,
}

/// Trains from a seeded initialization. Identical configs and data give
/// bitwise-identical models and traces.
pub fn train(config: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = data.dim();
    let mut classifier = Mlp::init(d, config.hidden, data.classes(), &mut rng);
    let mut rejector = config
        .method
        .has_rejector_net()
        .then(|| Mlp::init(d, config.hidden, 1, &mut rng));
    let mut opt_c = Amsgrad::new(config.optimizer, classifier.params().len());
    let mut opt_r = rejector.as_ref().map(|r| Amsgrad::new(config.optimizer, r.params().len()));

    let n = data.len();
    let batch = config.effective_batch(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let (loss, grads) = loss_and_grad(&config.method, config.cost, &classifier, rejector.as_ref(), data, chunk)
                .map_err(|e| match e {
                    Error::Divergence { index, .. } => Error::Divergence { epoch, index },
                    other => other,
                })?;
            epoch_loss += loss * chunk.len() as f64;
            opt_c.step(classifier.params_mut(), &grads.classifier)?;
            if let (Some(net), Some(opt), Some(g)) = (rejector.as_mut(), opt_r.as_mut(), grads.rejector.as_ref()) {
                opt.step(net.params_mut(), g)?;
            }
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() || classifier.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch, index: 0 });
        }
        trace.push(mean);
    }
    Ok(TrainOutcome {
        model: TrainedModel::new(config.method, classifier, rejector)?,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_data() -> Dataset {
        let feats = vec![0.5, -1.0, 1.5, 0.2, -0.3, 0.8, 1.0, 1.0];
        let labels = [0, 1, 2, 1].map(Label::from_index).to_vec();
        Dataset::new(feats, labels, 2, 3).unwrap()
    }

    #[test]
    fn ce_loss_of_zero_net_is_log_k() {
        let data = tiny_data();
        let net = Mlp::zeros(2, 3, 3);
        let (loss, _) = loss_and_grad(&Method::Ce, RejectionCost::new(0.2).unwrap(), &net, None, &data, &[0]).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejector_mismatch_is_an_error() {
        let data = tiny_data();
        let net = Mlp::zeros(2, 3, 3);
        let c = RejectionCost::new(0.2).unwrap();
        let apc = Method::Apc {
            phi: MarginLoss::Logistic,
            psi: MarginLoss::Logistic,
            alpha: 1.0,
            beta: 1.0,
        };
        assert!(loss_and_grad(&apc, c, &net, None, &data, &[0]).is_err());
        assert!(loss_and_grad(&Method::Ce, c, &net, None, &data, &[]).is_err());
    }

    #[test]
    fn batch_size_rule() {
        let cfg = TrainConfig::new(Method::Ce, RejectionCost::new(0.1).unwrap());
        assert_eq!(cfg.effective_batch(1024), 1024);
        assert_eq!(cfg.effective_batch(1025), 256);
    }

    #[test]
    fn training_is_deterministic() {
        let data = tiny_data();
        let mut cfg = TrainConfig::new(
            Method::Mpc {
                phi: MarginLoss::Logistic,
                psi: MarginLoss::Logistic,
                psi_gate: MarginLoss::Logistic,
                alpha: 1.0,
                beta: 4.0,
            },
            RejectionCost::new(0.2).unwrap(),
        );
        cfg.epochs = 5;
        cfg.seed = 9;
        let a = train(&cfg, &data).unwrap();
        let b = train(&cfg, &data).unwrap();
        assert_eq!(a, b);
        cfg.seed = 10;
        assert_ne!(train(&cfg, &data).unwrap().trace, a.trace);
    }
}
