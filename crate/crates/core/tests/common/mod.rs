//! Test oracles written independently of the library's training code.
#![allow(dead_code)]

use abstain::data::Dataset;
use abstain::losses::{Label, MarginLoss, RejectionCost};
use abstain::model::{loss_and_grad, Method, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The six method families with fixed loss parameters.
pub fn six_methods() -> Vec<Method> {
    vec![
        Method::OvaLogistic,
        Method::OvaExponential,
        Method::OvaHinge { tau: 0.0 },
        Method::Ce,
        Method::Apc {
            phi: MarginLoss::Exponential,
            psi: MarginLoss::Exponential,
            alpha: 1.0,
            beta: 4.0,
        },
        Method::Mpc {
            phi: MarginLoss::Logistic,
            psi: MarginLoss::Logistic,
            psi_gate: MarginLoss::Logistic,
            alpha: 1.0,
            beta: 2.5,
        },
    ]
}

/// Direct evaluation of `[W1, b1, W2, b2]` with ReLU, no shared buffers.
pub fn reference_forward(p: &[f64], d: usize, h: usize, out: usize, x: &[f64]) -> Vec<f64> {
    let (w1, rest) = p.split_at(h * d);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(out * h);
    let hidden: Vec<f64> = (0..h)
        .map(|j| (b1[j] + (0..d).map(|i| w1[j * d + i] * x[i]).sum::<f64>()).max(0.0))
        .collect();
    (0..out)
        .map(|k| b2[k] + (0..h).map(|j| w2[k * h + j] * hidden[j]).sum::<f64>())
        .collect()
}

/// Mean surrogate loss with both networks given as flat parameter vectors.
pub fn reference_loss(
    method: &Method,
    c: RejectionCost,
    dims: (usize, usize, usize),
    cls: &[f64],
    rej: Option<&[f64]>,
    data: &Dataset,
) -> f64 {
    let (d, h, k) = dims;
    let loss = method.surrogate(c).unwrap();
    let mut total = 0.0;
    for (x, y) in data.rows() {
        let g = reference_forward(cls, d, h, k, x);
        let r = rej.map(|p| reference_forward(p, d, h, 1, x)[0]);
        total += loss.loss(&g, r, y).unwrap();
    }
    total / data.len() as f64
}

/// Random dataset and networks with every parameter, biases included, drawn
/// from N(0, 1)-like noise.
pub fn random_instance(method: &Method, seed: u64) -> (Dataset, Mlp, Option<Mlp>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, h, k, n) = (3, 4, 4, 6);
    let feats: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let labels: Vec<Label> = (0..n).map(|i| Label::from_index(i % k)).collect();
    let data = Dataset::new(feats, labels, d, k).unwrap();
    let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let cls = Mlp::from_params(d, h, k, draw(Mlp::param_count(d, h, k))).unwrap();
    let rej = method
        .has_rejector_net()
        .then(|| Mlp::from_params(d, h, 1, draw(Mlp::param_count(d, h, 1))).unwrap());
    (data, cls, rej)
}

/// Norm-wise relative error between analytic and central-difference
/// gradients over both networks.
pub fn gradient_error(method: &Method, c: RejectionCost, seed: u64, step: f64) -> f64 {
    let (data, cls, rej) = random_instance(method, seed);
    let dims = (cls.input_dim(), cls.hidden_dim(), cls.output_dim());
    let batch: Vec<usize> = (0..data.len()).collect();
    let (_, grads) = loss_and_grad(method, c, &cls, rej.as_ref(), &data, &batch).unwrap();
    let mut analytic = grads.classifier.clone();
    analytic.extend(grads.rejector.clone().unwrap_or_default());

    let cp = cls.params().to_vec();
    let rp = rej.as_ref().map(|r| r.params().to_vec());
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..cp.len() {
        let mut plus = cp.clone();
        let mut minus = cp.clone();
        plus[i] += step;
        minus[i] -= step;
        let f = |p: &[f64]| reference_loss(method, c, dims, p, rp.as_deref(), &data);
        numeric.push((f(&plus) - f(&minus)) / (2.0 * step));
    }
    if let Some(rp) = &rp {
        for i in 0..rp.len() {
            let mut plus = rp.clone();
            let mut minus = rp.clone();
            plus[i] += step;
            minus[i] -= step;
            let f = |p: &[f64]| reference_loss(method, c, dims, &cp, Some(p), &data);
            numeric.push((f(&plus) - f(&minus)) / (2.0 * step));
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-12)
}
