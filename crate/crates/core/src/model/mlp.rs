use rand::Rng;

use crate::error::{Error, Result};
use crate::losses::ScoreVector;

/// One-hidden-layer ReLU network with a flat parameter vector laid out as
/// `[W1 (h×d), b1 (h), W2 (out×h), b2 (out)]`, matrices row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    params: Vec<f64>,
}

impl Mlp {
    pub fn param_count(d: usize, h: usize, out: usize) -> usize {
        h * d + h + out * h + out
    }

    pub fn zeros(d: usize, h: usize, out: usize) -> Self {
        Mlp {
            input_dim: d,
            hidden_dim: h,
            output_dim: out,
            params: vec![0.0; Self::param_count(d, h, out)],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(d: usize, h: usize, out: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(d, h, out);
        let a1 = (6.0 / (d + h) as f64).sqrt();
        let a2 = (6.0 / (h + out) as f64).sqrt();
        let (w1, rest) = net.params.split_at_mut(h * d);
        for w in w1 {
            *w = rng.random_range(-a1..a1);
        }
        let w2 = &mut rest[h..h + out * h];
        for w in w2 {
            *w = rng.random_range(-a2..a2);
        }
        net
    }

    pub fn from_params(d: usize, h: usize, out: usize, params: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(d, h, out);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(Mlp {
            input_dim: d,
            hidden_dim: h,
            output_dim: out,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let (d, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        let b1 = h * d;
        let w2 = b1 + h;
        let b2 = w2 + o * h;
        (b1, w2, b2)
    }

    pub fn forward(&self, x: &[f64]) -> Result<ScoreVector> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; self.output_dim];
        self.forward_into(x, &mut hidden, &mut out);
        ScoreVector::new(out)
    }

    /// Writes post-activation hidden units and outputs. No dimension checks.
    pub(crate) fn forward_into(&self, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let (d, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        for j in 0..h {
            let row = &p[j * d..(j + 1) * d];
            let z: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + p[b1 + j];
            hidden[j] = z.max(0.0);
        }
        for k in 0..o {
            let row = &p[w2 + k * h..w2 + (k + 1) * h];
            out[k] = row.iter().zip(hidden.iter()).map(|(w, a)| w * a).sum::<f64>() + p[b2 + k];
        }
    }

    /// Adds `∂(dout · output)/∂θ` into `grad` given the cached hidden activations.
    pub(crate) fn backward(&self, x: &[f64], hidden: &[f64], dout: &[f64], grad: &mut [f64]) {
        let (d, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        for k in 0..o {
            let dk = dout[k];
            if dk == 0.0 {
                continue;
            }
            grad[b2 + k] += dk;
            for j in 0..h {
                grad[w2 + k * h + j] += dk * hidden[j];
            }
        }
        for j in 0..h {
            if hidden[j] <= 0.0 {
                continue;
            }
            let dh: f64 = (0..o).map(|k| dout[k] * p[w2 + k * h + j]).sum();
            grad[b1 + j] += dh;
            for (gw, xi) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                *gw += dh * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_gives_zero_scores() {
        let net = Mlp::zeros(3, 4, 2);
        assert_eq!(&*net.forward(&[1.0, -2.0, 0.5]).unwrap(), &[0.0, 0.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn hand_computed_tiny_net() {
        // d=2, h=1, out=1: relu(2 x1 - x2 + 0.5) * 3 - 1
        let net = Mlp::from_params(2, 1, 1, vec![2.0, -1.0, 0.5, 3.0, -1.0]).unwrap();
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap()[0], 3.0 * 1.5 - 1.0);
        assert_eq!(net.forward(&[-1.0, 1.0]).unwrap()[0], -1.0);
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::init(4, 6, 3, &mut rng);
        let a1 = (6.0f64 / 10.0).sqrt();
        assert!(net.params()[..24].iter().all(|w| w.abs() <= a1));
        assert!(net.params()[24..30].iter().all(|b| *b == 0.0));
        assert!(net.params()[48..].iter().all(|b| *b == 0.0));
    }

    #[test]
    fn forward_is_continuous_across_the_kink() {
        // hidden pre-activation crosses zero as the bias moves through -1
        let mut net = Mlp::from_params(1, 1, 1, vec![1.0, -1.0, 2.0, 0.0]).unwrap();
        let x = [1.0];
        let mut prev = net.forward(&x).unwrap()[0];
        for i in 1..=200 {
            net.params_mut()[1] = -1.0 + (i as f64 - 100.0) * 1e-4;
            let now = net.forward(&x).unwrap()[0];
            assert!((now - prev).abs() <= 2.0 * 1e-4 + 1e-15);
            prev = now;
        }
    }
}
