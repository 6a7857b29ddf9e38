//! Pointwise-risk minimization.
//!
//! Closed forms are used for CE and OVA. The pairwise losses are minimized
//! numerically: gradient descent with Barzilai-Borwein step proposals and
//! Armijo backtracking, and for MPC an alternating scheme over `g` and `r`
//! restarted from several random points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{Label, MarginLoss, ProbVector, ScoreVector, Surrogate};
use crate::numeric::{inf_norm, xlogx};

/// Coordinates of zero-probability classes in closed-form minimizers.
const SATURATED_SCORE: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizerOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Random restarts for the (non-convex) MPC problem.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        MinimizerOptions {
            grad_tol: 1e-10,
            max_iter: 100_000,
            restarts: 20,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerResult {
    pub g_opt: ScoreVector,
    pub r_opt: Option<f64>,
    pub w_min: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl MinimizerResult {
    fn into_checked(self, grad_norm: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                grad_norm,
            })
        }
    }
}

/// Minimizer of `W(g; η)` (or `W(r, g; η)` for the classifier-rejector losses).
///
/// Returns [`Error::NonConvergence`] when the gradient tolerance is not met.
pub fn pointwise_minimizer(loss: &Surrogate, eta: &ProbVector, with_rejector: bool) -> Result<MinimizerResult> {
    Minimizer::default().minimize(loss, eta, with_rejector)
}

/// Minimal per-coordinate OVA risk `inf_z η φ(z) + (1 − η) φ(−z)` and its minimizer.
pub fn ova_coordinate_min(phi: MarginLoss, eta: f64) -> (f64, f64) {
    let q = 1.0 - eta;
    match phi {
        MarginLoss::Logistic => {
            let value = -(xlogx(eta) + xlogx(q));
            (clamp_log_odds(eta, 1.0), value)
        }
        MarginLoss::Exponential => (clamp_log_odds(eta, 0.5), 2.0 * (eta * q).sqrt()),
        MarginLoss::Squared | MarginLoss::SquaredHinge => (2.0 * eta - 1.0, 4.0 * eta * q),
        MarginLoss::Hinge => {
            let z = if eta > 0.5 {
                1.0
            } else if eta < 0.5 {
                -1.0
            } else {
                0.0
            };
            (z, 2.0 * eta.min(q))
        }
    }
}

fn clamp_log_odds(eta: f64, scale: f64) -> f64 {
    if eta <= 0.0 {
        -SATURATED_SCORE
    } else if eta >= 1.0 {
        SATURATED_SCORE
    } else {
        (scale * (eta / (1.0 - eta)).ln()).clamp(-SATURATED_SCORE, SATURATED_SCORE)
    }
}

/// Outcome of one descent run.
#[derive(Debug, Clone)]
pub(crate) struct Descent {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Gradient descent on a smooth objective. `obj(x, grad)` returns the value
/// and writes the gradient. Coordinates with `mask[i] == false` are frozen.
pub(crate) fn descend<F>(obj: F, x0: Vec<f64>, mask: &[bool], grad_tol: f64, max_iter: usize) -> Descent
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut value = obj(&x, &mut grad);
    apply_mask(&mut grad, mask);
    let mut gnorm = inf_norm(&grad);
    let mut step = 1.0 / gnorm.max(1.0);
    let mut x_new = vec![0.0; n];
    let mut grad_new = vec![0.0; n];

    for it in 0..max_iter {
        if gnorm <= grad_tol {
            return Descent {
                x,
                value,
                grad_norm: gnorm,
                iterations: it,
                converged: true,
            };
        }
        if !value.is_finite() {
            break;
        }
        let sq: f64 = grad.iter().map(|d| d * d).sum();
        let mut t = step;
        let mut accepted = false;
        for _ in 0..80 {
            for i in 0..n {
                x_new[i] = x[i] - t * grad[i];
            }
            let v = obj(&x_new, &mut grad_new);
            apply_mask(&mut grad_new, mask);
            if v.is_finite() {
                let sufficient = v <= value - 1e-4 * t * sq;
                // near the optimum the decrease is below rounding; accept steps
                // that keep the value and shrink the gradient
                let roundoff = v <= value + 8.0 * f64::EPSILON * value.abs().max(1.0)
                    && inf_norm(&grad_new) < gnorm;
                if sufficient || roundoff {
                    accepted = true;
                    let mut sy = 0.0;
                    let mut ss = 0.0;
                    for i in 0..n {
                        let s = x_new[i] - x[i];
                        sy += s * (grad_new[i] - grad[i]);
                        ss += s * s;
                    }
                    step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { 2.0 * t };
                    std::mem::swap(&mut x, &mut x_new);
                    std::mem::swap(&mut grad, &mut grad_new);
                    value = v;
                    gnorm = inf_norm(&grad);
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Descent {
                x,
                value,
                grad_norm: gnorm,
                iterations: it,
                converged: false,
            };
        }
    }
    Descent {
        converged: gnorm <= grad_tol,
        x,
        value,
        grad_norm: gnorm,
        iterations: max_iter,
    }
}

fn apply_mask(grad: &mut [f64], mask: &[bool]) {
    for (d, &free) in grad.iter_mut().zip(mask) {
        if !free {
            *d = 0.0;
        }
    }
}

/// `W` and its gradient in `(g, r)`, stacked as `[g_1..g_K, r]`.
pub(crate) fn risk_and_grad(loss: &Surrogate, eta: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
    let k = eta.len();
    let (g, r) = x.split_at(k);
    let r = r.first().copied();
    grad.iter_mut().for_each(|d| *d = 0.0);
    let mut dg = vec![0.0; k];
    let mut w = 0.0;
    for (y, &p) in eta.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (l, dr) = loss
            .loss_grad(g, r, Label::from_index(y), &mut dg)
            .expect("dimensions checked by caller");
        w += p * l;
        for (acc, d) in grad[..k].iter_mut().zip(&dg) {
            *acc += p * d;
        }
        if let Some(slot) = grad.get_mut(k) {
            *slot += p * dr;
        }
    }
    w
}

#[derive(Debug, Clone, Default)]
pub struct Minimizer {
    pub options: MinimizerOptions,
}

impl Minimizer {
    pub fn new(options: MinimizerOptions) -> Self {
        Minimizer { options }
    }

    /// Minimizes `W`, reporting non-convergence as an error.
    pub fn minimize(&self, loss: &Surrogate, eta: &ProbVector, with_rejector: bool) -> Result<MinimizerResult> {
        let k = eta.classes();
        match loss {
            Surrogate::Ce => Ok(ce_closed_form(eta)),
            Surrogate::Ova(phi) => Ok(ova_closed_form(*phi, eta)),
            Surrogate::Apc(_) => {
                let start = vec![0.0; k + usize::from(with_rejector)];
                self.minimize_from(loss, eta, with_rejector, &start)
            }
            Surrogate::Mpc(_) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed);
                let mut best: Option<MinimizerResult> = None;
                let mut last_err = None;
                for attempt in 0..self.options.restarts.max(1) {
                    let mut start: Vec<f64> = (0..k + usize::from(with_rejector))
                        .map(|_| rng.random_range(-2.0..2.0))
                        .collect();
                    if attempt == 0 {
                        start.iter_mut().for_each(|v| *v = 0.0);
                    }
                    match self.minimize_from(loss, eta, with_rejector, &start) {
                        Ok(res) => {
                            if best.as_ref().is_none_or(|b| res.w_min < b.w_min) {
                                best = Some(res);
                            }
                        }
                        Err(e) => last_err = Some(e),
                    }
                }
                best.ok_or_else(|| last_err.expect("at least one restart"))
            }
        }
    }

    /// Numerical minimization from a given start `[g_1..g_K]` or `[g_1..g_K, r]`.
    pub fn minimize_from(
        &self,
        loss: &Surrogate,
        eta: &ProbVector,
        with_rejector: bool,
        start: &[f64],
    ) -> Result<MinimizerResult> {
        let k = eta.classes();
        let uses_r = loss.uses_rejector();
        let n = k + usize::from(uses_r);
        let expected = k + usize::from(uses_r && with_rejector);
        if start.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: start.len(),
            });
        }
        let mut x0 = start.to_vec();
        if uses_r && !with_rejector {
            x0.push(0.0);
        }
        let obj = |x: &[f64], grad: &mut [f64]| risk_and_grad(loss, eta, x, grad);
        let opts = &self.options;
        let all: Vec<bool> = (0..n).map(|i| i < k || with_rejector).collect();

        let descent = match loss {
            Surrogate::Mpc(_) if with_rejector => {
                let g_only: Vec<bool> = (0..n).map(|i| i < k).collect();
                let r_only: Vec<bool> = (0..n).map(|i| i == k).collect();
                let mut x = x0;
                let mut iterations = 0;
                let mut last = None;
                for _ in 0..50 {
                    let dg = descend(obj, x, &g_only, opts.grad_tol, opts.max_iter);
                    let dr = descend(obj, dg.x, &r_only, opts.grad_tol, opts.max_iter);
                    iterations += dg.iterations + dr.iterations;
                    let mut grad = vec![0.0; n];
                    let value = obj(&dr.x, &mut grad);
                    let gn = inf_norm(&grad);
                    x = dr.x;
                    last = Some(Descent {
                        x: x.clone(),
                        value,
                        grad_norm: gn,
                        iterations,
                        converged: gn <= opts.grad_tol,
                    });
                    if gn <= opts.grad_tol || iterations >= opts.max_iter {
                        break;
                    }
                }
                let mut d = last.expect("at least one sweep");
                if !d.converged {
                    // polish jointly; the block steps leave a coupled residual
                    let joint = descend(obj, d.x.clone(), &all, opts.grad_tol, opts.max_iter);
                    if joint.value <= d.value + 8.0 * f64::EPSILON * d.value.abs() {
                        d = Descent {
                            iterations: d.iterations + joint.iterations,
                            ..joint
                        };
                    }
                }
                d
            }
            _ => descend(obj, x0, &all, opts.grad_tol, opts.max_iter),
        };

        let grad_norm = descent.grad_norm;
        let mut x = descent.x;
        let r_opt = if uses_r { x.pop() } else { None };
        MinimizerResult {
            g_opt: ScoreVector::new(x)?,
            r_opt,
            w_min: descent.value,
            iterations: descent.iterations,
            converged: descent.converged,
        }
        .into_checked(grad_norm)
    }
}

fn ce_closed_form(eta: &ProbVector) -> MinimizerResult {
    let g: Vec<f64> = eta
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { -1e3 })
        .collect();
    MinimizerResult {
        g_opt: ScoreVector::new(g).expect("finite"),
        r_opt: None,
        w_min: -eta.iter().map(|&p| xlogx(p)).sum::<f64>(),
        iterations: 0,
        converged: true,
    }
}

fn ova_closed_form(phi: MarginLoss, eta: &ProbVector) -> MinimizerResult {
    let (g, w): (Vec<f64>, Vec<f64>) = eta.iter().map(|&p| ova_coordinate_min(phi, p)).unzip();
    MinimizerResult {
        g_opt: ScoreVector::new(g).expect("finite"),
        r_opt: None,
        w_min: w.iter().sum(),
        iterations: 0,
        converged: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{pointwise_risk, PairwiseLossSpec, RejectionCost};

    fn eta(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ce_minimum_is_entropy() {
        let res = pointwise_minimizer(&Surrogate::Ce, &eta(&[0.6, 0.4]), false).unwrap();
        assert!((res.w_min - 0.673011667009257).abs() < 1e-12);
        // numeric descent lands on the same value
        let e = eta(&[0.6, 0.4]);
        let d = descend(
            |x, g| risk_and_grad(&Surrogate::Ce, &e, x, g),
            vec![0.0, 0.0],
            &[true, true],
            1e-10,
            100_000,
        );
        assert!(d.converged);
        assert!((d.value - res.w_min).abs() < 1e-12);
    }

    #[test]
    fn ova_logistic_closed_form() {
        let e = eta(&[0.7, 0.3]);
        let res = pointwise_minimizer(&Surrogate::Ova(MarginLoss::Logistic), &e, false).unwrap();
        assert!((res.g_opt[0] - (7.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((res.g_opt[1] - (3.0f64 / 7.0).ln()).abs() < 1e-12);
        let w = pointwise_risk(&Surrogate::Ova(MarginLoss::Logistic), &res.g_opt, None, &e).unwrap();
        assert!((w - res.w_min).abs() < 1e-12);
    }

    #[test]
    fn ova_coordinate_minima_match_numeric() {
        for phi in MarginLoss::ALL {
            for &p in &[0.1, 0.35, 0.5, 0.8] {
                let (z, v) = ova_coordinate_min(phi, p);
                let at = p * phi.eval(z) + (1.0 - p) * phi.eval(-z);
                assert!((at - v).abs() < 1e-12, "{phi} {p}");
                // no grid point does better
                for i in -400..=400 {
                    let t = i as f64 * 0.01;
                    assert!(p * phi.eval(t) + (1.0 - p) * phi.eval(-t) >= v - 1e-12);
                }
            }
        }
    }

    #[test]
    fn uniform_eta_gives_constant_scores() {
        let c = RejectionCost::new(0.2).unwrap();
        let spec = PairwiseLossSpec::new(MarginLoss::Logistic, MarginLoss::Logistic, 1.0, 2.0, c).unwrap();
        let u = ProbVector::uniform(3);
        for loss in [Surrogate::Apc(spec), Surrogate::Mpc(spec), Surrogate::Ce, Surrogate::Ova(MarginLoss::Exponential)] {
            let res = pointwise_minimizer(&loss, &u, true).unwrap();
            let g = &res.g_opt;
            assert!(g.iter().all(|v| (v - g[0]).abs() < 1e-8), "{loss:?} {g:?}");
        }
    }

    #[test]
    fn apc_exponential_score_differences() {
        let c = RejectionCost::new(0.2).unwrap();
        let alpha = 1.5;
        let spec = PairwiseLossSpec::new(MarginLoss::Exponential, MarginLoss::Exponential, alpha, 3.0, c).unwrap();
        let e = eta(&[0.2, 0.3, 0.5]);
        let res = pointwise_minimizer(&Surrogate::Apc(spec), &e, true).unwrap();
        assert!(res.converged);
        for i in 0..3 {
            for j in 0..3 {
                let expected = (e[i] / e[j]).ln() / (2.0 * alpha);
                assert!((res.g_opt[i] - res.g_opt[j] - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejector_held_at_zero() {
        let c = RejectionCost::new(0.2).unwrap();
        let spec = PairwiseLossSpec::new(MarginLoss::Logistic, MarginLoss::Logistic, 1.0, 2.0, c).unwrap();
        let res = pointwise_minimizer(&Surrogate::Apc(spec), &eta(&[0.2, 0.8]), false).unwrap();
        assert_eq!(res.r_opt, Some(0.0));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let c = RejectionCost::new(0.2).unwrap();
        let spec = PairwiseLossSpec::new(MarginLoss::Logistic, MarginLoss::Logistic, 1.0, 2.0, c).unwrap();
        let m = Minimizer::new(MinimizerOptions {
            max_iter: 2,
            ..Default::default()
        });
        let err = m.minimize(&Surrogate::Apc(spec), &eta(&[0.1, 0.3, 0.6]), true).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }
}
