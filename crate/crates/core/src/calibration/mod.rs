//! Calibration analysis: excess risks, KL divergence, the rejection-calibration
//! derivative test and its extremes over the simplex, order preservation, and
//! the per-sample sides of the OVA and CE excess-risk bounds.

pub mod minimizer;
pub mod simplex;

use serde::Serialize;

pub use minimizer::{pointwise_minimizer, Minimizer, MinimizerOptions, MinimizerResult};
pub use simplex::{Constraint, Extremes, SimplexGrid};

use crate::error::{Error, Result};
use crate::links::{confidence_rejector, inverse_link_ce, inverse_link_ova, ThresholdSpec};
use crate::losses::{
    pointwise_risk, pointwise_risk_zero_one_c, Label, MarginLoss, PairwiseLossSpec, ProbVector, RejectionCost,
    Surrogate,
};
use crate::numeric::{log_sum_exp, xlogx};
use minimizer::{descend, ova_coordinate_min};

/// Step of the central difference in `r`.
const DERIV_STEP: f64 = 1e-6;
/// Step of the second difference used for the curvature check.
const CURVATURE_STEP: f64 = 1e-3;

/// `W_{0-1-c}(r, argmax g; η) − min{c, 1 − max η}`.
pub fn excess_pointwise_01c(g: &[f64], r: f64, eta: &ProbVector, c: RejectionCost) -> Result<f64> {
    let w = pointwise_risk_zero_one_c(g, r, eta, c)?;
    Ok(w - c.value().min(1.0 - eta.max()))
}

/// `W(g, r; η) − inf W`. For CE this is `KL(η ‖ softmax g)`.
pub fn excess_pointwise_surrogate(loss: &Surrogate, g: &[f64], r: Option<f64>, eta: &ProbVector) -> Result<f64> {
    if g.len() != eta.classes() {
        return Err(Error::DimensionMismatch {
            expected: eta.classes(),
            found: g.len(),
        });
    }
    match loss {
        Surrogate::Ce => {
            let lse = log_sum_exp(g);
            Ok(eta
                .iter()
                .zip(g)
                .filter(|(p, _)| **p > 0.0)
                .map(|(&p, &gy)| p * (p.ln() - gy + lse))
                .sum())
        }
        _ => {
            let w = pointwise_risk(loss, g, r, eta)?;
            let best = pointwise_minimizer(loss, eta, loss.uses_rejector())?;
            Ok(w - best.w_min)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergence {
    pub value: f64,
    /// `q` vanishes somewhere `p` does not; `value` is then `+∞`.
    pub support_violation: bool,
}

/// `Σ p log(p / q)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<Divergence> {
    if p.classes() != q.classes() {
        return Err(Error::DimensionMismatch {
            expected: p.classes(),
            found: q.classes(),
        });
    }
    let mut value = 0.0;
    for (&a, &b) in p.iter().zip(q.iter()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(Divergence {
                value: f64::INFINITY,
                support_violation: true,
            });
        }
        value += a * (a.ln() - b.ln());
    }
    Ok(Divergence {
        value,
        support_violation: false,
    })
}

/// `½[(1 + z) log(1 + z) + (1 − z) log(1 − z)]` on `[0, 1]`.
pub fn calibration_fn_ce(z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::InvalidArgument(format!("calibration argument {z} outside [0, 1]")));
    }
    Ok(0.5 * (xlogx(1.0 + z) + xlogx(1.0 - z)))
}

/// `α((Σ √η)² − 1) − cβ`: the r-derivative at 0 of the exponential APC risk
/// with the classifier at its optimum.
pub fn apc_exp_deriv_at_zero(eta: &[f64], alpha: f64, beta: f64, c: f64) -> f64 {
    let s: f64 = eta.iter().map(|p| p.sqrt()).sum();
    alpha * (s * s - 1.0) - c * beta
}

fn pairwise_spec(loss: &Surrogate) -> Result<&PairwiseLossSpec> {
    match loss {
        Surrogate::Apc(s) | Surrogate::Mpc(s) => Ok(s),
        _ => Err(Error::InvalidArgument(
            "the rejection-calibration test needs a classifier-rejector loss".into(),
        )),
    }
}

/// `∂W(r, g†; η)/∂r` at `r = 0` with `g†` from the joint pointwise minimizer.
pub fn deriv_w_at_zero(loss: &Surrogate, eta: &ProbVector) -> Result<f64> {
    deriv_w_at_zero_with(&Minimizer::default(), loss, eta)
}

pub fn deriv_w_at_zero_with(minimizer: &Minimizer, loss: &Surrogate, eta: &ProbVector) -> Result<f64> {
    let spec = pairwise_spec(loss)?;
    if matches!(loss, Surrogate::Apc(_)) && spec.phi == MarginLoss::Exponential && spec.psi == MarginLoss::Exponential
    {
        return Ok(apc_exp_deriv_at_zero(eta, spec.alpha, spec.beta, spec.cost.value()));
    }
    let gated = matches!(loss, Surrogate::Mpc(_));
    if !spec.phi.is_smooth() || !spec.psi.is_smooth() || (gated && !spec.psi_gate.is_smooth()) {
        return Err(Error::DegenerateCurvature(
            "hinge-type losses are not differentiable in r".into(),
        ));
    }
    let best = minimizer.minimize(loss, eta, true)?;
    let w = |r: f64| pointwise_risk(loss, &best.g_opt, Some(r), eta);
    let (wp, w0, wm) = (w(CURVATURE_STEP)?, w(0.0)?, w(-CURVATURE_STEP)?);
    let curvature = (wp - 2.0 * w0 + wm) / (CURVATURE_STEP * CURVATURE_STEP);
    if curvature.is_nan() || curvature <= 0.0 {
        return Err(Error::DegenerateCurvature(format!("second difference {curvature:e}")));
    }
    Ok((w(DERIV_STEP)? - w(-DERIV_STEP)?) / (2.0 * DERIV_STEP))
}

/// Extremes of [`deriv_w_at_zero`] over the feasible grid points plus the
/// structured boundary candidates.
pub fn supinf_over_simplex(loss: &Surrogate, constraint: Constraint, grid: &SimplexGrid) -> Result<Extremes> {
    supinf_over_simplex_with(&Minimizer::default(), loss, constraint, grid)
}

pub fn supinf_over_simplex_with(
    minimizer: &Minimizer,
    loss: &Surrogate,
    constraint: Constraint,
    grid: &SimplexGrid,
) -> Result<Extremes> {
    let spec = pairwise_spec(loss)?;
    let points = simplex::feasible_points(grid, constraint, spec.cost);
    simplex::extremes_over(&points, |eta| deriv_w_at_zero_with(minimizer, loss, eta))
}

/// The two β/α values at which the exponential APC loss meets the
/// acceptance-side and rejection-side conditions. They coincide only for two
/// classes.
pub fn apc_exp_analytic_ratios(classes: usize, c: RejectionCost) -> Result<(f64, f64)> {
    if classes < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {classes}")));
    }
    let cv = c.value();
    if cv <= 0.0 {
        return Err(Error::InvalidCost(cv));
    }
    let odds = (1.0 - cv) / cv;
    let accept = (classes as f64 - 2.0) + 2.0 * ((classes as f64 - 1.0) * odds).sqrt();
    let reject = 2.0 * odds.sqrt();
    Ok((accept, reject))
}

/// β/α values meeting the two sides of the rejection-calibration condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioPair {
    /// Smallest β/α with `∂W/∂r|₀ ≤ 0` wherever `max η = 1 − c`.
    pub accept: f64,
    /// Largest β/α with `∂W/∂r|₀ ≥ 0` wherever `max η = 1 − c`.
    pub reject: f64,
}

impl RatioPair {
    pub fn mean(&self) -> f64 {
        0.5 * (self.accept + self.reject)
    }
}

/// Accept- and reject-side β/α for a pairwise loss; `loss`'s own β is ignored.
///
/// Exponential APC uses the closed form. For MPC the classifier optimum does
/// not depend on `r`, so the derivative at 0 is `−α A* ψ₁′(0) + cβ ψ₂′(0)` with
/// `A*` the minimal pairwise term, and the ratios follow from the extremes of
/// `A*`. Other APC losses are solved by bisection in β.
pub fn rejection_ratios(loss: &Surrogate, grid: &SimplexGrid) -> Result<RatioPair> {
    rejection_ratios_with(&Minimizer::default(), loss, grid)
}

pub fn rejection_ratios_with(minimizer: &Minimizer, loss: &Surrogate, grid: &SimplexGrid) -> Result<RatioPair> {
    let spec = pairwise_spec(loss)?;
    let points = simplex::feasible_points(grid, Constraint::Equal, spec.cost);
    rejection_ratios_over(minimizer, loss, &points)
}

/// Ratios from the extremes over the given boundary points (`max η = 1 − c`).
///
/// The minimal MPC pairwise term is concave and symmetric in `η`, so for MPC
/// the two [`simplex::structured_candidates`] alone already give its extremes.
pub fn rejection_ratios_over(minimizer: &Minimizer, loss: &Surrogate, points: &[ProbVector]) -> Result<RatioPair> {
    let spec = *pairwise_spec(loss)?;
    let c = spec.cost;
    let k = points.first().ok_or(Error::EmptyFeasibleSet)?.classes();
    if let Surrogate::Apc(s) = loss {
        if s.phi == MarginLoss::Exponential && s.psi == MarginLoss::Exponential {
            let (accept, reject) = apc_exp_analytic_ratios(k, c)?;
            return Ok(RatioPair { accept, reject });
        }
    }
    if c.value() <= 0.0 {
        return Err(Error::InvalidCost(c.value()));
    }
    match loss {
        Surrogate::Mpc(s) => {
            let slope = s.psi_gate.deriv(0.0) / s.psi.deriv(0.0);
            if !(slope.is_finite() && slope > 0.0) {
                return Err(Error::DegenerateCurvature("margin loss derivative vanishes at 0".into()));
            }
            let gate0 = s.psi_gate.eval(0.0);
            let pen0 = s.psi.eval(0.0);
            // the classifier problem alone is convex: one start suffices
            let single = Minimizer::new(MinimizerOptions {
                restarts: 1,
                ..minimizer.options
            });
            let ex = simplex::extremes_over(points, |eta| {
                let res = single.minimize(loss, eta, false)?;
                Ok((res.w_min - c.value() * pen0) / gate0)
            })?;
            Ok(RatioPair {
                accept: slope * ex.sup / c.value(),
                reject: slope * ex.inf / c.value(),
            })
        }
        Surrogate::Apc(s) => {
            let at = |beta: f64| -> Result<Extremes> {
                let probe = Surrogate::Apc(PairwiseLossSpec { beta, ..*s });
                simplex::extremes_over(points, |eta| deriv_w_at_zero_with(minimizer, &probe, eta))
            };
            let accept = bisect_beta(s.alpha, |b| Ok(at(b)?.sup))?;
            let reject = bisect_beta(s.alpha, |b| Ok(at(b)?.inf))?;
            Ok(RatioPair {
                accept: accept / s.alpha,
                reject: reject / s.alpha,
            })
        }
        _ => unreachable!("checked by pairwise_spec"),
    }
}

/// Root in β of a function decreasing in β, bracketed by doubling from `α`.
fn bisect_beta(alpha: f64, h: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let (mut lo, mut hi) = (alpha, alpha);
    while h(lo)? < 0.0 {
        lo *= 0.5;
        if lo < 1e-8 * alpha {
            return Err(Error::NoRoot {
                loss: "rejection derivative".into(),
                lo,
                hi,
            });
        }
    }
    while h(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e8 * alpha {
            return Err(Error::NoRoot {
                loss: "rejection derivative".into(),
                lo,
                hi,
            });
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if h(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Whether the joint minimizer's scores respect the order of `η`:
/// `η_i < η_j − tol` implies `g†_i ≤ g†_j + tol`.
pub fn check_order_preserving(loss: &Surrogate, eta: &ProbVector, tol: f64) -> Result<bool> {
    check_order_preserving_with(&Minimizer::default(), loss, eta, tol)
}

pub fn check_order_preserving_with(
    minimizer: &Minimizer,
    loss: &Surrogate,
    eta: &ProbVector,
    tol: f64,
) -> Result<bool> {
    let res = minimizer.minimize(loss, eta, loss.uses_rejector())?;
    Ok(scores_preserve_order(&res.g_opt, eta, tol))
}

pub fn scores_preserve_order(g: &[f64], eta: &[f64], tol: f64) -> bool {
    for i in 0..eta.len() {
        for j in 0..eta.len() {
            if eta[i] < eta[j] - tol && g[i] > g[j] + tol {
                return false;
            }
        }
    }
    true
}

/// Both sides of the per-coordinate OVA condition at the threshold:
/// `lhs = inf_{g : g_y = θ} ΔW_OVA(g; η)` and `rhs = C^{-s} |η_y − (1 − c)|^s`.
///
/// The free coordinates are minimized numerically with `g_y` pinned.
pub fn ova1_bound_check(
    phi: MarginLoss,
    spec: &ThresholdSpec,
    c: RejectionCost,
    eta: &ProbVector,
    y: Label,
) -> Result<(f64, f64)> {
    let k = eta.classes();
    let yi = y.check(k)?;
    let loss = Surrogate::Ova(phi);
    let mut start = vec![0.0; k];
    start[yi] = spec.theta;
    let mask: Vec<bool> = (0..k).map(|i| i != yi).collect();
    let opts = MinimizerOptions::default();
    let run = descend(
        |x, grad| minimizer::risk_and_grad(&loss, eta, x, grad),
        start,
        &mask,
        opts.grad_tol,
        opts.max_iter,
    );
    if !run.converged {
        return Err(Error::NonConvergence {
            iterations: run.iterations,
            grad_norm: run.grad_norm,
        });
    }
    let w_min: f64 = eta.iter().map(|&p| ova_coordinate_min(phi, p).1).sum();
    let lhs = run.value - w_min;
    let rhs = spec.constant.powf(-spec.exponent) * (eta[yi] - c.threshold()).abs().powf(spec.exponent);
    Ok((lhs, rhs))
}

/// One sample of an excess-risk bound: `lhs ≤ rhs` is the claim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSides {
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundSides {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// `½ ΔW_{0-1-c}²` against `ΔW_CE`, with the rejector built from the softmax.
pub fn ce_bound_sides(g: &[f64], eta: &ProbVector, c: RejectionCost) -> Result<BoundSides> {
    let r = confidence_rejector(&inverse_link_ce(g), c)?;
    let zoc = excess_pointwise_01c(g, r, eta, c)?;
    let ce = excess_pointwise_surrogate(&Surrogate::Ce, g, None, eta)?;
    Ok(BoundSides {
        lhs: 0.5 * zoc * zoc,
        rhs: ce,
    })
}

/// `(2C)^{-s} ΔW_{0-1-c}^s` against `ΔW_OVA`, with the rejector built from the
/// OVA inverse link.
pub fn ova_bound_sides(
    phi: MarginLoss,
    spec: &ThresholdSpec,
    g: &[f64],
    eta: &ProbVector,
    c: RejectionCost,
) -> Result<BoundSides> {
    let r = confidence_rejector(&inverse_link_ova(phi, g), c)?;
    let zoc = excess_pointwise_01c(g, r, eta, c)?;
    let ova = excess_pointwise_surrogate(&Surrogate::Ova(phi), g, None, eta)?;
    Ok(BoundSides {
        lhs: (2.0 * spec.constant).powf(-spec.exponent) * zoc.powf(spec.exponent),
        rhs: ova,
    })
}
