//! Margin losses, the 0-1-c loss and the multiclass surrogates built on them.
//!
//! Labels are one-based at the API boundary ([`Label::from_one_based`]) and
//! zero-based everywhere inside the crate ([`Label::index`]).

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{argmax, log_sum_exp, sigmoid};

/// Convex upper bounds of the step `1[z <= 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginLoss {
    /// `log(1 + e^{-z})`
    Logistic,
    /// `e^{-z}`
    Exponential,
    /// `(1 - z)^2`
    Squared,
    /// `(1 - z)_+^2`
    SquaredHinge,
    /// `(1 - z)_+`
    Hinge,
}

impl MarginLoss {
    pub const ALL: [MarginLoss; 5] = [
        MarginLoss::Logistic,
        MarginLoss::Exponential,
        MarginLoss::Squared,
        MarginLoss::SquaredHinge,
        MarginLoss::Hinge,
    ];

    pub fn eval(self, z: f64) -> f64 {
        match self {
            MarginLoss::Logistic => {
                if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            MarginLoss::Exponential => (-z).exp(),
            MarginLoss::Squared => (1.0 - z) * (1.0 - z),
            MarginLoss::SquaredHinge => {
                let t = (1.0 - z).max(0.0);
                t * t
            }
            MarginLoss::Hinge => (1.0 - z).max(0.0),
        }
    }

    /// Derivative, or the subderivative 0 at the hinge kink `z = 1`.
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            MarginLoss::Logistic => -sigmoid(-z),
            MarginLoss::Exponential => -(-z).exp(),
            MarginLoss::Squared => -2.0 * (1.0 - z),
            MarginLoss::SquaredHinge => -2.0 * (1.0 - z).max(0.0),
            MarginLoss::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// True when the loss is continuously differentiable everywhere.
    pub fn is_smooth(self) -> bool {
        !matches!(self, MarginLoss::Hinge)
    }

    pub fn name(self) -> &'static str {
        match self {
            MarginLoss::Logistic => "logistic",
            MarginLoss::Exponential => "exponential",
            MarginLoss::Squared => "squared",
            MarginLoss::SquaredHinge => "squared_hinge",
            MarginLoss::Hinge => "hinge",
        }
    }
}

impl fmt::Display for MarginLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MarginLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" | "log" => Ok(MarginLoss::Logistic),
            "exponential" | "exp" => Ok(MarginLoss::Exponential),
            "squared" | "sq" => Ok(MarginLoss::Squared),
            "squared_hinge" | "sqhinge" => Ok(MarginLoss::SquaredHinge),
            "hinge" | "hin" => Ok(MarginLoss::Hinge),
            other => Err(Error::InvalidArgument(format!("unknown margin loss `{other}`"))),
        }
    }
}

/// Cost paid for abstaining, restricted to `[0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RejectionCost(f64);

impl RejectionCost {
    pub fn new(c: f64) -> Result<Self> {
        if (0.0..0.5).contains(&c) {
            Ok(RejectionCost(c))
        } else {
            Err(Error::InvalidCost(c))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The Bayes acceptance threshold `1 - c`.
    pub fn threshold(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for RejectionCost {
    type Error = Error;

    fn try_from(c: f64) -> Result<Self> {
        RejectionCost::new(c)
    }
}

impl From<RejectionCost> for f64 {
    fn from(c: RejectionCost) -> f64 {
        c.0
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::NotOnSimplex("empty vector".into()));
        }
        if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::NotOnSimplex(format!("entry {x}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::NotOnSimplex(format!("entries sum to {sum}")));
        }
        Ok(ProbVector(p))
    }

    /// Divides a non-negative vector by its sum.
    pub fn normalized(mut p: Vec<f64>) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if sum.is_nan() || sum <= 0.0 || p.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::NotOnSimplex("cannot normalize".into()));
        }
        p.iter_mut().for_each(|x| *x /= sum);
        Ok(ProbVector(p))
    }

    pub fn uniform(k: usize) -> Self {
        ProbVector(vec![1.0 / k as f64; k])
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn max(&self) -> f64 {
        crate::numeric::max_value(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Finite classifier scores `g_1..g_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("score vector".into()));
        }
        Ok(ScoreVector(g))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Class label, stored zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(usize);

impl Label {
    pub fn from_one_based(y: usize) -> Result<Self> {
        if y == 0 {
            return Err(Error::InvalidLabel { label: 0, classes: 0 });
        }
        Ok(Label(y - 1))
    }

    pub fn from_index(i: usize) -> Self {
        Label(i)
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn one_based(self) -> usize {
        self.0 + 1
    }

    pub(crate) fn check(self, classes: usize) -> Result<usize> {
        if self.0 < classes {
            Ok(self.0)
        } else {
            Err(Error::InvalidLabel {
                label: self.one_based(),
                classes,
            })
        }
    }
}

/// Whether the rejector score means "reject" (`r <= 0`).
pub fn rejects(r: f64) -> bool {
    r <= 0.0
}

/// The 0-1-c loss: `c` when rejecting, otherwise 1 on a misclassification.
pub fn zero_one_c(g: &[f64], r: f64, y: Label, c: RejectionCost) -> Result<f64> {
    let y = y.check(g.len())?;
    if rejects(r) {
        Ok(c.value())
    } else if argmax(g) != y {
        Ok(1.0)
    } else {
        Ok(0.0)
    }
}

/// One-versus-all loss `φ(g_y) + Σ_{y'≠y} φ(-g_{y'})`.
pub fn ova_loss(phi: MarginLoss, g: &[f64], y: Label) -> Result<f64> {
    let y = y.check(g.len())?;
    Ok(g.iter()
        .enumerate()
        .map(|(k, &gk)| if k == y { phi.eval(gk) } else { phi.eval(-gk) })
        .sum())
}

/// Cross-entropy `-g_y + log Σ exp(g)`.
pub fn ce_loss(g: &[f64], y: Label) -> Result<f64> {
    let y = y.check(g.len())?;
    Ok(log_sum_exp(g) - g[y])
}

/// Parameters shared by the pairwise-comparison classifier-rejector losses.
///
/// `psi` is the rejection penalty (ψ in the additive loss, ψ₂ in the
/// multiplicative one); `psi_gate` is the factor ψ₁ that gates the
/// classification term of the multiplicative loss and is unused by the
/// additive loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseLossSpec {
    pub phi: MarginLoss,
    pub psi: MarginLoss,
    pub psi_gate: MarginLoss,
    pub alpha: f64,
    pub beta: f64,
    pub cost: RejectionCost,
}

impl PairwiseLossSpec {
    pub fn new(
        phi: MarginLoss,
        psi: MarginLoss,
        alpha: f64,
        beta: f64,
        cost: RejectionCost,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        Ok(PairwiseLossSpec {
            phi,
            psi,
            psi_gate: psi,
            alpha,
            beta,
            cost,
        })
    }

    pub fn with_gate(mut self, psi_gate: MarginLoss) -> Self {
        self.psi_gate = psi_gate;
        self
    }

    /// Both margin losses exponential (and the gate too), the case with closed forms.
    pub fn is_all_exponential(&self) -> bool {
        self.phi == MarginLoss::Exponential
            && self.psi == MarginLoss::Exponential
            && self.psi_gate == MarginLoss::Exponential
    }
}

/// Additive pairwise comparison loss
/// `Σ_{y'≠y} φ(α(g_y − g_{y'} − r)) + c ψ(β r)`.
pub fn apc_loss(spec: &PairwiseLossSpec, g: &[f64], r: f64, y: Label) -> Result<f64> {
    let y = y.check(g.len())?;
    let a = spec.alpha;
    let pair: f64 = g
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != y)
        .map(|(_, &gk)| spec.phi.eval(a * (g[y] - gk - r)))
        .sum();
    Ok(pair + spec.cost.value() * spec.psi.eval(spec.beta * r))
}

/// Multiplicative pairwise comparison loss
/// `[Σ_{y'≠y} φ(α(g_y − g_{y'}))] ψ₁(−α r) + c ψ₂(β r)`.
pub fn mpc_loss(spec: &PairwiseLossSpec, g: &[f64], r: f64, y: Label) -> Result<f64> {
    let y = y.check(g.len())?;
    let a = spec.alpha;
    let pair: f64 = g
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != y)
        .map(|(_, &gk)| spec.phi.eval(a * (g[y] - gk)))
        .sum();
    Ok(pair * spec.psi_gate.eval(-a * r) + spec.cost.value() * spec.psi.eval(spec.beta * r))
}

/// A multiclass surrogate loss, with or without a rejector argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surrogate {
    Ova(MarginLoss),
    Ce,
    Apc(PairwiseLossSpec),
    Mpc(PairwiseLossSpec),
}

impl Surrogate {
    /// Classifier-rejector losses take an explicit rejector score.
    pub fn uses_rejector(&self) -> bool {
        matches!(self, Surrogate::Apc(_) | Surrogate::Mpc(_))
    }

    fn rejector_arg(&self, r: Option<f64>) -> Result<f64> {
        match (self.uses_rejector(), r) {
            (true, Some(r)) => Ok(r),
            (true, None) => Err(Error::InvalidArgument(
                "classifier-rejector loss needs a rejector score".into(),
            )),
            (false, _) => Ok(0.0),
        }
    }

    pub fn loss(&self, g: &[f64], r: Option<f64>, y: Label) -> Result<f64> {
        let r = self.rejector_arg(r)?;
        match self {
            Surrogate::Ova(phi) => ova_loss(*phi, g, y),
            Surrogate::Ce => ce_loss(g, y),
            Surrogate::Apc(spec) => apc_loss(spec, g, r, y),
            Surrogate::Mpc(spec) => mpc_loss(spec, g, r, y),
        }
    }

    /// Loss value with its (sub)gradient. `dg` is overwritten with ∂L/∂g;
    /// the returned pair is `(L, ∂L/∂r)` (the second entry is 0 for
    /// rejection-free losses).
    pub fn loss_grad(&self, g: &[f64], r: Option<f64>, y: Label, dg: &mut [f64]) -> Result<(f64, f64)> {
        let r = self.rejector_arg(r)?;
        let yi = y.check(g.len())?;
        if dg.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: g.len(),
                found: dg.len(),
            });
        }
        dg.iter_mut().for_each(|d| *d = 0.0);
        match self {
            Surrogate::Ova(phi) => {
                let mut loss = 0.0;
                for (k, &gk) in g.iter().enumerate() {
                    if k == yi {
                        loss += phi.eval(gk);
                        dg[k] = phi.deriv(gk);
                    } else {
                        loss += phi.eval(-gk);
                        dg[k] = -phi.deriv(-gk);
                    }
                }
                Ok((loss, 0.0))
            }
            Surrogate::Ce => {
                let lse = log_sum_exp(g);
                for (d, &gk) in dg.iter_mut().zip(g) {
                    *d = (gk - lse).exp();
                }
                dg[yi] -= 1.0;
                Ok((lse - g[yi], 0.0))
            }
            Surrogate::Apc(spec) => {
                let a = spec.alpha;
                let mut pair = 0.0;
                let mut dr = 0.0;
                for k in 0..g.len() {
                    if k == yi {
                        continue;
                    }
                    let z = a * (g[yi] - g[k] - r);
                    pair += spec.phi.eval(z);
                    let d = a * spec.phi.deriv(z);
                    dg[yi] += d;
                    dg[k] -= d;
                    dr -= d;
                }
                let c = spec.cost.value();
                let loss = pair + c * spec.psi.eval(spec.beta * r);
                dr += c * spec.beta * spec.psi.deriv(spec.beta * r);
                Ok((loss, dr))
            }
            Surrogate::Mpc(spec) => {
                let a = spec.alpha;
                let gate = spec.psi_gate.eval(-a * r);
                let mut pair = 0.0;
                for k in 0..g.len() {
                    if k == yi {
                        continue;
                    }
                    let z = a * (g[yi] - g[k]);
                    pair += spec.phi.eval(z);
                    let d = a * spec.phi.deriv(z) * gate;
                    dg[yi] += d;
                    dg[k] -= d;
                }
                let c = spec.cost.value();
                let loss = pair * gate + c * spec.psi.eval(spec.beta * r);
                let dr = -a * pair * spec.psi_gate.deriv(-a * r)
                    + c * spec.beta * spec.psi.deriv(spec.beta * r);
                Ok((loss, dr))
            }
        }
    }
}

/// Pointwise risk `W = Σ_y η_y L(g, r; y)`.
pub fn pointwise_risk(loss: &Surrogate, g: &[f64], r: Option<f64>, eta: &ProbVector) -> Result<f64> {
    if g.len() != eta.classes() {
        return Err(Error::DimensionMismatch {
            expected: eta.classes(),
            found: g.len(),
        });
    }
    let mut w = 0.0;
    for (k, &p) in eta.iter().enumerate() {
        if p > 0.0 {
            w += p * loss.loss(g, r, Label::from_index(k))?;
        }
    }
    Ok(w)
}

/// Pointwise 0-1-c risk of the pair (argmax g, r): `c` if rejecting, else `1 − η_f`.
pub fn pointwise_risk_zero_one_c(g: &[f64], r: f64, eta: &ProbVector, c: RejectionCost) -> Result<f64> {
    if g.len() != eta.classes() {
        return Err(Error::DimensionMismatch {
            expected: eta.classes(),
            found: g.len(),
        });
    }
    if rejects(r) {
        Ok(c.value())
    } else {
        Ok(1.0 - eta[argmax(g)])
    }
}
