//! Inverse links, confidence-based and threshold rejectors, and the Bayes pair.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{Label, MarginLoss, ProbVector, RejectionCost};
use crate::numeric::{argmax, max_value, sigmoid, softmax};

/// Per-class probability estimates in `[0, 1]`. Not necessarily normalized:
/// the OVA inverse link treats every class independently.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbEstimate(Vec<f64>);

impl ProbEstimate {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument("estimate entries must lie in [0, 1]".into()));
        }
        Ok(ProbEstimate(q))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbEstimate {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<ProbVector> for ProbEstimate {
    fn from(p: ProbVector) -> Self {
        ProbEstimate(p.into_inner())
    }
}

/// Softmax of the scores.
pub fn inverse_link_ce(g: &[f64]) -> ProbVector {
    let p = softmax(g);
    // softmax output always sums to 1 up to rounding
    ProbVector::new(p.clone()).unwrap_or_else(|_| ProbVector::normalized(p).expect("softmax is positive"))
}

/// `φ′(−g) / (φ′(−g) + φ′(g))` for a single coordinate.
///
/// When both derivatives vanish (saturated squared hinge, or hinge past the
/// kink) the estimate is the saturated probability: 1 for `g > 0`, 0 for
/// `g < 0`. The result is clamped to `[0, 1]`.
pub fn ova_link_coord(phi: MarginLoss, g: f64) -> f64 {
    match phi {
        MarginLoss::Logistic => sigmoid(g),
        MarginLoss::Exponential => sigmoid(2.0 * g),
        _ => {
            let neg = phi.deriv(-g);
            let denom = neg + phi.deriv(g);
            if denom == 0.0 {
                if g > 0.0 {
                    1.0
                } else if g < 0.0 {
                    0.0
                } else {
                    0.5
                }
            } else {
                (neg / denom).clamp(0.0, 1.0)
            }
        }
    }
}

pub fn inverse_link_ova(phi: MarginLoss, g: &[f64]) -> ProbEstimate {
    ProbEstimate(g.iter().map(|&gy| ova_link_coord(phi, gy)).collect())
}

/// `max_y q_y − (1 − c)`; the input is rejected when this is `<= 0`.
pub fn confidence_rejector(estimate: &[f64], c: RejectionCost) -> Result<f64> {
    if estimate.is_empty() {
        return Err(Error::InvalidArgument("empty probability estimate".into()));
    }
    Ok(max_value(estimate) - c.threshold())
}

/// `argmax g`, lowest index on ties.
pub fn classify(g: &[f64]) -> Label {
    Label::from_index(argmax(g))
}

/// Bayes-optimal classifier and rejector: `(argmax η, max η − (1 − c))`.
pub fn bayes_pair(eta: &ProbVector, c: RejectionCost) -> (Label, f64) {
    (classify(eta), eta.max() - c.threshold())
}

/// Baseline rejector `max_y g_y − τ` for the OVA hinge loss.
pub fn hinge_threshold_rejector(g: &[f64], tau: f64) -> Result<f64> {
    if !(tau > -1.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {tau} outside (-1, 1)")));
    }
    if g.is_empty() {
        return Err(Error::InvalidArgument("empty score vector".into()));
    }
    Ok(max_value(g) - tau)
}

/// Score threshold θ with the excess-risk bound constants `(C, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub theta: f64,
    pub constant: f64,
    pub exponent: f64,
}

/// Which bound constant to report for the logistic loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundConstant {
    /// The standard constant `C = 1/2`.
    #[default]
    Standard,
    /// The sharper `C = 1/√2`, valid because the logistic excess is at least `2(η − (1 − c))²`.
    Tight,
}

pub const THRESHOLD_BRACKET: (f64, f64) = (-50.0, 50.0);
const BISECTION_TOL: f64 = 1e-12;
const ROOT_RESIDUAL_TOL: f64 = 1e-8;

/// Threshold and bound constants with the standard logistic constant.
pub fn threshold_for(phi: MarginLoss, c: RejectionCost) -> Result<ThresholdSpec> {
    threshold_with(phi, c, BoundConstant::Standard)
}

pub fn threshold_with(phi: MarginLoss, c: RejectionCost, constant: BoundConstant) -> Result<ThresholdSpec> {
    let cv = c.value();
    if cv <= 0.0 {
        return Err(Error::InvalidCost(cv));
    }
    let odds = ((1.0 - cv) / cv).ln();
    let (theta, constant) = match phi {
        MarginLoss::Logistic => (
            odds,
            match constant {
                BoundConstant::Standard => 0.5,
                BoundConstant::Tight => std::f64::consts::FRAC_1_SQRT_2,
            },
        ),
        MarginLoss::Exponential => (0.5 * odds, std::f64::consts::FRAC_1_SQRT_2),
        MarginLoss::Squared | MarginLoss::SquaredHinge => (1.0 - 2.0 * cv, 0.5),
        MarginLoss::Hinge => {
            // no closed form; the bisection reports the missing root
            let theta = solve_threshold(phi, c)?;
            return Err(Error::InvalidArgument(format!(
                "no bound constant known for the hinge loss (threshold {theta})"
            )));
        }
    };
    Ok(ThresholdSpec {
        theta,
        constant,
        exponent: 2.0,
    })
}

/// Solves `φ′(−θ)/(φ′(−θ) + φ′(θ)) = 1 − c` by bisection on [`THRESHOLD_BRACKET`].
pub fn solve_threshold(phi: MarginLoss, c: RejectionCost) -> Result<f64> {
    let cv = c.value();
    if cv <= 0.0 {
        return Err(Error::InvalidCost(cv));
    }
    let target = c.threshold();
    let f = |t: f64| ova_link_coord(phi, t) - target;
    let (mut lo, mut hi) = THRESHOLD_BRACKET;
    let no_root = || Error::NoRoot {
        loss: phi.name().to_string(),
        lo: THRESHOLD_BRACKET.0,
        hi: THRESHOLD_BRACKET.1,
    };
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo * fhi > 0.0 {
        return Err(no_root());
    }
    for _ in 0..200 {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    // a jump discontinuity also brackets a sign change
    if f(root).abs() > ROOT_RESIDUAL_TOL {
        return Err(no_root());
    }
    Ok(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost(c: f64) -> RejectionCost {
        RejectionCost::new(c).unwrap()
    }

    #[test]
    fn ce_link() {
        let p = inverse_link_ce(&[0.0; 3]);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let p = inverse_link_ce(&[4f64.ln(), 0.0]);
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ova_links() {
        assert_eq!(ova_link_coord(MarginLoss::Logistic, 0.0), 0.5);
        assert!((ova_link_coord(MarginLoss::Logistic, 4f64.ln()) - 0.8).abs() < 1e-15);
        assert!((ova_link_coord(MarginLoss::Squared, 0.6) - 0.8).abs() < 1e-15);
        assert_eq!(ova_link_coord(MarginLoss::SquaredHinge, 1.5), 1.0);
        assert_eq!(ova_link_coord(MarginLoss::SquaredHinge, -1.0), 0.0);
        assert_eq!(ova_link_coord(MarginLoss::Hinge, 0.3), 0.5);
        assert_eq!(ova_link_coord(MarginLoss::Hinge, 2.0), 1.0);
        assert_eq!(ova_link_coord(MarginLoss::Squared, 3.0), 1.0);
        // exponential: e^g / (e^g + e^-g)
        let g: f64 = 0.4;
        let direct = g.exp() / (g.exp() + (-g).exp());
        assert!((ova_link_coord(MarginLoss::Exponential, g) - direct).abs() < 1e-15);
    }

    #[test]
    fn rejector_examples() {
        let c = cost(0.2);
        assert!((confidence_rejector(&[0.7, 0.1], c).unwrap() + 0.1).abs() < 1e-15);
        assert!((confidence_rejector(&[0.9, 0.3], c).unwrap() - 0.1).abs() < 1e-15);
        assert!(confidence_rejector(&[0.8, 0.5], c).unwrap() <= 0.0);
        assert!(confidence_rejector(&[], c).is_err());

        assert_eq!(hinge_threshold_rejector(&[0.5, -0.2], 0.0).unwrap(), 0.5);
        assert_eq!(hinge_threshold_rejector(&[-0.5, -0.2], 0.0).unwrap(), -0.2);
        assert_eq!(hinge_threshold_rejector(&[0.5, 0.4], 0.5).unwrap(), 0.0);
        assert!(hinge_threshold_rejector(&[0.5], 1.0).is_err());
    }

    #[test]
    fn classify_and_bayes() {
        assert_eq!(classify(&[0.1, 0.9, 0.3]).one_based(), 2);
        assert_eq!(classify(&[0.5, 0.5]).one_based(), 1);
        assert_eq!(classify(&[0.0, 0.0, 1.0, 0.0]).one_based(), 3);

        let (f, r) = bayes_pair(&ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap(), cost(0.3));
        assert_eq!(f.one_based(), 1);
        assert!((r + 0.2).abs() < 1e-15);
        let (f, r) = bayes_pair(&ProbVector::new(vec![0.9, 0.1]).unwrap(), cost(0.2));
        assert_eq!(f.one_based(), 1);
        assert!((r - 0.1).abs() < 1e-15);
        let (f, r) = bayes_pair(&ProbVector::uniform(4), cost(0.2));
        assert_eq!(f.one_based(), 1);
        assert!((r + 0.55).abs() < 1e-15);
    }

    #[test]
    fn table_thresholds() {
        let c = cost(0.2);
        let t = threshold_for(MarginLoss::Logistic, c).unwrap();
        assert!((t.theta - 4f64.ln()).abs() < 1e-15);
        assert_eq!((t.constant, t.exponent), (0.5, 2.0));
        let t = threshold_for(MarginLoss::Exponential, c).unwrap();
        assert!((t.theta - 0.5 * 4f64.ln()).abs() < 1e-15);
        assert_eq!(t.constant, std::f64::consts::FRAC_1_SQRT_2);
        let t = threshold_for(MarginLoss::Squared, c).unwrap();
        assert!((t.theta - 0.6).abs() < 1e-15);
        assert_eq!(t.constant, 0.5);
        let tight = threshold_with(MarginLoss::Logistic, c, BoundConstant::Tight).unwrap();
        assert_eq!(tight.constant, std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn bisection_agrees_with_closed_forms() {
        for &cv in &[0.05, 0.2, 0.45] {
            let c = cost(cv);
            for phi in [
                MarginLoss::Logistic,
                MarginLoss::Exponential,
                MarginLoss::Squared,
                MarginLoss::SquaredHinge,
            ] {
                let closed = threshold_for(phi, c).unwrap().theta;
                let numeric = solve_threshold(phi, c).unwrap();
                assert!((closed - numeric).abs() < 1e-10, "{phi} c={cv}");
            }
        }
    }

    #[test]
    fn hinge_has_no_threshold() {
        assert!(matches!(
            solve_threshold(MarginLoss::Hinge, cost(0.2)),
            Err(Error::NoRoot { .. })
        ));
        assert!(threshold_for(MarginLoss::Hinge, cost(0.2)).is_err());
        assert!(threshold_for(MarginLoss::Logistic, cost(0.0)).is_err());
    }
}
