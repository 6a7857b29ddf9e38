//! Numerical checks: rejection calibration of pairwise losses on a simplex
//! grid, and randomized checks of the excess-risk bounds.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use rayon::prelude::*;

use super::config::BoundLoss;
use super::table::{fmt_num, fmt_opt, Table};
use super::{pairwise_surrogate, ExperimentConfig, MethodConfig};
use crate::calibration::{
    apc_exp_analytic_ratios, ce_bound_sides, ova_bound_sides, rejection_ratios_with, supinf_over_simplex_with,
    BoundSides, Constraint, Minimizer, SimplexGrid,
};
use crate::error::{Error, Result};
use crate::links::{threshold_with, BoundConstant};
use crate::losses::{MarginLoss, ProbVector, RejectionCost};
use crate::numeric::derive_seed;

/// Extremes of the rejection derivative at one β over one region.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibExtremes {
    pub side: &'static str,
    pub beta_over_alpha: f64,
    pub constraint: Constraint,
    pub sup: f64,
    pub inf: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibCase {
    pub classes: usize,
    pub cost: f64,
    pub resolution: usize,
    pub accept: f64,
    pub reject: f64,
    /// Closed-form ratios, for the exponential APC loss only.
    pub analytic: Option<(f64, f64)>,
    pub extremes: Vec<CalibExtremes>,
}

impl CalibCase {
    pub fn verdict(&self) -> String {
        let (a, r) = (self.accept, self.reject);
        if (a - r).abs() <= 1e-9 * a.abs().max(1.0) {
            format!("calibratable at β/α={}", fmt_num(a))
        } else if a < r {
            format!("calibratable for β/α in [{}, {}]", fmt_num(a), fmt_num(r))
        } else {
            format!(
                "no β/α satisfies both sides (accept needs ≥ {}, reject needs ≤ {})",
                fmt_num(a),
                fmt_num(r)
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibReport {
    pub loss: String,
    pub alpha: f64,
    pub cases: Vec<CalibCase>,
}

fn alpha_of(m: &MethodConfig) -> f64 {
    match *m {
        MethodConfig::Apc { alpha, .. } | MethodConfig::Mpc { alpha, .. } => alpha,
        _ => 1.0,
    }
}

pub fn run_calib_check(cfg: &ExperimentConfig) -> Result<CalibReport> {
    let method = &cfg.calib.loss;
    let alpha = alpha_of(method);
    let exp_apc = matches!(
        method,
        MethodConfig::Apc {
            phi: MarginLoss::Exponential,
            psi: MarginLoss::Exponential,
            ..
        }
    );
    let minimizer = Minimizer::default();
    let mut cases = Vec::new();
    for &k in &cfg.calib.classes {
        let grid = match cfg.calib.resolution {
            Some(m) => SimplexGrid::new(k, m)?,
            None => SimplexGrid::default_for(k)?,
        };
        for c in cfg.cost_values() {
            if c.value() <= 0.0 {
                return Err(Error::InvalidCost(c.value()));
            }
            let probe = pairwise_surrogate(method, alpha, c)?;
            let analytic = exp_apc.then(|| apc_exp_analytic_ratios(k, c)).transpose()?;
            let (accept, reject) = if exp_apc {
                // the derivative is affine in β: read the ratios off the grid at β = α
                let ex = supinf_over_simplex_with(&minimizer, &probe, Constraint::Equal, &grid)?;
                let ca = c.value() * alpha;
                (ex.sup / ca + 1.0, ex.inf / ca + 1.0)
            } else {
                let r = rejection_ratios_with(&minimizer, &probe, &grid)?;
                (r.accept, r.reject)
            };
            let mut extremes = Vec::new();
            for (side, ratio) in [("accept", accept), ("reject", reject)] {
                let loss = pairwise_surrogate(method, ratio * alpha, c)?;
                for constraint in [Constraint::AtLeast, Constraint::Equal, Constraint::AtMost] {
                    let ex = supinf_over_simplex_with(&minimizer, &loss, constraint, &grid)?;
                    extremes.push(CalibExtremes {
                        side,
                        beta_over_alpha: ratio,
                        constraint,
                        sup: ex.sup,
                        inf: ex.inf,
                        points: ex.points,
                    });
                }
            }
            cases.push(CalibCase {
                classes: k,
                cost: c.value(),
                resolution: grid.resolution(),
                accept,
                reject,
                analytic,
                extremes,
            });
        }
    }
    Ok(CalibReport {
        loss: method.name(),
        alpha,
        cases,
    })
}

impl CalibReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "classes",
            "cost",
            "resolution",
            "side",
            "beta_over_alpha",
            "constraint",
            "sup",
            "inf",
            "points",
        ]);
        for case in &self.cases {
            for e in &case.extremes {
                t.push(vec![
                    case.classes.to_string(),
                    fmt_num(case.cost),
                    case.resolution.to_string(),
                    e.side.into(),
                    fmt_num(e.beta_over_alpha),
                    e.constraint.symbol().into(),
                    fmt_num(e.sup),
                    fmt_num(e.inf),
                    e.points.to_string(),
                ]);
            }
        }
        t
    }

    pub fn ratio_table(&self) -> Table {
        let mut t = Table::new(&[
            "classes",
            "cost",
            "accept",
            "reject",
            "accept_analytic",
            "reject_analytic",
            "gap",
            "verdict",
        ]);
        for c in &self.cases {
            t.push(vec![
                c.classes.to_string(),
                fmt_num(c.cost),
                fmt_num(c.accept),
                fmt_num(c.reject),
                fmt_opt(c.analytic.map(|a| a.0)),
                fmt_opt(c.analytic.map(|a| a.1)),
                fmt_num(c.accept - c.reject),
                c.verdict(),
            ]);
        }
        t
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "rejection calibration of {} (α = {})", self.loss, fmt_num(self.alpha)).unwrap();
        for c in &self.cases {
            writeln!(s, "K = {}, c = {}: {}", c.classes, fmt_num(c.cost), c.verdict()).unwrap();
        }
        s
    }
}

/// Summary of one loss's randomized bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundStats {
    pub loss: String,
    pub samples: usize,
    pub violations: usize,
    /// Largest `lhs − rhs`; positive only when the bound fails somewhere.
    pub max_violation: f64,
    pub slack_min: f64,
    pub slack_p01: f64,
    pub slack_median: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub stats: Vec<BoundStats>,
}

/// Bound sides closer than this count as satisfied.
pub const BOUND_TOL: f64 = 1e-9;

impl BoundReport {
    pub fn violated(&self) -> bool {
        self.stats.iter().any(|s| s.violations > 0)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "loss",
            "samples",
            "violations",
            "max_violation",
            "slack_min",
            "slack_p01",
            "slack_median",
        ]);
        for s in &self.stats {
            t.push(vec![
                s.loss.clone(),
                s.samples.to_string(),
                s.violations.to_string(),
                fmt_num(s.max_violation),
                fmt_num(s.slack_min),
                fmt_num(s.slack_p01),
                fmt_num(s.slack_median),
            ]);
        }
        t
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for b in &self.stats {
            writeln!(
                s,
                "{:<18} {} samples, {} violations, max lhs − rhs = {}",
                b.loss,
                b.samples,
                b.violations,
                fmt_num(b.max_violation)
            )
            .unwrap();
        }
        s
    }
}

/// A random `(K, η, g, c)` instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSample {
    pub eta: ProbVector,
    pub scores: Vec<f64>,
    pub cost: RejectionCost,
}

/// `K` uniform in the class range, `η ~ Dirichlet(1)`, `g ~ N(0, σ²)`, and `c`
/// uniform in the cost range.
pub fn sample_bound_instances(cfg: &super::config::BoundConfig, n: usize, seed: u64) -> Result<Vec<BoundSample>> {
    let (lo, hi) = cfg.cost_range;
    if !(lo > 0.0 && lo <= hi && hi < 0.5) {
        return Err(Error::Config("`bound.cost_range` must satisfy 0 < lo ≤ hi < 0.5".into()));
    }
    let normal = Normal::new(0.0, cfg.score_std).map_err(|e| Error::Config(format!("score_std: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let k = rng.random_range(cfg.min_classes..=cfg.max_classes);
            let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
            let eta = ProbVector::normalized(raw)?;
            let scores = (0..k).map(|_| normal.sample(&mut rng)).collect();
            let cost = RejectionCost::new(if lo == hi { lo } else { rng.random_range(lo..hi) })?;
            Ok(BoundSample { eta, scores, cost })
        })
        .collect()
}

/// Both sides of one bound at one sample. `scale` multiplies the constant `C`.
pub fn bound_sides(loss: BoundLoss, sample: &BoundSample, scale: f64, tight: bool) -> Result<BoundSides> {
    match loss {
        BoundLoss::Ce => {
            let b = ce_bound_sides(&sample.scores, &sample.eta, sample.cost)?;
            Ok(BoundSides {
                lhs: b.lhs / (scale * scale),
                rhs: b.rhs,
            })
        }
        BoundLoss::Ova(phi) => {
            let which = if tight { BoundConstant::Tight } else { BoundConstant::Standard };
            let mut spec = threshold_with(phi, sample.cost, which)?;
            spec.constant *= scale;
            ova_bound_sides(phi, &spec, &sample.scores, &sample.eta, sample.cost)
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

pub fn run_bound_check(cfg: &ExperimentConfig) -> Result<BoundReport> {
    let bc = &cfg.bound;
    if bc.samples == 0 {
        return Err(Error::Config("`bound.samples` must be positive".into()));
    }
    if !(bc.constant_scale > 0.0 && bc.constant_scale.is_finite()) {
        return Err(Error::Config("`bound.constant_scale` must be positive".into()));
    }
    let mut stats = Vec::new();
    for (li, &loss) in bc.losses.iter().enumerate() {
        let samples = sample_bound_instances(bc, bc.samples, derive_seed(cfg.seed, li as u64))?;
        let sides: Vec<BoundSides> = samples
            .par_iter()
            .map(|s| bound_sides(loss, s, bc.constant_scale, bc.tight))
            .collect::<Result<_>>()?;
        let mut slack: Vec<f64> = sides.iter().map(BoundSides::slack).collect();
        slack.sort_by(f64::total_cmp);
        stats.push(BoundStats {
            loss: loss.name(),
            samples: bc.samples,
            violations: slack.iter().filter(|&&s| s < -BOUND_TOL).count(),
            max_violation: -slack[0],
            slack_min: slack[0],
            slack_p01: quantile(&slack, 0.01),
            slack_median: quantile(&slack, 0.5),
        });
    }
    Ok(BoundReport { stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_apc_ratios_match_closed_form() {
        let cfg = ExperimentConfig::from_json(r#"{"costs":[0.2],"calib":{"classes":[2,3]}}"#).unwrap();
        let rep = run_calib_check(&cfg).unwrap();
        for case in &rep.cases {
            let (a, r) = case.analytic.unwrap();
            assert!((case.accept - a).abs() < 1e-9 && (case.reject - r).abs() < 1e-9, "{case:?}");
        }
        assert!(rep.cases[0].verdict().starts_with("calibratable at"));
        assert!(rep.cases[1].verdict().starts_with("no β/α"));
        assert_eq!(rep.table().rows.len(), 2 * 2 * 3);
    }

    #[test]
    fn bounds_hold_and_a_shrunk_constant_fails() {
        let mut cfg = ExperimentConfig::from_json(r#"{"bound":{"samples":2000}}"#).unwrap();
        let rep = run_bound_check(&cfg).unwrap();
        assert!(!rep.violated(), "{}", rep.summary());
        cfg.bound.constant_scale = 0.25;
        assert!(run_bound_check(&cfg).unwrap().violated());
    }

    #[test]
    fn hinge_has_no_bound() {
        let cfg = ExperimentConfig::from_json(r#"{"bound":{"losses":["hinge"],"samples":10}}"#).unwrap();
        assert!(run_bound_check(&cfg).is_err());
    }

    #[test]
    fn samples_are_valid() {
        let bc = super::super::config::BoundConfig::default();
        for s in sample_bound_instances(&bc, 500, 9).unwrap() {
            let k = s.eta.classes();
            assert!((2..=8).contains(&k) && s.scores.len() == k);
            assert!((0.01..0.49).contains(&s.cost.value()));
        }
    }
}
