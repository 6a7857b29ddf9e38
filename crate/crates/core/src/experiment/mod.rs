//! Experiment runner: evaluation, model selection and the four run modes.

pub mod bench;
pub mod checks;
pub mod config;
pub mod synth;
pub mod table;

use rayon::prelude::*;
use serde::Serialize;

pub use bench::{run_bench, BenchReport, BenchRow};
pub use checks::{run_bound_check, run_calib_check, BoundReport, CalibReport};
pub use config::{ExperimentConfig, MethodConfig, Mode};
pub use synth::{run_synth, SynthReport, SynthRow};

use crate::calibration::simplex::structured_candidates;
use crate::calibration::{rejection_ratios_over, Minimizer, MinimizerOptions, RatioPair};
use crate::data::{split, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::links::bayes_pair;
use crate::losses::{Label, PairwiseLossSpec, RejectionCost, Surrogate};
use crate::model::{train, AmsgradConfig, Method, TrainConfig, TrainedModel};
use crate::numeric::derive_seed;

/// Test-set metrics of one classifier-rejector pair at one cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunMetrics {
    pub zoc_risk: f64,
    pub rejection_ratio: f64,
    /// Accuracy on accepted points; absent when everything was rejected.
    pub accepted_accuracy: Option<f64>,
    /// Against the Bayes rejector, over points where it is non-zero.
    pub fr_rate: Option<f64>,
    pub fa_rate: Option<f64>,
}

/// Evaluates a trained model, using the posterior oracle for FR/FA when given.
pub fn evaluate(
    model: &TrainedModel,
    data: &Dataset,
    c: RejectionCost,
    oracle: Option<&SyntheticSpec>,
) -> Result<RunMetrics> {
    if model.classifier.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.classifier.input_dim(),
            found: data.dim(),
        });
    }
    evaluate_with(data, c, oracle, |x| model.decide(x, c))
}

/// Evaluates any decision rule `x ↦ (label, r)`, rejecting when `r <= 0`.
pub fn evaluate_with<F>(data: &Dataset, c: RejectionCost, oracle: Option<&SyntheticSpec>, decide: F) -> Result<RunMetrics>
where
    F: Fn(&[f64]) -> Result<(Label, f64)>,
{
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let mut loss = 0.0;
    let mut rejected = 0usize;
    let mut correct = 0usize;
    let (mut fr, mut fa, mut decided) = (0usize, 0usize, 0usize);
    for (x, y) in data.rows() {
        let (f, r) = decide(x)?;
        let reject = r <= 0.0;
        if reject {
            rejected += 1;
            loss += c.value();
        } else if f == y {
            correct += 1;
        } else {
            loss += 1.0;
        }
        if let Some(spec) = oracle {
            let (_, r_star) = bayes_pair(&crate::data::true_eta(spec, x)?, c);
            if r_star != 0.0 {
                decided += 1;
                if reject && r_star > 0.0 {
                    fr += 1;
                }
                if !reject && r_star < 0.0 {
                    fa += 1;
                }
            }
        }
    }
    let n = data.len() as f64;
    let accepted = data.len() - rejected;
    let rate = |k: usize| (oracle.is_some() && decided > 0).then(|| k as f64 / decided as f64);
    Ok(RunMetrics {
        zoc_risk: loss / n,
        rejection_ratio: rejected as f64 / n,
        accepted_accuracy: (accepted > 0).then(|| correct as f64 / accepted as f64),
        fr_rate: rate(fr),
        fa_rate: rate(fa),
    })
}

/// The APC or MPC surrogate a pairwise method config describes, at a given β.
pub fn pairwise_surrogate(method: &MethodConfig, beta: f64, c: RejectionCost) -> Result<Surrogate> {
    match *method {
        MethodConfig::Apc { phi, psi, alpha } => Ok(Surrogate::Apc(PairwiseLossSpec::new(phi, psi, alpha, beta, c)?)),
        MethodConfig::Mpc {
            phi,
            psi,
            psi_gate,
            alpha,
        } => Ok(Surrogate::Mpc(
            PairwiseLossSpec::new(phi, psi, alpha, beta, c)?.with_gate(psi_gate.unwrap_or(psi)),
        )),
        _ => Err(Error::InvalidArgument(format!("{} is not a pairwise method", method.name()))),
    }
}

/// Accept-side and reject-side β/α for a pairwise method at `classes` and `c`,
/// found over the two structured boundary points.
pub fn beta_ratios(method: &MethodConfig, classes: usize, c: RejectionCost) -> Result<RatioPair> {
    let loss = pairwise_surrogate(method, 1.0, c)?;
    let minimizer = Minimizer::new(MinimizerOptions {
        restarts: 1,
        ..Default::default()
    });
    rejection_ratios_over(&minimizer, &loss, &structured_candidates(classes, c))
}

/// Cost-specific method candidates in grid order: β ∈ {accept, reject, mean}·α
/// for pairwise losses, the τ grid for OVA hinge, a single entry otherwise.
pub fn method_candidates(
    method: &MethodConfig,
    classes: usize,
    c: RejectionCost,
    taus: &[f64],
) -> Result<Vec<Method>> {
    Ok(match *method {
        MethodConfig::OvaLogistic => vec![Method::OvaLogistic],
        MethodConfig::OvaExponential => vec![Method::OvaExponential],
        MethodConfig::Ce => vec![Method::Ce],
        MethodConfig::OvaHinge => taus.iter().map(|&tau| Method::OvaHinge { tau }).collect(),
        MethodConfig::Apc { phi, psi, alpha } => {
            let r = beta_ratios(method, classes, c)?;
            [r.accept, r.reject, r.mean()]
                .iter()
                .map(|&b| Method::Apc {
                    phi,
                    psi,
                    alpha,
                    beta: b * alpha,
                })
                .collect()
        }
        MethodConfig::Mpc {
            phi,
            psi,
            psi_gate,
            alpha,
        } => {
            let r = beta_ratios(method, classes, c)?;
            [r.accept, r.reject, r.mean()]
                .iter()
                .map(|&b| Method::Mpc {
                    phi,
                    psi,
                    psi_gate: psi_gate.unwrap_or(psi),
                    alpha,
                    beta: b * alpha,
                })
                .collect()
        }
    })
}

/// Shared training settings for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainDefaults {
    pub epochs: usize,
    pub hidden: usize,
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
}

impl TrainDefaults {
    pub fn synthetic(cfg: &config::TrainingConfig) -> Self {
        TrainDefaults {
            epochs: cfg.epochs.unwrap_or(100),
            hidden: cfg.hidden.unwrap_or(3),
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
        }
    }

    pub fn benchmark(cfg: &config::TrainingConfig) -> Self {
        TrainDefaults {
            epochs: cfg.epochs.unwrap_or(150),
            hidden: cfg.hidden.unwrap_or(50),
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
        }
    }

    pub fn config(&self, method: Method, cost: RejectionCost, weight_decay: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            method,
            cost,
            epochs: self.epochs,
            batch_size: self.batch_size,
            hidden: self.hidden,
            optimizer: AmsgradConfig {
                learning_rate: self.learning_rate,
                weight_decay,
                ..AmsgradConfig::default()
            },
            seed,
        }
    }
}

/// The winning candidate, retrained on the full training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub method: Method,
    pub weight_decay: f64,
    pub validation_risk: f64,
    pub model: TrainedModel,
}

/// Fits every `(method, weight decay)` candidate on a `train_fraction` split,
/// keeps the lowest validation 0-1-c risk averaged over `costs` (first in grid
/// order on ties) and retrains it on all of `train`. The model is trained for
/// `costs[0]`, which matters only for classifier-rejector losses.
pub fn model_select(
    candidates: &[Method],
    weight_decays: &[f64],
    train_fraction: f64,
    defaults: &TrainDefaults,
    costs: &[RejectionCost],
    data: &Dataset,
    seed: u64,
) -> Result<Selection> {
    if candidates.is_empty() || weight_decays.is_empty() || costs.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let train_cost = costs[0];
    let model_seed = derive_seed(seed, 1);
    let grid: Vec<(Method, f64)> = candidates
        .iter()
        .flat_map(|&m| weight_decays.iter().map(move |&wd| (m, wd)))
        .collect();
    let risks: Vec<Result<f64>> = if grid.len() == 1 {
        vec![Ok(0.0)]
    } else {
        let (fit, val) = split(data, train_fraction, derive_seed(seed, 0))?;
        grid.par_iter()
            .map(|&(m, wd)| {
                let out = train(&defaults.config(m, train_cost, wd, model_seed), &fit)?;
                let mut total = 0.0;
                for &c in costs {
                    total += evaluate(&out.model, &val, c, None)?.zoc_risk;
                }
                Ok(total / costs.len() as f64)
            })
            .collect()
    };
    let mut best: Option<(usize, f64)> = None;
    let mut last_err = None;
    for (i, r) in risks.into_iter().enumerate() {
        match r {
            Ok(v) if best.is_none_or(|(_, b)| v < b) => best = Some((i, v)),
            Ok(_) => {}
            Err(e @ Error::Divergence { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let (i, validation_risk) = best.ok_or_else(|| last_err.expect("nonempty grid"))?;
    let (method, weight_decay) = grid[i];
    let model = train(&defaults.config(method, train_cost, weight_decay, model_seed), data)?.model;
    Ok(Selection {
        method,
        weight_decay,
        validation_risk,
        model,
    })
}

/// One method evaluated at one cost.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: String,
    pub cost: RejectionCost,
    pub selected: Method,
    pub weight_decay: f64,
    pub metrics: RunMetrics,
}

impl MethodRun {
    /// The selected β for pairwise methods.
    pub fn beta(&self) -> Option<f64> {
        match self.selected {
            Method::Apc { beta, .. } | Method::Mpc { beta, .. } => Some(beta),
            _ => None,
        }
    }

    /// The selected τ for OVA hinge.
    pub fn tau(&self) -> Option<f64> {
        match self.selected {
            Method::OvaHinge { tau } => Some(tau),
            _ => None,
        }
    }
}

/// Selects, trains and evaluates every configured method at every cost.
/// Cost-free methods are trained once and evaluated at all costs.
pub fn run_methods(
    cfg: &ExperimentConfig,
    defaults: &TrainDefaults,
    train_set: &Dataset,
    test_set: &Dataset,
    oracle: Option<&SyntheticSpec>,
    seed: u64,
) -> Result<Vec<MethodRun>> {
    let costs = cfg.cost_values();
    let classes = train_set.classes();
    let mut out = Vec::new();
    for (mi, method) in cfg.methods.iter().enumerate() {
        let mseed = derive_seed(seed, mi as u64);
        let groups: Vec<Vec<RejectionCost>> = if method.cost_free() {
            vec![costs.clone()]
        } else {
            costs.iter().map(|&c| vec![c]).collect()
        };
        for (gi, group) in groups.iter().enumerate() {
            let cands = method_candidates(method, classes, group[0], &cfg.grids.taus)?;
            let sel = model_select(
                &cands,
                &cfg.grids.weight_decays,
                cfg.grids.train_fraction,
                defaults,
                group,
                train_set,
                derive_seed(mseed, gi as u64),
            )?;
            for &c in group {
                out.push(MethodRun {
                    method: method.name(),
                    cost: c,
                    selected: sel.method,
                    weight_decay: sel.weight_decay,
                    metrics: evaluate(&sel.model, test_set, c, oracle)?,
                });
            }
        }
    }
    Ok(out)
}

/// Mean and sample standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}
