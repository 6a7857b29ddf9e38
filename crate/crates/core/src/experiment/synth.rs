//! Learning curves on the synthetic Gaussian mixture.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::table::{fmt_num, fmt_opt, Table};
use super::{mean_std, run_methods, ExperimentConfig, TrainDefaults};
use crate::data::{bayes_risk_mc, generate_synthetic, SyntheticSpec};
use crate::error::Result;
use crate::losses::ProbVector;
use crate::numeric::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRow {
    pub method: String,
    pub cost: f64,
    pub n_per_class: usize,
    pub trial: usize,
    pub zoc_risk: f64,
    pub rejection_ratio: f64,
    pub fr_rate: Option<f64>,
    pub fa_rate: Option<f64>,
    pub bayes_risk: f64,
    pub weight_decay: f64,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
}

/// Monte Carlo Bayes risk at one cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesEstimate {
    pub cost: f64,
    pub risk: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthReport {
    pub spec: SyntheticSpec,
    pub bayes: Vec<BayesEstimate>,
    pub rows: Vec<SynthRow>,
}

const TEST_STREAM: u64 = 1 << 40;
const BAYES_STREAM: u64 = 0xba7e5;

pub fn run_synth(cfg: &ExperimentConfig) -> Result<SynthReport> {
    let sc = &cfg.synth;
    let base = SyntheticSpec::random(sc.classes, sc.means_seed.unwrap_or(cfg.seed))?;
    let spec = SyntheticSpec::new(base.means, sc.variance, ProbVector::uniform(sc.classes))?;
    let defaults = TrainDefaults::synthetic(&cfg.training);

    let mut bayes = Vec::new();
    for (i, &c) in cfg.cost_values().iter().enumerate() {
        let (risk, std_error) = bayes_risk_mc(&spec, c, sc.n_mc, derive_seed(cfg.seed ^ BAYES_STREAM, i as u64))?;
        bayes.push(BayesEstimate {
            cost: c.value(),
            risk,
            std_error,
        });
    }

    let mut rows = Vec::new();
    for trial in 0..cfg.trials {
        let tseed = derive_seed(cfg.seed, trial as u64);
        let test = generate_synthetic(&spec, sc.n_test_per_class, derive_seed(tseed, TEST_STREAM))?;
        for &n in &sc.n_per_class {
            let nseed = derive_seed(tseed, n as u64);
            let train = generate_synthetic(&spec, n, nseed)?;
            for run in run_methods(cfg, &defaults, &train, &test, Some(&spec), derive_seed(nseed, 1))? {
                let bayes_risk = bayes
                    .iter()
                    .find(|b| b.cost == run.cost.value())
                    .map(|b| b.risk)
                    .expect("every cost has an estimate");
                rows.push(SynthRow {
                    method: run.method.clone(),
                    cost: run.cost.value(),
                    n_per_class: n,
                    trial,
                    zoc_risk: run.metrics.zoc_risk,
                    rejection_ratio: run.metrics.rejection_ratio,
                    fr_rate: run.metrics.fr_rate,
                    fa_rate: run.metrics.fa_rate,
                    bayes_risk,
                    weight_decay: run.weight_decay,
                    beta: run.beta(),
                    tau: run.tau(),
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.method, a.n_per_class, a.trial)
            .cmp(&(&b.method, b.n_per_class, b.trial))
            .then(a.cost.total_cmp(&b.cost))
    });
    Ok(SynthReport { spec, bayes, rows })
}

impl SynthReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "method",
            "cost",
            "n_per_class",
            "trial",
            "zoc_risk",
            "rejection_ratio",
            "fr_rate",
            "fa_rate",
            "bayes_risk",
            "weight_decay",
            "beta",
            "tau",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.method.clone(),
                fmt_num(r.cost),
                r.n_per_class.to_string(),
                r.trial.to_string(),
                fmt_num(r.zoc_risk),
                fmt_num(r.rejection_ratio),
                fmt_opt(r.fr_rate),
                fmt_opt(r.fa_rate),
                fmt_num(r.bayes_risk),
                fmt_num(r.weight_decay),
                fmt_opt(r.beta),
                fmt_opt(r.tau),
            ]);
        }
        t
    }

    /// Mean and standard deviation over trials per method, cost and sample size.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&[
            "method",
            "cost",
            "n_per_class",
            "trials",
            "zoc_risk_mean",
            "zoc_risk_std",
            "rejection_ratio_mean",
            "bayes_risk",
        ]);
        let mut cells: BTreeMap<(String, u64, usize), Vec<&SynthRow>> = BTreeMap::new();
        for r in &self.rows {
            cells
                .entry((r.method.clone(), r.cost.to_bits(), r.n_per_class))
                .or_default()
                .push(r);
        }
        for ((method, cost, n), rs) in cells {
            let risks: Vec<f64> = rs.iter().map(|r| r.zoc_risk).collect();
            let rej: Vec<f64> = rs.iter().map(|r| r.rejection_ratio).collect();
            let (m, s) = mean_std(&risks);
            t.push(vec![
                method,
                fmt_num(f64::from_bits(cost)),
                n.to_string(),
                rs.len().to_string(),
                fmt_num(m),
                fmt_num(s),
                fmt_num(mean_std(&rej).0),
                fmt_num(rs[0].bayes_risk),
            ]);
        }
        t
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "synthetic mixture: {} classes, variance {}", self.spec.classes(), self.spec.variance).unwrap();
        for (i, m) in self.spec.means.iter().enumerate() {
            writeln!(s, "  mean {}: ({})", i + 1, m.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(", ")).unwrap();
        }
        writeln!(s, "Bayes 0-1-c risk (Monte Carlo):").unwrap();
        for b in &self.bayes {
            writeln!(s, "  c = {}: {} ± {}", fmt_num(b.cost), fmt_num(b.risk), fmt_num(b.std_error)).unwrap();
        }
        writeln!(s, "{} result rows", self.rows.len()).unwrap();
        s
    }
}
