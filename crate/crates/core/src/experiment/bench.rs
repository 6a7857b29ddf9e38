//! Repeated train/test runs on sparse benchmark files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::table::{fmt_num, fmt_opt, Table};
use super::{mean_std, run_methods, ExperimentConfig, TrainDefaults};
use crate::data::{parse_sparse_str, split, standardize, Dataset};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub method: String,
    pub cost: f64,
    pub trial: usize,
    pub zoc_risk: f64,
    pub rejection_ratio: f64,
    pub accepted_accuracy: Option<f64>,
    pub weight_decay: f64,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Train and optional test file parsed together so both share one label map
/// and one dimension.
fn load(ds: &super::config::DatasetConfig) -> Result<(Dataset, Option<Dataset>)> {
    let read = |p: &std::path::Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
    let train_text = read(&ds.train)?;
    let Some(test_path) = &ds.test else {
        return Ok((parse_sparse_str(&train_text)?.dataset, None));
    };
    let n_train = parse_sparse_str(&train_text)?.dataset.len();
    let mut all = train_text;
    if !all.ends_with('\n') {
        all.push('\n');
    }
    all.push_str(&read(test_path)?);
    let data = parse_sparse_str(&all)?.dataset;
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..data.len()).collect();
    Ok((data.subset(&train), Some(data.subset(&test))))
}

pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    if cfg.bench.datasets.is_empty() {
        return Err(Error::Config("`bench.datasets` is empty".into()));
    }
    let tf = cfg.bench.test_fraction;
    if !(tf > 0.0 && tf < 1.0) {
        return Err(Error::Config("`bench.test_fraction` must lie in (0, 1)".into()));
    }
    let defaults = TrainDefaults::benchmark(&cfg.training);
    let mut rows = Vec::new();
    for (di, ds) in cfg.bench.datasets.iter().enumerate() {
        let (full, fixed_test) = load(ds)?;
        for trial in 0..cfg.trials {
            let tseed = derive_seed(derive_seed(cfg.seed, di as u64), trial as u64);
            let (train_raw, test_raw) = match &fixed_test {
                Some(t) => (full.clone(), t.clone()),
                None => split(&full, 1.0 - tf, derive_seed(tseed, 0))?,
            };
            if test_raw.is_empty() {
                return Err(Error::InvalidArgument(format!("dataset {} has an empty test set", ds.name)));
            }
            let (train, mut rest, _) = standardize(&train_raw, &[&test_raw])?;
            let test = rest.pop().expect("one held-out set");
            for run in run_methods(cfg, &defaults, &train, &test, None, derive_seed(tseed, 1))? {
                rows.push(BenchRow {
                    dataset: ds.name.clone(),
                    method: run.method.clone(),
                    cost: run.cost.value(),
                    trial,
                    zoc_risk: run.metrics.zoc_risk,
                    rejection_ratio: run.metrics.rejection_ratio,
                    accepted_accuracy: run.metrics.accepted_accuracy,
                    weight_decay: run.weight_decay,
                    beta: run.beta(),
                    tau: run.tau(),
                });
            }
        }
    }
    Ok(BenchReport { rows })
}

impl BenchReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "dataset",
            "method",
            "cost",
            "trial",
            "zoc_risk",
            "rejection_ratio",
            "accepted_accuracy",
            "weight_decay",
            "beta",
            "tau",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.dataset.clone(),
                r.method.clone(),
                fmt_num(r.cost),
                r.trial.to_string(),
                fmt_num(r.zoc_risk),
                fmt_num(r.rejection_ratio),
                fmt_opt(r.accepted_accuracy),
                fmt_num(r.weight_decay),
                fmt_opt(r.beta),
                fmt_opt(r.tau),
            ]);
        }
        t
    }

    /// Mean and standard deviation over trials per dataset, method and cost.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&[
            "dataset",
            "method",
            "cost",
            "trials",
            "zoc_risk_mean",
            "zoc_risk_std",
            "rejection_ratio_mean",
            "rejection_ratio_std",
        ]);
        let mut cells: BTreeMap<(String, String, u64), Vec<&BenchRow>> = BTreeMap::new();
        for r in &self.rows {
            cells
                .entry((r.dataset.clone(), r.method.clone(), r.cost.to_bits()))
                .or_default()
                .push(r);
        }
        for ((dataset, method, cost), rs) in cells {
            let (rm, rsd) = mean_std(&rs.iter().map(|r| r.zoc_risk).collect::<Vec<_>>());
            let (jm, jsd) = mean_std(&rs.iter().map(|r| r.rejection_ratio).collect::<Vec<_>>());
            t.push(vec![
                dataset,
                method,
                fmt_num(f64::from_bits(cost)),
                rs.len().to_string(),
                fmt_num(rm),
                fmt_num(rsd),
                fmt_num(jm),
                fmt_num(jsd),
            ]);
        }
        t
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let t = self.summary_table();
        writeln!(s, "{:<12} {:<16} {:>6} {:>22} {:>10}", "dataset", "method", "cost", "0-1-c risk", "rejected").unwrap();
        for r in &t.rows {
            writeln!(s, "{:<12} {:<16} {:>6} {:>12} ± {:<8} {:>10}", r[0], r[1], r[2], r[4], r[5], r[6]).unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, write_sparse, SyntheticSpec};
    use crate::experiment::config::DatasetConfig;
    use crate::experiment::MethodConfig;

    #[test]
    fn separate_test_file_shares_labels() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("a.train");
        let test = dir.path().join("a.test");
        std::fs::write(&train, "5 1:1\n7 2:1\n").unwrap();
        std::fs::write(&test, "7 1:2 3:1").unwrap();
        let (tr, te) = load(&DatasetConfig {
            name: "a".into(),
            train,
            test: Some(test),
        })
        .unwrap();
        let te = te.unwrap();
        assert_eq!((tr.dim(), te.dim()), (3, 3));
        assert_eq!(te.label(0), tr.label(1));
    }

    #[test]
    fn runs_on_a_written_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mix.txt");
        let spec = SyntheticSpec::random(3, 2).unwrap();
        write_sparse(&path, &generate_synthetic(&spec, 30, 1).unwrap(), None).unwrap();
        let mut cfg = ExperimentConfig::from_json(
            r#"{"costs":[0.2],"trials":2,"training":{"epochs":2,"hidden":4},
                "grids":{"weight_decays":[1e-4]}}"#,
        )
        .unwrap();
        cfg.methods = vec![MethodConfig::Ce];
        cfg.bench.datasets = vec![DatasetConfig {
            name: "mix".into(),
            train: path,
            test: None,
        }];
        let rep = run_bench(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.summary_table().rows.len(), 1);
        assert!(rep.summary().contains("mix"));
    }
}
