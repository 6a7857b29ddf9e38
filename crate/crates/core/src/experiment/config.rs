//! JSON experiment configuration.
//!
//! Every field has a default, so `{}` is a valid config. See the README for
//! the full schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{MarginLoss, RejectionCost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Synth,
    Bench,
    CalibCheck,
    BoundCheck,
}

/// A method family before its cost-dependent parameters (β, τ) are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodConfig {
    OvaLogistic,
    OvaExponential,
    OvaHinge,
    Ce,
    Apc {
        phi: MarginLoss,
        psi: MarginLoss,
        #[serde(default = "one")]
        alpha: f64,
    },
    Mpc {
        phi: MarginLoss,
        psi: MarginLoss,
        #[serde(default)]
        psi_gate: Option<MarginLoss>,
        #[serde(default = "one")]
        alpha: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl MethodConfig {
    pub fn name(&self) -> String {
        match self {
            MethodConfig::OvaLogistic => "ova_logistic".into(),
            MethodConfig::OvaExponential => "ova_exponential".into(),
            MethodConfig::OvaHinge => "ova_hinge".into(),
            MethodConfig::Ce => "ce".into(),
            MethodConfig::Apc { phi, .. } => format!("apc_{phi}"),
            MethodConfig::Mpc { phi, .. } => format!("mpc_{phi}"),
        }
    }

    /// Trained once and reused for every cost.
    pub fn cost_free(&self) -> bool {
        matches!(
            self,
            MethodConfig::OvaLogistic | MethodConfig::OvaExponential | MethodConfig::Ce
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Defaults to 100 for synthetic and 150 for benchmark runs.
    pub epochs: Option<usize>,
    /// Defaults to 3 for synthetic and 50 for benchmark runs.
    pub hidden: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: None,
            hidden: None,
            batch_size: None,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub weight_decays: Vec<f64>,
    pub taus: Vec<f64>,
    /// Share of the training data used to fit candidates during selection.
    pub train_fraction: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            weight_decays: vec![1e-7, 1e-4, 1e-1],
            taus: vec![-0.95, -0.5, 0.0, 0.5, 0.95],
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub classes: usize,
    pub variance: f64,
    /// Seed for the component means; defaults to the run seed.
    pub means_seed: Option<u64>,
    pub n_per_class: Vec<usize>,
    pub n_test_per_class: usize,
    pub n_mc: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 8,
            variance: 0.2,
            means_seed: None,
            n_per_class: vec![20, 50, 100, 200, 500, 1000, 1500, 2000, 5000, 10000],
            n_test_per_class: 2000,
            n_mc: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub train: PathBuf,
    /// Without a test file each trial holds out `test_fraction` of `train`.
    #[serde(default)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetConfig>,
    pub test_fraction: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            datasets: Vec::new(),
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibConfig {
    pub classes: Vec<usize>,
    /// Grid resolution; defaults to 40 steps for K ≤ 4 and 20 for K ≤ 8.
    pub resolution: Option<usize>,
    pub loss: MethodConfig,
}

impl Default for CalibConfig {
    fn default() -> Self {
        CalibConfig {
            classes: vec![2, 3, 8],
            resolution: None,
            loss: MethodConfig::Apc {
                phi: MarginLoss::Exponential,
                psi: MarginLoss::Exponential,
                alpha: 1.0,
            },
        }
    }
}

/// `"ce"` or the name of a margin loss used with OVA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BoundLoss {
    Ova(MarginLoss),
    Ce,
}

impl TryFrom<String> for BoundLoss {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s == "ce" {
            Ok(BoundLoss::Ce)
        } else {
            Ok(BoundLoss::Ova(s.strip_prefix("ova_").unwrap_or(&s).parse()?))
        }
    }
}

impl From<BoundLoss> for String {
    fn from(l: BoundLoss) -> String {
        l.name()
    }
}

impl BoundLoss {
    pub fn name(&self) -> String {
        match self {
            BoundLoss::Ova(phi) => format!("ova_{phi}"),
            BoundLoss::Ce => "ce".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConfig {
    pub losses: Vec<BoundLoss>,
    pub samples: usize,
    pub min_classes: usize,
    pub max_classes: usize,
    /// Scales every bound constant C; values below 1 make a negative control.
    pub constant_scale: f64,
    /// Use the sharper logistic constant.
    pub tight: bool,
    pub score_std: f64,
    pub cost_range: (f64, f64),
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            losses: vec![
                BoundLoss::Ce,
                BoundLoss::Ova(MarginLoss::Logistic),
                BoundLoss::Ova(MarginLoss::Exponential),
                BoundLoss::Ova(MarginLoss::Squared),
                BoundLoss::Ova(MarginLoss::SquaredHinge),
            ],
            samples: 100_000,
            min_classes: 2,
            max_classes: 8,
            constant_scale: 1.0,
            tight: false,
            score_std: 3.0,
            cost_range: (0.01, 0.49),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; when present it must match the subcommand.
    pub mode: Option<Mode>,
    pub costs: Vec<f64>,
    pub methods: Vec<MethodConfig>,
    pub trials: usize,
    pub seed: u64,
    pub training: TrainingConfig,
    pub grids: GridConfig,
    pub synth: SynthConfig,
    pub bench: BenchConfig,
    pub calib: CalibConfig,
    pub bound: BoundConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            costs: vec![0.05, 0.1, 0.2, 0.3, 0.4],
            methods: vec![
                MethodConfig::Ce,
                MethodConfig::OvaLogistic,
                MethodConfig::OvaExponential,
                MethodConfig::OvaHinge,
                MethodConfig::Apc {
                    phi: MarginLoss::Exponential,
                    psi: MarginLoss::Exponential,
                    alpha: 1.0,
                },
                MethodConfig::Mpc {
                    phi: MarginLoss::Logistic,
                    psi: MarginLoss::Logistic,
                    psi_gate: None,
                    alpha: 1.0,
                },
            ],
            trials: 5,
            seed: 0,
            training: TrainingConfig::default(),
            grids: GridConfig::default(),
            synth: SynthConfig::default(),
            bench: BenchConfig::default(),
            calib: CalibConfig::default(),
            bound: BoundConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.costs.is_empty() {
            return Err(Error::Config("`costs` is empty".into()));
        }
        for &c in &self.costs {
            RejectionCost::new(c)?;
        }
        if self.methods.is_empty() {
            return Err(Error::Config("`methods` is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("`trials` must be at least 1".into()));
        }
        if self.grids.weight_decays.is_empty() || self.grids.taus.is_empty() {
            return Err(Error::Config("hyperparameter grids must be nonempty".into()));
        }
        if let Some(t) = self.grids.taus.iter().find(|t| !(**t > -1.0 && **t < 1.0)) {
            return Err(Error::Config(format!("τ candidate {t} outside (-1, 1)")));
        }
        if !(self.grids.train_fraction > 0.0 && self.grids.train_fraction < 1.0) {
            return Err(Error::Config("`grids.train_fraction` must lie in (0, 1)".into()));
        }
        if self.bound.min_classes < 2 || self.bound.max_classes < self.bound.min_classes {
            return Err(Error::Config("bound class range must satisfy 2 ≤ min ≤ max".into()));
        }
        Ok(())
    }

    pub fn cost_values(&self) -> Vec<RejectionCost> {
        self.costs
            .iter()
            .map(|&c| RejectionCost::new(c).expect("validated"))
            .collect()
    }
}
