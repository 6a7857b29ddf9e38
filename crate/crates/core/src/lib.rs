//! Multiclass classification with a reject option.
//!
//! Surrogate losses for learning a classifier together with a rejector, the
//! confidence-based rejectors built from their inverse links, a numerical
//! engine for checking calibration conditions and excess-risk bounds, a small
//! MLP trainer and an experiment runner.

pub mod calibration;
pub mod data;
pub mod error;
pub mod experiment;
pub mod links;
pub mod losses;
pub mod model;
pub mod numeric;

pub use error::{Error, Result};
pub use losses::{Label, MarginLoss, PairwiseLossSpec, ProbVector, RejectionCost, ScoreVector, Surrogate};
