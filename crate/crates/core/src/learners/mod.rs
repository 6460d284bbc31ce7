//! Depth classifiers: binary linear SVM and multi-class MLP.

pub mod mlp;
pub mod persist;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mlp::{mlp_posterior, train_mlp, Dense, Mlp, MlpTrainLog, DEFAULT_HIDDEN};
pub use persist::{from_json, load_model, save_model, to_json, ModelEnvelope, MODEL_FORMAT_VERSION};
pub use svm::{svm_predict, train_svm, LinearSvm, SvmTrainLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    /// Weight of the hinge-loss sum in the SVM objective.
    pub c_slack: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainSpec {
    /// Soft-margin SVM with unit slack weight.
    pub fn svm() -> Self {
        TrainSpec {
            c_slack: 1.0,
            epochs: 60,
            batch_size: 1,
            learning_rate: 1.0,
            seed: 0,
        }
    }

    /// Mini-batch 64, ten epochs per round.
    pub fn mlp() -> Self {
        TrainSpec {
            c_slack: 1.0,
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.01,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_slack > 0.0) || !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::InvalidParameter(format!(
                "training parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}
