//! Feature-by-feature offloading of embedded samples to an edge server.
//!
//! Samples are embedded by PCA so that features arrive in order of
//! importance. Each round the server trains a classifier on the features
//! received so far, keeps only the ambiguously classified samples as
//! candidates for the next feature, and during training prefetches the next
//! feature of a randomly chosen subset of candidates. The amount prefetched
//! minimizes a bound on the expected transmit energy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod deepening;
pub mod embedding;
pub mod energy;
pub mod error;
pub mod learners;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod stats;

pub use embedding::{EmbeddedSample, EmbeddingModel};
pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the generic types.
pub mod f64 {
    pub type RawDataset = crate::dataset::RawDataset<f64>;
    pub type EmbeddingModel = crate::embedding::EmbeddingModel<f64>;
    pub type EmbeddedSample = crate::embedding::EmbeddedSample<f64>;
    pub type ClassGaussian = crate::stats::ClassGaussian<f64>;
    pub type LinearSvm = crate::learners::LinearSvm<f64>;
    pub type Mlp = crate::learners::Mlp<f64>;
    pub type DepthClassifier = crate::deepening::DepthClassifier<f64>;
    pub type HierarchicalClassifier = crate::deepening::HierarchicalClassifier<f64>;
    pub type DeepeningOutcome = crate::deepening::DeepeningOutcome<f64>;
    pub type EnergyParams = crate::energy::EnergyParams<f64>;
    pub type RoundTiming = crate::energy::RoundTiming<f64>;
    pub type PrefetchInputs = crate::energy::PrefetchInputs<f64>;
    pub type PrefetchDecision = crate::energy::PrefetchDecision<f64>;
    pub type SimOutcome = crate::sim::SimOutcome<f64>;
}
