//! Data deepening: clarity scores, per-round thresholds, the shrinking
//! candidate set, and cascaded inference over the depth classifiers.
//!
//! A sample is ambiguous (stays a candidate) when its clarity is at or below
//! the round threshold; otherwise its current prediction is frozen.

mod run;
mod threshold;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::learners::{LinearSvm, Mlp};
use crate::scalar::Scalar;

pub(crate) use run::accuracy;
pub use run::{run_deepening, DeepeningData, DeepeningOutcome, DeepeningParams, RoundLog, Strategy, Termination};
pub use threshold::{dnn_threshold, empirical_threshold, svm_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MocKind {
    /// Distance to the SVM hyperplane.
    SvmDistance,
    /// `Σ p log p` of the posterior.
    NegEntropy,
    /// Gap between the two largest posteriors.
    PosteriorGap,
}

impl MocKind {
    pub fn uses_svm(self) -> bool {
        self == MocKind::SvmDistance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthClassifier<T> {
    Svm(LinearSvm<T>),
    Mlp(Mlp<T>),
}

/// Clarity of one sample. SVM inputs are depth-k prefixes; MLP inputs are
/// depth-k reconstructions in the raw space.
pub fn moc<T: Scalar>(kind: MocKind, classifier: &DepthClassifier<T>, x: ArrayView1<'_, T>) -> Result<T> {
    match (kind, classifier) {
        (MocKind::SvmDistance, DepthClassifier::Svm(svm)) => {
            if x.len() != svm.depth() {
                return Err(Error::LengthMismatch {
                    what: "SVM input",
                    expected: svm.depth(),
                    got: x.len(),
                });
            }
            Ok(svm.distance(x))
        }
        (MocKind::NegEntropy | MocKind::PosteriorGap, DepthClassifier::Mlp(net)) => {
            let p = net.posterior(x)?;
            Ok(posterior_moc(kind, &p))
        }
        (kind, _) => Err(Error::IncompatibleMoc(format!(
            "{kind:?} cannot be computed from this classifier"
        ))),
    }
}

/// Clarity from a posterior vector (`NegEntropy` or `PosteriorGap`).
pub fn posterior_moc<T: Scalar>(kind: MocKind, posterior: &[T]) -> T {
    match kind {
        MocKind::NegEntropy => posterior
            .iter()
            .map(|&p| if p > T::zero() { p * p.ln() } else { T::zero() })
            .sum(),
        MocKind::PosteriorGap => {
            let mut first = T::neg_infinity();
            let mut second = T::neg_infinity();
            for &p in posterior {
                if p > first {
                    second = first;
                    first = p;
                } else if p > second {
                    second = p;
                }
            }
            if second == T::neg_infinity() {
                T::one()
            } else {
                first - second
            }
        }
        MocKind::SvmDistance => T::nan(),
    }
}

/// Candidate set at the start of a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcsState<T> {
    /// 1-based round index.
    pub round: usize,
    /// Sorted sample indices of the candidates.
    pub members: Vec<usize>,
    /// Thresholds of rounds `1..round`.
    pub thresholds: Vec<T>,
    /// Clarity of each member in this round, once computed.
    pub moc: Vec<T>,
}

impl<T: Scalar> AcsState<T> {
    /// Round 1: every sample is a candidate.
    pub fn initial(samples: usize) -> Self {
        AcsState {
            round: 1,
            members: (0..samples).collect(),
            thresholds: Vec::new(),
            moc: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Splits the candidates of `state` by `threshold`. Members whose clarity is
/// at most the threshold stay candidates; the others are returned as newly
/// clear samples.
pub fn partition<T: Scalar>(state: &AcsState<T>, moc_values: &[T], threshold: T) -> Result<(AcsState<T>, Vec<usize>)> {
    if moc_values.len() != state.members.len() {
        return Err(Error::LengthMismatch {
            what: "clarity values",
            expected: state.members.len(),
            got: moc_values.len(),
        });
    }
    let mut members = Vec::new();
    let mut cleared = Vec::new();
    for (&m, &v) in state.members.iter().zip(moc_values) {
        if v <= threshold {
            members.push(m);
        } else {
            cleared.push(m);
        }
    }
    let mut thresholds = state.thresholds.clone();
    thresholds.push(threshold);
    Ok((
        AcsState {
            round: state.round + 1,
            members,
            thresholds,
            moc: Vec::new(),
        },
        cleared,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage<T> {
    pub depth: usize,
    pub classifier: DepthClassifier<T>,
    pub threshold: T,
}

/// Depth classifiers applied in sequence; a sample leaves the cascade at the
/// first depth where its clarity exceeds that depth's threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalClassifier<T> {
    pub moc: MocKind,
    pub stages: Vec<Stage<T>>,
    /// Needed by MLP stages to map feature prefixes back to the raw space.
    pub embedding: Option<EmbeddingModel<T>>,
}

impl<T: Scalar> HierarchicalClassifier<T> {
    pub fn new(moc: MocKind, embedding: Option<EmbeddingModel<T>>) -> Self {
        HierarchicalClassifier {
            moc,
            stages: Vec::new(),
            embedding,
        }
    }

    pub fn push(&mut self, stage: Stage<T>) -> Result<()> {
        let expected = self.stages.last().map_or(1, |s| s.depth + 1);
        if stage.depth != expected {
            return Err(Error::InvalidParameter(format!(
                "stage depth {} does not follow {}",
                stage.depth,
                expected - 1
            )));
        }
        self.stages.push(stage);
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    fn check_features(&self, available: usize) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::EmptyInput("classifier stages"));
        }
        if available < self.depth() {
            return Err(Error::LengthMismatch {
                what: "sample features",
                expected: self.depth(),
                got: available,
            });
        }
        Ok(())
    }

    /// Predictions and clarity of stage `k` (0-based) for rows of `features`.
    pub fn stage_outputs(&self, k: usize, features: ArrayView2<'_, T>) -> Result<(Vec<usize>, Vec<T>)> {
        let stage = &self.stages[k];
        let prefix = features.slice(ndarray::s![.., ..stage.depth]);
        match &stage.classifier {
            DepthClassifier::Svm(svm) => Ok(prefix.outer_iter().map(|x| (svm.predict(x), svm.distance(x))).unzip()),
            DepthClassifier::Mlp(net) => {
                let embedding = self
                    .embedding
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("MLP stages need the embedding model".into()))?;
                let depths = vec![stage.depth; features.nrows()];
                let raw = embedding.reconstruct_rows(features, &depths)?;
                let post = net.posteriors(raw.view());
                Ok(post
                    .outer_iter()
                    .map(|p| {
                        let p = p.to_vec();
                        let class = crate::learners::mlp::argmax(ArrayView1::from(&p[..]));
                        (class, posterior_moc(self.moc, &p))
                    })
                    .unzip())
            }
        }
    }

    /// Class and depth used for one sample of at least `depth()` features.
    pub fn infer(&self, x: ArrayView1<'_, T>) -> Result<(usize, usize)> {
        let batch = x.insert_axis(Axis(0));
        Ok(self.infer_batch(batch)?[0])
    }

    /// Cascaded inference for every row.
    pub fn infer_batch(&self, features: ArrayView2<'_, T>) -> Result<Vec<(usize, usize)>> {
        self.check_features(features.ncols())?;
        let n = features.nrows();
        let mut out: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut pending: Vec<usize> = (0..n).collect();
        let last = self.stages.len() - 1;
        for (k, stage) in self.stages.iter().enumerate() {
            if pending.is_empty() {
                break;
            }
            let rows: Array2<T> = features.select(Axis(0), &pending);
            let (pred, clarity) = self.stage_outputs(k, rows.view())?;
            let mut still = Vec::new();
            for (j, &i) in pending.iter().enumerate() {
                if k == last || clarity[j] > stage.threshold {
                    out[i] = Some((pred[j], stage.depth));
                } else {
                    still.push(i);
                }
            }
            pending = still;
        }
        Ok(out.into_iter().map(|o| o.expect("every row resolved")).collect())
    }

    /// Predictions of stage `k` (0-based) alone, ignoring the cascade.
    pub fn predict_at(&self, k: usize, features: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        let depth = self.stages.get(k).map(|s| s.depth).ok_or(Error::DepthOutOfRange {
            depth: k + 1,
            max: self.depth(),
        })?;
        if features.ncols() < depth {
            return Err(Error::LengthMismatch {
                what: "sample features",
                expected: depth,
                got: features.ncols(),
            });
        }
        Ok(self.stage_outputs(k, features)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn svm_distance_on_hyperplane() {
        let c = DepthClassifier::Svm(LinearSvm::new(array![3.0, 4.0], -10.0));
        assert_eq!(moc(MocKind::SvmDistance, &c, array![2.0, 1.0].view()).unwrap(), 0.0);
    }

    #[test]
    fn posterior_scores() {
        let uniform = vec![0.1f64; 10];
        assert!((posterior_moc(MocKind::NegEntropy, &uniform) + 10f64.ln()).abs() < 1e-12);
        assert!((posterior_moc(MocKind::PosteriorGap, &[0.7f64, 0.2, 0.1]) - 0.5).abs() < 1e-12);
        assert_eq!(posterior_moc(MocKind::PosteriorGap, &[0.0, 1.0, 0.0]), 1.0);
        assert_eq!(posterior_moc(MocKind::NegEntropy, &[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn incompatible_pairing() {
        let c = DepthClassifier::Svm(LinearSvm::new(array![1.0], 0.0));
        assert!(matches!(
            moc(MocKind::PosteriorGap, &c, array![1.0].view()),
            Err(Error::IncompatibleMoc(_))
        ));
        let net = DepthClassifier::Mlp(Mlp::<f64>::new(1, &[2], 2, 0).unwrap());
        assert!(moc(MocKind::SvmDistance, &net, array![1.0].view()).is_err());
    }

    #[test]
    fn partition_is_inclusive() {
        let mut s = AcsState::<f64>::initial(3);
        s.moc = vec![0.1, 0.5, 0.9];
        let (next, cleared) = partition(&s, &[0.1, 0.5, 0.9], 0.5).unwrap();
        assert_eq!(next.members, vec![0, 1]);
        assert_eq!(cleared, vec![2]);
        assert_eq!(next.round, 2);
        let (all, _) = partition(&s, &[0.1, 0.5, 0.9], f64::INFINITY).unwrap();
        assert_eq!(all.members, s.members);
        let (none, _) = partition(&s, &[0.1, 0.5, 0.9], f64::NEG_INFINITY).unwrap();
        assert!(none.is_empty());
    }

    fn two_stage(thresholds: [f64; 2]) -> HierarchicalClassifier<f64> {
        let mut h = HierarchicalClassifier::new(MocKind::SvmDistance, None);
        h.push(Stage {
            depth: 1,
            classifier: DepthClassifier::Svm(LinearSvm::new(array![1.0], 0.0)),
            threshold: thresholds[0],
        })
        .unwrap();
        h.push(Stage {
            depth: 2,
            classifier: DepthClassifier::Svm(LinearSvm::new(array![0.0, 1.0], 0.0)),
            threshold: thresholds[1],
        })
        .unwrap();
        h
    }

    #[test]
    fn cascade_stops_at_first_clear_depth() {
        let h = two_stage([1.0, 1.0]);
        assert_eq!(h.infer(array![5.0, -3.0].view()).unwrap(), (0, 1));
        assert_eq!(h.infer(array![0.5, -3.0].view()).unwrap(), (1, 2));
        let open = two_stage([f64::INFINITY, f64::INFINITY]);
        assert_eq!(open.infer(array![5.0, -3.0].view()).unwrap(), (1, 2));
    }

    #[test]
    fn stage_depths_must_increase() {
        let mut h = HierarchicalClassifier::<f64>::new(MocKind::SvmDistance, None);
        let bad = Stage {
            depth: 2,
            classifier: DepthClassifier::Svm(LinearSvm::new(array![1.0, 0.0], 0.0)),
            threshold: 0.0,
        };
        assert!(h.push(bad).is_err());
    }
}
