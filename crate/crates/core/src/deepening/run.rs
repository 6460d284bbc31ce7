//! The round loop: train the depth-k classifier, threshold, shrink the
//! candidate set.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{
    dnn_threshold, partition, svm_threshold, AcsState, DepthClassifier, HierarchicalClassifier, MocKind, Stage,
};
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::learners::{train_svm, Mlp, TrainSpec};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::stats::ClassGaussian;

/// Which received data the depth-k classifier is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Only the current candidates, at depth k.
    Candidates,
    /// Every sample at the depth it has reached. Shallower samples are
    /// zero-padded (SVM) or reconstructed from their prefix (MLP).
    AllReceived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepeningParams {
    pub rounds: usize,
    pub moc: MocKind,
    /// Coverage probability of the class ellipsoids (SVM).
    pub p_th: f64,
    /// Tolerated fraction of confidently wrong samples (MLP).
    pub z_th: f64,
    pub strategy: Strategy,
    pub train: TrainSpec,
    /// MLP hidden widths.
    pub hidden: Vec<usize>,
    /// Number of classes; 2 for the SVM.
    pub classes: usize,
    /// MLP epochs in round 1. Later rounds continue from the previous
    /// round's network for `train.epochs` epochs.
    pub first_round_epochs: Option<usize>,
}

impl DeepeningParams {
    pub fn svm(rounds: usize, p_th: f64) -> Self {
        DeepeningParams {
            rounds,
            moc: MocKind::SvmDistance,
            p_th,
            z_th: 0.03,
            strategy: Strategy::Candidates,
            train: TrainSpec::svm(),
            hidden: Vec::new(),
            classes: 2,
            first_round_epochs: None,
        }
    }

    pub fn mlp(rounds: usize, z_th: f64, classes: usize) -> Self {
        DeepeningParams {
            rounds,
            moc: MocKind::PosteriorGap,
            p_th: 0.95,
            z_th,
            strategy: Strategy::AllReceived,
            train: TrainSpec::mlp(),
            hidden: crate::learners::DEFAULT_HIDDEN.to_vec(),
            classes,
            first_round_epochs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("need at least one round".into()));
        }
        if self.moc.uses_svm() {
            if !(self.p_th > 0.0 && self.p_th < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "p_th must lie in (0, 1), got {}",
                    self.p_th
                )));
            }
            if self.classes != 2 {
                return Err(Error::InvalidParameter("the SVM is binary".into()));
            }
        } else if !(0.0..=1.0).contains(&self.z_th) {
            return Err(Error::InvalidParameter(format!(
                "z_th must lie in [0, 1], got {}",
                self.z_th
            )));
        }
        self.train.validate()
    }
}

/// Training samples as embedded feature rows, plus optional held-out rows.
#[derive(Debug, Clone, Copy)]
pub struct DeepeningData<'a, T> {
    /// `M x F`, features in importance order.
    pub features: ArrayView2<'a, T>,
    pub labels: &'a [usize],
    /// Required for MLP rounds.
    pub embedding: Option<&'a EmbeddingModel<T>>,
    pub test: Option<(ArrayView2<'a, T>, &'a [usize])>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub candidates: usize,
    pub threshold: f64,
    pub cleared: usize,
    pub train_accuracy: f64,
    /// Cascade over the stages trained so far.
    pub heldout_accuracy: Option<f64>,
    /// The depth-k classifier alone.
    pub heldout_depth_accuracy: Option<f64>,
    pub epoch_losses: Vec<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    /// Nobody is left after this round.
    EmptyCandidates {
        after_round: usize,
    },
    /// The classifier of this round could not be trained.
    Degenerate {
        round: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepeningOutcome<T> {
    pub classifier: HierarchicalClassifier<T>,
    /// `chain[k − 1]` is the candidate set of round k; the final entry is the
    /// set left after the last partition.
    pub chain: Vec<AcsState<T>>,
    pub logs: Vec<RoundLog>,
    /// Frozen training-set prediction of every sample.
    pub predictions: Vec<usize>,
    /// Depth at which each training sample left the candidate set.
    pub depths: Vec<usize>,
    pub rounds: usize,
    pub termination: Termination,
}

impl<T: Scalar> DeepeningOutcome<T> {
    /// `|S^(k)|` for `k = 1..=K`, zero for rounds that never ran.
    pub fn candidate_sizes(&self) -> Vec<usize> {
        (0..self.rounds)
            .map(|k| self.chain.get(k).map_or(0, |s| s.len()))
            .collect()
    }

    /// `Σ_k |S^(k)| / (K M)`.
    pub fn deepening_ratio(&self) -> f64 {
        let m = self.predictions.len();
        let total: usize = self.candidate_sizes().iter().sum();
        total as f64 / (self.rounds * m) as f64
    }

    /// `|S^(k+1)| / |S^(k)|` per round, 0 for empty rounds.
    pub fn reduction_ratios(&self) -> Vec<f64> {
        let sizes = self.candidate_sizes();
        (0..self.rounds)
            .map(|k| {
                let here = sizes[k];
                let next = if k + 1 < self.rounds {
                    sizes[k + 1]
                } else {
                    self.chain.get(k + 1).map_or(0, |s| s.len())
                };
                if here == 0 {
                    0.0
                } else {
                    next as f64 / here as f64
                }
            })
            .collect()
    }

    pub fn train_accuracy(&self, labels: &[usize]) -> f64 {
        accuracy(&self.predictions, labels)
    }
}

pub(crate) fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / pred.len() as f64
}

/// Rows of `features` truncated to `depth`, with entries past each row's own
/// depth set to zero.
fn padded_prefix<T: Scalar>(
    features: ArrayView2<'_, T>,
    rows: &[usize],
    row_depths: &[usize],
    depth: usize,
) -> Array2<T> {
    let mut out = Array2::zeros((rows.len(), depth));
    for (mut dst, (&i, &d)) in out.outer_iter_mut().zip(rows.iter().zip(row_depths)) {
        for j in 0..d.min(depth) {
            dst[j] = features[[i, j]];
        }
    }
    out
}

/// Runs up to `params.rounds` rounds of deepening over the training data.
pub fn run_deepening<T: Scalar>(data: &DeepeningData<'_, T>, params: &DeepeningParams) -> Result<DeepeningOutcome<T>> {
    params.validate()?;
    let (m, f) = data.features.dim();
    if data.labels.len() != m {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: m,
            got: data.labels.len(),
        });
    }
    if m == 0 {
        return Err(Error::EmptyInput("training samples"));
    }
    if params.rounds > f {
        return Err(Error::DepthOutOfRange {
            depth: params.rounds,
            max: f,
        });
    }
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= params.classes) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} outside 0..{}",
            params.classes
        )));
    }
    let use_svm = params.moc.uses_svm();
    let embedding = if use_svm {
        None
    } else {
        Some(
            data.embedding
                .ok_or_else(|| Error::InvalidParameter("MLP deepening needs the embedding model".into()))?,
        )
    };

    let mut cascade = HierarchicalClassifier::new(params.moc, embedding.cloned());
    let mut chain = vec![AcsState::<T>::initial(m)];
    let mut logs = Vec::new();
    let mut predictions = vec![0usize; m];
    let mut depths = vec![0usize; m];
    let mut net: Option<Mlp<T>> = None;
    let mut termination = Termination::Completed;

    for k in 1..=params.rounds {
        let state = chain.last().expect("non-empty chain").clone();
        if state.is_empty() {
            termination = Termination::EmptyCandidates { after_round: k - 1 };
            break;
        }
        let members = &state.members;
        let (rows, row_depths): (Vec<usize>, Vec<usize>) = match params.strategy {
            Strategy::Candidates => (members.clone(), vec![k; members.len()]),
            Strategy::AllReceived => (0..m)
                .map(|i| {
                    (
                        i,
                        if members.binary_search(&i).is_ok() {
                            k
                        } else {
                            depths[i]
                        },
                    )
                })
                .unzip(),
        };
        let row_labels: Vec<usize> = rows.iter().map(|&i| data.labels[i]).collect();
        let round_seed = derive_seed(params.train.seed, k as u64);

        let mut epoch_losses = Vec::new();
        let (classifier, train_pred) = if use_svm {
            let x = padded_prefix(data.features, &rows, &row_depths, k);
            let spec = params.train.clone().with_seed(round_seed);
            match train_svm(x.view(), &row_labels, &spec) {
                Ok((svm, _)) => {
                    let pred: Vec<usize> = x.outer_iter().map(|r| svm.predict(r)).collect();
                    (DepthClassifier::Svm(svm), pred)
                }
                Err(Error::DegenerateTrainingSet(reason)) if k > 1 => {
                    termination = Termination::Degenerate { round: k, reason };
                    break;
                }
                Err(e) => return Err(e),
            }
        } else {
            let emb = embedding.expect("checked above");
            let x = {
                let sub = data.features.select(Axis(0), &rows);
                emb.reconstruct_rows(sub.view(), &row_depths)?
            };
            let mut current = match net.take() {
                Some(n) => n,
                None => Mlp::new(
                    emb.raw_dim(),
                    &params.hidden,
                    params.classes,
                    derive_seed(params.train.seed, 0),
                )?,
            };
            let mut spec = params.train.clone().with_seed(round_seed);
            if k == 1 {
                if let Some(e) = params.first_round_epochs {
                    spec.epochs = e;
                }
            }
            epoch_losses = current.train(x.view(), &row_labels, &spec)?.epoch_losses;
            let pred = current.predict_batch(x.view());
            net = Some(current.clone());
            (DepthClassifier::Mlp(current), pred)
        };
        let train_accuracy = accuracy(&train_pred, &row_labels);

        cascade.push(Stage {
            depth: k,
            classifier,
            threshold: T::infinity(),
        })?;
        let member_features = data.features.select(Axis(0), members);
        let (member_pred, member_moc) = cascade.stage_outputs(k - 1, member_features.view())?;
        for (j, &i) in members.iter().enumerate() {
            predictions[i] = member_pred[j];
            depths[i] = k;
        }

        let mut note = None;
        let threshold = if use_svm {
            let DepthClassifier::Svm(svm) = &cascade.stages[k - 1].classifier else {
                unreachable!("SVM round")
            };
            match class_gaussians(member_features.view(), members, data.labels, k) {
                Ok((g0, g1)) => svm_threshold(&g0, &g1, svm, T::of(params.p_th))?,
                Err(e) => {
                    note = Some(format!("class Gaussians unavailable ({e}); nobody cleared"));
                    T::infinity()
                }
            }
        } else {
            let correct: Vec<bool> = members
                .iter()
                .zip(&member_pred)
                .map(|(&i, &p)| data.labels[i] == p)
                .collect();
            dnn_threshold(&member_moc, &correct, T::of(params.z_th))?
        };
        cascade.stages[k - 1].threshold = threshold;

        let mut scored = state.clone();
        scored.moc = member_moc;
        let (next, cleared) = partition(&scored, &scored.moc, threshold)?;
        *chain.last_mut().expect("non-empty chain") = scored;

        let (heldout_accuracy, heldout_depth_accuracy) = match data.test {
            Some((tx, ty)) => {
                let cascaded: Vec<usize> = cascade.infer_batch(tx)?.into_iter().map(|(c, _)| c).collect();
                let plain = cascade.stage_outputs(k - 1, tx)?.0;
                (Some(accuracy(&cascaded, ty)), Some(accuracy(&plain, ty)))
            }
            None => (None, None),
        };
        logs.push(RoundLog {
            round: k,
            candidates: state.len(),
            threshold: threshold.as_f64(),
            cleared: cleared.len(),
            train_accuracy,
            heldout_accuracy,
            heldout_depth_accuracy,
            epoch_losses,
            note,
        });
        chain.push(next);
    }

    Ok(DeepeningOutcome {
        classifier: cascade,
        chain,
        logs,
        predictions,
        depths,
        rounds: params.rounds,
        termination,
    })
}

fn class_gaussians<T: Scalar>(
    member_features: ArrayView2<'_, T>,
    members: &[usize],
    labels: &[usize],
    depth: usize,
) -> Result<(ClassGaussian<T>, ClassGaussian<T>)> {
    let prefix = member_features.slice(ndarray::s![.., ..depth]);
    let pick = |class: usize| -> Result<ClassGaussian<T>> {
        let rows: Vec<usize> = members
            .iter()
            .enumerate()
            .filter(|(_, &i)| labels[i] == class)
            .map(|(j, _)| j)
            .collect();
        ClassGaussian::fit(prefix.select(Axis(0), &rows).view(), class)
    };
    Ok((pick(0)?, pick(1)?))
}
