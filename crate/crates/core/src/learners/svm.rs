//! Binary soft-margin linear SVM.
//!
//! Class 0 lies on the non-negative side of the hyperplane: a sample is
//! predicted as 0 when `wᵀx + b ≥ 0`, and as 1 otherwise.

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm<T> {
    pub w: Array1<T>,
    pub b: T,
}

/// Objective value at the end of every epoch, for the model returned so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SvmTrainLog {
    pub initial_objective: f64,
    pub checkpoints: Vec<f64>,
}

impl<T: Scalar> LinearSvm<T> {
    pub fn new(w: Array1<T>, b: T) -> Self {
        LinearSvm { w, b }
    }

    pub fn depth(&self) -> usize {
        self.w.len()
    }

    pub fn decision(&self, x: ArrayView1<'_, T>) -> T {
        self.w.dot(&x) + self.b
    }

    pub fn predict(&self, x: ArrayView1<'_, T>) -> usize {
        if self.decision(x) >= T::zero() {
            0
        } else {
            1
        }
    }

    /// Euclidean distance from `x` to the hyperplane.
    pub fn distance(&self, x: ArrayView1<'_, T>) -> T {
        self.decision(x).abs() / self.w.dot(&self.w).sqrt()
    }

    /// `½‖w‖² + C Σ max(0, 1 − yᵢ(wᵀxᵢ + b))` with y = +1 for class 0.
    pub fn objective(&self, x: ArrayView2<'_, T>, labels: &[usize], c_slack: f64) -> f64 {
        let reg = 0.5 * self.w.dot(&self.w).as_f64();
        let hinge: f64 = x
            .outer_iter()
            .zip(labels)
            .map(|(row, &l)| {
                let y = sign_of(l);
                (1.0 - y * self.decision(row).as_f64()).max(0.0)
            })
            .sum();
        reg + c_slack * hinge
    }
}

pub fn svm_predict<T: Scalar>(svm: &LinearSvm<T>, x: ArrayView1<'_, T>) -> usize {
    svm.predict(x)
}

fn sign_of(label: usize) -> f64 {
    if label == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Trains on rows of `x` with labels in {0, 1}.
///
/// Stochastic subgradient descent on the soft-margin objective, one sample
/// per step in a seeded shuffled order, step `1/(λt)` with `λ = 1/(C n)`.
/// The data are centered internally and the offset is learned as the weight
/// of a constant feature. The best end-of-epoch iterate is returned.
pub fn train_svm<T: Scalar>(
    x: ArrayView2<'_, T>,
    labels: &[usize],
    spec: &TrainSpec,
) -> Result<(LinearSvm<T>, SvmTrainLog)> {
    let (n, k) = x.dim();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: n,
            got: labels.len(),
        });
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidParameter("SVM labels must be 0 or 1".into()));
    }
    let zeros = labels.iter().filter(|&&l| l == 0).count();
    if zeros == 0 || zeros == n {
        return Err(Error::DegenerateTrainingSet("both classes must be present".into()));
    }
    spec.validate()?;

    let xs: Vec<Vec<f64>> = x.outer_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
    let center: Vec<f64> = {
        let m = x.mean_axis(Axis(0)).expect("n > 0");
        m.iter().map(|v| v.as_f64()).collect()
    };
    let ys: Vec<f64> = labels.iter().map(|&l| sign_of(l)).collect();

    let c = spec.c_slack;
    let lambda = 1.0 / (c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    // augmented weights: k coefficients on centered data, then the offset
    let mut wa = vec![0.0f64; k + 1];
    let mut scale = 1.0f64; // wa is stored as scale * v to make shrinkage O(1)
    let mut v = vec![0.0f64; k + 1];

    let to_model = |v: &[f64], scale: f64| -> LinearSvm<T> {
        let w: Vec<f64> = v[..k].iter().map(|vi| vi * scale).collect();
        let b_centered = v[k] * scale;
        let b = b_centered - w.iter().zip(&center).map(|(a, m)| a * m).sum::<f64>();
        LinearSvm {
            w: w.iter().map(|&wi| T::of(wi)).collect(),
            b: T::of(b),
        }
    };

    let initial = to_model(&wa, 1.0);
    let initial_objective = initial.objective(x, labels, c);
    let mut best = initial;
    let mut best_objective = initial_objective;
    let mut log = SvmTrainLog {
        initial_objective,
        checkpoints: Vec::with_capacity(spec.epochs),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = {
                let mut s = v[k];
                for j in 0..k {
                    s += v[j] * (xs[i][j] - center[j]);
                }
                ys[i] * s * scale
            };
            // w <- (1 − ηλ) w  [+ η y x if the margin is violated]
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                scale = 1.0;
                v.iter_mut().for_each(|vi| *vi = 0.0);
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let step = eta * ys[i] / scale;
                for j in 0..k {
                    v[j] += step * (xs[i][j] - center[j]);
                }
                v[k] += step;
            }
            let norm = v.iter().map(|vi| vi * vi).sum::<f64>().sqrt() * scale;
            if norm > radius {
                scale *= radius / norm;
            }
            if scale < 1e-100 {
                v.iter_mut().for_each(|vi| *vi *= scale);
                scale = 1.0;
            }
        }
        wa.copy_from_slice(&v);
        let candidate = to_model(&wa, scale);
        let objective = candidate.objective(x, labels, c);
        if objective < best_objective {
            best_objective = objective;
            best = candidate;
        }
        log.checkpoints.push(best_objective);
    }
    if best.w.iter().all(|wi| *wi == T::zero()) {
        return Err(Error::DegenerateTrainingSet(
            "training produced a zero normal vector".into(),
        ));
    }
    Ok((best, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn boundary_ties_to_class_zero() {
        let svm = LinearSvm::new(array![3.0, 4.0], -10.0);
        assert_eq!(svm.decision(array![2.0, 1.0].view()), 0.0);
        assert_eq!(svm.predict(array![2.0, 1.0].view()), 0);
    }

    #[test]
    fn sign_convention() {
        let svm = LinearSvm::new(array![1.0, 0.0], 0.0);
        assert_eq!(svm_predict(&svm, array![5.0, 9.0].view()), 0);
        assert_eq!(svm_predict(&svm, array![-5.0, 9.0].view()), 1);
    }

    #[test]
    fn separable_pair() {
        let x = array![[1.0, 0.0], [-1.0, 0.0]];
        let (svm, log) = train_svm(x.view(), &[0, 1], &TrainSpec::svm()).unwrap();
        assert_eq!(svm.predict(x.row(0)), 0);
        assert_eq!(svm.predict(x.row(1)), 1);
        assert!(*log.checkpoints.last().unwrap() <= log.initial_objective);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = array![[1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(
            train_svm(x.view(), &[1, 1], &TrainSpec::svm()),
            Err(Error::DegenerateTrainingSet(_))
        ));
    }

    #[test]
    fn rejects_non_binary_labels() {
        let x = array![[1.0, 0.0], [2.0, 0.0]];
        assert!(train_svm(x.view(), &[0, 2], &TrainSpec::svm()).is_err());
    }
}
