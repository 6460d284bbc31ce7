//! Fully connected ReLU network with a softmax output, trained by mini-batch
//! SGD on cross-entropy.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TrainSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hidden widths used when the caller does not override them: together with
/// the input and output layers this is a six-layer network.
pub const DEFAULT_HIDDEN: [usize; 4] = [256, 128, 64, 32];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    /// `inputs x outputs`
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
}

/// Parameter gradients, laid out like [`Mlp`]'s layers.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainLog {
    /// Mean mini-batch cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
}

impl<T: Scalar> Mlp<T> {
    /// He-initialized network (`N(0, 2/fan_in)` weights, zero biases).
    pub fn new(inputs: usize, hidden: &[usize], classes: usize, seed: u64) -> Result<Self> {
        if inputs == 0 || classes < 2 || hidden.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "bad network shape: {inputs} inputs, hidden {hidden:?}, {classes} classes"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        let layers = sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
                Dense {
                    weights: Array2::from_shape_simple_fn((fan_in, fan_out), || T::of(normal.sample(&mut rng))),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].weights.ncols() != pair[1].weights.nrows() {
                return Err(Error::LengthMismatch {
                    what: "layer width",
                    expected: pair[0].weights.ncols(),
                    got: pair[1].weights.nrows(),
                });
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().expect("non-empty").weights.ncols()
    }

    /// Pre-softmax outputs for a batch.
    pub fn logits(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights);
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(relu);
            }
            a = z;
        }
        a
    }

    /// Softmax posteriors for a batch, one row per sample.
    pub fn posteriors(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let mut z = self.logits(x);
        softmax_rows(&mut z);
        z
    }

    pub fn posterior(&self, x: ArrayView1<'_, T>) -> Result<Vec<T>> {
        if x.len() != self.inputs() {
            return Err(Error::LengthMismatch {
                what: "network input",
                expected: self.inputs(),
                got: x.len(),
            });
        }
        let batch = x.insert_axis(Axis(0));
        Ok(self.posteriors(batch).row(0).to_vec())
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, T>) -> Vec<usize> {
        self.logits(x).outer_iter().map(|row| argmax(row)).collect()
    }

    /// Mean cross-entropy over the batch and its parameter gradients.
    pub fn loss_and_gradients(&self, x: ArrayView2<'_, T>, labels: &[usize]) -> (T, Gradients<T>) {
        let n = x.nrows();
        let last = self.layers.len() - 1;
        // forward, keeping every layer's input
        let mut inputs: Vec<Array2<T>> = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights);
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(relu);
            }
            inputs.push(a);
            a = z;
        }
        softmax_rows(&mut a);
        let nf = T::of_usize(n);
        let tiny = T::min_positive_value();
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &c)| -(a[[i, c]].max(tiny)).ln())
            .sum::<T>()
            / nf;

        // dL/dz for the output layer
        let mut delta = a;
        for (i, &c) in labels.iter().enumerate() {
            delta[[i, c]] -= T::one();
        }
        delta.mapv_inplace(|v| v / nf);

        let mut grads: Vec<Dense<T>> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &inputs[i];
            let dw = input.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                // the input of layer i is the ReLU output of layer i − 1
                ndarray::Zip::from(&mut back).and(input).for_each(|g, &act| {
                    if act <= T::zero() {
                        *g = T::zero();
                    }
                });
                delta = back;
            }
            grads.push(Dense { weights: dw, bias: db });
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }

    fn apply(&mut self, grads: &Gradients<T>, lr: T) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.scaled_add(-lr, &g.weights);
            layer.bias.scaled_add(-lr, &g.bias);
        }
    }

    /// Continues training from the current parameters.
    pub fn train(&mut self, x: ArrayView2<'_, T>, labels: &[usize], spec: &TrainSpec) -> Result<MlpTrainLog> {
        let n = x.nrows();
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: n,
                got: labels.len(),
            });
        }
        if x.ncols() != self.inputs() {
            return Err(Error::LengthMismatch {
                what: "network input",
                expected: self.inputs(),
                got: x.ncols(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.classes()) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} outside 0..{}",
                self.classes()
            )));
        }
        spec.validate()?;
        let mut log = MlpTrainLog::default();
        if n == 0 {
            return Ok(log);
        }
        let lr = T::of(spec.learning_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut batch_labels = Vec::with_capacity(spec.batch_size);
        for _ in 0..spec.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(spec.batch_size) {
                let batch = x.select(Axis(0), chunk);
                batch_labels.clear();
                batch_labels.extend(chunk.iter().map(|&i| labels[i]));
                let (loss, grads) = self.loss_and_gradients(batch.view(), &batch_labels);
                self.apply(&grads, lr);
                total += loss.as_f64();
                batches += 1;
            }
            log.epoch_losses.push(total / batches as f64);
        }
        Ok(log)
    }
}

/// Builds a network with `hidden` widths and trains it from scratch.
pub fn train_mlp<T: Scalar>(
    x: ArrayView2<'_, T>,
    labels: &[usize],
    classes: usize,
    hidden: &[usize],
    spec: &TrainSpec,
) -> Result<(Mlp<T>, MlpTrainLog)> {
    let mut net = Mlp::new(x.ncols(), hidden, classes, spec.seed)?;
    let log = net.train(x, labels, spec)?;
    Ok((net, log))
}

pub fn mlp_posterior<T: Scalar>(mlp: &Mlp<T>, x: ArrayView1<'_, T>) -> Result<Vec<T>> {
    mlp.posterior(x)
}

fn relu<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

fn softmax_rows<T: Scalar>(z: &mut Array2<T>) {
    for mut row in z.outer_iter_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: T = row.iter().copied().sum();
        row.mapv_inplace(|v| v / sum);
    }
}

pub(crate) fn argmax<T: Scalar>(row: ArrayView1<'_, T>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_weights_give_uniform_posterior() {
        let mut net = Mlp::<f64>::new(3, &[4], 5, 1).unwrap();
        for layer in net.layers_mut() {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        let p = net.posterior(array![0.3, -1.0, 2.0].view()).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-12));
    }

    #[test]
    fn posterior_sums_to_one() {
        let net = Mlp::<f64>::new(3, &[8, 8], 4, 7).unwrap();
        let p = net.posterior(array![10.0, -3.0, 0.5].view()).unwrap();
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_epochs_leave_network_unchanged() {
        let net0 = Mlp::<f64>::new(2, &[4], 3, 9).unwrap();
        let mut net = net0.clone();
        let spec = TrainSpec {
            epochs: 0,
            ..TrainSpec::mlp()
        };
        let x = array![[1.0, 2.0], [0.0, -1.0]];
        let log = net.train(x.view(), &[0, 2], &spec).unwrap();
        assert!(log.epoch_losses.is_empty());
        assert_eq!(net, net0);
    }

    #[test]
    fn input_length_mismatch() {
        let net = Mlp::<f64>::new(3, &[4], 2, 1).unwrap();
        assert!(net.posterior(array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn rejects_out_of_range_label() {
        let mut net = Mlp::<f64>::new(2, &[4], 2, 1).unwrap();
        let x = array![[1.0, 2.0]];
        assert!(net.train(x.view(), &[2], &TrainSpec::mlp()).is_err());
    }
}
