//! PCA embedding with features ordered by importance.
//!
//! Feature `i` of an embedded sample is the projection of the centered raw
//! vector onto the eigenvector of the sample covariance with the `i`-th
//! largest eigenvalue. Leading features therefore carry the most variance,
//! which is the order in which the offloading rounds transmit them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel<T> {
    mean: Array1<T>,
    /// One unit-norm direction per row, `features x raw_dim`.
    components: Array2<T>,
    eigenvalues: Array1<T>,
}

/// A labeled sample in the embedded feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSample<T> {
    pub id: usize,
    pub label: usize,
    pub features: Vec<T>,
}

impl<T: Scalar> EmbeddingModel<T> {
    /// Fits the top-`features` principal directions of `raw` (one sample per
    /// row). Covariance uses the n − 1 divisor. Each component is signed so
    /// that its largest-magnitude entry is positive.
    pub fn fit(raw: ArrayView2<'_, T>, features: usize) -> Result<Self> {
        let (n, dim) = raw.dim();
        if n < 2 {
            return Err(Error::NotEnoughSamples { needed: 2, got: n });
        }
        if features == 0 || features >= dim {
            return Err(Error::InvalidParameter(format!(
                "embedded dimension must satisfy 1 <= F < D, got F = {features}, D = {dim}"
            )));
        }
        let mean = raw.mean_axis(Axis(0)).expect("n >= 2");
        let cov = linalg::sample_covariance(raw, mean.view());
        let total_variance: T = cov.diag().iter().copied().sum();
        if total_variance <= T::zero() {
            return Err(Error::ZeroVariance);
        }
        let eig = linalg::symmetric_eigen(cov.view())?;

        let mut components = Array2::<T>::zeros((features, dim));
        for (i, mut row) in components.outer_iter_mut().enumerate() {
            row.assign(&eig.vectors.column(i));
            let pivot = row
                .iter()
                .copied()
                .fold(T::zero(), |best, v| if v.abs() > best.abs() { v } else { best });
            if pivot < T::zero() {
                row.mapv_inplace(|v| -v);
            }
        }
        // Rounding can leave tiny negative eigenvalues on rank-deficient data.
        let eigenvalues = eig.values.iter().take(features).map(|&v| v.max(T::zero())).collect();
        Ok(EmbeddingModel {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn raw_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn mean(&self) -> ArrayView1<'_, T> {
        self.mean.view()
    }

    pub fn components(&self) -> ArrayView2<'_, T> {
        self.components.view()
    }

    pub fn eigenvalues(&self) -> ArrayView1<'_, T> {
        self.eigenvalues.view()
    }

    /// Projects one raw vector: `components · (raw − mean)`.
    pub fn embed(&self, raw: ArrayView1<'_, T>) -> Result<Vec<T>> {
        if raw.len() != self.raw_dim() {
            return Err(Error::LengthMismatch {
                what: "raw sample",
                expected: self.raw_dim(),
                got: raw.len(),
            });
        }
        let centered = &raw - &self.mean;
        Ok(self.components.dot(&centered).to_vec())
    }

    /// Embeds every row of `raw`; returns a `samples x features` matrix.
    pub fn embed_all(&self, raw: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if raw.ncols() != self.raw_dim() {
            return Err(Error::LengthMismatch {
                what: "raw sample",
                expected: self.raw_dim(),
                got: raw.ncols(),
            });
        }
        let centered = &raw - &self.mean;
        Ok(centered.dot(&self.components.t()))
    }

    /// Maps the first `depth` features back to raw space; later features are
    /// treated as zero.
    pub fn reconstruct(&self, features: &[T], depth: usize) -> Result<Array1<T>> {
        let f = self.feature_dim();
        if depth == 0 || depth > f {
            return Err(Error::DepthOutOfRange { depth, max: f });
        }
        if features.len() < depth {
            return Err(Error::LengthMismatch {
                what: "feature prefix",
                expected: depth,
                got: features.len(),
            });
        }
        let mut out = self.mean.clone();
        for (coef, row) in features[..depth].iter().zip(self.components.outer_iter()) {
            out.scaled_add(*coef, &row);
        }
        Ok(out)
    }

    /// Batch reconstruction: row `i` of `features` is reconstructed from its
    /// first `depths[i]` entries.
    pub fn reconstruct_rows(&self, features: ArrayView2<'_, T>, depths: &[usize]) -> Result<Array2<T>> {
        let f = self.feature_dim();
        let mut coefs = Array2::<T>::zeros((features.nrows(), f));
        for (i, (src, mut dst)) in features.outer_iter().zip(coefs.outer_iter_mut()).enumerate() {
            let depth = depths[i];
            if depth == 0 || depth > f {
                return Err(Error::DepthOutOfRange { depth, max: f });
            }
            for j in 0..depth {
                dst[j] = src[j];
            }
        }
        let mut out = coefs.dot(&self.components);
        out += &self.mean;
        Ok(out)
    }

    /// Cumulative explained variance for depths 1..=F.
    pub fn captured_variance(&self) -> Vec<T> {
        self.eigenvalues
            .iter()
            .scan(T::zero(), |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn axis_aligned() -> Array2<f64> {
        array![[-2.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [2.0, 0.0]]
    }

    #[test]
    fn axis_aligned_component_and_eigenvalue() {
        let model = EmbeddingModel::fit(axis_aligned().view(), 1).unwrap();
        let c = model.components();
        assert!((c[[0, 0]].abs() - 1.0).abs() < 1e-12);
        assert!(c[[0, 1]].abs() < 1e-12);
        assert!((model.eigenvalues()[0] - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let model = EmbeddingModel::fit(axis_aligned().view(), 1).unwrap();
        assert!(model.components()[[0, 0]] > 0.0);
    }

    #[test]
    fn embed_axis_aligned() {
        let model = EmbeddingModel::fit(axis_aligned().view(), 1).unwrap();
        let x = model.embed(array![3.0, 0.0].view()).unwrap();
        assert!((x[0].abs() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn embed_mean_is_zero() {
        let raw: ndarray::Array2<f64> = array![[1.0, 2.0, 0.5], [3.0, -1.0, 2.0], [0.0, 0.0, 1.0], [2.0, 5.0, -3.0]];
        let model = EmbeddingModel::fit(raw.view(), 2).unwrap();
        let x = model.embed(model.mean()).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn reconstruct_depth_one_axis_aligned() {
        let model = EmbeddingModel::fit(axis_aligned().view(), 1).unwrap();
        let r = model.reconstruct(&[3.0], 1).unwrap();
        assert!((r[0] - 3.0).abs() < 1e-12 && r[1].abs() < 1e-12);
    }

    #[test]
    fn reconstruct_zero_features_gives_mean() {
        let raw: ndarray::Array2<f64> = array![[1.0, 2.0, 0.5], [3.0, -1.0, 2.0], [0.0, 0.0, 1.0], [2.0, 5.0, -3.0]];
        let model = EmbeddingModel::fit(raw.view(), 2).unwrap();
        let r = model.reconstruct(&[0.0, 0.0], 2).unwrap();
        assert_eq!(r, model.mean().to_owned());
    }

    #[test]
    fn rejects_bad_dimensions() {
        let raw = axis_aligned();
        assert!(EmbeddingModel::fit(raw.view(), 2).is_err());
        assert!(EmbeddingModel::fit(raw.view(), 0).is_err());
        assert!(matches!(
            EmbeddingModel::fit(raw.slice(ndarray::s![..1, ..]), 1),
            Err(Error::NotEnoughSamples { .. })
        ));
    }

    #[test]
    fn identical_samples_have_zero_variance() {
        let raw = array![[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]];
        assert!(matches!(EmbeddingModel::fit(raw.view(), 1), Err(Error::ZeroVariance)));
    }

    #[test]
    fn embed_length_mismatch() {
        let model = EmbeddingModel::fit(axis_aligned().view(), 1).unwrap();
        assert!(matches!(
            model.embed(array![1.0, 2.0, 3.0].view()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn reconstruct_depth_out_of_range() {
        let model = EmbeddingModel::fit(axis_aligned().view(), 1).unwrap();
        assert!(matches!(
            model.reconstruct(&[1.0], 0),
            Err(Error::DepthOutOfRange { .. })
        ));
        assert!(matches!(
            model.reconstruct(&[1.0, 1.0], 2),
            Err(Error::DepthOutOfRange { .. })
        ));
    }
}
