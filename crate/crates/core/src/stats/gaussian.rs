use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Relative ridge added to the class covariance, scaled by `trace / k`.
pub const RIDGE: f64 = 1e-6;

/// Single Gaussian per class, fit by maximum likelihood (n − 1 covariance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGaussian<T> {
    pub class_id: usize,
    pub mu: Array1<T>,
    pub sigma: Array2<T>,
    pub sigma_inverse: Array2<T>,
}

impl<T: Scalar> ClassGaussian<T> {
    pub fn fit(samples: ArrayView2<'_, T>, class_id: usize) -> Result<Self> {
        let (n, k) = samples.dim();
        if n < 2 {
            return Err(Error::NotEnoughSamples { needed: 2, got: n });
        }
        let mu = samples.mean_axis(Axis(0)).expect("n >= 2");
        let mut sigma = linalg::sample_covariance(samples, mu.view());
        let trace: T = sigma.diag().iter().copied().sum();
        // A degenerate class (all samples equal) still needs an invertible
        // covariance; fall back to a unit scale for the ridge.
        let scale = if trace > T::zero() {
            trace / T::of_usize(k)
        } else {
            T::one()
        };
        let ridge = T::of(RIDGE) * scale;
        for i in 0..k {
            sigma[[i, i]] += ridge;
        }
        Self::from_parts(class_id, mu, sigma)
    }

    /// Builds a Gaussian from an explicit mean and SPD covariance.
    pub fn from_parts(class_id: usize, mu: Array1<T>, sigma: Array2<T>) -> Result<Self> {
        if sigma.dim() != (mu.len(), mu.len()) {
            return Err(Error::LengthMismatch {
                what: "covariance dimension",
                expected: mu.len(),
                got: sigma.nrows(),
            });
        }
        let sigma_inverse = linalg::spd_inverse(sigma.view())?;
        Ok(ClassGaussian {
            class_id,
            mu,
            sigma,
            sigma_inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `sqrt((x − μ)ᵀ Σ⁻¹ (x − μ))`.
    pub fn mahalanobis(&self, x: ArrayView1<'_, T>) -> T {
        let d = &x - &self.mu;
        d.dot(&self.sigma_inverse.dot(&d)).max(T::zero()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn square_corners() {
        let s = array![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]];
        let g = ClassGaussian::fit(s.view(), 0).unwrap();
        assert_eq!(g.mu, array![1.0, 1.0]);
        let ridge = RIDGE * (8.0 / 3.0) / 2.0;
        assert!((g.sigma[[0, 0]] - (4.0 / 3.0 + ridge)).abs() < 1e-15);
        assert!((g.sigma[[1, 1]] - (4.0 / 3.0 + ridge)).abs() < 1e-15);
        assert!(g.sigma[[0, 1]].abs() < 1e-15);
    }

    #[test]
    fn repeated_sample_fits_ridge_only() {
        let s = Array2::from_shape_fn((5, 3), |(_, j)| j as f64);
        let g = ClassGaussian::fit(s.view(), 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { RIDGE } else { 0.0 };
                assert!((g.sigma[[i, j]] - want).abs() < 1e-18);
            }
        }
        let prod = g.sigma_inverse.dot(&g.sigma);
        for i in 0..3 {
            assert!((prod[[i, i]] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_samples() {
        let s = array![[1.0, 2.0]];
        assert!(matches!(
            ClassGaussian::fit(s.view(), 0),
            Err(Error::NotEnoughSamples { .. })
        ));
    }

    #[test]
    fn mahalanobis_examples() {
        let id = ClassGaussian::from_parts(0, array![0.0f64, 0.0], Array2::eye(2)).unwrap();
        assert_eq!(id.mahalanobis(array![0.0, 0.0].view()), 0.0);
        assert!((id.mahalanobis(array![3.0, 4.0].view()) - 5.0).abs() < 1e-12);

        let diag = ClassGaussian::from_parts(0, array![0.0, 0.0], array![[4.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((diag.mahalanobis(array![2.0, 1.0].view()) - 2f64.sqrt()).abs() < 1e-12);
    }
}
