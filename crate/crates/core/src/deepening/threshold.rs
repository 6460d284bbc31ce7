//! Per-round clarity thresholds.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::learners::LinearSvm;
use crate::linalg::symmetric_eigen;
use crate::scalar::Scalar;
use crate::stats::{mahalanobis_radius, ClassGaussian};

const ASCENT_TOL: f64 = 1e-6;
const FEASIBILITY_TOL: f64 = 1e-8;
const MAX_ASCENT_STEPS: usize = 5_000;
const MAX_DYKSTRA_STEPS: usize = 20_000;

/// `{x : (x − μ)ᵀ A (x − μ) ≤ r²}` with `A = Q diag(a) Qᵀ`.
struct Ellipsoid {
    center: Vec<f64>,
    /// Eigenvectors of `A`, row `i` is the `i`-th one.
    axes: Vec<Vec<f64>>,
    curvature: Vec<f64>,
    radius_sq: f64,
}

impl Ellipsoid {
    fn new<T: Scalar>(g: &ClassGaussian<T>, radius: f64) -> Result<Self> {
        let eig = symmetric_eigen(g.sigma_inverse.view())?;
        let k = g.dim();
        let axes = (0..k)
            .map(|i| eig.vectors.column(i).iter().map(|v| v.as_f64()).collect())
            .collect();
        Ok(Ellipsoid {
            center: g.mu.iter().map(|v| v.as_f64()).collect(),
            axes,
            curvature: eig.values.iter().map(|v| v.as_f64().max(0.0)).collect(),
            radius_sq: radius * radius,
        })
    }

    fn coords(&self, z: &[f64]) -> Vec<f64> {
        self.axes
            .iter()
            .map(|q| {
                q.iter()
                    .zip(z)
                    .zip(&self.center)
                    .map(|((qi, zi), ci)| qi * (zi - ci))
                    .sum()
            })
            .collect()
    }

    fn quad(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.curvature).map(|(ui, ai)| ai * ui * ui).sum()
    }

    /// Mahalanobis-style distance `sqrt((z − μ)ᵀ A (z − μ))`.
    fn distance(&self, z: &[f64]) -> f64 {
        self.quad(&self.coords(z)).sqrt()
    }

    /// Euclidean projection. Outside points map to
    /// `μ + Q diag(1/(1 + λ a)) Qᵀ (z − μ)` with `λ` found by bisection.
    fn project(&self, z: &[f64]) -> Vec<f64> {
        let u = self.coords(z);
        if self.quad(&u) <= self.radius_sq {
            return z.to_vec();
        }
        let g = |lambda: f64| -> f64 {
            u.iter()
                .zip(&self.curvature)
                .map(|(ui, ai)| {
                    let s = ui / (1.0 + lambda * ai);
                    ai * s * s
                })
                .sum()
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        while g(hi) > self.radius_sq {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > self.radius_sq {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let scaled: Vec<f64> = u
            .iter()
            .zip(&self.curvature)
            .map(|(ui, ai)| ui / (1.0 + hi * ai))
            .collect();
        let mut y = self.center.clone();
        for (q, s) in self.axes.iter().zip(&scaled) {
            for (yi, qi) in y.iter_mut().zip(q) {
                *yi += qi * s;
            }
        }
        y
    }

    /// Largest semi-axis length.
    fn extent(&self) -> f64 {
        let min_a = self.curvature.iter().copied().fold(f64::INFINITY, f64::min);
        (self.radius_sq / min_a.max(f64::MIN_POSITIVE)).sqrt()
    }
}

/// Dykstra's alternating projections onto `a ∩ b`. Returns `None` when the
/// limit point is not feasible, i.e. the intersection is empty.
fn project_intersection(z: &[f64], a: &Ellipsoid, b: &Ellipsoid) -> Option<Vec<f64>> {
    let k = z.len();
    let mut x = z.to_vec();
    let mut p = vec![0.0; k];
    let mut q = vec![0.0; k];
    let scale = 1.0 + z.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for _ in 0..MAX_DYKSTRA_STEPS {
        let xp: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + pi).collect();
        let y = a.project(&xp);
        for i in 0..k {
            p[i] = xp[i] - y[i];
        }
        let yq: Vec<f64> = y.iter().zip(&q).map(|(yi, qi)| yi + qi).collect();
        let next = b.project(&yq);
        for i in 0..k {
            q[i] = yq[i] - next[i];
        }
        let change = next.iter().zip(&x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        x = next;
        if change <= 1e-14 * scale {
            break;
        }
    }
    let violation = (a.distance(&x) - a.radius_sq.sqrt()).max(b.distance(&x) - b.radius_sq.sqrt());
    (violation <= FEASIBILITY_TOL).then_some(x)
}

/// Largest Euclidean distance from the hyperplane of `svm` to a point that
/// lies within Mahalanobis radius `sqrt(χ²_k⁻¹(p_th))` of both class means.
///
/// Each sign of `wᵀx + b` is maximized over the intersection by projected
/// gradient ascent, projecting with Dykstra's method. An empty intersection
/// gives 0.
pub fn svm_threshold<T: Scalar>(
    g0: &ClassGaussian<T>,
    g1: &ClassGaussian<T>,
    svm: &LinearSvm<T>,
    p_th: T,
) -> Result<T> {
    let k = svm.depth();
    for g in [g0, g1] {
        if g.dim() != k {
            return Err(Error::LengthMismatch {
                what: "class Gaussian depth",
                expected: k,
                got: g.dim(),
            });
        }
    }
    let radius = mahalanobis_radius(p_th, k)?.as_f64();
    let e0 = Ellipsoid::new(g0, radius)?;
    let e1 = Ellipsoid::new(g1, radius)?;
    // Canonical order, so the result does not depend on which class is 0.
    let (first, second) = if e0.center.partial_cmp(&e1.center) == Some(std::cmp::Ordering::Greater) {
        (e1, e0)
    } else {
        (e0, e1)
    };

    let w: Vec<f64> = svm.w.iter().map(|v| v.as_f64()).collect();
    let b = svm.b.as_f64();
    let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(w_norm > 0.0) {
        return Err(Error::InvalidParameter("hyperplane normal is zero".into()));
    }

    let midpoint: Vec<f64> = first
        .center
        .iter()
        .zip(&second.center)
        .map(|(a, c)| 0.5 * (a + c))
        .collect();
    let Some(start) = project_intersection(&midpoint, &first, &second) else {
        return Ok(T::zero());
    };

    let step = 2.0 * first.extent().max(second.extent()).max(1e-12);
    let mut best = f64::NEG_INFINITY;
    for sign in [1.0, -1.0] {
        let dir: Vec<f64> = w.iter().map(|wi| sign * wi / w_norm).collect();
        let value = |x: &[f64]| sign * (x.iter().zip(&w).map(|(xi, wi)| xi * wi).sum::<f64>() + b) / w_norm;
        let mut x = start.clone();
        let mut current = value(&x);
        for _ in 0..MAX_ASCENT_STEPS {
            let moved: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let Some(next) = project_intersection(&moved, &first, &second) else {
                break;
            };
            let next_value = value(&next);
            let shift = next.iter().zip(&x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            x = next;
            let gain = next_value - current;
            current = current.max(next_value);
            if gain.abs() <= ASCENT_TOL * 1e-3 && shift <= ASCENT_TOL {
                break;
            }
        }
        best = best.max(current);
    }
    Ok(T::of(best.max(0.0)))
}

/// `sup{β : z(β) ≥ z_th}` over the observed clarity values, where `z(β)` is
/// the fraction of samples that are misclassified and have clarity ≥ β.
/// Returns `−∞` when no observed value qualifies.
pub fn dnn_threshold<T: Scalar>(moc_values: &[T], correct: &[bool], z_th: T) -> Result<T> {
    if moc_values.is_empty() {
        return Err(Error::EmptyInput("clarity values"));
    }
    if correct.len() != moc_values.len() {
        return Err(Error::LengthMismatch {
            what: "correctness flags",
            expected: moc_values.len(),
            got: correct.len(),
        });
    }
    let n = T::of_usize(moc_values.len());
    let mut order: Vec<usize> = (0..moc_values.len()).collect();
    order.sort_by(|&a, &b| {
        moc_values[b]
            .partial_cmp(&moc_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut errors = 0usize;
    let mut i = 0;
    while i < order.len() {
        let beta = moc_values[order[i]];
        // every sample tied at this value counts towards z(beta)
        while i < order.len() && moc_values[order[i]] == beta {
            if !correct[order[i]] {
                errors += 1;
            }
            i += 1;
        }
        if T::of_usize(errors) / n >= z_th {
            return Ok(beta);
        }
    }
    Ok(T::neg_infinity())
}

/// Clarity values of the samples inside both ellipsoids; a lower bound for
/// [`svm_threshold`].
pub fn empirical_threshold<T: Scalar>(
    g0: &ClassGaussian<T>,
    g1: &ClassGaussian<T>,
    svm: &LinearSvm<T>,
    p_th: T,
    samples: ArrayView2<'_, T>,
) -> Result<T> {
    let radius = mahalanobis_radius(p_th, svm.depth())?;
    let mut best = T::zero();
    for x in samples.outer_iter() {
        if g0.mahalanobis(x) <= radius && g1.mahalanobis(x) <= radius {
            best = best.max(svm.distance(x));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn unit(mu: [f64; 2]) -> ClassGaussian<f64> {
        ClassGaussian::from_parts(0, array![mu[0], mu[1]], Array2::eye(2)).unwrap()
    }

    #[test]
    fn identical_gaussians_give_the_radius() {
        let g = unit([0.0, 0.0]);
        let svm = LinearSvm::new(array![0.6, 0.8], 0.0);
        let beta = svm_threshold(&g, &g, &svm, 0.95).unwrap();
        let r = mahalanobis_radius(0.95, 2).unwrap();
        assert!((beta - r).abs() < 1e-6, "{beta} vs {r}");
    }

    #[test]
    fn disjoint_gaussians_give_zero() {
        let svm = LinearSvm::new(array![1.0, 0.0], 0.0);
        let beta = svm_threshold(&unit([-100.0, 0.0]), &unit([100.0, 0.0]), &svm, 0.95).unwrap();
        assert_eq!(beta, 0.0);
    }

    #[test]
    fn lens_between_two_unit_gaussians() {
        let svm = LinearSvm::new(array![1.0, 0.0], 0.0);
        let beta = svm_threshold(&unit([-1.0, 0.0]), &unit([1.0, 0.0]), &svm, 0.95).unwrap();
        let r = mahalanobis_radius(0.95, 2).unwrap();
        assert!((beta - (r - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn swapping_classes_is_exact() {
        let g0 = ClassGaussian::from_parts(0, array![-0.7, 0.3], array![[1.5, 0.4], [0.4, 0.8]]).unwrap();
        let g1 = ClassGaussian::from_parts(1, array![0.9, -0.2], array![[0.6, -0.1], [-0.1, 1.2]]).unwrap();
        let svm = LinearSvm::new(array![1.3, -0.4], 0.1);
        let flipped = LinearSvm::new(-&svm.w, -svm.b);
        let a: f64 = svm_threshold(&g0, &g1, &svm, 0.97).unwrap();
        let b = svm_threshold(&g1, &g0, &flipped, 0.97).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn dnn_threshold_worked_example() {
        let moc = [0.9, 0.5, 0.3, 0.1];
        let ok = [true, false, true, false];
        assert_eq!(dnn_threshold(&moc, &ok, 0.25).unwrap(), 0.5);
        assert_eq!(dnn_threshold(&moc, &ok, 0.0).unwrap(), 0.9);
        assert_eq!(dnn_threshold(&moc, &ok, 0.5).unwrap(), 0.1);
        assert_eq!(dnn_threshold(&moc, &ok, 0.6).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn all_correct_gives_sentinel() {
        let moc = [0.2, 0.4];
        assert_eq!(dnn_threshold(&moc, &[true, true], 0.01).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(dnn_threshold::<f64>(&[], &[], 0.1).is_err());
    }
}
