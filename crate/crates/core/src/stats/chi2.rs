//! Chi-square CDF and quantile built on the regularized incomplete gamma.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    if x < half {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::of(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += T::of(c) / (x + T::of_usize(i));
    }
    let t = x + T::of(LANCZOS_G) + half;
    T::of(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x) / Γ(a)`.
pub fn regularized_gamma_p<T: Scalar>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x < a + T::one() {
        gamma_series(a, x)
    } else {
        T::one() - gamma_continued_fraction(a, x)
    }
}

fn gamma_series<T: Scalar>(a: T, x: T) -> T {
    let eps = T::epsilon();
    let mut ap = a;
    let mut term = T::one() / a;
    let mut sum = term;
    for _ in 0..10_000 {
        ap += T::one();
        term = term * x / ap;
        sum += term;
        if term.abs() < sum.abs() * eps {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// Upper tail Q(a, x) by the modified Lentz continued fraction.
fn gamma_continued_fraction<T: Scalar>(a: T, x: T) -> T {
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let two = T::of(2.0);
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..10_000 {
        let fi = T::of_usize(i);
        let an = -fi * (fi - a);
        b += two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = d * c;
        h *= delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Chi-square CDF with `dof` degrees of freedom.
pub fn chi2_cdf<T: Scalar>(r: T, dof: usize) -> T {
    regularized_gamma_p(T::of_usize(dof) / T::of(2.0), r / T::of(2.0))
}

/// Inverse chi-square CDF by bisection on [`chi2_cdf`].
pub fn chi2_quantile<T: Scalar>(p: T, dof: usize) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    if dof == 0 {
        return Err(Error::InvalidParameter("degrees of freedom must be >= 1".into()));
    }
    let mut lo = T::zero();
    let mut hi = T::of_usize(dof).max(T::one());
    while chi2_cdf(hi, dof) < p {
        lo = hi;
        hi *= T::of(2.0);
    }
    for _ in 0..400 {
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_cdf(mid, dof) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::of(2.0))
}

/// Mahalanobis radius whose chi-square mass equals `p`: `sqrt(G⁻¹(p; k))`.
pub fn mahalanobis_radius<T: Scalar>(p: T, dof: usize) -> Result<T> {
    Ok(chi2_quantile(p, dof)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dof_closed_form() {
        let r: f64 = chi2_quantile(0.95, 2).unwrap();
        let closed = -2.0 * (1.0f64 - 0.95).ln();
        assert!((r - closed).abs() < 1e-9, "{r} vs {closed}");
        assert!((r - 5.991_464_547).abs() < 1e-8);
    }

    #[test]
    fn one_dof_95() {
        let r: f64 = chi2_quantile(0.95, 1).unwrap();
        assert!((r - 3.841_458_820_694_124).abs() < 1e-9, "{r}");
    }

    #[test]
    fn round_trip_ten_dof_median() {
        let r: f64 = chi2_quantile(0.5, 10).unwrap();
        assert!((chi2_cdf(r, 10) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rejects_probability_outside_open_interval() {
        assert!(chi2_quantile(0.0f64, 3).is_err());
        assert!(chi2_quantile(1.0f64, 3).is_err());
        assert!(chi2_quantile(-0.2f64, 3).is_err());
        assert!(chi2_quantile(0.5f64, 0).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0f64).abs() < 1e-13);
        assert!(ln_gamma(2.0f64).abs() < 1e-13);
        assert!((ln_gamma(5.0f64) - 24.0f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5f64) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn cdf_is_zero_at_origin() {
        assert_eq!(chi2_cdf(0.0f64, 4), 0.0);
    }
}
