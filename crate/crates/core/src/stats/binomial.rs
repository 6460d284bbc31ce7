//! Raw moments of the binomial distribution.

use num_traits::{FromPrimitive, Num};

use super::chi2::ln_gamma;
use crate::scalar::Scalar;

/// `E[X^order]` for `X ~ Binomial(n, q)`, summed over every outcome.
///
/// The pmf is evaluated in log space so `n` in the thousands does not
/// underflow.
pub fn binomial_moment<T: Scalar>(n: usize, q: T, order: u32) -> T {
    if n == 0 {
        return if order == 0 { T::one() } else { T::zero() };
    }
    if q <= T::zero() {
        return if order == 0 { T::one() } else { T::zero() };
    }
    if q >= T::one() {
        return T::of_usize(n).powi(order as i32);
    }
    let nf = T::of_usize(n);
    let ln_q = q.ln();
    let ln_1q = (-q).ln_1p();
    let ln_n_fact = ln_gamma(nf + T::one());
    (0..=n)
        .map(|j| {
            let jf = T::of_usize(j);
            let ln_pmf =
                ln_n_fact - ln_gamma(jf + T::one()) - ln_gamma(nf - jf + T::one()) + jf * ln_q + (nf - jf) * ln_1q;
            jf.powi(order as i32) * ln_pmf.exp()
        })
        .sum()
}

/// The same moment in any exact number ring, e.g. `Ratio<BigInt>`.
pub fn binomial_moment_exact<R>(n: usize, q: R, order: u32) -> R
where
    R: Num + Clone + FromPrimitive,
{
    let one_minus_q = R::one() - q.clone();
    let mut total = R::zero();
    let mut coeff = R::one(); // C(n, j)
    for j in 0..=n {
        if j > 0 {
            coeff = coeff * R::from_usize(n - j + 1).expect("count") / R::from_usize(j).expect("count");
        }
        let mut term = coeff.clone();
        for _ in 0..j {
            term = term * q.clone();
        }
        for _ in 0..(n - j) {
            term = term * one_minus_q.clone();
        }
        let mut power = R::one();
        let jr = R::from_usize(j).expect("count");
        for _ in 0..order {
            power = power * jr.clone();
        }
        total = total + term * power;
    }
    total
}

/// Upper bound `(μ + ℓ/2)^ℓ` on the ℓ-th raw binomial moment with mean μ.
pub fn moment_bound<T: Scalar>(mean: T, order: u32) -> T {
    (mean + T::of(order as f64 / 2.0)).powi(order as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::Ratio;

    #[test]
    fn four_coins_third_moment() {
        let m: f64 = binomial_moment(4, 0.5, 3);
        assert!((m - 14.0).abs() < 1e-12);
        assert!(m <= moment_bound(2.0, 3));
        assert_eq!(moment_bound(2.0f64, 3), 42.875);
    }

    #[test]
    fn four_coins_third_moment_exact_rational() {
        let half = Ratio::new(BigInt::from(1), BigInt::from(2));
        let m = binomial_moment_exact(4, half, 3);
        assert_eq!(m, Ratio::from_integer(BigInt::from(14)));
    }

    #[test]
    fn degenerate_probabilities() {
        assert_eq!(binomial_moment(7, 0.0f64, 3), 0.0);
        assert_eq!(binomial_moment(7, 1.0f64, 3), 343.0);
        assert_eq!(binomial_moment(0, 0.3f64, 2), 0.0);
    }

    #[test]
    fn large_n_does_not_underflow() {
        // mean 1000, variance 500 -> E[X^2] = 500 + 1e6
        let m: f64 = binomial_moment(2000, 0.5, 2);
        assert!((m - 1_000_500.0).abs() / 1_000_500.0 < 1e-10);
    }
}
