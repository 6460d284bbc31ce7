//! Library results against independent implementations: nalgebra for
//! eigen-decompositions and inverses, statrs for distributions, finite
//! differences for gradients, and direct enumeration for expectations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{array, Array2};
use num_bigint::BigInt;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

use jd2p::energy::{
    expected_prefetch_cost, optimal_prefetch, prefetch_oracle_exact, tx_energy, EnergyParams, PrefetchInputs,
    RoundTiming,
};
use jd2p::learners::Mlp;
use jd2p::stats::{binomial_moment, binomial_moment_exact, chi2_cdf, chi2_quantile, ClassGaussian};
use jd2p::EmbeddingModel;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // correlated columns so the spectrum is spread out
    let base = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
    let mix = Array2::from_shape_fn(
        (cols, cols),
        |(i, j)| if j >= i { 1.0 / (1 + j - i) as f64 } else { 0.0 },
    );
    base.dot(&mix)
}

#[test]
fn pca_matches_nalgebra_eigen() {
    let x = random_matrix(300, 12, 1);
    let model = EmbeddingModel::fit(x.view(), 6).unwrap();

    let n = x.nrows() as f64;
    let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n - 1.0);
    let m = DMatrix::from_fn(12, 12, |i, j| cov[[i, j]]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..12).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let components = model.components();
    for (r, &i) in order.iter().take(6).enumerate() {
        let expected = eig.eigenvalues[i];
        let got = model.eigenvalues()[r];
        assert!(
            (got - expected).abs() <= 1e-9 * expected.abs(),
            "eigenvalue {r}: {got} vs {expected}"
        );
        let v = eig.eigenvectors.column(i);
        let dot: f64 = (0..12).map(|j| components[[r, j]] * v[j]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8, "component {r} not parallel: {dot}");
    }
    for a in 0..6 {
        let row = components.row(a);
        assert!((row.dot(&row) - 1.0).abs() < 1e-9);
        for b in 0..a {
            assert!(row.dot(&components.row(b)).abs() < 1e-9);
        }
    }
}

#[test]
fn reconstruction_is_lossless_on_a_subspace() {
    // rank-4 data in five dimensions
    let lift = array![
        [1.0, 0.0, 0.0, 0.0, 0.5],
        [0.0, 1.0, 0.0, 0.0, -0.3],
        [0.0, 0.0, 1.0, 0.0, 0.2],
        [0.0, 0.0, 0.0, 1.0, 0.1]
    ];
    let x = random_matrix(50, 4, 2).dot(&lift);
    let model = EmbeddingModel::fit(x.view(), 4).unwrap();
    for row in x.outer_iter().take(5) {
        let f = model.embed(row).unwrap();
        let back = model.reconstruct(&f, 4).unwrap();
        for (a, b) in back.iter().zip(row) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn chi2_quantile_matches_statrs() {
    for k in 1..=30 {
        let dist = ChiSquared::new(k as f64).unwrap();
        for p in [0.01, 0.1, 0.5, 0.9, 0.95, 0.99, 0.999] {
            let ours: f64 = chi2_quantile(p, k).unwrap();
            let theirs = dist.inverse_cdf(p);
            assert!(
                (ours - theirs).abs() <= 1e-7 * theirs.max(1.0),
                "k={k} p={p}: {ours} vs {theirs}"
            );
            let cdf: f64 = chi2_cdf(theirs, k);
            assert!((cdf - dist.cdf(theirs)).abs() < 1e-10);
        }
    }
}

#[test]
fn mahalanobis_matches_nalgebra_inverse() {
    let sigma = array![[2.0, 0.3, 0.1], [0.3, 1.0, -0.2], [0.1, -0.2, 0.5]];
    let mu = array![0.5, -1.0, 2.0];
    let g = ClassGaussian::from_parts(0, mu.clone(), sigma.clone()).unwrap();
    let inv: DMatrix<f64> = DMatrix::from_fn(3, 3, |i, j| sigma[[i, j]]).try_inverse().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let x = array![
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0)
        ];
        let d: DVector<f64> = DVector::from_fn(3, |i, _| x[i] - mu[i]);
        let expected = (d.transpose() * &inv * &d)[(0, 0)].sqrt();
        let got: f64 = g.mahalanobis(x.view());
        assert!((got - expected).abs() < 1e-10);
    }
}

#[test]
fn binomial_moment_matches_statrs_pmf_sum() {
    for n in [1u64, 4, 17, 60, 400] {
        for q in [0.05, 0.3, 0.5, 0.85] {
            let dist = Binomial::new(q, n).unwrap();
            for order in 1..=5u32 {
                let expected: f64 = (0..=n).map(|j| dist.pmf(j) * (j as f64).powi(order as i32)).sum();
                let got: f64 = binomial_moment(n as usize, q, order);
                assert!(
                    (got - expected).abs() <= 1e-9 * expected.max(1.0),
                    "n={n} q={q} l={order}"
                );
            }
        }
    }
}

#[test]
fn float_moment_agrees_with_exact_rational() {
    for n in [3usize, 10, 25] {
        for (num, den) in [(1, 10), (1, 2), (7, 9)] {
            let exact = binomial_moment_exact(n, Ratio::new(BigInt::from(num), BigInt::from(den)), 4);
            let exact_f =
                exact.numer().to_string().parse::<f64>().unwrap() / exact.denom().to_string().parse::<f64>().unwrap();
            let float: f64 = binomial_moment(n, num as f64 / den as f64, 4);
            assert!((float - exact_f).abs() <= 1e-11 * exact_f);
        }
    }
}

/// Low-order moments from the Stirling-number expansion
/// `E[X^ℓ] = Σ_j S(ℓ, j) n^(j) q^j` with falling factorials.
#[test]
fn moments_match_stirling_expansion() {
    let stirling = |l: usize, j: usize| -> f64 {
        let mut s = vec![vec![0.0; l + 1]; l + 1];
        s[0][0] = 1.0;
        for a in 1..=l {
            for b in 1..=a {
                s[a][b] = b as f64 * s[a - 1][b] + s[a - 1][b - 1];
            }
        }
        s[l][j]
    };
    for n in [2usize, 9, 30] {
        for q in [0.2f64, 0.6] {
            for l in 1..=5usize {
                let expected: f64 = (1..=l)
                    .map(|j| {
                        let falling: f64 = (0..j).map(|i| (n as f64 - i as f64).max(0.0)).product();
                        stirling(l, j) * falling * q.powi(j as i32)
                    })
                    .sum();
                let got: f64 = binomial_moment(n, q, l as u32);
                assert!((got - expected).abs() <= 1e-10 * expected.max(1.0));
            }
        }
    }
}

#[test]
fn expected_cost_matches_direct_enumeration() {
    let timing = RoundTiming::new(1.0, 0.4).unwrap();
    let inputs = PrefetchInputs {
        s: 40,
        rho: 0.35,
        h: 0.8,
        nu: 1.5,
    };
    for ell in 2..=4u32 {
        for p in [0usize, 5, 17, 40] {
            let dist = Binomial::new(inputs.rho, (inputs.s - p) as u64).unwrap();
            let moment: f64 = (0..=(inputs.s - p) as u64)
                .map(|j| dist.pmf(j) * (j as f64).powi(ell as i32))
                .sum();
            let expected = (p as f64).powi(ell as i32) / (inputs.h * 0.4f64.powi(ell as i32 - 1))
                + inputs.nu / 0.6f64.powi(ell as i32 - 1) * moment;
            let got: f64 = expected_prefetch_cost(p, &inputs, &timing, ell);
            assert!((got - expected).abs() <= 1e-10 * expected);
        }
    }
}

#[test]
fn worked_prefetch_example() {
    // φ = (1·2)^1 · 0.5/0.5 = 2, p* = 2·0.5/(1 + 2·0.25) · (50 + 1) = 34
    let timing = RoundTiming::new(1.0, 0.5).unwrap();
    let inputs = PrefetchInputs {
        s: 100,
        rho: 0.5,
        h: 1.0,
        nu: 2.0,
    };
    let d = optimal_prefetch(&inputs, &timing, &EnergyParams::<f64>::new(1.0, 2, 1.0).unwrap());
    assert!((d.phi - 2.0).abs() < 1e-15);
    assert!((d.p_continuous - 34.0).abs() < 1e-12);
    assert_eq!(d.p_star, 34);
}

#[test]
fn closed_form_close_to_exhaustive_search_for_hundreds_of_samples() {
    let timing = RoundTiming::new(1.0, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let ell = rng.random_range(2..=4u32);
        let inputs = PrefetchInputs {
            s: rng.random_range(100..600),
            rho: rng.random_range(0.1..0.9),
            h: rng.random_range(0.3..3.0),
            nu: 2.0,
        };
        let p = optimal_prefetch(&inputs, &timing, &EnergyParams::new(1.0, ell, 1.0).unwrap()).p_star;
        let best = prefetch_oracle_exact(&inputs, &timing, ell).unwrap();
        let ratio =
            expected_prefetch_cost(p, &inputs, &timing, ell) / expected_prefetch_cost(best, &inputs, &timing, ell);
        assert!(ratio <= 1.05, "{inputs:?} l={ell}: {ratio}");
    }
}

#[test]
fn tx_energy_formula() {
    let params = EnergyParams::new(1e-17, 3, 8.0).unwrap();
    let e: f64 = tx_energy(8.0 * 1000.0, 0.5, 2.0, &params).unwrap();
    let expected = 1e-17 * 8000f64.powi(3) / (2.0 * 0.25);
    assert!((e - expected).abs() <= 1e-15 * expected);
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Array2::from_shape_fn((6, 5), |_| rng.random_range(-1.0..1.0));
    let labels = [0, 2, 1, 2, 0, 1];
    let mut net = Mlp::<f64>::new(5, &[7, 4], 3, 9).unwrap();
    // nonzero biases so no ReLU sits exactly at its kink
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(0.05..0.2));
    }
    let (_, grads) = net.loss_and_gradients(x.view(), &labels);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for li in 0..net.layers().len() {
        let (rows, cols) = net.layers()[li].weights.dim();
        for i in 0..rows {
            for j in 0..cols {
                let mut plus = net.clone();
                plus.layers_mut()[li].weights[[i, j]] += h;
                let mut minus = net.clone();
                minus.layers_mut()[li].weights[[i, j]] -= h;
                let fd = (plus.loss_and_gradients(x.view(), &labels).0 - minus.loss_and_gradients(x.view(), &labels).0)
                    / (2.0 * h);
                worst = worst.max((fd - grads.layers[li].weights[[i, j]]).abs());
            }
        }
        for i in 0..net.layers()[li].bias.len() {
            let mut plus = net.clone();
            plus.layers_mut()[li].bias[i] += h;
            let mut minus = net.clone();
            minus.layers_mut()[li].bias[i] -= h;
            let fd = (plus.loss_and_gradients(x.view(), &labels).0 - minus.loss_and_gradients(x.view(), &labels).0)
                / (2.0 * h);
            worst = worst.max((fd - grads.layers[li].bias[i]).abs());
        }
    }
    assert!(worst < 1e-4, "largest gradient error {worst}");
}
