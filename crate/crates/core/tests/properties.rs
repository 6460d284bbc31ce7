use ndarray::{array, Array1, Array2};
use proptest::prelude::*;

use jd2p::dataset::{gen_synthetic, SyntheticParams};
use jd2p::deepening::{
    dnn_threshold, partition, run_deepening, svm_threshold, AcsState, DeepeningData, DeepeningParams,
};
use jd2p::energy::{
    expected_prefetch_cost, optimal_prefetch, prefetch_objective, tx_energy, EnergyParams, PrefetchInputs, RoundTiming,
};
use jd2p::learners::{LinearSvm, Mlp, TrainSpec};
use jd2p::sim::{budget_selection, BenchmarkKind};
use jd2p::stats::{binomial_moment, chi2_cdf, chi2_quantile, moment_bound, ClassGaussian};
use jd2p::EmbeddingModel;

fn prefetch_inputs() -> impl Strategy<Value = (PrefetchInputs<f64>, f64, u32)> {
    (
        1usize..3000,
        0.01f64..0.99,
        0.05f64..10.0,
        1.01f64..6.0,
        0.05f64..0.95,
        2u32..=5,
    )
        .prop_map(|(s, rho, h, nu, frac, ell)| (PrefetchInputs { s, rho, h, nu }, frac, ell))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_never_exceeds_bound(n in 0usize..400, q in 0.0f64..1.0, ell in 1u32..=6) {
        let m = binomial_moment(n, q, ell);
        prop_assert!(m <= moment_bound(n as f64 * q, ell) * (1.0 + 1e-12));
    }

    #[test]
    fn prefetch_objective_is_convex((inputs, frac, ell) in prefetch_inputs()) {
        let timing = RoundTiming::new(1.0, frac).unwrap();
        let f = |p: f64| prefetch_objective(p, &inputs, &timing, ell);
        let scale = f(0.0).abs().max(1.0);
        let step = (inputs.s as f64 / 20.0).max(1.0);
        for i in 1..20 {
            let p = i as f64 * step;
            prop_assert!((f(p + step) - 2.0 * f(p) + f(p - step)) / scale >= -1e-9);
        }
    }

    #[test]
    fn prefetch_stays_within_population((inputs, frac, ell) in prefetch_inputs()) {
        let timing = RoundTiming::new(1.0, frac).unwrap();
        let d = optimal_prefetch(&inputs, &timing, &EnergyParams::new(1.0, ell, 1.0).unwrap());
        prop_assert!(d.p_star <= inputs.s);
        prop_assert!(d.p_continuous >= 0.0);
    }

    #[test]
    fn rounded_prefetch_beats_both_extremes((inputs, frac, ell) in prefetch_inputs()) {
        // no prefetch and prefetching everything are both feasible choices
        prop_assume!(inputs.s >= 100);
        let timing = RoundTiming::new(1.0, frac).unwrap();
        let p = optimal_prefetch(&inputs, &timing, &EnergyParams::new(1.0, ell, 1.0).unwrap()).p_star;
        let cost = expected_prefetch_cost(p, &inputs, &timing, ell);
        let none = expected_prefetch_cost(0, &inputs, &timing, ell);
        prop_assert!(cost <= none * (1.0 + 1e-9));
    }

    #[test]
    fn tx_energy_grows_with_bits_and_shrinks_with_time(bits in 1.0f64..1e5, t in 0.01f64..10.0, h in 0.01f64..10.0, ell in 2u32..=5) {
        let params = EnergyParams::new(1e-17, ell, 8.0).unwrap();
        let e = tx_energy(bits, t, h, &params).unwrap();
        prop_assert!(tx_energy(bits * 1.5, t, h, &params).unwrap() > e);
        prop_assert!(tx_energy(bits, t * 1.5, h, &params).unwrap() < e);
        prop_assert!(tx_energy(bits, t, h * 1.5, &params).unwrap() < e);
    }

    #[test]
    fn chi2_round_trip(k in 1usize..40, p in 0.001f64..0.999) {
        let r = chi2_quantile(p, k).unwrap();
        prop_assert!((chi2_cdf(r, k) - p).abs() < 1e-9);
    }

    #[test]
    fn dnn_threshold_is_monotone_in_tolerance(
        data in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..200),
        z1 in 0.0f64..1.0,
        z2 in 0.0f64..1.0,
    ) {
        let (moc, correct): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
        let (lo, hi) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
        prop_assert!(dnn_threshold(&moc, &correct, hi).unwrap() <= dnn_threshold(&moc, &correct, lo).unwrap());
    }

    #[test]
    fn dnn_threshold_keeps_cleared_errors_below_tolerance(
        data in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..200),
        z in 0.0f64..0.5,
    ) {
        let (moc, correct): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
        let beta = dnn_threshold(&moc, &correct, z).unwrap();
        let cleared_errors = moc.iter().zip(&correct).filter(|(&m, &c)| m > beta && !c).count();
        prop_assert!((cleared_errors as f64) / (moc.len() as f64) < z.max(1e-300) || cleared_errors == 0);
    }

    #[test]
    fn partition_splits_members_exactly(
        moc in prop::collection::vec(0.0f64..1.0, 1..100),
        threshold in 0.0f64..1.0,
    ) {
        let state = AcsState::<f64>::initial(moc.len());
        let (next, cleared) = partition(&state, &moc, threshold).unwrap();
        prop_assert_eq!(next.len() + cleared.len(), moc.len());
        prop_assert!(next.members.iter().all(|&i| moc[i] <= threshold));
        prop_assert!(cleared.iter().all(|&i| moc[i] > threshold));
    }

    #[test]
    fn svm_distance_ignores_scale(w0 in -5.0f64..5.0, w1 in 0.1f64..5.0, b in -2.0f64..2.0, c in 0.01f64..100.0, x0 in -3.0f64..3.0, x1 in -3.0f64..3.0) {
        let x = array![x0, x1];
        let a = LinearSvm::new(array![w0, w1], b);
        let scaled = LinearSvm::new(array![c * w0, c * w1], c * b);
        prop_assert!((a.distance(x.view()) - scaled.distance(x.view())).abs() < 1e-9 * (1.0 + a.distance(x.view())));
        prop_assert_eq!(a.predict(x.view()), scaled.predict(x.view()));
    }

    #[test]
    fn softmax_ignores_a_common_logit_shift(shift in -50.0f64..50.0, seed in 0u64..1000) {
        let net = Mlp::<f64>::new(3, &[4], 3, seed).unwrap();
        let mut shifted = net.clone();
        let last = shifted.layers().len() - 1;
        shifted.layers_mut()[last].bias.mapv_inplace(|b| b + shift);
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let (p, q) = (net.posteriors(x.view()), shifted.posteriors(x.view()));
        for (a, b) in p.iter().zip(q.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn budgets_are_spent_exactly(samples in 1usize..60, rounds in 1usize..8, frac in 0.0f64..1.0, seed in 0u64..100) {
        let budget = (frac * (samples * rounds) as f64) as usize;
        let ranking: Vec<usize> = (0..samples).rev().collect();
        for kind in [BenchmarkKind::RandomData, BenchmarkKind::RandomFeature, BenchmarkKind::ImportanceAware] {
            let mask = budget_selection(kind, samples, rounds, budget, Some(&ranking), seed).unwrap();
            prop_assert_eq!(mask.iter().flatten().filter(|&&b| b).count(), budget);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn svm_threshold_is_symmetric_in_the_classes(
        m0 in (-2.0f64..0.0, -1.0f64..1.0),
        m1 in (0.0f64..2.0, -1.0f64..1.0),
        v in (0.3f64..2.0, 0.3f64..2.0, -0.2f64..0.2),
        p in 0.9f64..0.99,
    ) {
        let cov = array![[v.0, v.2], [v.2, v.1]];
        let g0 = ClassGaussian::from_parts(0, array![m0.0, m0.1], cov.clone()).unwrap();
        let g1 = ClassGaussian::from_parts(1, array![m1.0, m1.1], cov).unwrap();
        let svm = LinearSvm::new(array![1.0, 0.2], 0.1);
        let a = svm_threshold(&g0, &g1, &svm, p).unwrap();
        let b = svm_threshold(&g1, &g0, &svm, p).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn candidate_sets_are_nested(seed in 0u64..1000, sep in 0.5f64..2.0, p_th in 0.9f64..0.99) {
        let raw = gen_synthetic::<f64>(&SyntheticParams::symmetric_pair(4, sep, 80, seed)).unwrap();
        let model = EmbeddingModel::fit(raw.samples.view(), 3).unwrap();
        let x = model.embed_all(raw.samples.view()).unwrap();
        let mut params = DeepeningParams::svm(3, p_th);
        params.train = TrainSpec::svm().with_seed(seed);
        let data = DeepeningData { features: x.view(), labels: &raw.labels, embedding: None, test: None };
        let out = run_deepening(&data, &params).unwrap();
        for pair in out.chain.windows(2) {
            prop_assert!(pair[1].members.iter().all(|m| pair[0].members.contains(m)));
        }
        let sizes = out.candidate_sizes();
        prop_assert!(sizes.windows(2).all(|w| w[1] <= w[0]));
        let r = out.deepening_ratio();
        prop_assert!(r > 0.0 && r <= 1.0);
    }
}

#[test]
fn threshold_grows_with_coverage() {
    let eye = array![[1.0, 0.0], [0.0, 1.0]];
    let g0 = ClassGaussian::from_parts(0, Array1::from(vec![-1.0, 0.0]), eye.clone()).unwrap();
    let g1 = ClassGaussian::from_parts(1, Array1::from(vec![1.0, 0.0]), eye).unwrap();
    let svm = LinearSvm::new(array![1.0, 0.0], 0.0);
    let values: Vec<f64> = [0.9, 0.95, 0.99, 0.995]
        .iter()
        .map(|&p| svm_threshold(&g0, &g1, &svm, p).unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] >= w[0]), "{values:?}");
}
