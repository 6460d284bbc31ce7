//! One-shot methods: every selected feature is sent before a single training
//! pass. Feature k of the selection goes out in round k; rounds 1..K−1 last
//! `t0` and round K lasts `t0 − τ`.

use ndarray::{Array2, ArrayView2};
use rand::seq::{index, SliceRandom};

use super::{draw_gains, push_batch, BenchmarkKind, RoundLedger, SimOutcome, Simulation, TxPhase};
use crate::deepening::{accuracy, DepthClassifier};
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::learners::{train_svm, Mlp};
use crate::rng::{derive_seed, stream, stream_rng};
use crate::scalar::Scalar;

/// Which `(sample, feature)` pairs a budgeted method transmits, as an
/// `M x K` mask.
///
/// `RandomData` and `ImportanceAware` give `⌊B/K⌋` samples all K features
/// and one more sample its first `B mod K`; `ranking` orders the samples for
/// `ImportanceAware`. `RandomFeature` draws `B` pairs uniformly.
pub fn budget_selection(
    kind: BenchmarkKind,
    samples: usize,
    rounds: usize,
    budget: usize,
    ranking: Option<&[usize]>,
    seed: u64,
) -> Result<Vec<Vec<bool>>> {
    let budget = budget.min(samples * rounds);
    let mut mask = vec![vec![false; rounds]; samples];
    let mut rng = stream_rng(seed, stream::BENCHMARK);
    let fill_by_order = |order: &[usize], mask: &mut Vec<Vec<bool>>| {
        let full = budget / rounds;
        for &i in &order[..full] {
            mask[i].iter_mut().for_each(|b| *b = true);
        }
        if full < order.len() {
            for b in mask[order[full]].iter_mut().take(budget % rounds) {
                *b = true;
            }
        }
    };
    match kind {
        BenchmarkKind::Osc => mask.iter_mut().for_each(|r| r.iter_mut().for_each(|b| *b = true)),
        BenchmarkKind::RandomData => {
            let mut order: Vec<usize> = (0..samples).collect();
            order.shuffle(&mut rng);
            fill_by_order(&order, &mut mask);
        }
        BenchmarkKind::ImportanceAware => {
            let order = ranking.ok_or_else(|| Error::InvalidParameter("importance ranking missing".into()))?;
            if order.len() != samples {
                return Err(Error::LengthMismatch {
                    what: "importance ranking",
                    expected: samples,
                    got: order.len(),
                });
            }
            fill_by_order(order, &mut mask);
        }
        BenchmarkKind::RandomFeature => {
            for pair in index::sample(&mut rng, samples * rounds, budget) {
                mask[pair / rounds][pair % rounds] = true;
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "{} is not a one-shot method",
                other.name()
            )))
        }
    }
    Ok(mask)
}

/// Samples ordered from least to most clear under the round-1 classifier.
fn uncertainty_ranking<T: Scalar>(sim: &Simulation<'_, T>) -> Vec<usize> {
    let first = &sim.outcome.chain[0];
    let mut order: Vec<usize> = (0..first.members.len()).collect();
    order.sort_by(|&a, &b| {
        first.moc[a]
            .partial_cmp(&first.moc[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.into_iter().map(|j| first.members[j]).collect()
}

/// Embedded rows with unsent features zeroed, truncated to `rounds`.
fn masked_features<T: Scalar>(
    features: ArrayView2<'_, T>,
    rows: &[usize],
    mask: &[Vec<bool>],
    rounds: usize,
) -> Array2<T> {
    let mut out = Array2::zeros((rows.len(), rounds));
    for (r, &i) in rows.iter().enumerate() {
        for j in 0..rounds {
            if mask[i][j] {
                out[[r, j]] = features[[i, j]];
            }
        }
    }
    out
}

fn to_raw<T: Scalar>(embedding: &EmbeddingModel<T>, coefs: &Array2<T>) -> Array2<T> {
    let k = coefs.ncols();
    let mut raw = coefs.dot(&embedding.components().slice(ndarray::s![..k, ..]));
    raw += &embedding.mean();
    raw
}

pub(super) fn one_shot<T: Scalar>(sim: &Simulation<'_, T>, kind: BenchmarkKind) -> Result<SimOutcome<T>> {
    let cfg = &sim.config;
    let rounds = cfg.rounds();
    let m = sim.data.samples();
    let budget = match kind {
        BenchmarkKind::Osc => m * rounds,
        _ => sim.jd2p_budget()?,
    };
    let ranking = (kind == BenchmarkKind::ImportanceAware).then(|| uncertainty_ranking(sim));
    let mask = budget_selection(kind, m, rounds, budget, ranking.as_deref(), cfg.seed)?;

    let gains = draw_gains(cfg.channel, cfg.seed, rounds)?;
    let mut events = Vec::new();
    let mut ledger = Vec::with_capacity(rounds);
    let mut cumulative = 0.0;
    let mut transmitted = 0;
    for k in 1..=rounds {
        let senders: Vec<usize> = (0..m).filter(|&i| mask[i][k - 1]).collect();
        let count = senders.len();
        let duration = if k < rounds {
            cfg.timing.t0
        } else {
            cfg.timing.t_offload
        };
        let h = gains[k - 1];
        let energy = push_batch(
            &mut events,
            &cfg.energy,
            k,
            TxPhase::Offload,
            Some(k),
            senders,
            count,
            duration,
            h,
        )?;
        cumulative += energy;
        transmitted += count;
        ledger.push(RoundLedger {
            round: k,
            gain: h,
            candidates: count,
            offloaded: count,
            prefetched: 0,
            wasted: 0,
            offload_energy: energy,
            prefetch_energy: 0.0,
            cumulative_energy: cumulative,
        });
    }

    let heldout_accuracy = match sim.data.test {
        Some((tx, ty)) => {
            let classifier = train_one_shot(sim, &mask)?;
            let test_mask = vec![vec![true; rounds]; tx.nrows()];
            let rows: Vec<usize> = (0..tx.nrows()).collect();
            let x = masked_features(tx, &rows, &test_mask, rounds);
            let pred = match &classifier {
                DepthClassifier::Svm(svm) => x.outer_iter().map(|r| svm.predict(r)).collect::<Vec<_>>(),
                DepthClassifier::Mlp(net) => {
                    let emb = sim.data.embedding.expect("checked when training");
                    net.predict_batch(to_raw(emb, &x).view())
                }
            };
            Some(accuracy(&pred, ty))
        }
        None => None,
    };

    Ok(SimOutcome {
        kind,
        ledger,
        events,
        total_energy: cumulative,
        transmitted_features: transmitted,
        wasted_features: 0,
        deepening_ratio: transmitted as f64 / (rounds * m) as f64,
        heldout_accuracy,
        classifier: None,
        rho: sim.rho.clone(),
    })
}

/// Trains the single depth-K classifier on whatever the mask delivered.
fn train_one_shot<T: Scalar>(sim: &Simulation<'_, T>, mask: &[Vec<bool>]) -> Result<DepthClassifier<T>> {
    let params = &sim.config.deepening;
    let rounds = params.rounds;
    let rows: Vec<usize> = (0..mask.len()).filter(|&i| mask[i].iter().any(|&b| b)).collect();
    if rows.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    let x = masked_features(sim.data.features, &rows, mask, rounds);
    let labels: Vec<usize> = rows.iter().map(|&i| sim.data.labels[i]).collect();
    let seed = derive_seed(params.train.seed, stream::BENCHMARK);
    if params.moc.uses_svm() {
        let spec = params.train.clone().with_seed(seed);
        Ok(DepthClassifier::Svm(train_svm(x.view(), &labels, &spec)?.0))
    } else {
        let emb = sim
            .data
            .embedding
            .ok_or_else(|| Error::InvalidParameter("MLP benchmarks need the embedding model".into()))?;
        let raw = to_raw(emb, &x);
        let mut spec = params.train.clone().with_seed(seed);
        // same number of epochs as the whole deepening run
        spec.epochs = params.first_round_epochs.unwrap_or(params.train.epochs) + (rounds - 1) * params.train.epochs;
        let mut net = Mlp::new(
            emb.raw_dim(),
            &params.hidden,
            params.classes,
            derive_seed(params.train.seed, 0),
        )?;
        net.train(raw.view(), &labels, &spec)?;
        Ok(DepthClassifier::Mlp(net))
    }
}
