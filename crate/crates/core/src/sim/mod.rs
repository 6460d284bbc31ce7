//! Round-based offloading simulation with energy accounting.
//!
//! Every round draws one channel gain. Round 1 offloads feature 1 of all
//! samples over `t0 − τ`. In round k the server trains while the device
//! prefetches feature k + 1 of `p_k` randomly chosen candidates over `τ` at
//! gain `h_k`; after the partition, the remaining candidates' feature k + 1
//! goes out over `t0 − τ` at gain `h_{k+1}`. Deepening does not depend on the
//! channel, so one deepening outcome serves every energy policy.

mod benchmark;
mod io;

use std::collections::HashSet;

use ndarray::ArrayView2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::deepening::{run_deepening, DeepeningData, DeepeningOutcome, DeepeningParams, HierarchicalClassifier};
use crate::embedding::EmbeddingModel;
use crate::energy::{optimal_prefetch, tx_energy, EnergyParams, PrefetchInputs, RoundTiming};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, stream_rng};
use crate::scalar::Scalar;
use crate::stats::{ChannelKind, ChannelModel};

pub use benchmark::budget_selection;
pub use io::{ledger_from_csv, ledger_to_csv, read_table, schema_line, LEDGER_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    Osc,
    RandomData,
    RandomFeature,
    ImportanceAware,
    DeepeningOnly,
    Jd2p,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 6] = [
        BenchmarkKind::Osc,
        BenchmarkKind::RandomData,
        BenchmarkKind::RandomFeature,
        BenchmarkKind::ImportanceAware,
        BenchmarkKind::DeepeningOnly,
        BenchmarkKind::Jd2p,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Osc => "osc",
            BenchmarkKind::RandomData => "random-data",
            BenchmarkKind::RandomFeature => "random-feature",
            BenchmarkKind::ImportanceAware => "importance-aware",
            BenchmarkKind::DeepeningOnly => "deepening-only",
            BenchmarkKind::Jd2p => "jd2p",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown benchmark kind {name:?}")))
    }

    /// Whether the method uses the deepening rounds (as opposed to sending
    /// everything before one training pass).
    pub fn is_round_based(self) -> bool {
        matches!(self, BenchmarkKind::Jd2p | BenchmarkKind::DeepeningOnly)
    }
}

/// Where the survival ratios fed to the prefetch policy come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum RhoMode {
    Constant {
        value: f64,
    },
    /// Deepening on a separate pilot set.
    Pilot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub timing: RoundTiming<f64>,
    pub channel: ChannelKind,
    pub energy: EnergyParams<f64>,
    /// `deepening.rounds` is K.
    pub deepening: DeepeningParams,
    pub rho: RhoMode,
    pub benchmark: BenchmarkKind,
    /// When false, JD2P never prefetches and reduces to deepening only.
    pub prefetch: bool,
    /// Drives the channel, the prefetch choice and benchmark sampling.
    pub seed: u64,
}

impl SimConfig {
    pub fn rounds(&self) -> usize {
        self.deepening.rounds
    }

    pub fn nu(&self) -> Result<f64> {
        ChannelModel::new(self.channel, 0)?.inverse_mean_gain()
    }
}

/// Embedded training data plus optional held-out and pilot sets.
#[derive(Debug, Clone, Copy)]
pub struct SimData<'a, T> {
    pub features: ArrayView2<'a, T>,
    pub labels: &'a [usize],
    pub embedding: Option<&'a EmbeddingModel<T>>,
    pub test: Option<(ArrayView2<'a, T>, &'a [usize])>,
    pub pilot: Option<(ArrayView2<'a, T>, &'a [usize])>,
}

impl<'a, T: Scalar> SimData<'a, T> {
    pub fn samples(&self) -> usize {
        self.features.nrows()
    }

    fn deepening(&self) -> DeepeningData<'a, T> {
        DeepeningData {
            features: self.features,
            labels: self.labels,
            embedding: self.embedding,
            test: self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TxPhase {
    Offload,
    Prefetch,
}

/// One transmission: a batch of one feature index for several samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxEvent {
    pub round: usize,
    pub phase: TxPhase,
    /// 1-based feature index; `None` for batches mixing several features.
    pub feature: Option<usize>,
    pub samples: Vec<usize>,
    /// Number of features in the batch.
    pub features: usize,
    pub gain: f64,
    pub duration: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLedger {
    pub round: usize,
    pub gain: f64,
    /// `s_k`, candidates at the start of the round.
    pub candidates: usize,
    /// `n_k`, features sent in the offload window.
    pub offloaded: usize,
    /// `p_k`, next-round features sent during training.
    pub prefetched: usize,
    /// Prefetched features of samples that then left the candidate set.
    pub wasted: usize,
    pub offload_energy: f64,
    pub prefetch_energy: f64,
    pub cumulative_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome<T> {
    pub kind: BenchmarkKind,
    pub ledger: Vec<RoundLedger>,
    pub events: Vec<TxEvent>,
    pub total_energy: f64,
    pub transmitted_features: usize,
    pub wasted_features: usize,
    pub deepening_ratio: f64,
    pub heldout_accuracy: Option<f64>,
    /// Cascade for the round-based methods.
    pub classifier: Option<HierarchicalClassifier<T>>,
    /// Survival ratios handed to the prefetch policy.
    pub rho: Vec<f64>,
}

impl<T> SimOutcome<T> {
    /// Sum of every event's energy, recomputed from its parameters.
    pub fn replayed_energy(&self, params: &EnergyParams<f64>) -> Result<f64> {
        self.events.iter().try_fold(0.0, |acc, e| {
            Ok(acc + tx_energy(params.alpha * e.features as f64, e.duration, e.gain, params)?)
        })
    }
}

/// `Σ_k |S^(k)| / (K M)`; rounds past the chain count as empty.
pub fn deepening_ratio<T: Scalar>(chain: &[crate::deepening::AcsState<T>], rounds: usize, samples: usize) -> f64 {
    let total: usize = (0..rounds).map(|k| chain.get(k).map_or(0, |s| s.len())).sum();
    total as f64 / (rounds * samples) as f64
}

/// `ρ_k = |S^(k+1)| / |S^(k)|` from deepening on the pilot set.
pub fn estimate_rho<T: Scalar>(
    pilot: (ArrayView2<'_, T>, &[usize]),
    embedding: Option<&EmbeddingModel<T>>,
    params: &DeepeningParams,
) -> Result<Vec<f64>> {
    let data = DeepeningData {
        features: pilot.0,
        labels: pilot.1,
        embedding,
        test: None,
    };
    let mut params = params.clone();
    params.train.seed = derive_seed(params.train.seed, stream::PILOT);
    Ok(run_deepening(&data, &params)?.reduction_ratios())
}

/// Channel gains `h_1..h_K` of a run.
pub fn draw_gains(channel: ChannelKind, seed: u64, rounds: usize) -> Result<Vec<f64>> {
    let mut model = ChannelModel::new(channel, derive_seed(seed, stream::CHANNEL))?;
    Ok((0..rounds).map(|_| model.sample_gain()).collect())
}

/// Deepening outcome and survival ratios shared by every method of a run.
#[derive(Debug, Clone)]
pub struct Simulation<'a, T> {
    pub config: SimConfig,
    pub data: SimData<'a, T>,
    pub outcome: DeepeningOutcome<T>,
    pub rho: Vec<f64>,
}

impl<'a, T: Scalar> Simulation<'a, T> {
    pub fn prepare(config: &SimConfig, data: SimData<'a, T>) -> Result<Self> {
        let outcome = run_deepening(&data.deepening(), &config.deepening)?;
        Self::with_outcome(config, data, outcome)
    }

    /// Reuses an existing deepening outcome; only the energy side is rerun.
    pub fn with_outcome(config: &SimConfig, data: SimData<'a, T>, outcome: DeepeningOutcome<T>) -> Result<Self> {
        let rounds = config.rounds();
        let rho = match &config.rho {
            RhoMode::Constant { value } => {
                if !(0.0..=1.0).contains(value) {
                    return Err(Error::InvalidParameter(format!("rho must lie in [0, 1], got {value}")));
                }
                vec![*value; rounds]
            }
            RhoMode::Pilot => {
                let pilot = data
                    .pilot
                    .ok_or_else(|| Error::Config("pilot rho needs a pilot dataset".into()))?;
                estimate_rho(pilot, data.embedding, &config.deepening)?
            }
        };
        Ok(Simulation {
            config: config.clone(),
            data,
            outcome,
            rho,
        })
    }

    pub fn run(&self, kind: BenchmarkKind) -> Result<SimOutcome<T>> {
        match kind {
            BenchmarkKind::Jd2p => self.round_based(kind, self.config.prefetch),
            BenchmarkKind::DeepeningOnly => self.round_based(kind, false),
            other => benchmark::one_shot(self, other),
        }
    }

    /// Round-based energy with or without prefetching.
    pub fn round_based(&self, kind: BenchmarkKind, prefetch: bool) -> Result<SimOutcome<T>> {
        let cfg = &self.config;
        let rounds = cfg.rounds();
        let m = self.data.samples();
        let timing = cfg.timing;
        let nu = cfg.nu()?;
        let gains = draw_gains(cfg.channel, cfg.seed, rounds)?;
        let mut pick_rng = stream_rng(cfg.seed, stream::PREFETCH);
        let sizes = self.outcome.candidate_sizes();
        let chain = &self.outcome.chain;

        let mut ledger = Vec::with_capacity(rounds);
        let mut events = Vec::new();
        let mut cumulative = 0.0;
        let mut transmitted = 0;
        let mut wasted_total = 0;
        // samples whose next feature was prefetched in the previous round
        let mut prefetched_prev: HashSet<usize> = HashSet::new();

        for k in 1..=rounds {
            let h = gains[k - 1];
            let s_k = sizes[k - 1];
            if s_k == 0 {
                break;
            }
            let members = &chain[k - 1].members;
            // offload window of round k: feature k of members not prefetched
            let to_send: Vec<usize> = members
                .iter()
                .copied()
                .filter(|i| !prefetched_prev.contains(i))
                .collect();
            let offload_energy =
                self.push_event(&mut events, k, TxPhase::Offload, Some(k), to_send, timing.t_offload, h)?;
            let offloaded = events.last().map_or(0, |e: &TxEvent| e.features);
            transmitted += offloaded;

            // training window: prefetch feature k + 1
            let next_members: HashSet<usize> = chain
                .get(k)
                .map(|s| s.members.iter().copied().collect())
                .unwrap_or_default();
            let ran_round = k <= self.outcome.logs.len();
            let mut prefetch_energy = 0.0;
            let mut prefetched = 0;
            let mut wasted = 0;
            prefetched_prev.clear();
            if prefetch && k < rounds && ran_round {
                let inputs = PrefetchInputs {
                    s: s_k,
                    rho: self.rho[k - 1],
                    h,
                    nu,
                };
                let p = optimal_prefetch(&inputs, &timing, &cfg.energy).p_star;
                if p > 0 {
                    let mut chosen: Vec<usize> = index::sample(&mut pick_rng, s_k, p)
                        .into_iter()
                        .map(|j| members[j])
                        .collect();
                    chosen.sort_unstable();
                    wasted = chosen.iter().filter(|i| !next_members.contains(i)).count();
                    prefetched_prev = chosen.iter().copied().collect();
                    prefetch_energy =
                        self.push_event(&mut events, k, TxPhase::Prefetch, Some(k + 1), chosen, timing.tau, h)?;
                    prefetched = p;
                    transmitted += p;
                    wasted_total += wasted;
                }
            }
            cumulative += offload_energy + prefetch_energy;
            ledger.push(RoundLedger {
                round: k,
                gain: h,
                candidates: s_k,
                offloaded,
                prefetched,
                wasted,
                offload_energy,
                prefetch_energy,
                cumulative_energy: cumulative,
            });
        }

        let heldout_accuracy = match self.data.test {
            Some((tx, ty)) => {
                let pred: Vec<usize> = self
                    .outcome
                    .classifier
                    .infer_batch(tx)?
                    .into_iter()
                    .map(|(c, _)| c)
                    .collect();
                Some(crate::deepening::accuracy(&pred, ty))
            }
            None => None,
        };
        Ok(SimOutcome {
            kind,
            ledger,
            events,
            total_energy: cumulative,
            transmitted_features: transmitted,
            wasted_features: wasted_total,
            deepening_ratio: deepening_ratio(chain, rounds, m),
            heldout_accuracy,
            classifier: Some(self.outcome.classifier.clone()),
            rho: self.rho.clone(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn push_event(
        &self,
        events: &mut Vec<TxEvent>,
        round: usize,
        phase: TxPhase,
        feature: Option<usize>,
        samples: Vec<usize>,
        duration: f64,
        gain: f64,
    ) -> Result<f64> {
        let count = samples.len();
        push_batch(
            events,
            &self.config.energy,
            round,
            phase,
            feature,
            samples,
            count,
            duration,
            gain,
        )
    }

    /// Transmitted-feature budget of the reference JD2P run.
    pub fn jd2p_budget(&self) -> Result<usize> {
        Ok(self.round_based(BenchmarkKind::Jd2p, true)?.transmitted_features)
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn push_batch(
    events: &mut Vec<TxEvent>,
    params: &EnergyParams<f64>,
    round: usize,
    phase: TxPhase,
    feature: Option<usize>,
    samples: Vec<usize>,
    features: usize,
    duration: f64,
    gain: f64,
) -> Result<f64> {
    if features == 0 {
        return Ok(0.0);
    }
    let energy = tx_energy(params.alpha * features as f64, duration, gain, params)?;
    events.push(TxEvent {
        round,
        phase,
        feature,
        samples,
        features,
        gain,
        duration,
        energy,
    });
    Ok(energy)
}

/// Runs JD2P end to end.
pub fn run_jd2p<T: Scalar>(config: &SimConfig, data: SimData<'_, T>) -> Result<SimOutcome<T>> {
    Simulation::prepare(config, data)?.run(BenchmarkKind::Jd2p)
}

/// Runs one method; benchmarks needing a budget or a ranking run the JD2P
/// reference internally.
pub fn run_benchmark<T: Scalar>(
    kind: BenchmarkKind,
    config: &SimConfig,
    data: SimData<'_, T>,
) -> Result<SimOutcome<T>> {
    Simulation::prepare(config, data)?.run(kind)
}

/// Energies of one isolated round pair: feature k + 1 under JD2P versus the
/// expected per-round OSC energy `λ ν (α M)^ℓ / t0^(ℓ−1)`. Each of the `s`
/// candidates survives with probability `rho`.
pub fn pairwise_round_energy(
    s: usize,
    rho: f64,
    timing: &RoundTiming<f64>,
    channel: ChannelKind,
    params: &EnergyParams<f64>,
    seed: u64,
) -> Result<(f64, f64)> {
    use rand::Rng;
    let mut model = ChannelModel::new(channel, derive_seed(seed, stream::CHANNEL))?;
    let nu = model.inverse_mean_gain()?;
    let h_k = model.sample_gain();
    let h_next = model.sample_gain();
    let inputs = PrefetchInputs { s, rho, h: h_k, nu };
    let p = optimal_prefetch(&inputs, timing, params).p_star;
    let mut rng = stream_rng(seed, stream::PREFETCH);
    let survivors = (0..s - p).filter(|_| rng.random::<f64>() < rho).count();
    let jd2p = tx_energy(params.alpha * p as f64, timing.tau, h_k, params)?
        + tx_energy(params.alpha * survivors as f64, timing.t_offload, h_next, params)?;
    let osc = crate::energy::osc_round_energy(s, timing, nu, params);
    Ok((jd2p, osc))
}
