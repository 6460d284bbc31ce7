use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fading family for the per-round channel gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelKind {
    /// Gamma fading with shape β and rate β, so `E[h] = 1`.
    Gamma { shape: f64 },
    /// Constant unit gain; the β → ∞ limit, used for analytic cross-checks.
    Fixed,
}

/// I.i.d. block-fading channel: one gain per round.
///
/// The RNG is owned by the model; draws must come from a single thread.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    kind: ChannelKind,
    seed: u64,
    rng: ChaCha8Rng,
}

impl ChannelModel {
    pub fn gamma(shape: f64, seed: u64) -> Result<Self> {
        Self::new(ChannelKind::Gamma { shape }, seed)
    }

    pub fn fixed(seed: u64) -> Self {
        Self::new(ChannelKind::Fixed, seed).expect("fixed channel is always valid")
    }

    pub fn new(kind: ChannelKind, seed: u64) -> Result<Self> {
        if let ChannelKind::Gamma { shape } = kind {
            if !(shape > 1.0) || !shape.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "gamma channel shape must be finite and > 1, got {shape}"
                )));
            }
        }
        Ok(ChannelModel {
            kind,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Restarts the gain sequence from the seed.
    pub fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
    }

    pub fn sample_gain(&mut self) -> f64 {
        match self.kind {
            ChannelKind::Gamma { shape } => Gamma::new(shape, 1.0 / shape)
                .expect("shape validated at construction")
                .sample(&mut self.rng),
            ChannelKind::Fixed => 1.0,
        }
    }

    /// ν = E[1/h]; β/(β − 1) for gamma fading.
    pub fn inverse_mean_gain(&self) -> Result<f64> {
        match self.kind {
            ChannelKind::Gamma { shape } => inverse_mean_gain(shape),
            ChannelKind::Fixed => Ok(1.0),
        }
    }
}

/// ν = E[1/h] for gamma(shape = β, rate = β) fading.
pub fn inverse_mean_gain(shape: f64) -> Result<f64> {
    if !(shape > 1.0) {
        return Err(Error::NuDiverges(shape));
    }
    Ok(shape / (shape - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nu_closed_form() {
        assert_eq!(inverse_mean_gain(2.0).unwrap(), 2.0);
        assert_eq!(inverse_mean_gain(3.0).unwrap(), 1.5);
        assert!((inverse_mean_gain(100.0).unwrap() - 100.0 / 99.0).abs() < 1e-15);
    }

    #[test]
    fn nu_diverges_for_shape_at_most_one() {
        assert!(matches!(inverse_mean_gain(1.0), Err(Error::NuDiverges(_))));
        assert!(matches!(inverse_mean_gain(0.5), Err(Error::NuDiverges(_))));
        assert!(ChannelModel::gamma(1.0, 0).is_err());
    }

    #[test]
    fn nu_decreases_towards_one() {
        let mut prev = f64::INFINITY;
        for shape in [1.5, 2.0, 4.0, 8.0, 16.0, 100.0] {
            let nu = inverse_mean_gain(shape).unwrap();
            assert!(nu < prev && nu > 1.0);
            prev = nu;
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = ChannelModel::gamma(2.0, 42).unwrap();
        let mut b = ChannelModel::gamma(2.0, 42).unwrap();
        let xs: Vec<f64> = (0..100).map(|_| a.sample_gain()).collect();
        let ys: Vec<f64> = (0..100).map(|_| b.sample_gain()).collect();
        assert_eq!(xs, ys);
        a.reset();
        assert_eq!(a.sample_gain(), xs[0]);
    }

    #[test]
    fn fixed_channel_is_unit() {
        let mut ch = ChannelModel::fixed(3);
        assert_eq!(ch.sample_gain(), 1.0);
        assert_eq!(ch.inverse_mean_gain().unwrap(), 1.0);
    }
}
