//! TOML run configuration. Every optional field is filled in by
//! [`Config::resolve`]; the resolved form is what gets echoed next to the
//! outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use jd2p::dataset::GaussianClass;
use jd2p::deepening::{DeepeningParams, MocKind, Strategy};
use jd2p::energy::{EnergyParams, RoundTiming};
use jd2p::learners::{TrainSpec, DEFAULT_HIDDEN};
use jd2p::sim::{BenchmarkKind, RhoMode, SimConfig};
use jd2p::stats::ChannelKind;
use jd2p::{Error, Result};

use crate::experiment::ExperimentSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Drives the channel, the prefetch choice and benchmark sampling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub deepening: DeepeningSection,
    #[serde(default)]
    pub timing: TimingSection,
    #[serde(default = "default_channel")]
    pub channel: ChannelKind,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSpec>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_channel() -> ChannelKind {
    ChannelKind::Gamma { shape: 2.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    IdxFiles,
    SyntheticGaussians,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub kind: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Generator classes for `synthetic-gaussians`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaussians: Vec<GaussianClass>,
    /// Keep only these original labels, renumbered `0..n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_subset: Option<Vec<usize>>,
    /// Experiments only: run every listed class subset separately and
    /// average over them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_pairs: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default = "default_test")]
    pub test: usize,
    /// Samples set aside to estimate the survival ratios.
    #[serde(default = "default_pilot")]
    pub pilot: usize,
    /// Use every sample not held out as test or pilot for training.
    #[serde(default)]
    pub full: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_train() -> usize {
    2000
}

fn default_test() -> usize {
    1000
}

fn default_pilot() -> usize {
    1000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    /// Number of principal components kept; defaults to the round count.
    pub features: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Svm,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepeningSection {
    pub classifier: ClassifierKind,
    pub rounds: usize,
    pub moc: Option<MocKind>,
    pub p_th: f64,
    pub z_th: f64,
    pub strategy: Option<Strategy>,
    pub hidden: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub first_round_epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub c_slack: f64,
    pub seed: u64,
}

impl Default for DeepeningSection {
    fn default() -> Self {
        DeepeningSection {
            classifier: ClassifierKind::Svm,
            rounds: 10,
            moc: None,
            p_th: 0.99,
            z_th: 0.03,
            strategy: None,
            hidden: None,
            epochs: None,
            first_round_epochs: None,
            learning_rate: None,
            batch_size: None,
            c_slack: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub t0: f64,
    pub tau: f64,
}

impl Default for TimingSection {
    fn default() -> Self {
        TimingSection { t0: 1.0, tau: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub lambda: f64,
    pub ell: u32,
    /// Bits per feature.
    pub alpha: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        let p = EnergyParams::<f64>::default();
        EnergySection {
            lambda: p.lambda,
            ell: p.ell,
            alpha: p.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSetting {
    Constant(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    /// `"pilot"` or a constant in `[0, 1]`.
    pub rho: RhoSetting,
    pub prefetch: bool,
    pub methods: Vec<BenchmarkKind>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            rho: RhoSetting::Named("pilot".into()),
            prefetch: true,
            methods: BenchmarkKind::ALL.to_vec(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative dataset paths are taken relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.dataset.images, &mut config.dataset.labels]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills every classifier-dependent default and checks the result.
    pub fn resolve(mut self) -> Result<Self> {
        let d = &mut self.deepening;
        let svm = d.classifier == ClassifierKind::Svm;
        let base = if svm { TrainSpec::svm() } else { TrainSpec::mlp() };
        d.moc.get_or_insert(if svm {
            MocKind::SvmDistance
        } else {
            MocKind::PosteriorGap
        });
        d.strategy.get_or_insert(if svm {
            Strategy::Candidates
        } else {
            Strategy::AllReceived
        });
        d.hidden
            .get_or_insert_with(|| if svm { Vec::new() } else { DEFAULT_HIDDEN.to_vec() });
        d.epochs.get_or_insert(base.epochs);
        d.learning_rate.get_or_insert(base.learning_rate);
        d.batch_size.get_or_insert(base.batch_size);
        if d.first_round_epochs.is_none() {
            d.first_round_epochs = d.epochs;
        }
        let mut rounds = d.rounds;
        if let Some(spec) = &mut self.experiment {
            spec.resolve(&self.deepening, &self.timing)?;
            rounds = rounds.max(spec.max_rounds().unwrap_or(0));
        }
        self.embedding.features.get_or_insert(rounds);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.deepening;
        if d.moc
            .is_some_and(|m| m.uses_svm() != (d.classifier == ClassifierKind::Svm))
        {
            return Err(Error::IncompatibleMoc(format!(
                "{:?} with a {:?} classifier",
                d.moc, d.classifier
            )));
        }
        let rounds = d
            .rounds
            .max(self.experiment.as_ref().and_then(|e| e.max_rounds()).unwrap_or(0));
        let features = self.embedding.features.unwrap_or(rounds);
        if features < rounds {
            return Err(Error::Config(format!(
                "embedding keeps {features} features but deepening runs {rounds} rounds"
            )));
        }
        if let Some(spec) = &self.experiment {
            spec.validate(d, &self.timing)?;
        }
        RoundTiming::new(self.timing.t0, self.timing.tau)?;
        EnergyParams::new(self.energy.lambda, self.energy.ell, self.energy.alpha)?;
        self.rho_mode()?;
        match self.dataset.kind {
            DatasetKind::IdxFiles if self.dataset.images.is_none() || self.dataset.labels.is_none() => {
                return Err(Error::Config("idx-files needs both images and labels".into()))
            }
            DatasetKind::SyntheticGaussians if self.dataset.gaussians.len() < 2 => {
                return Err(Error::Config("synthetic-gaussians needs at least two classes".into()))
            }
            _ => {}
        }
        if self.dataset.train == 0 && !self.dataset.full {
            return Err(Error::Config("empty training set".into()));
        }
        if self.simulation.methods.is_empty() {
            return Err(Error::Config("no methods to simulate".into()));
        }
        Ok(())
    }

    pub fn rho_mode(&self) -> Result<RhoMode> {
        match &self.simulation.rho {
            RhoSetting::Constant(v) if (0.0..=1.0).contains(v) => Ok(RhoMode::Constant { value: *v }),
            RhoSetting::Named(s) if s == "pilot" => Ok(RhoMode::Pilot),
            other => Err(Error::Config(format!(
                "rho must be \"pilot\" or a number in [0, 1], got {other:?}"
            ))),
        }
    }

    /// Deepening parameters for a dataset of `classes` classes.
    pub fn deepening_params(&self, classes: usize) -> DeepeningParams {
        let d = &self.deepening;
        let spec = TrainSpec {
            c_slack: d.c_slack,
            epochs: d.epochs.unwrap_or(0),
            batch_size: d.batch_size.unwrap_or(1),
            learning_rate: d.learning_rate.unwrap_or(0.0),
            seed: d.seed,
        };
        DeepeningParams {
            rounds: d.rounds,
            moc: d.moc.unwrap_or(MocKind::SvmDistance),
            p_th: d.p_th,
            z_th: d.z_th,
            strategy: d.strategy.unwrap_or(Strategy::Candidates),
            train: spec,
            hidden: d.hidden.clone().unwrap_or_default(),
            classes,
            first_round_epochs: d.first_round_epochs,
        }
    }

    pub fn sim_config(&self, classes: usize) -> Result<SimConfig> {
        Ok(SimConfig {
            timing: RoundTiming::new(self.timing.t0, self.timing.tau)?,
            channel: self.channel,
            energy: EnergyParams::new(self.energy.lambda, self.energy.ell, self.energy.alpha)?,
            deepening: self.deepening_params(classes),
            rho: self.rho_mode()?,
            benchmark: BenchmarkKind::Jd2p,
            prefetch: self.simulation.prefetch,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset]
kind = "synthetic-gaussians"

[[dataset.gaussians]]
mean = [-1.0, 0.0]
covariance = [[1.0, 0.0], [0.0, 1.0]]
count = 50

[[dataset.gaussians]]
mean = [1.0, 0.0]
covariance = [[1.0, 0.0], [0.0, 1.0]]
count = 50
"#;

    #[test]
    fn resolved_config_round_trips() {
        let c = Config::from_toml(MINIMAL).unwrap().resolve().unwrap();
        assert_eq!(c.deepening.moc, Some(MocKind::SvmDistance));
        assert_eq!(c.embedding.features, Some(10));
        let again = Config::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.clone().resolve().unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[timing]\nt0 = 1.0\ntau = 0.5\ntypo = 3\n");
        assert!(Config::from_toml(&text).is_err());
    }

    #[test]
    fn inconsistent_settings_are_rejected() {
        let base = Config::from_toml(MINIMAL).unwrap();
        let mut c = base.clone();
        c.timing.tau = 1.5;
        assert!(c.resolve().is_err());
        let mut c = base.clone();
        c.deepening.moc = Some(MocKind::NegEntropy);
        assert!(matches!(c.resolve(), Err(Error::IncompatibleMoc(_))));
        let mut c = base.clone();
        c.simulation.rho = RhoSetting::Constant(1.5);
        assert!(c.resolve().is_err());
        let mut c = base;
        c.embedding.features = Some(3);
        assert!(c.resolve().is_err());
    }

    #[test]
    fn constant_rho_parses_as_number() {
        let c = Config::from_toml(&format!(
            "{MINIMAL}\n[simulation]\nrho = 0.4\nprefetch = true\nmethods = [\"jd2p\"]\n"
        ))
        .unwrap();
        assert_eq!(c.rho_mode().unwrap(), RhoMode::Constant { value: 0.4 });
    }
}
