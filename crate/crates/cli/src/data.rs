//! Loads or generates the dataset, splits it, and fits the embedding.

use ndarray::Array2;

use jd2p::dataset::{gen_synthetic, load_idx, RawDataset, SyntheticParams};
use jd2p::sim::SimData;
use jd2p::{EmbeddingModel, Error, Result};

use crate::config::{Config, DatasetKind};

/// Embedded train, test and pilot sets sharing one embedding.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub embedding: EmbeddingModel<f64>,
    pub classes: usize,
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
    pub test_x: Array2<f64>,
    pub test_y: Vec<usize>,
    pub pilot_x: Array2<f64>,
    pub pilot_y: Vec<usize>,
}

pub fn load_raw(config: &Config) -> Result<RawDataset<f64>> {
    let src = &config.dataset;
    let raw = match src.kind {
        DatasetKind::IdxFiles => {
            let images = src
                .images
                .as_ref()
                .ok_or_else(|| Error::Config("missing images path".into()))?;
            let labels = src
                .labels
                .as_ref()
                .ok_or_else(|| Error::Config("missing labels path".into()))?;
            load_idx(images, labels)?
        }
        DatasetKind::SyntheticGaussians => gen_synthetic(&SyntheticParams {
            classes: src.gaussians.clone(),
            seed: src.seed,
        })?,
    };
    match &src.class_subset {
        Some(classes) => raw.with_classes(classes),
        None => Ok(raw),
    }
}

/// Test, pilot and train sizes actually used for a dataset of `available`
/// samples.
pub fn split_sizes(config: &Config, available: usize) -> Result<(usize, usize, usize)> {
    let src = &config.dataset;
    let held = src.test + src.pilot;
    let train = if src.full {
        available.saturating_sub(held)
    } else {
        src.train
    };
    if train == 0 || train + held > available {
        return Err(Error::NotEnoughSamples {
            needed: train.max(1) + held,
            got: available,
        });
    }
    Ok((src.test, src.pilot, train))
}

pub fn prepare(config: &Config) -> Result<Prepared> {
    let raw = load_raw(config)?;
    let (test, pilot, train) = split_sizes(config, raw.len())?;
    let (rest, test_set) = raw.split(train + pilot, test, config.dataset.seed)?;
    let (train_set, pilot_set) = rest.split(train, pilot, config.dataset.seed.wrapping_add(1))?;
    let features = config.embedding.features.unwrap_or(config.deepening.rounds);
    let embedding = EmbeddingModel::fit(train_set.samples.view(), features)?;
    Ok(Prepared {
        train_x: embedding.embed_all(train_set.samples.view())?,
        test_x: embedding.embed_all(test_set.samples.view())?,
        pilot_x: embedding.embed_all(pilot_set.samples.view())?,
        classes: raw.classes,
        train_y: train_set.labels,
        test_y: test_set.labels,
        pilot_y: pilot_set.labels,
        embedding,
    })
}

/// One prepared dataset per configured class pair, or just the one.
pub fn prepare_all(config: &Config) -> Result<Vec<Prepared>> {
    match &config.dataset.class_pairs {
        Some(pairs) if !pairs.is_empty() => pairs
            .iter()
            .map(|pair| {
                let mut c = config.clone();
                c.dataset.class_subset = Some(pair.clone());
                prepare(&c)
            })
            .collect(),
        _ => Ok(vec![prepare(config)?]),
    }
}

impl Prepared {
    /// Simulation inputs; `with_test` controls held-out evaluation.
    pub fn sim_data(&self, with_test: bool) -> SimData<'_, f64> {
        SimData {
            features: self.train_x.view(),
            labels: &self.train_y,
            embedding: Some(&self.embedding),
            test: (with_test && !self.test_y.is_empty()).then(|| (self.test_x.view(), self.test_y.as_slice())),
            pilot: (!self.pilot_y.is_empty()).then(|| (self.pilot_x.view(), self.pilot_y.as_slice())),
        }
    }
}
