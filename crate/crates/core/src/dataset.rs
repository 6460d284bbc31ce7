//! Raw labeled datasets: IDX files, Gaussian generators, class selection and
//! splits.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::rng::{stream, stream_rng};
use crate::scalar::Scalar;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset<T> {
    /// One raw sample per row.
    pub samples: Array2<T>,
    /// Class indices `0..classes`.
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl<T: Scalar> RawDataset<T> {
    pub fn new(samples: Array2<T>, labels: Vec<usize>) -> Result<Self> {
        if samples.nrows() != labels.len() {
            return Err(Error::CountMismatch {
                images: samples.nrows(),
                labels: labels.len(),
            });
        }
        let classes = labels.iter().max().map_or(0, |&c| c + 1);
        Ok(RawDataset {
            samples,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        RawDataset {
            samples: self.samples.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Keeps only samples of `classes`, relabelled to their position in it.
    pub fn with_classes(&self, classes: &[usize]) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::InvalidParameter("need at least two classes".into()));
        }
        let rows: Vec<usize> = (0..self.len()).filter(|&i| classes.contains(&self.labels[i])).collect();
        let mut out = self.select(&rows);
        for l in &mut out.labels {
            *l = classes.iter().position(|c| c == l).expect("filtered");
        }
        out.classes = classes.len();
        Ok(out)
    }

    /// Disjoint random train and test subsets of the given sizes.
    pub fn split(&self, train: usize, test: usize, seed: u64) -> Result<(Self, Self)> {
        if train + test > self.len() {
            return Err(Error::NotEnoughSamples {
                needed: train + test,
                got: self.len(),
            });
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut stream_rng(seed, stream::SPLIT));
        Ok((self.select(&order[..train]), self.select(&order[train..train + test])))
    }

    /// Rounds every value to one of 256 uniform levels over its column range.
    pub fn quantized(&self) -> Self {
        let mut out = self.clone();
        for mut col in out.samples.axis_iter_mut(Axis(1)) {
            let lo = col.iter().copied().fold(T::infinity(), T::min);
            let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
            if hi > lo {
                let step = (hi - lo) / T::of(255.0);
                col.mapv_inplace(|v| lo + ((v - lo) / step).round() * step);
            }
        }
        out
    }
}

fn read_u32(bytes: &[u8], at: usize, path: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::UnexpectedEof(path.to_string()))
}

fn check_magic(bytes: &[u8], expected: u32, path: &str) -> Result<()> {
    let found = read_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Reads an IDX image file (`u8`, 3 dimensions) and its label file.
/// Pixel intensities are scaled to `[0, 1]`.
pub fn load_idx<T: Scalar>(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<RawDataset<T>> {
    let (ipath, lpath) = (images.as_ref(), labels.as_ref());
    let ibytes = fs::read(ipath).map_err(|e| Error::io(ipath, e))?;
    let lbytes = fs::read(lpath).map_err(|e| Error::io(lpath, e))?;
    let iname = ipath.display().to_string();
    let lname = lpath.display().to_string();

    check_magic(&ibytes, IDX_IMAGES_MAGIC, &iname)?;
    let count = read_u32(&ibytes, 4, &iname)? as usize;
    let rows = read_u32(&ibytes, 8, &iname)? as usize;
    let cols = read_u32(&ibytes, 12, &iname)? as usize;
    let dim = rows * cols;
    let pixels = ibytes
        .get(16..16 + count * dim)
        .ok_or_else(|| Error::UnexpectedEof(iname.clone()))?;

    check_magic(&lbytes, IDX_LABELS_MAGIC, &lname)?;
    let label_count = read_u32(&lbytes, 4, &lname)? as usize;
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let raw_labels = lbytes
        .get(8..8 + count)
        .ok_or_else(|| Error::UnexpectedEof(lname.clone()))?;

    let scale = T::of(255.0);
    let samples = Array2::from_shape_fn((count, dim), |(i, j)| T::of(pixels[i * dim + j] as f64) / scale);
    RawDataset::new(samples, raw_labels.iter().map(|&l| l as usize).collect())
}

/// Writes an IDX pair; intensities in `[0, 1]` are mapped back to bytes.
pub fn write_idx<T: Scalar>(
    data: &RawDataset<T>,
    rows: usize,
    cols: usize,
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<()> {
    if rows * cols != data.dim() {
        return Err(Error::LengthMismatch {
            what: "image size",
            expected: data.dim(),
            got: rows * cols,
        });
    }
    let mut ibytes = Vec::with_capacity(16 + data.samples.len());
    for v in [IDX_IMAGES_MAGIC, data.len() as u32, rows as u32, cols as u32] {
        ibytes.extend_from_slice(&v.to_be_bytes());
    }
    ibytes.extend(
        data.samples
            .iter()
            .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    let mut lbytes = Vec::with_capacity(8 + data.len());
    for v in [IDX_LABELS_MAGIC, data.len() as u32] {
        lbytes.extend_from_slice(&v.to_be_bytes());
    }
    lbytes.extend(data.labels.iter().map(|&l| l as u8));
    fs::write(images.as_ref(), ibytes).map_err(|e| Error::io(images.as_ref(), e))?;
    fs::write(labels.as_ref(), lbytes).map_err(|e| Error::io(labels.as_ref(), e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub covariance: Vec<Vec<f64>>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub classes: Vec<GaussianClass>,
    pub seed: u64,
}

impl SyntheticParams {
    /// Two classes at `(−s, 0, …)` and `(s, 0, …)` with identity covariance.
    pub fn symmetric_pair(dim: usize, separation: f64, count: usize, seed: u64) -> Self {
        let class = |sign: f64| {
            let mut mean = vec![0.0; dim];
            mean[0] = sign * separation;
            GaussianClass {
                mean,
                covariance: (0..dim)
                    .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect(),
                count,
            }
        };
        SyntheticParams {
            classes: vec![class(-1.0), class(1.0)],
            seed,
        }
    }
}

/// Draws every class's samples from its Gaussian and shuffles the rows.
pub fn gen_synthetic<T: Scalar>(params: &SyntheticParams) -> Result<RawDataset<T>> {
    if params.classes.len() < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    let dim = params.classes[0].mean.len();
    if dim == 0 {
        return Err(Error::InvalidParameter("zero-dimensional classes".into()));
    }
    let mut rng = stream_rng(params.seed, stream::SYNTHETIC);
    let total: usize = params.classes.iter().map(|c| c.count).sum();
    let mut samples = Array2::<T>::zeros((total, dim));
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (class, spec) in params.classes.iter().enumerate() {
        if spec.mean.len() != dim || spec.covariance.len() != dim || spec.covariance.iter().any(|r| r.len() != dim) {
            return Err(Error::LengthMismatch {
                what: "class dimension",
                expected: dim,
                got: spec.mean.len(),
            });
        }
        let cov = Array2::from_shape_fn((dim, dim), |(i, j)| spec.covariance[i][j]);
        let asymmetric = (0..dim).any(|i| (0..i).any(|j| (cov[[i, j]] - cov[[j, i]]).abs() > 1e-12));
        if asymmetric {
            return Err(Error::NotPositiveDefinite);
        }
        let l = cholesky(cov.view())?;
        let mean = Array1::from(spec.mean.clone());
        for _ in 0..spec.count {
            let z: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x = &mean + &l.dot(&z);
            for j in 0..dim {
                samples[[row, j]] = T::of(x[j]);
            }
            labels.push(class);
            row += 1;
        }
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let data = RawDataset {
        samples,
        labels,
        classes: params.classes.len(),
    };
    Ok(data.select(&order))
}
