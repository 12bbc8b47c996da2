use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::RawDataset;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const SPLIT_STREAM: u64 = 2;
const CONTAMINATION_STREAM: u64 = 3;

/// Standard deviations (or ranges) below this map the attribute to 0.
pub const DEGENERATE_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationScheme {
    /// `(x - mean) / std` with population std.
    #[default]
    ZScore,
    /// `(x - min) / (max - min)`.
    MinMax,
}

impl NormalizationScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalizationScheme::ZScore => "z_score",
            NormalizationScheme::MinMax => "min_max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "z_score" => Some(Self::ZScore),
            "min_max" => Some(Self::MinMax),
            _ => None,
        }
    }
}

/// Per-attribute affine map fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scheme: NormalizationScheme,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    /// Fits statistics on the rows of an `N x D` matrix.
    pub fn fit(scheme: NormalizationScheme, train: &Tensor) -> Result<Self> {
        let [n, d] = *train.shape() else {
            return Err(Error::shape(
                "normalize",
                format!("expected N x D, got {:?}", train.shape()),
            ));
        };
        let mut location = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for j in 0..d {
            let col = (0..n).map(|i| train.row(i)[j]);
            match scheme {
                NormalizationScheme::ZScore => {
                    let mean = col.clone().sum::<f64>() / n as f64;
                    let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                    location[j] = mean;
                    scale[j] = var.sqrt();
                }
                NormalizationScheme::MinMax => {
                    let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                    location[j] = lo;
                    scale[j] = hi - lo;
                }
            }
        }
        Ok(Self {
            scheme,
            location,
            scale,
        })
    }

    pub fn num_attributes(&self) -> usize {
        self.location.len()
    }

    /// Applies the fitted map to an `N x D` matrix.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let d = self.num_attributes();
        match *x.shape() {
            [_, cols] if cols == d => {}
            ref s => {
                return Err(Error::shape(
                    "normalize",
                    format!("fitted on {d} attributes, got {s:?}"),
                ))
            }
        }
        let mut out = x.clone();
        for row in out.data_mut().chunks_mut(d) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if self.scale[j] < DEGENERATE_SCALE {
                    0.0
                } else {
                    (*v - self.location[j]) / self.scale[j]
                };
            }
        }
        Ok(out)
    }
}

/// One-class train/test partition of a dataset.
///
/// `train` and `test` start as `N x D` matrices; after patch splitting they
/// are `N x attributes x channels`. Row provenance is kept in `train_origin`
/// and `test_origin` as indices into the source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Tensor,
    pub test: Tensor,
    pub test_labels: Vec<u8>,
    pub train_origin: Vec<usize>,
    pub test_origin: Vec<usize>,
    /// Source indices of anomalies moved into `train`.
    pub contaminants: Vec<usize>,
    pub normalization: Option<Normalization>,
}

impl DatasetSplit {
    pub fn num_train(&self) -> usize {
        self.train_origin.len()
    }

    pub fn num_test(&self) -> usize {
        self.test_origin.len()
    }
}

/// Sends a random half (rounded down) of the normal rows to `train`. The
/// other normals and every anomaly form `test`, in source order.
pub fn split_train_test(ds: &RawDataset, seed: u64) -> Result<DatasetSplit> {
    let mut normals = ds.normal_indices();
    if normals.len() < 2 {
        return Err(Error::Insufficient {
            what: "normal rows",
            needed: 2,
            available: normals.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    normals.shuffle(&mut rng);
    let mut train_origin = normals[..normals.len() / 2].to_vec();
    train_origin.sort_unstable();
    let mut in_train = vec![false; ds.num_rows()];
    for &i in &train_origin {
        in_train[i] = true;
    }
    let test_origin: Vec<usize> = (0..ds.num_rows()).filter(|&i| !in_train[i]).collect();
    Ok(DatasetSplit {
        train: ds.features.select_rows(&train_origin),
        test: ds.features.select_rows(&test_origin),
        test_labels: test_origin.iter().map(|&i| ds.labels[i]).collect(),
        train_origin,
        test_origin,
        contaminants: Vec::new(),
        normalization: None,
    })
}

/// Fits `scheme` on the training rows and applies it to both sides.
pub fn normalize(split: &DatasetSplit, scheme: NormalizationScheme) -> Result<DatasetSplit> {
    let stats = Normalization::fit(scheme, &split.train)?;
    Ok(DatasetSplit {
        train: stats.apply(&split.train)?,
        test: stats.apply(&split.test)?,
        normalization: Some(stats),
        ..split.clone()
    })
}

/// Number of anomalies to inject so they make up `ratio` of the enlarged
/// training set.
pub fn contamination_count(train_size: usize, ratio: f64) -> usize {
    (ratio * train_size as f64 / (1.0 - ratio) + 1e-9).floor() as usize
}

/// Moves randomly chosen test anomalies into `train` without labels.
pub fn contaminate(split: &DatasetSplit, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if !(0.0..=0.05).contains(&ratio) {
        return Err(Error::Dataset(format!(
            "contamination ratio {ratio} is outside [0, 0.05]"
        )));
    }
    let k = contamination_count(split.num_train(), ratio);
    if k == 0 {
        return Ok(split.clone());
    }
    let mut anomalies: Vec<usize> = (0..split.num_test())
        .filter(|&i| split.test_labels[i] == 1)
        .collect();
    if anomalies.len() < k {
        return Err(Error::Insufficient {
            what: "test anomalies",
            needed: k,
            available: anomalies.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CONTAMINATION_STREAM);
    anomalies.shuffle(&mut rng);
    let mut picked = anomalies[..k].to_vec();
    picked.sort_unstable();
    let mut moved = vec![false; split.num_test()];
    for &i in &picked {
        moved[i] = true;
    }
    let kept: Vec<usize> = (0..split.num_test()).filter(|&i| !moved[i]).collect();
    let injected = split.test.select_rows(&picked);
    let mut train_origin = split.train_origin.clone();
    let origins: Vec<usize> = picked.iter().map(|&i| split.test_origin[i]).collect();
    train_origin.extend_from_slice(&origins);
    let mut contaminants = split.contaminants.clone();
    contaminants.extend_from_slice(&origins);
    Ok(DatasetSplit {
        train: Tensor::concat_rows(&[&split.train, &injected])?,
        test: split.test.select_rows(&kept),
        test_labels: kept.iter().map(|&i| split.test_labels[i]).collect(),
        train_origin,
        test_origin: kept.iter().map(|&i| split.test_origin[i]).collect(),
        contaminants,
        normalization: split.normalization.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(normals: usize, anomalies: usize) -> RawDataset {
        let n = normals + anomalies;
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= normals)).collect();
        RawDataset::new(
            "synthetic",
            vec!["a".into(), "b".into()],
            Tensor::new(&[n, 2], (0..2 * n).map(|v| v as f64).collect()).unwrap(),
            labels,
        )
        .unwrap()
    }

    #[test]
    fn small_split() {
        let s = split_train_test(&dataset(4, 1), 0).unwrap();
        assert_eq!(s.num_train(), 2);
        assert_eq!(s.num_test(), 3);
        assert_eq!(s.test_labels.iter().filter(|&&l| l == 1).count(), 1);
        assert_eq!(s.train.shape(), &[2, 2]);
    }

    #[test]
    fn too_few_normals() {
        assert!(matches!(
            split_train_test(&dataset(1, 3), 0),
            Err(Error::Insufficient { .. })
        ));
    }

    #[test]
    fn normalization_examples() {
        let train = Tensor::new(&[2, 2], vec![0.0, 5.0, 2.0, 5.0]).unwrap();
        let stats = Normalization::fit(NormalizationScheme::ZScore, &train).unwrap();
        assert_eq!(stats.apply(&train).unwrap().data(), &[-1.0, 0.0, 1.0, 0.0]);
        let test = Tensor::new(&[1, 2], vec![4.0, 7.0]).unwrap();
        assert_eq!(stats.apply(&test).unwrap().data(), &[3.0, 0.0]);
        let mm = Normalization::fit(NormalizationScheme::MinMax, &train).unwrap();
        assert_eq!(mm.apply(&test).unwrap().data(), &[2.0, 0.0]);
    }

    #[test]
    fn contamination_counts() {
        assert_eq!(contamination_count(100, 0.05), 5);
        assert_eq!(contamination_count(100, 0.0), 0);
        assert_eq!(contamination_count(99, 0.01), 1);
    }

    #[test]
    fn contamination_moves_rows() {
        let s = split_train_test(&dataset(200, 20), 3).unwrap();
        let c = contaminate(&s, 0.05, 3).unwrap();
        assert_eq!(c.num_train(), 105);
        assert_eq!(c.num_test(), s.num_test() - 5);
        assert_eq!(c.contaminants.len(), 5);
        for o in &c.contaminants {
            assert!(!c.test_origin.contains(o));
        }
        assert_eq!(contaminate(&s, 0.0, 3).unwrap(), s);
        assert!(contaminate(&s, 0.2, 3).is_err());
    }
}
