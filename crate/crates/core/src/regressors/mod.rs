//! (irradiance, temperature) → power regressors.
//!
//! Three model families share the [`Dataset`] type: a two-hidden-layer
//! ReLU perceptron trained with Adam, a bootstrap random forest with
//! out-of-bag error, and an ε-insensitive support vector regressor with a
//! grid search over (C, ε, γ).

pub mod forest;
pub mod grid;
pub mod mlp;
pub mod svr;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{oob_curve, predict_forest, train_forest, ForestConfig, ForestModel, MaxFeatures, Sampling};
pub use grid::{grid_search_svr, select_best, GridRow, GridSearchResult, GridSearchSpec, ScoringSplit};
pub use mlp::{predict_mlp, train_mlp, MlpConfig, MlpModel};
pub use svr::{predict_svr, train_svr, Kernel, SvrConfig, SvrModel};

/// Default held-out fraction.
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// One observation: irradiance (W/m²), temperature (°C), power (kW).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub g: f64,
    pub t: f64,
    pub p: f64,
}

impl Row {
    pub fn features(&self) -> [f64; 2] {
        [self.g, self.t]
    }
}

/// Per-feature and target z-score statistics of the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_mean: [f64; 2],
    pub feature_std: [f64; 2],
    pub target_mean: f64,
    pub target_std: f64,
}

impl NormStats {
    fn from_rows<'a>(rows: impl Iterator<Item = &'a Row> + Clone) -> Self {
        let n = rows.clone().count() as f64;
        let mean = |f: &dyn Fn(&Row) -> f64| rows.clone().map(f).sum::<f64>() / n;
        let std = |f: &dyn Fn(&Row) -> f64, m: f64| {
            let s = (rows.clone().map(|r| (f(r) - m).powi(2)).sum::<f64>() / n).sqrt();
            if s > 0.0 && s.is_finite() { s } else { 1.0 }
        };
        let (mg, mt, mp) = (mean(&|r| r.g), mean(&|r| r.t), mean(&|r| r.p));
        Self {
            feature_mean: [mg, mt],
            feature_std: [std(&|r| r.g, mg), std(&|r| r.t, mt)],
            target_mean: mp,
            target_std: std(&|r| r.p, mp),
        }
    }

    pub fn normalize(&self, x: [f64; 2]) -> [f64; 2] {
        [
            (x[0] - self.feature_mean[0]) / self.feature_std[0],
            (x[1] - self.feature_mean[1]) / self.feature_std[1],
        ]
    }

    pub fn normalize_target(&self, p: f64) -> f64 {
        (p - self.target_mean) / self.target_std
    }

    pub fn denormalize_target(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }
}

/// Rows plus a train/test partition and training-split normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<Row>,
    train: Vec<usize>,
    test: Vec<usize>,
    stats: NormStats,
}

impl Dataset {
    /// Every row is a training row.
    pub fn new(rows: Vec<Row>) -> Result<Self> {
        let train = (0..rows.len()).collect();
        Self::with_indices(rows, train, Vec::new())
    }

    /// Seeded random split holding out `round(test_fraction * n)` rows.
    pub fn split(rows: Vec<Row>, test_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::validation(format!("test fraction {test_fraction} outside [0, 1)")));
        }
        let n = rows.len();
        let n_test = (test_fraction * n as f64).round() as usize;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut test = idx[..n_test].to_vec();
        let mut train = idx[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Self::with_indices(rows, train, test)
    }

    pub fn with_indices(rows: Vec<Row>, train: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation("dataset is empty"));
        }
        if rows.iter().any(|r| !(r.g.is_finite() && r.t.is_finite() && r.p.is_finite())) {
            return Err(Error::validation("dataset contains non-finite values"));
        }
        if train.is_empty() {
            return Err(Error::validation("training split is empty"));
        }
        let mut seen = vec![false; rows.len()];
        for &i in train.iter().chain(&test) {
            if i >= rows.len() || seen[i] {
                return Err(Error::validation(format!("split index {i} out of range or duplicated")));
            }
            seen[i] = true;
        }
        let stats = NormStats::from_rows(train.iter().map(|&i| &rows[i]));
        Ok(Self { rows, train, test, stats })
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn stats(&self) -> &NormStats {
        &self.stats
    }

    pub fn train_rows(&self) -> impl Iterator<Item = &Row> + '_ {
        self.train.iter().map(move |&i| &self.rows[i])
    }

    pub fn test_rows(&self) -> impl Iterator<Item = &Row> + '_ {
        self.test.iter().map(move |&i| &self.rows[i])
    }
}

/// Per-task seed derived from a master seed, independent of scheduling.
pub(crate) fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

/// Any trained regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegressorModel {
    Mlp(MlpModel),
    Forest(ForestModel),
    Svr(SvrModel),
}

impl RegressorModel {
    pub fn predict(&self, g: f64, t: f64) -> f64 {
        match self {
            RegressorModel::Mlp(m) => predict_mlp(m, g, t),
            RegressorModel::Forest(m) => predict_forest(m, g, t),
            RegressorModel::Svr(m) => predict_svr(m, [g, t]),
        }
    }
}

pub const MODEL_FORMAT: &str = "pvtwin-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: RegressorModel,
}

pub fn model_to_string(model: &RegressorModel) -> Result<String> {
    let file = ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: model.clone() };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Serde(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<RegressorModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::validation(format!("not a model file (format {:?})", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::validation(format!("unsupported model file version {}", file.version)));
    }
    Ok(file.model)
}

pub fn save_model(model: &RegressorModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<RegressorModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}
