//! Exhaustive (C, ε[, γ]) grid search for the SVR.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{predict_svr, train_svr, Dataset, SvrConfig};
use crate::error::{Error, Result};
use crate::metrics::compute_metrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringSplit {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSearchSpec {
    pub c_values: Vec<f64>,
    pub eps_values: Vec<f64>,
    /// Empty means "use `base.gamma`".
    pub gamma_values: Vec<f64>,
    /// Kernel, solver settings and defaults shared by every cell.
    pub base: SvrConfig,
    pub scoring: ScoringSplit,
}

impl Default for GridSearchSpec {
    fn default() -> Self {
        Self {
            c_values: vec![0.1, 1.0, 10.0, 100.0],
            eps_values: vec![0.5, 1.0, 2.25, 5.0],
            gamma_values: Vec::new(),
            base: SvrConfig::default(),
            scoring: ScoringSplit::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub c: f64,
    pub eps: f64,
    pub gamma: f64,
    pub percent_within_eps: Option<f64>,
    pub mae: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub rows: Vec<GridRow>,
    /// Index into `rows`; `None` when every cell failed.
    pub selected: Option<usize>,
}

impl GridSearchResult {
    pub fn best(&self) -> Option<&GridRow> {
        self.selected.map(|i| &self.rows[i])
    }
}

/// Highest percent-within-ε; ties go to lower MAE, then lower C, ε, γ, then
/// the earlier row. Failed cells are skipped.
pub fn select_best(rows: &[GridRow]) -> Option<usize> {
    let key = |r: &GridRow| Some((r.percent_within_eps?, r.mae?));
    let better = |a: &GridRow, b: &GridRow| -> Ordering {
        let ((pa, ma), (pb, mb)) = (key(a).expect("scored"), key(b).expect("scored"));
        pb.total_cmp(&pa)
            .then(ma.total_cmp(&mb))
            .then(a.c.total_cmp(&b.c))
            .then(a.eps.total_cmp(&b.eps))
            .then(a.gamma.total_cmp(&b.gamma))
    };
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if key(r).is_none() {
            continue;
        }
        if best.is_none_or(|b| better(r, &rows[b]) == Ordering::Less) {
            best = Some(i);
        }
    }
    best
}

fn score_cell(data: &Dataset, cfg: &SvrConfig, split: ScoringSplit) -> Result<(f64, f64)> {
    let model = train_svr(data, cfg)?;
    let rows: Vec<_> = match split {
        ScoringSplit::Train => data.train_rows().collect(),
        ScoringSplit::Test => data.test_rows().collect(),
    };
    let meas: Vec<f64> = rows.iter().map(|r| r.p).collect();
    let pred: Vec<f64> = rows.iter().map(|r| predict_svr(&model, r.features())).collect();
    let m = compute_metrics(&meas, &pred, cfg.eps)?;
    Ok((m.percent_within_eps, m.mae))
}

pub fn grid_search_svr(data: &Dataset, spec: &GridSearchSpec) -> Result<GridSearchResult> {
    if spec.c_values.is_empty() || spec.eps_values.is_empty() {
        return Err(Error::validation("grid search needs at least one C and one eps value"));
    }
    if spec.scoring == ScoringSplit::Test && data.test_indices().is_empty() {
        return Err(Error::validation("held-out scoring requested but the test split is empty"));
    }
    let gammas = if spec.gamma_values.is_empty() { vec![spec.base.gamma] } else { spec.gamma_values.clone() };
    let mut cells = Vec::with_capacity(spec.c_values.len() * spec.eps_values.len() * gammas.len());
    for &c in &spec.c_values {
        for &eps in &spec.eps_values {
            for &gamma in &gammas {
                cells.push((c, eps, gamma));
            }
        }
    }
    let rows: Vec<GridRow> = cells
        .par_iter()
        .map(|&(c, eps, gamma)| {
            let cfg = SvrConfig { c, eps, gamma, ..spec.base.clone() };
            match score_cell(data, &cfg, spec.scoring) {
                Ok((p, mae)) => GridRow { c, eps, gamma, percent_within_eps: Some(p), mae: Some(mae), error: None },
                Err(e) => GridRow { c, eps, gamma, percent_within_eps: None, mae: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let selected = select_best(&rows);
    Ok(GridSearchResult { rows, selected })
}
