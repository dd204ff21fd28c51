//! Bootstrap random forest of CART regression trees with out-of-bag error.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{task_rng, Dataset, Row};
use crate::error::{Error, Result};

const N_FEATURES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
}

impl MaxFeatures {
    pub fn count(self, n_features: usize) -> usize {
        let n = n_features as f64;
        let k = match self {
            MaxFeatures::Sqrt => n.sqrt().floor() as usize,
            MaxFeatures::Log2 => n.log2().floor() as usize,
            MaxFeatures::All => n_features,
        };
        k.clamp(1, n_features)
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(Self::Sqrt),
            "log2" => Ok(Self::Log2),
            "all" => Ok(Self::All),
            other => Err(Error::validation(format!("unknown max_features {other:?} (sqrt|log2|all)"))),
        }
    }
}

/// How each tree's training rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// `ceil(fraction * n)` rows drawn with replacement.
    Bootstrap { fraction: f64 },
    /// Every training row exactly once; leaves no out-of-bag rows.
    AllRowsOnce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub sampling: Sampling,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 700,
            max_features: MaxFeatures::Log2,
            min_samples_leaf: 2,
            sampling: Sampling::Bootstrap { fraction: 1.0 },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Flat regression tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: [f64; 2]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    /// Sorted dataset row indices drawn for each tree (a multiset).
    pub in_bag: Vec<Vec<usize>>,
    /// Dataset row indices the forest was trained on.
    pub train_indices: Vec<usize>,
    /// `None` when no training row is out-of-bag for any tree.
    pub oob_rmse: Option<f64>,
    pub config: ForestConfig,
}

struct Builder<'a> {
    rows: &'a [Row],
    max_features: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let first = self.rows[idx[0]].p;
        if idx.iter().all(|&i| self.rows[i].p == first) {
            return first;
        }
        idx.iter().map(|&i| self.rows[i].p).sum::<f64>() / idx.len() as f64
    }

    /// Lowest combined child SSE over midpoint thresholds of one feature,
    /// i.e. the lowest RMSE of the two-leaf prediction.
    fn best_on_feature(&self, idx: &[usize], feature: usize) -> Option<BestSplit> {
        let n = idx.len();
        let mut sorted = idx.to_vec();
        sorted.sort_by(|&a, &b| {
            let (xa, xb) = (self.rows[a].features()[feature], self.rows[b].features()[feature]);
            xa.total_cmp(&xb).then(a.cmp(&b))
        });
        let x = |k: usize| self.rows[sorted[k]].features()[feature];
        let y = |k: usize| self.rows[sorted[k]].p;
        let total: f64 = (0..n).map(y).sum();
        let total_sq: f64 = (0..n).map(|k| y(k) * y(k)).sum();

        let mut best: Option<(usize, f64)> = None;
        let (mut s, mut sq) = (0.0, 0.0);
        for k in 1..n {
            s += y(k - 1);
            sq += y(k - 1) * y(k - 1);
            if k < self.min_leaf || n - k < self.min_leaf || x(k - 1) == x(k) {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let sse = (sq - s * s / nl) + ((total_sq - sq) - (total - s) * (total - s) / nr);
            if best.is_none_or(|(_, b)| sse < b) {
                best = Some((k, sse));
            }
        }
        best.map(|(k, sse)| {
            let threshold = x(k - 1) + (x(k) - x(k - 1)) / 2.0;
            // midpoint can round onto the upper value; keep the partition consistent with predict
            let threshold = if threshold >= x(k) { x(k - 1) } else { threshold };
            BestSplit {
                feature,
                threshold,
                sse,
                left: sorted[..k].to_vec(),
                right: sorted[k..].to_vec(),
            }
        })
    }

    fn grow(&mut self, idx: Vec<usize>, rng: &mut ChaCha8Rng) -> usize {
        let at = self.nodes.len();
        let value = self.leaf_value(&idx);
        self.nodes.push(Node::Leaf { value });
        let pure = idx.iter().all(|&i| self.rows[i].p == self.rows[idx[0]].p);
        if pure || idx.len() < 2 * self.min_leaf {
            return at;
        }
        let mut features: Vec<usize> = (0..N_FEATURES).collect();
        features.shuffle(rng);
        let mut best: Option<BestSplit> = None;
        for (visited, &f) in features.iter().enumerate() {
            if visited >= self.max_features && best.is_some() {
                break;
            }
            if let Some(cand) = self.best_on_feature(&idx, f) {
                if best.as_ref().is_none_or(|b| cand.sse < b.sse) {
                    best = Some(cand);
                }
            }
        }
        let Some(split) = best else { return at };
        let left = self.grow(split.left, rng);
        let right = self.grow(split.right, rng);
        self.nodes[at] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        at
    }
}

fn draw_in_bag(train: &[usize], sampling: Sampling, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut bag = match sampling {
        Sampling::AllRowsOnce => train.to_vec(),
        Sampling::Bootstrap { fraction } => {
            let m = (fraction * train.len() as f64).ceil().max(1.0) as usize;
            (0..m).map(|_| train[rng.gen_range(0..train.len())]).collect()
        }
    };
    bag.sort_unstable();
    bag
}

fn grow_tree(data: &Dataset, cfg: &ForestConfig, tree_index: usize) -> (Tree, Vec<usize>) {
    let mut rng = task_rng(cfg.seed, tree_index as u64);
    let bag = draw_in_bag(data.train_indices(), cfg.sampling, &mut rng);
    let mut builder = Builder {
        rows: data.rows(),
        max_features: cfg.max_features.count(N_FEATURES),
        min_leaf: cfg.min_samples_leaf,
        nodes: Vec::new(),
    };
    builder.grow(bag.clone(), &mut rng);
    (Tree { nodes: builder.nodes }, bag)
}

fn validate(data: &Dataset, cfg: &ForestConfig) -> Result<()> {
    if cfg.n_trees == 0 {
        return Err(Error::validation("n_trees must be >= 1"));
    }
    if cfg.min_samples_leaf == 0 {
        return Err(Error::validation("min_samples_leaf must be >= 1"));
    }
    if let Sampling::Bootstrap { fraction } = cfg.sampling {
        if !(fraction > 0.0) || !fraction.is_finite() {
            return Err(Error::validation(format!("bootstrap fraction {fraction} must be positive")));
        }
    }
    let n = data.train_indices().len();
    if n < 2 {
        return Err(Error::validation(format!("forest training needs at least 2 rows, got {n}")));
    }
    if n < cfg.min_samples_leaf {
        return Err(Error::validation(format!(
            "{n} training rows is fewer than min_samples_leaf = {}",
            cfg.min_samples_leaf
        )));
    }
    Ok(())
}

fn grow_trees(data: &Dataset, cfg: &ForestConfig, n: usize) -> (Vec<Tree>, Vec<Vec<usize>>) {
    (0..n).into_par_iter().map(|k| grow_tree(data, cfg, k)).unzip()
}

/// Accumulates out-of-bag predictions tree by tree.
struct OobAccumulator<'a> {
    rows: &'a [Row],
    train: &'a [usize],
    sum: Vec<f64>,
    count: Vec<usize>,
}

impl<'a> OobAccumulator<'a> {
    fn new(data: &'a Dataset) -> Self {
        let n = data.train_indices().len();
        Self { rows: data.rows(), train: data.train_indices(), sum: vec![0.0; n], count: vec![0; n] }
    }

    fn add(&mut self, tree: &Tree, in_bag: &[usize]) {
        for (k, &row) in self.train.iter().enumerate() {
            if in_bag.binary_search(&row).is_err() {
                self.sum[k] += tree.predict(self.rows[row].features());
                self.count[k] += 1;
            }
        }
    }

    fn rmse(&self) -> Option<f64> {
        let mut sse = 0.0;
        let mut n = 0usize;
        for (k, &row) in self.train.iter().enumerate() {
            if self.count[k] > 0 {
                let pred = self.sum[k] / self.count[k] as f64;
                sse += (pred - self.rows[row].p).powi(2);
                n += 1;
            }
        }
        (n > 0).then(|| (sse / n as f64).sqrt())
    }
}

pub fn train_forest(data: &Dataset, cfg: &ForestConfig) -> Result<ForestModel> {
    validate(data, cfg)?;
    let (trees, in_bag) = grow_trees(data, cfg, cfg.n_trees);
    let mut oob = OobAccumulator::new(data);
    for (tree, bag) in trees.iter().zip(&in_bag) {
        oob.add(tree, bag);
    }
    Ok(ForestModel {
        oob_rmse: oob.rmse(),
        trees,
        in_bag,
        train_indices: data.train_indices().to_vec(),
        config: cfg.clone(),
    })
}

/// OOB RMSE after the first `k` trees of one forest, for each requested `k`.
pub fn oob_curve(data: &Dataset, cfg: &ForestConfig, tree_counts: &[usize]) -> Result<Vec<(usize, Option<f64>)>> {
    validate(data, cfg)?;
    if tree_counts.is_empty() || tree_counts[0] == 0 || tree_counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("tree counts must be positive and strictly ascending"));
    }
    let max = *tree_counts.last().expect("non-empty");
    let (trees, in_bag) = grow_trees(data, cfg, max);
    let mut oob = OobAccumulator::new(data);
    let mut curve = Vec::with_capacity(tree_counts.len());
    let mut next = tree_counts.iter().peekable();
    for (k, (tree, bag)) in trees.iter().zip(&in_bag).enumerate() {
        oob.add(tree, bag);
        if next.peek() == Some(&&(k + 1)) {
            curve.push((k + 1, oob.rmse()));
            next.next();
        }
    }
    Ok(curve)
}

pub fn predict_forest(m: &ForestModel, g: f64, t: f64) -> f64 {
    m.trees.iter().map(|tree| tree.predict([g, t])).sum::<f64>() / m.trees.len() as f64
}
