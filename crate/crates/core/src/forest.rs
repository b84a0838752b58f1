//! Random forest and ZeroR classifiers.
//!
//! Trees are grown on bootstrap samples with Gini splits at midpoints
//! between consecutive distinct values. Each tree owns an RNG stream
//! derived from the forest seed and its index, so results do not depend on
//! thread scheduling.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::ConfusionMatrix;

pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_TREES: usize = 100;
/// Class favoured on vote ties.
pub const POSITIVE_CLASS: &str = "InternalThought";
/// Candidate depths for tuning; `None` is unbounded.
pub const DEPTH_GRID: [Option<usize>; 6] = [Some(4), Some(8), Some(12), Some(16), Some(24), None];
pub const TUNE_FOLDS: usize = 5;

/// `int(log2(m) + 1)`.
pub fn features_per_split(m: usize) -> usize {
    if m == 0 {
        return 0;
    }
    ((m as f64).log2() + 1.0).floor() as usize
}

/// A label with the fraction of votes behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: String,
    pub score: f64,
}

pub trait Classifier: Send + Sync {
    fn predict(&self, x: &[f64]) -> Result<Prediction>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or hold one sample.
    pub max_depth: Option<usize>,
    /// `None` uses `int(log2(m) + 1)`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: DEFAULT_TREES,
            max_depth: None,
            features_per_split: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub version: u32,
    pub params: ForestParams,
    pub features_per_split: usize,
    pub feature_manifest: Vec<String>,
    /// Sorted class labels; leaf counts index into this.
    pub classes: Vec<String>,
    pub trees: Vec<Tree>,
    pub seed: u64,
    /// Out-of-bag accuracy over rows left out by at least one tree.
    pub oob: Option<f64>,
}

/// Index of the largest count; ties go to `preferred` when it is among the
/// maxima, else to the lowest index.
fn argmax(counts: &[u32], preferred: Option<usize>) -> usize {
    let best = counts.iter().copied().max().unwrap_or(0);
    if let Some(p) = preferred {
        if counts.get(p) == Some(&best) {
            return p;
        }
    }
    counts.iter().position(|&c| c == best).unwrap_or(0)
}

fn check_matrix(x: &[Vec<f64>], y_len: usize) -> Result<usize> {
    if x.is_empty() || x.len() != y_len {
        return Err(Error::Training(format!("{} rows but {} labels", x.len(), y_len)));
    }
    let m = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != m {
            return Err(Error::FeatureLength { expected: m, got: row.len() });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Training(format!("non-finite value at row {i}, feature {j}")));
        }
    }
    Ok(m)
}

fn encode(y: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut classes: Vec<String> = y.to_vec();
    classes.sort();
    classes.dedup();
    let codes = y.iter().map(|l| classes.binary_search(l).unwrap()).collect();
    (classes, codes)
}

pub fn train_forest(x: &[Vec<f64>], y: &[String], manifest: &[String], params: &ForestParams) -> Result<ForestModel> {
    let m = check_matrix(x, y.len())?;
    if manifest.len() != m {
        return Err(Error::FeatureLength {
            expected: manifest.len(),
            got: m,
        });
    }
    let (classes, codes) = encode(y);
    if classes.len() < 2 {
        return Err(Error::Training("need at least two classes".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be positive".into()));
    }
    let k = params.features_per_split.unwrap_or_else(|| features_per_split(m)).clamp(1, m);
    let n = x.len();
    let grower = Grower {
        x,
        y: &codes,
        n_classes: classes.len(),
        k,
        max_depth: params.max_depth,
    };
    let grown: Vec<(Tree, Vec<bool>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let bag: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut in_bag = vec![false; n];
            for &i in &bag {
                in_bag[i] = true;
            }
            (grower.grow(bag, &mut rng), in_bag)
        })
        .collect();

    let positive = classes.iter().position(|c| c == POSITIVE_CLASS);
    let mut votes = vec![vec![0u32; classes.len()]; n];
    for (tree, in_bag) in &grown {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            votes[i][argmax(tree.leaf(&x[i]), positive)] += 1;
        }
    }
    let (mut hit, mut seen) = (0usize, 0usize);
    for (v, &c) in votes.iter().zip(&codes) {
        if v.iter().any(|&c| c > 0) {
            seen += 1;
            hit += usize::from(argmax(v, positive) == c);
        }
    }

    Ok(ForestModel {
        version: MODEL_VERSION,
        params: *params,
        features_per_split: k,
        feature_manifest: manifest.to_vec(),
        classes,
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        seed: params.seed,
        oob: (seen > 0).then(|| hit as f64 / seen as f64),
    })
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    k: usize,
    max_depth: Option<usize>,
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn grow(&self, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = Vec::new();
        self.node(&mut nodes, rows, 0, rng);
        Tree { nodes }
    }

    fn counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.n_classes];
        for &i in rows {
            c[self.y[i]] += 1;
        }
        c
    }

    fn node(&self, nodes: &mut Vec<Node>, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = nodes.len();
        let counts = self.counts(&rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || rows.len() < 2 || self.max_depth.is_some_and(|d| depth >= d) {
            nodes.push(Node::Leaf { counts });
            return id;
        }
        let m = self.x[0].len();
        let mut feats = sample(rng, m, self.k).into_vec();
        feats.sort_unstable();
        let Some(best) = self.best_split(&rows, &feats, &counts) else {
            nodes.push(Node::Leaf { counts });
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| self.x[i][best.feature] <= best.threshold);
        nodes.push(Node::Leaf { counts: Vec::new() });
        let left = self.node(nodes, l, depth + 1, rng);
        let right = self.node(nodes, r, depth + 1, rng);
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Lowest weighted Gini impurity over the candidate features, scanning
    /// features and thresholds in ascending order so ties keep the first.
    fn best_split(&self, rows: &[usize], feats: &[usize], total: &[u32]) -> Option<Best> {
        let n = rows.len() as f64;
        let mut best: Option<Best> = None;
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        let mut left = vec![0u32; self.n_classes];
        for &f in feats {
            order.clear();
            order.extend(rows.iter().map(|&i| (self.x[i][f], self.y[i])));
            order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            left.iter_mut().for_each(|c| *c = 0);
            for j in 0..order.len() - 1 {
                left[order[j].1] += 1;
                let (a, b) = (order[j].0, order[j + 1].0);
                if a == b {
                    continue;
                }
                let nl = (j + 1) as f64;
                let nr = n - nl;
                let sq_l: f64 = left.iter().map(|&c| (c as f64).powi(2)).sum();
                let sq_r: f64 = left.iter().zip(total).map(|(&l, &t)| ((t - l) as f64).powi(2)).sum();
                // n * weighted impurity
                let score = (nl - sq_l / nl) + (nr - sq_r / nr);
                if best.as_ref().is_none_or(|b| score < b.score) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(Best {
                        score,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.feature_manifest.len()
    }

    fn positive(&self) -> Option<usize> {
        self.classes.iter().position(|c| c == POSITIVE_CLASS)
    }

    /// Number of trees voting for each class.
    pub fn votes(&self, x: &[f64]) -> Result<Vec<u32>> {
        if x.len() != self.n_features() {
            return Err(Error::FeatureLength {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let positive = self.positive();
        let mut votes = vec![0u32; self.classes.len()];
        for t in &self.trees {
            votes[argmax(t.leaf(x), positive)] += 1;
        }
        Ok(votes)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: ForestModel = serde_json::from_str(s)?;
        if model.version > MODEL_VERSION {
            return Err(Error::InvalidArgument(format!(
                "model version {} is newer than supported {MODEL_VERSION}",
                model.version
            )));
        }
        let m = model.n_features();
        for t in &model.trees {
            for node in &t.nodes {
                match node {
                    Node::Split { feature, left, right, .. } => {
                        if *feature >= m || *left >= t.nodes.len() || *right >= t.nodes.len() {
                            return Err(Error::InvalidArgument("corrupt tree node".into()));
                        }
                    }
                    Node::Leaf { counts } => {
                        if counts.len() != model.classes.len() {
                            return Err(Error::InvalidArgument("corrupt leaf".into()));
                        }
                    }
                }
            }
        }
        Ok(model)
    }
}

impl Classifier for ForestModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let votes = self.votes(x)?;
        let win = argmax(&votes, self.positive());
        Ok(Prediction {
            label: self.classes[win].clone(),
            score: votes[win] as f64 / self.trees.len() as f64,
        })
    }
}

/// Always predicts the training majority class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroRModel {
    pub majority: String,
    pub priors: BTreeMap<String, f64>,
}

impl ZeroRModel {
    pub fn fit(y: &[String]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Training("no labels".into()));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for l in y {
            *counts.entry(l.clone()).or_default() += 1;
        }
        let top = *counts.values().max().unwrap();
        // BTreeMap order makes this the lexicographically smallest maximum.
        let majority = counts.iter().find(|(_, &c)| c == top).unwrap().0.clone();
        let n = y.len() as f64;
        Ok(Self {
            majority,
            priors: counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect(),
        })
    }
}

impl Classifier for ZeroRModel {
    fn predict(&self, _x: &[f64]) -> Result<Prediction> {
        Ok(Prediction {
            label: self.majority.clone(),
            score: self.priors[&self.majority],
        })
    }
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(y: &[String], k: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0; y.len()];
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in y.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dealt = 0;
    for idx in by_class.values_mut() {
        for j in (1..idx.len()).rev() {
            idx.swap(j, rng.random_range(0..=j));
        }
        for &i in idx.iter() {
            fold[i] = dealt % k;
            dealt += 1;
        }
    }
    fold
}

/// Mean weighted F1 of stratified cross-validation for one depth, or `None`
/// when every fold is degenerate.
pub fn cv_score(x: &[Vec<f64>], y: &[String], manifest: &[String], params: &ForestParams, folds: &[usize]) -> Result<Option<f64>> {
    let mut scores = Vec::new();
    for f in 0..TUNE_FOLDS {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| folds[i] != f);
        let train_y: Vec<String> = train.iter().map(|&i| y[i].clone()).collect();
        if test.is_empty() || train_y.iter().all(|l| *l == train_y[0]) {
            continue;
        }
        let train_x: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let model = train_forest(&train_x, &train_y, manifest, params)?;
        let mut cm = ConfusionMatrix::new(model.classes.clone());
        for &i in &test {
            cm.add(&y[i], &model.predict(&x[i])?.label);
        }
        scores.push(cm.weighted_f1()?);
    }
    Ok((!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64))
}

/// Depth with the highest stratified 5-fold CV weighted F1; ties go to the
/// smallest depth, with unbounded counted as largest.
pub fn tune_depth(
    x: &[Vec<f64>],
    y: &[String],
    manifest: &[String],
    grid: &[Option<usize>],
    params: &ForestParams,
) -> Result<Option<usize>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty depth grid".into()));
    }
    if x.len() < 10 {
        return Err(Error::Training(format!("tuning needs at least 10 rows, got {}", x.len())));
    }
    let mut grid = grid.to_vec();
    grid.sort_by_key(|d| d.unwrap_or(usize::MAX));
    grid.dedup();
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let folds = stratified_folds(y, TUNE_FOLDS, params.seed);
    let mut best: Option<(f64, Option<usize>)> = None;
    for &depth in &grid {
        let p = ForestParams { max_depth: depth, ..*params };
        if let Some(s) = cv_score(x, y, manifest, &p, &folds)? {
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, depth));
            }
        }
    }
    Ok(best.map_or(grid[0], |(_, d)| d))
}
