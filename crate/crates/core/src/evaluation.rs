//! Leave-one-participant-out evaluation with weighted F1.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::binarize;
use crate::dataset::{derive_seed, FeatureRow, FeatureTable};
use crate::error::{Error, Result};
use crate::features::FeatureSubset;
use crate::forest::{train_forest, tune_depth, Classifier, ForestParams, ZeroRModel, DEFAULT_TREES, DEPTH_GRID};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Self {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        assert!(counts.len() == classes.len() && counts.iter().all(|r| r.len() == classes.len()));
        Self { classes, counts }
    }

    fn index(&mut self, label: &str) -> usize {
        if let Some(i) = self.classes.iter().position(|c| c == label) {
            return i;
        }
        self.classes.push(label.to_string());
        for r in &mut self.counts {
            r.push(0);
        }
        self.counts.push(vec![0; self.classes.len()]);
        self.classes.len() - 1
    }

    /// Unknown labels extend the class list.
    pub fn add(&mut self, truth: &str, predicted: &str) {
        let (t, p) = (self.index(truth), self.index(predicted));
        self.counts[t][p] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (i, t) in other.classes.iter().enumerate() {
            for (j, p) in other.classes.iter().enumerate() {
                let (a, b) = (self.index(t), self.index(p));
                self.counts[a][b] += other.counts[i][j];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class] as f64;
        let predicted: u64 = self.counts.iter().map(|r| r[class]).sum();
        let (support, predicted) = (self.support(class) as f64, predicted as f64);
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    /// Per-class F1 weighted by true-class support.
    pub fn weighted_f1(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::InvalidArgument("weighted F1 of an empty confusion matrix".into()));
        }
        Ok((0..self.classes.len())
            .map(|c| self.support(c) as f64 / n as f64 * self.f1(c))
            .sum())
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Forest,
    ZeroR,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Forest => "forest",
            ClassifierKind::ZeroR => "zeror",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub window_ms: f64,
    pub subset: FeatureSubset,
    pub classifier: ClassifierKind,
    pub n_trees: usize,
    pub seed: u64,
    /// A single entry skips tuning.
    pub depth_grid: Vec<Option<usize>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            window_ms: 1000.0,
            subset: FeatureSubset::Full,
            classifier: ClassifierKind::Forest,
            n_trees: DEFAULT_TREES,
            seed: 0,
            depth_grid: DEPTH_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub participant_id: String,
    pub train_participants: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub max_depth: Option<usize>,
    pub confusion: ConfusionMatrix,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    /// Sorted by participant id.
    pub folds: Vec<FoldReport>,
    /// Unweighted mean over participants; the headline number.
    pub mean_f1: f64,
    pub sd_f1: f64,
    pub pooled_f1: f64,
    pub pooled_confusion: ConfusionMatrix,
}

fn class_list() -> Vec<String> {
    vec!["InternalThought".into(), "OnTask".into()]
}

fn xy<'a>(rows: impl Iterator<Item = &'a FeatureRow>) -> (Vec<Vec<f64>>, Vec<String>) {
    rows.map(|r| (r.values.clone(), binarize(r.label.as_deref().unwrap_or("")).to_string()))
        .unzip()
}

/// Leave-one-participant-out evaluation. Rows without a label or with too
/// few valid samples are dropped. `aux` rows join every training fold and
/// are never tested.
pub fn lopo_eval(table: &FeatureTable, aux: Option<&FeatureTable>, config: &EvalConfig) -> Result<EvalReport> {
    let table = table.subset(config.subset)?;
    let aux = aux.map(|a| a.subset(config.subset)).transpose()?;
    let participants = table.participants();
    if participants.len() < 2 {
        return Err(Error::Dataset(format!(
            "leave-one-participant-out needs at least 2 participants, got {}",
            participants.len()
        )));
    }
    for p in &participants {
        if !table.usable().any(|r| &r.participant_id == p) {
            return Err(Error::Dataset(format!("participant {p:?} has no usable instances")));
        }
    }
    if config.depth_grid.is_empty() {
        return Err(Error::InvalidArgument("empty depth grid".into()));
    }

    let folds: Vec<FoldReport> = participants
        .par_iter()
        .map(|held| fold(&table, aux.as_ref(), held, &participants, config))
        .collect::<Result<_>>()?;

    let f1s: Vec<f64> = folds.iter().map(|f| f.weighted_f1).collect();
    let mut pooled = ConfusionMatrix::new(class_list());
    for f in &folds {
        pooled.merge(&f.confusion);
    }
    Ok(EvalReport {
        config: config.clone(),
        mean_f1: crate::stats::mean(&f1s),
        sd_f1: crate::stats::sample_sd(&f1s),
        pooled_f1: pooled.weighted_f1()?,
        pooled_confusion: pooled,
        folds,
    })
}

fn fold(
    table: &FeatureTable,
    aux: Option<&FeatureTable>,
    held: &str,
    participants: &[String],
    config: &EvalConfig,
) -> Result<FoldReport> {
    // grouped by participant so block order in the table cannot matter
    let mut own: Vec<&FeatureRow> = table.usable().filter(|r| r.participant_id != held).collect();
    own.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
    let (x, y) = xy(own.into_iter().chain(aux.into_iter().flat_map(|a| a.usable())));
    let (tx, ty) = xy(table.usable().filter(|r| r.participant_id == held));
    let seed = derive_seed(config.seed, held);

    let (model, max_depth): (Box<dyn Classifier>, Option<usize>) = match config.classifier {
        ClassifierKind::ZeroR => (Box::new(ZeroRModel::fit(&y)?), None),
        ClassifierKind::Forest => {
            let params = ForestParams {
                n_trees: config.n_trees,
                seed,
                ..Default::default()
            };
            let names = &table.feature_names;
            let depth = match config.depth_grid.as_slice() {
                [only] => *only,
                grid => tune_depth(&x, &y, names, grid, &params)?,
            };
            let model = train_forest(&x, &y, names, &ForestParams { max_depth: depth, ..params })?;
            (Box::new(model), depth)
        }
    };

    let mut confusion = ConfusionMatrix::new(class_list());
    for (row, truth) in tx.iter().zip(&ty) {
        confusion.add(truth, &model.predict(row)?.label);
    }
    Ok(FoldReport {
        participant_id: held.to_string(),
        train_participants: participants.iter().filter(|p| *p != held).cloned().collect(),
        n_train: x.len(),
        n_test: tx.len(),
        max_depth,
        weighted_f1: confusion.weighted_f1()?,
        confusion,
    })
}

/// Reports over window sizes, feature subsets and classifiers.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GridReport {
    pub reports: Vec<EvalReport>,
}

impl GridReport {
    /// Mean F1 per window size (rows) and subset/classifier (columns).
    pub fn to_text(&self) -> String {
        let mut cols: Vec<(FeatureSubset, ClassifierKind)> = Vec::new();
        let mut windows: Vec<f64> = Vec::new();
        for r in &self.reports {
            let c = (r.config.subset, r.config.classifier);
            if !cols.contains(&c) {
                cols.push(c);
            }
            if !windows.contains(&r.config.window_ms) {
                windows.push(r.config.window_ms);
            }
        }
        let mut s = format!("{:>10}", "window_ms");
        for (sub, clf) in &cols {
            write!(s, " {:>18}", format!("{}/{}", sub.as_str(), clf.as_str())).unwrap();
        }
        s.push('\n');
        for w in &windows {
            write!(s, "{w:>10}").unwrap();
            for (sub, clf) in &cols {
                let cell = self
                    .reports
                    .iter()
                    .find(|r| r.config.window_ms == *w && r.config.subset == *sub && r.config.classifier == *clf)
                    .map_or("-".to_string(), |r| format!("{:.3} ± {:.3}", r.mean_f1, r.sd_f1));
                write!(s, " {cell:>18}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// One CSV row per fold.
    pub fn write_fold_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "window_ms",
            "subset",
            "classifier",
            "participant_id",
            "n_train",
            "n_test",
            "max_depth",
            "weighted_f1",
            "tp_internal",
            "fn_internal",
            "fp_internal",
            "tn_internal",
        ])?;
        for r in &self.reports {
            for f in &r.folds {
                let c = &f.confusion.counts;
                w.write_record([
                    r.config.window_ms.to_string(),
                    r.config.subset.as_str().to_string(),
                    r.config.classifier.as_str().to_string(),
                    f.participant_id.clone(),
                    f.n_train.to_string(),
                    f.n_test.to_string(),
                    f.max_depth.map_or("none".into(), |d| d.to_string()),
                    f.weighted_f1.to_string(),
                    c[0][0].to_string(),
                    c[0][1].to_string(),
                    c[1][0].to_string(),
                    c[1][1].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::Dataset(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn cm(counts: [[u64; 2]; 2]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(names(&["a", "b"]), counts.iter().map(|r| r.to_vec()).collect())
    }

    #[test]
    fn weighted_f1_examples() {
        assert_eq!(cm([[10, 0], [0, 7]]).weighted_f1().unwrap(), 1.0);
        let all0 = cm([[50, 0], [50, 0]]);
        assert!((all0.f1(0) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(all0.f1(1), 0.0);
        assert!((all0.weighted_f1().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((cm([[25, 25], [25, 25]]).weighted_f1().unwrap() - 0.5).abs() < 1e-12);
        assert!(cm([[0, 0], [0, 0]]).weighted_f1().is_err());
    }

    #[test]
    fn symmetric_binary_matches_accuracy() {
        for (d, o) in [(40, 10), (30, 20), (99, 1)] {
            let m = cm([[d, o], [o, d]]);
            assert!((m.weighted_f1().unwrap() - m.accuracy()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_r_closed_form() {
        // 60/40 split, everything predicted as the majority
        let m = cm([[60, 0], [40, 0]]);
        let p = 0.6;
        let expected = 0.6 * (2.0 * p / (p + 1.0));
        assert!((m.weighted_f1().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn add_and_merge() {
        let mut m = ConfusionMatrix::new(names(&["a"]));
        m.add("a", "b");
        m.add("b", "b");
        assert_eq!(m.classes, names(&["a", "b"]));
        assert_eq!(m.counts, vec![vec![0, 1], vec![0, 1]]);
        let mut n = ConfusionMatrix::new(names(&["b", "a"]));
        n.merge(&m);
        assert_eq!(n.counts, vec![vec![1, 0], vec![1, 0]]);
        assert_eq!(n.total(), 2);
    }
}
