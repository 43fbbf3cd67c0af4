//! Representation bias: how well a probe recovers the sensitive attribute
//! from node embeddings (node RB) or from concatenated endpoint embeddings
//! (link RB). Lower is better.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedding::{edge_features, EdgeFeatureMode, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, SensitiveAttributes};
use crate::learners::{lr_predict, lr_train, LogisticConfig};
use crate::rng::{self, tag};

pub const TEST_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeHyperparams {
    pub lr: f64,
    pub l2: f64,
    pub cv_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFit {
    pub predictions: Vec<usize>,
    pub hyperparams: Option<ProbeHyperparams>,
}

/// A classifier fitted on `train` and evaluated on `test`.
pub trait Probe: Sync {
    fn fit_predict(
        &self,
        train: ArrayView2<f64>,
        train_y: &[usize],
        num_classes: usize,
        test: ArrayView2<f64>,
        seed: u64,
    ) -> Result<ProbeFit>;
}

/// Predicts one fixed class regardless of input.
#[derive(Debug, Clone, Copy)]
pub struct ConstantProbe(pub usize);

impl Probe for ConstantProbe {
    fn fit_predict(
        &self,
        _: ArrayView2<f64>,
        _: &[usize],
        _: usize,
        test: ArrayView2<f64>,
        _: u64,
    ) -> Result<ProbeFit> {
        Ok(ProbeFit {
            predictions: vec![self.0; test.nrows()],
            hyperparams: None,
        })
    }
}

/// Standardized multinomial logistic regression; `lr` and `l2` are picked by
/// stratified k-fold cross-validation on the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticProbe {
    pub lr_grid: Vec<f64>,
    pub l2_grid: Vec<f64>,
    pub folds: usize,
    pub epochs: usize,
}

impl Default for LogisticProbe {
    fn default() -> Self {
        Self {
            lr_grid: vec![1e-3, 1e-2],
            l2_grid: vec![0.0, 1e-4, 1e-2],
            folds: 3,
            epochs: 300,
        }
    }
}

fn standardize(train: ArrayView2<f64>, others: &[ArrayView2<f64>]) -> (Array2<f64>, Vec<Array2<f64>>) {
    let mean = train.mean_axis(Axis(0)).expect("nonempty");
    let std = train.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let f = |x: ArrayView2<f64>| (&x - &mean) / &std;
    (f(train), others.iter().map(|&x| f(x)).collect())
}

fn select_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

impl LogisticProbe {
    fn fit(
        &self,
        train: ArrayView2<f64>,
        y: &[usize],
        k: usize,
        test: ArrayView2<f64>,
        lr: f64,
        l2: f64,
        seed: u64,
    ) -> Result<Vec<usize>> {
        let (train, test) = standardize(train, &[test]);
        let cfg = LogisticConfig {
            lr,
            epochs: self.epochs,
            l2,
            seed,
        };
        let model = lr_train(train.view(), y, k, cfg)?;
        Ok(lr_predict(&model, test[0].view())?.0)
    }
}

impl Probe for LogisticProbe {
    fn fit_predict(
        &self,
        train: ArrayView2<f64>,
        train_y: &[usize],
        num_classes: usize,
        test: ArrayView2<f64>,
        seed: u64,
    ) -> Result<ProbeFit> {
        if self.lr_grid.is_empty() || self.l2_grid.is_empty() || self.folds < 2 {
            return Err(Error::InvalidParameter(
                "probe grid must be nonempty with at least two folds".into(),
            ));
        }
        let fold_of = stratified_folds(train_y, self.folds, seed);
        let mut best: Option<ProbeHyperparams> = None;
        for &lr in &self.lr_grid {
            for &l2 in &self.l2_grid {
                let mut correct = 0usize;
                let mut total = 0usize;
                for f in 0..self.folds {
                    let (fit_rows, held): (Vec<usize>, Vec<usize>) =
                        (0..train_y.len()).partition(|&i| fold_of[i] != f);
                    if held.is_empty() {
                        continue;
                    }
                    let fit_y: Vec<usize> = fit_rows.iter().map(|&i| train_y[i]).collect();
                    let pred = self.fit(
                        select_rows(train, &fit_rows).view(),
                        &fit_y,
                        num_classes,
                        select_rows(train, &held).view(),
                        lr,
                        l2,
                        seed,
                    )?;
                    correct += held.iter().zip(&pred).filter(|(&i, &p)| train_y[i] == p).count();
                    total += held.len();
                }
                let acc = correct as f64 / total.max(1) as f64;
                if best.is_none_or(|b| acc > b.cv_accuracy) {
                    best = Some(ProbeHyperparams {
                        lr,
                        l2,
                        cv_accuracy: acc,
                    });
                }
            }
        }
        let chosen = best.expect("grid is nonempty");
        let predictions = self.fit(train, train_y, num_classes, test, chosen.lr, chosen.l2, seed)?;
        Ok(ProbeFit {
            predictions,
            hyperparams: Some(chosen),
        })
    }
}

/// Fold index per row, dealing each class's shuffled rows round-robin.
fn stratified_folds(y: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::substream(seed, tag::PROBE, 1);
    let k = y.iter().max().map_or(0, |&m| m + 1);
    let mut out = vec![0; y.len()];
    let mut next = 0;
    for c in 0..k {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        rows.shuffle(&mut r);
        for i in rows {
            out[i] = next % folds;
            next += 1;
        }
    }
    out
}

/// Stratified train/test partition of row indices. Every class with at least
/// two members contributes at least one row to each side.
pub fn stratified_split(strata: &[usize], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng::substream(seed, tag::SPLIT, 1);
    let k = strata.iter().max().map_or(0, |&m| m + 1);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..k {
        let mut rows: Vec<usize> = (0..strata.len()).filter(|&i| strata[i] == c).collect();
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut r);
        let mut n_test = (rows.len() as f64 * test_fraction).round() as usize;
        if rows.len() >= 2 {
            n_test = n_test.clamp(1, rows.len() - 1);
        }
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: usize,
    pub count: usize,
    pub accuracy: f64,
}

/// Class-size-weighted accuracy `Σ_s (n_s / n) · acc_s`.
pub fn weighted_rb(classes: &[ClassAccuracy]) -> f64 {
    let total: usize = classes.iter().map(|c| c.count).sum();
    classes
        .iter()
        .map(|c| c.count as f64 / total as f64 * c.accuracy)
        .sum()
}

/// Unweighted mean of per-class accuracies.
pub fn macro_rb(classes: &[ClassAccuracy]) -> f64 {
    classes.iter().map(|c| c.accuracy).sum::<f64>() / classes.len() as f64
}

/// Mean of the source and destination weighted scores.
pub fn link_rb_from_parts(src: &[ClassAccuracy], dst: &[ClassAccuracy]) -> f64 {
    0.5 * (weighted_rb(src) + weighted_rb(dst))
}

/// Per-class accuracy over the classes present in `truth`.
pub fn per_class_accuracy(truth: &[usize], pred: &[usize], num_classes: usize) -> Result<Vec<ClassAccuracy>> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let mut count = vec![0usize; num_classes];
    let mut hit = vec![0usize; num_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        count[t] += 1;
        hit[t] += usize::from(t == p);
    }
    Ok((0..num_classes)
        .filter(|&c| count[c] > 0)
        .map(|c| ClassAccuracy {
            class: c,
            count: count[c],
            accuracy: hit[c] as f64 / count[c] as f64,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbScore {
    pub weighted: f64,
    #[serde(rename = "macro")]
    pub macro_avg: f64,
    pub classes: Vec<ClassAccuracy>,
    pub hyperparams: Option<ProbeHyperparams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRbScore {
    pub weighted: f64,
    #[serde(rename = "macro")]
    pub macro_avg: f64,
    pub src: RbScore,
    pub dst: RbScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbReport {
    pub node_rb: f64,
    pub node_rb_macro: f64,
    pub link_rb: Option<f64>,
    pub link_rb_macro: Option<f64>,
    pub node: RbScore,
    pub link: Option<LinkRbScore>,
    pub seed: u64,
}

/// Train on `train` rows, score on `test` rows, per class.
fn probe_score(
    x: ArrayView2<f64>,
    y: &[usize],
    num_classes: usize,
    train: &[usize],
    test: &[usize],
    probe: &dyn Probe,
    seed: u64,
) -> Result<RbScore> {
    let present: Vec<bool> = (0..num_classes).map(|c| y.contains(&c)).collect();
    for (c, &p) in present.iter().enumerate() {
        if p && !test.iter().any(|&i| y[i] == c) {
            return Err(Error::ClassAbsentFromTest { class: c });
        }
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::SingleClassLabels);
    }
    let train_y: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let test_y: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    let fit = probe.fit_predict(
        select_rows(x, train).view(),
        &train_y,
        num_classes,
        select_rows(x, test).view(),
        seed,
    )?;
    let classes = per_class_accuracy(&test_y, &fit.predictions, num_classes)?;
    Ok(RbScore {
        weighted: weighted_rb(&classes),
        macro_avg: macro_rb(&classes),
        classes,
        hyperparams: fit.hyperparams,
    })
}

fn check_rows(z: &EmbeddingMatrix, s: &SensitiveAttributes) -> Result<()> {
    if z.rows() != s.len() {
        return Err(Error::LengthMismatch {
            expected: s.len(),
            found: z.rows(),
        });
    }
    Ok(())
}

/// Node RB on a stratified 70/30 split of the nodes.
pub fn node_rb(z: &EmbeddingMatrix, s: &SensitiveAttributes, probe: &dyn Probe, seed: u64) -> Result<RbScore> {
    check_rows(z, s)?;
    let (train, test) = stratified_split(s.values(), TEST_FRACTION, seed);
    probe_score(z.as_array().view(), s.values(), s.num_classes(), &train, &test, probe, seed)
}

/// Link RB over `edges`, oriented `(min id, max id)`. Edges are split
/// stratified on the (source, destination) attribute pair; each endpoint
/// attribute is predicted by its own probe from `[z_src, z_dst]`.
pub fn link_rb(
    z: &EmbeddingMatrix,
    edges: &[Edge],
    s: &SensitiveAttributes,
    probe: &dyn Probe,
    seed: u64,
) -> Result<LinkRbScore> {
    check_rows(z, s)?;
    if edges.is_empty() {
        return Err(Error::Empty("edges for link RB".into()));
    }
    let edges: Vec<Edge> = edges.iter().map(|&(a, b)| canonical(a, b)).collect();
    let x = edge_features(z, &edges, EdgeFeatureMode::Concat)?;
    let k = s.num_classes();
    let src_y: Vec<usize> = edges.iter().map(|&(a, _)| s.get(a)).collect();
    let dst_y: Vec<usize> = edges.iter().map(|&(_, b)| s.get(b)).collect();
    let strata: Vec<usize> = src_y.iter().zip(&dst_y).map(|(&a, &b)| a * k + b).collect();
    let (train, test) = stratified_split(&strata, TEST_FRACTION, seed);
    let src = probe_score(x.view(), &src_y, k, &train, &test, probe, seed)?;
    let dst = probe_score(x.view(), &dst_y, k, &train, &test, probe, seed)?;
    Ok(LinkRbScore {
        weighted: link_rb_from_parts(&src.classes, &dst.classes),
        macro_avg: 0.5 * (src.macro_avg + dst.macro_avg),
        src,
        dst,
    })
}

/// Node RB and, when `edges` is given, link RB.
pub fn rb_report(
    z: &EmbeddingMatrix,
    edges: Option<&[Edge]>,
    s: &SensitiveAttributes,
    probe: &dyn Probe,
    seed: u64,
) -> Result<RbReport> {
    let node = node_rb(z, s, probe, seed)?;
    let link = edges.map(|e| link_rb(z, e, s, probe, seed)).transpose()?;
    Ok(RbReport {
        node_rb: node.weighted,
        node_rb_macro: node.macro_avg,
        link_rb: link.as_ref().map(|l| l.weighted),
        link_rb_macro: link.as_ref().map(|l| l.macro_avg),
        node,
        link,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn separable(n: usize, k: usize, seed: u64) -> (EmbeddingMatrix, SensitiveAttributes) {
        let mut r = rng::seeded(seed);
        let values: Vec<usize> = (0..n).map(|i| i % k).collect();
        let z = Array2::from_shape_fn((n, k + 2), |(i, j)| {
            let signal = if j == values[i] { 5.0 } else { 0.0 };
            signal + r.random_range(-0.5..0.5)
        });
        (EmbeddingMatrix::new(z), SensitiveAttributes::new(values, k).unwrap())
    }

    #[test]
    fn constant_probe_scores_its_class_weight() {
        let s = SensitiveAttributes::new((0..40).map(|i| i % 2).collect(), 2).unwrap();
        let z = EmbeddingMatrix::new(Array2::zeros((40, 3)));
        let rb = node_rb(&z, &s, &ConstantProbe(0), 0).unwrap();
        assert_eq!(rb.weighted, 0.5);
        assert_eq!(rb.macro_avg, 0.5);
    }

    #[test]
    fn constant_probe_unbalanced() {
        let values: Vec<usize> = (0..100).map(|i| usize::from(i % 4 == 0)).collect();
        let s = SensitiveAttributes::new(values, 2).unwrap();
        let z = EmbeddingMatrix::new(Array2::zeros((100, 2)));
        let rb = node_rb(&z, &s, &ConstantProbe(0), 3).unwrap();
        let (_, test) = stratified_split(s.values(), TEST_FRACTION, 3);
        let zeros = test.iter().filter(|&&i| s.get(i) == 0).count();
        assert_eq!(rb.weighted, zeros as f64 / test.len() as f64);
        assert_eq!(rb.macro_avg, 0.5);
    }

    #[test]
    fn separable_embeddings_score_one() {
        let (z, s) = separable(90, 3, 1);
        let rb = node_rb(&z, &s, &LogisticProbe::default(), 0).unwrap();
        assert_eq!(rb.weighted, 1.0);
        assert!(rb.hyperparams.is_some());
        let edges: Vec<Edge> = (0..89).map(|i| (i, i + 1)).chain((0..80).map(|i| (i, i + 7))).collect();
        let link = link_rb(&z, &edges, &s, &LogisticProbe::default(), 0).unwrap();
        assert_eq!(link.weighted, 1.0);
    }

    #[test]
    fn weighted_formula_by_hand() {
        let classes = [
            ClassAccuracy { class: 0, count: 3, accuracy: 0.2 },
            ClassAccuracy { class: 2, count: 7, accuracy: 0.9 },
        ];
        assert!((weighted_rb(&classes) - (0.3 * 0.2 + 0.7 * 0.9)).abs() < 1e-15);
        assert!((macro_rb(&classes) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn stratified_split_keeps_every_class_on_both_sides() {
        let strata: Vec<usize> = (0..50).map(|i| if i < 2 { 1 } else { 0 }).collect();
        let (train, test) = stratified_split(&strata, 0.3, 5);
        assert_eq!(train.len() + test.len(), 50);
        assert!(test.contains(&0) || test.contains(&1));
        assert!(train.contains(&0) || train.contains(&1));
        assert_eq!(test.len(), 15);
    }

    #[test]
    fn singleton_class_is_absent_from_test() {
        let mut values = vec![0usize; 30];
        values[29] = 1;
        let s = SensitiveAttributes::new(values, 2).unwrap();
        let z = EmbeddingMatrix::new(Array2::zeros((30, 2)));
        let err = node_rb(&z, &s, &ConstantProbe(0), 0).unwrap_err();
        assert!(matches!(err, Error::ClassAbsentFromTest { class: 1 }));
    }

    #[test]
    fn row_count_mismatch() {
        let (z, _) = separable(10, 2, 0);
        let s = SensitiveAttributes::new(vec![0, 1, 0], 2).unwrap();
        assert!(node_rb(&z, &s, &ConstantProbe(0), 0).is_err());
    }

    #[test]
    fn report_is_deterministic() {
        let (z, s) = separable(40, 2, 2);
        let edges: Vec<Edge> = (0..39).map(|i| (i, i + 1)).collect();
        let a = rb_report(&z, Some(&edges), &s, &LogisticProbe::default(), 4).unwrap();
        let b = rb_report(&z, Some(&edges), &s, &LogisticProbe::default(), 4).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
