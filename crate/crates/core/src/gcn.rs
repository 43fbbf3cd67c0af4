//! Two-layer graph-convolutional link predictor.
//!
//! Encoder `Z = Â · ReLU(Â · X · W1) · W2`, decoder `σ(⟨z_i, z_j⟩)`, trained
//! with binary cross-entropy through hand-written backpropagation. `Â` is
//! rebuilt every epoch from that epoch's graph copy (plain, unbiased edge
//! dropout, or FairDrop); only training positives ever enter `Â`.

use std::collections::HashSet;

use ndarray::{Array2, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dyadic::{PredictionBatch, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::fairdrop::{DropoutMode, EpochGraphs};
use crate::graph::{canonical, normalized_adjacency, CsrMatrix, Edge, Graph, NodeFeatures};
use crate::graph::{SensitiveAttributes, SplitEdges};
use crate::learners::{Adam, AdamConfig};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    /// `d x h`
    pub w1: Array2<f64>,
    /// `h x h`
    pub w2: Array2<f64>,
}

impl GcnModel {
    /// Glorot-uniform initialization.
    pub fn new(in_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut r = rng::substream(seed, tag::GCN, 0);
        let mut glorot = |rows: usize, cols: usize| {
            let b = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| r.random_range(-b..b))
        };
        let w1 = glorot(in_dim, hidden);
        let w2 = glorot(hidden, hidden);
        Self { w1, w2 }
    }

    pub fn zeros(in_dim: usize, hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((in_dim, hidden)),
            w2: Array2::zeros((hidden, hidden)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    fn check(&self, x: &NodeFeatures, a: &CsrMatrix) -> Result<()> {
        if x.rows() != a.n() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows for a {}-node operator",
                x.rows(),
                a.n()
            )));
        }
        if x.dim() != self.w1.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "feature dim {} but W1 has {} rows",
                x.dim(),
                self.w1.nrows()
            )));
        }
        if self.w2.nrows() != self.w1.ncols() || !self.w2.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "W1 {:?} incompatible with W2 {:?}",
                self.w1.dim(),
                self.w2.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    #[serde(with = "mode_serde")]
    pub mode: DropoutMode,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.005,
            hidden: 128,
            mode: DropoutMode::None,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

mod mode_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::fairdrop::DropoutMode;

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "kind", rename_all = "lowercase")]
    enum Repr {
        None,
        Edgedrop { p: f64 },
        Fairdrop { delta: f64 },
    }

    pub fn serialize<S: Serializer>(m: &DropoutMode, s: S) -> Result<S::Ok, S::Error> {
        match *m {
            DropoutMode::None => Repr::None,
            DropoutMode::EdgeDrop { p } => Repr::Edgedrop { p },
            DropoutMode::FairDrop { delta } => Repr::Fairdrop { delta },
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DropoutMode, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::None => DropoutMode::None,
            Repr::Edgedrop { p } => DropoutMode::EdgeDrop { p },
            Repr::Fairdrop { delta } => DropoutMode::FairDrop { delta },
        })
    }
}

struct Forward {
    pre: Array2<f64>,
    hidden: Array2<f64>,
    z: Array2<f64>,
}

fn forward(x: &NodeFeatures, a: &CsrMatrix, model: &GcnModel) -> Result<Forward> {
    model.check(x, a)?;
    let pre = a.mul_dense(&x.project(&model.w1))?;
    let hidden = pre.mapv(|v| v.max(0.0));
    let z = a.mul_dense(&hidden.dot(&model.w2))?;
    Ok(Forward { pre, hidden, z })
}

/// `Z = Â · ReLU(Â · X · W1) · W2`
pub fn gcn_forward(x: &NodeFeatures, a: &CsrMatrix, model: &GcnModel) -> Result<Array2<f64>> {
    if let NodeFeatures::Dense(d) = x {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("node features".into()));
        }
    }
    let z = forward(x, a, model)?.z;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("encoder output".into()));
    }
    Ok(z)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_pairs(n: usize, pairs: &[Edge]) -> Result<()> {
    for &(i, j) in pairs {
        for v in [i, j] {
            if v >= n {
                return Err(Error::NodeOutOfRange { id: v, n });
            }
        }
    }
    Ok(())
}

fn logit(z: &Array2<f64>, i: usize, j: usize) -> f64 {
    z.row(i).dot(&z.row(j))
}

/// `σ(⟨z_i, z_j⟩)` per pair.
pub fn decode_links(z: &Array2<f64>, pairs: &[Edge]) -> Result<Vec<f64>> {
    check_pairs(z.nrows(), pairs)?;
    Ok(pairs.iter().map(|&(i, j)| sigmoid(logit(z, i, j))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnGrads {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

/// Mean binary cross-entropy over labelled pairs and its gradient.
pub fn link_loss_and_grad(
    x: &NodeFeatures,
    a: &CsrMatrix,
    model: &GcnModel,
    pairs: &[Edge],
    labels: &[bool],
) -> Result<(f64, GcnGrads)> {
    if pairs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: pairs.len(),
            found: labels.len(),
        });
    }
    if pairs.is_empty() {
        return Err(Error::Empty("training pairs".into()));
    }
    check_pairs(a.n(), pairs)?;
    let fw = forward(x, a, model)?;
    let m = pairs.len() as f64;

    let mut loss = 0.0;
    let mut dz = Array2::zeros(fw.z.dim());
    for (&(i, j), &y) in pairs.iter().zip(labels) {
        let s = logit(&fw.z, i, j);
        let y = f64::from(u8::from(y));
        // softplus(s) - y*s
        loss += s.max(0.0) + (-s.abs()).exp().ln_1p() - y * s;
        let g = (sigmoid(s) - y) / m;
        let (zi, zj) = (fw.z.row(i).to_owned(), fw.z.row(j).to_owned());
        dz.row_mut(i).scaled_add(g, &zj);
        dz.row_mut(j).scaled_add(g, &zi);
    }
    loss /= m;

    let dq = a.mul_dense(&dz)?;
    let gw2 = fw.hidden.t().dot(&dq);
    let mut dpre = dq.dot(&model.w2.t());
    // ReLU derivative taken as 0 at 0
    Zip::from(&mut dpre)
        .and(&fw.pre)
        .for_each(|d, &p| {
            if p <= 0.0 {
                *d = 0.0
            }
        });
    let dp = a.mul_dense(&dpre)?;
    let gw1 = x.transpose_project(&dp);
    Ok((loss, GcnGrads { w1: gw1, w2: gw2 }))
}

/// Largest entrywise relative error between analytic gradients and central
/// differences with step `h`. Entries where both magnitudes are below `1e-7`
/// are compared absolutely.
pub fn grad_check(
    model: &GcnModel,
    x: &NodeFeatures,
    a: &CsrMatrix,
    pairs: &[Edge],
    labels: &[bool],
    h: f64,
) -> Result<f64> {
    let (_, grads) = link_loss_and_grad(x, a, model, pairs, labels)?;
    let loss_at = |m: &GcnModel| link_loss_and_grad(x, a, m, pairs, labels).map(|r| r.0);
    let mut worst = 0.0f64;
    for which in 0..2 {
        let shape = if which == 0 { model.w1.dim() } else { model.w2.dim() };
        for idx in ndarray::indices(shape) {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let (p, q) = if which == 0 {
                (&mut plus.w1, &mut minus.w1)
            } else {
                (&mut plus.w2, &mut minus.w2)
            };
            p[idx] += h;
            q[idx] -= h;
            let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
            let analytic = if which == 0 { grads.w1[idx] } else { grads.w2[idx] };
            worst = worst.max(relative_error(analytic, numeric));
        }
    }
    Ok(worst)
}

pub(crate) fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct LinkPredictorRun {
    pub model: GcnModel,
    /// Test positives followed by test negatives; row `k` of `batch`.
    pub test_pairs: Vec<Edge>,
    pub batch: PredictionBatch,
    pub losses: Vec<f64>,
}

/// Trains on `split.train_pos` and scores `split.test_pos ∪ split.test_neg`.
/// Missing features fall back to one-hot identity features.
pub fn train_link_predictor(
    split: &SplitEdges,
    n: usize,
    features: Option<&NodeFeatures>,
    s: &SensitiveAttributes,
    cfg: &TrainConfig,
) -> Result<LinkPredictorRun> {
    if cfg.epochs == 0 || !(cfg.lr > 0.0) || cfg.hidden == 0 {
        return Err(Error::InvalidParameter(
            "epochs, lr and hidden must be positive".into(),
        ));
    }
    s.check_len(n)?;
    let identity = NodeFeatures::Identity(n);
    let x = features.unwrap_or(&identity);
    if x.rows() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: x.rows(),
        });
    }

    let train_graph = Graph::from_edges(n, split.train_pos.iter().copied())?;
    let copies = EpochGraphs::new(&train_graph, s, cfg.mode, cfg.seed)?;
    let fixed_operator = matches!(cfg.mode, DropoutMode::None).then(|| normalized_adjacency(&train_graph));

    let mut model = GcnModel::new(x.dim(), cfg.hidden, cfg.seed);
    let mut adam1 = Adam::new(model.w1.len(), AdamConfig::with_lr(cfg.lr));
    let mut adam2 = Adam::new(model.w2.len(), AdamConfig::with_lr(cfg.lr));

    let positives = &split.train_pos;
    let mut pairs: Vec<Edge> = Vec::with_capacity(2 * positives.len());
    let mut labels = Vec::with_capacity(2 * positives.len());
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs as u64 {
        let epoch_op;
        let op = match &fixed_operator {
            Some(op) => op,
            None => {
                epoch_op = normalized_adjacency(&copies.graph(epoch));
                &epoch_op
            }
        };

        pairs.clear();
        labels.clear();
        pairs.extend_from_slice(positives);
        labels.resize(positives.len(), true);
        let mut neg_rng = rng::substream(cfg.seed, tag::NEGATIVES, epoch);
        pairs.extend(sample_negatives(&train_graph, positives.len(), &mut neg_rng));
        labels.resize(pairs.len(), false);

        let (loss, grads) = link_loss_and_grad(x, op, &model, &pairs, &labels)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss at epoch {epoch} (previous {:?})",
                losses.last()
            )));
        }
        losses.push(loss);
        adam1.step(
            model.w1.as_slice_mut().expect("standard layout"),
            grads.w1.as_slice().expect("standard layout"),
        );
        adam2.step(
            model.w2.as_slice_mut().expect("standard layout"),
            grads.w2.as_slice().expect("standard layout"),
        );
    }

    // evaluation propagates over every training edge
    let eval_op = normalized_adjacency(&train_graph);
    let z = gcn_forward(x, &eval_op, &model)?;
    let test_pairs: Vec<Edge> = split
        .test_pos
        .iter()
        .chain(&split.test_neg)
        .copied()
        .collect();
    let test_labels: Vec<bool> = (0..test_pairs.len())
        .map(|k| k < split.test_pos.len())
        .collect();
    let scores = decode_links(&z, &test_pairs)?;
    let batch = PredictionBatch::new(scores, test_labels, cfg.threshold)?;
    Ok(LinkPredictorRun {
        model,
        test_pairs,
        batch,
        losses,
    })
}

/// Uniform node pairs that are not training edges.
fn sample_negatives(g: &Graph, count: usize, rng: &mut rng::Rng) -> Vec<Edge> {
    let n = g.n();
    let capacity = n * n.saturating_sub(1) / 2 - g.edge_count();
    let count = count.min(capacity);
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || g.has_edge(a, b) {
            continue;
        }
        let e = canonical(a, b);
        if seen.insert(e) {
            out.push(e);
        }
    }
    out
}
