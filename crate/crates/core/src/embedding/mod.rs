//! Node2Vec-style embeddings trained on FairDrop graph copies.
//!
//! Every training epoch draws a fresh graph copy, generates a walk corpus on
//! it and takes one skip-gram pass over that corpus.

mod skipgram;
mod walks;

pub use skipgram::{sgns_loss_and_grad, SgnsSample, SkipGram};
pub use walks::{generate_walks, WalkConfig, WalkCorpus};

use std::io::{Read, Write};

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::fairdrop::{DropoutMode, EpochGraphs};
use crate::graph::{Edge, Graph, SensitiveAttributes};
use crate::rng::{self, tag};

/// `n x d` node embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix(Array2<f64>);

impl EmbeddingMatrix {
    pub fn new(z: Array2<f64>) -> Self {
        Self(z)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    /// CSV with header `node,z_0,...,z_{d-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["node".to_string()];
        header.extend((0..self.dim()).map(|k| format!("z_{k}")));
        w.write_record(&header)?;
        for (v, row) in self.0.rows().into_iter().enumerate() {
            let mut rec = vec![v.to_string()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let dim = r.headers()?.len().saturating_sub(1);
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(k + 2, |p| p.line() as usize);
            let bad = |reason: String| Error::MalformedLine {
                path: "<embedding csv>".into(),
                line,
                reason,
            };
            let node: usize = rec[0]
                .parse()
                .map_err(|_| bad(format!("`{}` is not a node id", &rec[0])))?;
            let values = rec
                .iter()
                .skip(1)
                .map(|t| t.parse::<f64>().map_err(|e| bad(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            rows.push((node, values));
        }
        let n = rows.len();
        let mut z = Array2::zeros((n, dim));
        let mut seen = vec![false; n];
        for (node, values) in rows {
            if node >= n {
                return Err(Error::NodeOutOfRange { id: node, n });
            }
            if std::mem::replace(&mut seen[node], true) {
                return Err(Error::InvalidParameter(format!("node {node} listed twice")));
            }
            z.row_mut(node).assign(&ndarray::ArrayView1::from(&values));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding file".into()));
        }
        Ok(Self(z))
    }
}

/// Trains on each corpus in turn, one pass per corpus.
pub fn skipgram_train<I>(n: usize, corpora: I, cfg: &WalkConfig) -> Result<EmbeddingMatrix>
where
    I: IntoIterator<Item = WalkCorpus>,
{
    let mut model = SkipGram::new(n, cfg)?;
    let mut passes = 0;
    for corpus in corpora {
        model.train_pass(&corpus)?;
        passes += 1;
    }
    if passes == 0 {
        return Err(Error::Empty("corpus stream".into()));
    }
    Ok(model.embeddings())
}

/// Embeds `g` with one dropout-mode graph copy per training epoch.
/// Zero epochs return the initialization.
pub fn embed(
    g: &Graph,
    s: &SensitiveAttributes,
    mode: DropoutMode,
    cfg: &WalkConfig,
) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    let copies = EpochGraphs::new(g, s, mode, cfg.seed)?;
    let mut model = SkipGram::new(g.n(), cfg)?;
    for epoch in 0..cfg.epochs as u64 {
        let graph = copies.graph(epoch);
        let walk_seed = rng::derive_seed(cfg.seed, tag::WALKS.wrapping_add(epoch));
        let mut corpus = generate_walks(&graph, cfg, walk_seed)?;
        corpus.batch = epoch;
        model.train_pass(&corpus)?;
    }
    Ok(model.embeddings())
}

pub fn embed_with_fairdrop(
    g: &Graph,
    s: &SensitiveAttributes,
    delta: f64,
    cfg: &WalkConfig,
) -> Result<EmbeddingMatrix> {
    embed(g, s, DropoutMode::FairDrop { delta }, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFeatureMode {
    /// `[z_src, z_dst]`
    Concat,
    /// `z_src ⊙ z_dst`
    Hadamard,
}

pub fn edge_features(
    z: &EmbeddingMatrix,
    edges: &[Edge],
    mode: EdgeFeatureMode,
) -> Result<Array2<f64>> {
    let (n, d) = (z.rows(), z.dim());
    for &(a, b) in edges {
        for v in [a, b] {
            if v >= n {
                return Err(Error::NodeOutOfRange { id: v, n });
            }
        }
    }
    let z = z.as_array();
    Ok(match mode {
        EdgeFeatureMode::Concat => {
            let mut out = Array2::zeros((edges.len(), 2 * d));
            for (k, &(a, b)) in edges.iter().enumerate() {
                out.slice_mut(s![k, ..d]).assign(&z.row(a));
                out.slice_mut(s![k, d..]).assign(&z.row(b));
            }
            out
        }
        EdgeFeatureMode::Hadamard => {
            let mut out = Array2::zeros((edges.len(), d));
            for (k, &(a, b)) in edges.iter().enumerate() {
                out.row_mut(k).assign(&(&z.row(a) * &z.row(b)));
            }
            out
        }
    })
}
