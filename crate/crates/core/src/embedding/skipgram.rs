use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{EmbeddingMatrix, WalkConfig, WalkCorpus};
use crate::error::{Error, Result};
use crate::learners::{Adam, AdamConfig};
use crate::rng::{self, tag};

/// One positive (center, context) pair with its negative nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SgnsSample {
    pub center: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)`
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Adds `scale * ∂loss/∂·` for one sample into the gradient buffers and
/// returns the sample loss.
fn accumulate(
    sample: &SgnsSample,
    dim: usize,
    input: &[f64],
    context: &[f64],
    grad_in: &mut [f64],
    grad_ctx: &mut [f64],
    scale: f64,
) -> f64 {
    let row = |v: usize| v * dim..(v + 1) * dim;
    let u = &input[row(sample.center)];
    let mut loss = 0.0;

    let v = &context[row(sample.context)];
    let s = dot(u, v);
    loss += neg_log_sigmoid(s);
    let g = (sigmoid(s) - 1.0) * scale;
    axpy(g, v, &mut grad_in[row(sample.center)]);
    axpy(g, u, &mut grad_ctx[row(sample.context)]);

    for &neg in &sample.negatives {
        let v = &context[row(neg)];
        let s = dot(u, v);
        loss += neg_log_sigmoid(-s);
        let g = sigmoid(s) * scale;
        axpy(g, v, &mut grad_in[row(sample.center)]);
        axpy(g, u, &mut grad_ctx[row(neg)]);
    }
    loss
}

/// Mean SGNS loss over `samples` and its gradients with respect to the input
/// and context matrices.
pub fn sgns_loss_and_grad(
    input: &Array2<f64>,
    context: &Array2<f64>,
    samples: &[SgnsSample],
) -> (f64, Array2<f64>, Array2<f64>) {
    let dim = input.ncols();
    let mut gi = Array2::zeros(input.dim());
    let mut gc = Array2::zeros(context.dim());
    let scale = 1.0 / samples.len().max(1) as f64;
    let (inp, ctx) = (
        input.as_standard_layout(),
        context.as_standard_layout(),
    );
    let mut loss = 0.0;
    for s in samples {
        loss += accumulate(
            s,
            dim,
            inp.as_slice().unwrap(),
            ctx.as_slice().unwrap(),
            gi.as_slice_mut().unwrap(),
            gc.as_slice_mut().unwrap(),
            scale,
        );
    }
    (loss * scale, gi, gc)
}

/// Skip-gram with negative sampling, optimized with row-sparse Adam.
#[derive(Debug, Clone)]
pub struct SkipGram {
    n: usize,
    dim: usize,
    input: Vec<f64>,
    context: Vec<f64>,
    grad_in: Vec<f64>,
    grad_ctx: Vec<f64>,
    adam_in: Adam,
    adam_ctx: Adam,
    cfg: WalkConfig,
    rng: rng::Rng,
}

impl SkipGram {
    /// Input vectors uniform in `[-0.5/d, 0.5/d]`, context vectors zero.
    pub fn new(n: usize, cfg: &WalkConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = cfg.dim;
        let mut init = rng::substream(cfg.seed, tag::SKIPGRAM, 0);
        let bound = 0.5 / dim as f64;
        let input = (0..n * dim)
            .map(|_| init.random_range(-bound..=bound))
            .collect();
        let adam = Adam::new(n * dim, AdamConfig::with_lr(cfg.lr));
        Ok(Self {
            n,
            dim,
            input,
            context: vec![0.0; n * dim],
            grad_in: vec![0.0; n * dim],
            grad_ctx: vec![0.0; n * dim],
            adam_in: adam.clone(),
            adam_ctx: adam,
            cfg: *cfg,
            rng: rng::substream(cfg.seed, tag::SKIPGRAM, 1),
        })
    }

    pub fn embeddings(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            Array2::from_shape_vec((self.n, self.dim), self.input.clone())
                .expect("buffer sized n x dim"),
        )
    }

    pub fn context_vectors(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.n, self.dim), self.context.clone())
            .expect("buffer sized n x dim")
    }

    /// One optimization pass over `corpus`. Negatives follow the corpus
    /// unigram distribution raised to 3/4. Returns the mean sample loss.
    pub fn train_pass(&mut self, corpus: &WalkCorpus) -> Result<f64> {
        let counts = corpus.node_counts(self.n);
        let noise = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)))
            .map_err(|e| Error::Empty(format!("walk corpus: {e}")))?;

        let mut order: Vec<usize> = (0..corpus.walks.len()).collect();
        order.shuffle(&mut self.rng);

        let mut touched_in = vec![false; self.n];
        let mut touched_ctx = vec![false; self.n];
        let mut rows_in = Vec::new();
        let mut rows_ctx = Vec::new();
        let mut samples = Vec::new();
        let (mut total_loss, mut total_samples) = (0.0, 0usize);

        for batch in order.chunks(self.cfg.batch_walks) {
            samples.clear();
            for &w in batch {
                let walk = &corpus.walks[w];
                // forward context only: pairs (walk[i], walk[i + k]), 1 <= k <= window
                for i in 0..walk.len() {
                    for j in i + 1..walk.len().min(i + 1 + self.cfg.window) {
                        let negatives = (0..self.cfg.negatives)
                            .map(|_| noise.sample(&mut self.rng))
                            .collect();
                        samples.push(SgnsSample {
                            center: walk[i],
                            context: walk[j],
                            negatives,
                        });
                    }
                }
            }
            if samples.is_empty() {
                continue;
            }
            let scale = 1.0 / samples.len() as f64;
            for s in &samples {
                total_loss += accumulate(
                    s,
                    self.dim,
                    &self.input,
                    &self.context,
                    &mut self.grad_in,
                    &mut self.grad_ctx,
                    scale,
                );
                mark(&mut touched_in, &mut rows_in, s.center);
                mark(&mut touched_ctx, &mut rows_ctx, s.context);
                for &v in &s.negatives {
                    mark(&mut touched_ctx, &mut rows_ctx, v);
                }
            }
            total_samples += samples.len();
            rows_in.sort_unstable();
            rows_ctx.sort_unstable();
            self.adam_in
                .step_rows(&mut self.input, &self.grad_in, &rows_in, self.dim);
            self.adam_ctx
                .step_rows(&mut self.context, &self.grad_ctx, &rows_ctx, self.dim);
            clear_rows(&mut self.grad_in, &mut touched_in, &mut rows_in, self.dim);
            clear_rows(&mut self.grad_ctx, &mut touched_ctx, &mut rows_ctx, self.dim);
        }
        let mean = if total_samples > 0 {
            total_loss / total_samples as f64
        } else {
            0.0
        };
        if !mean.is_finite() || self.input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("skip-gram parameters".into()));
        }
        Ok(mean)
    }
}

fn mark(touched: &mut [bool], rows: &mut Vec<usize>, v: usize) {
    if !touched[v] {
        touched[v] = true;
        rows.push(v);
    }
}

fn clear_rows(grad: &mut [f64], touched: &mut [bool], rows: &mut Vec<usize>, dim: usize) {
    for &r in rows.iter() {
        grad[r * dim..(r + 1) * dim].fill(0.0);
        touched[r] = false;
    }
    rows.clear();
}
