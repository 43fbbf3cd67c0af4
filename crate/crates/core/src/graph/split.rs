use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{canonical, Edge, Graph};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Train/test partition of the positive edges plus sampled non-edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEdges {
    pub train_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub train_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
    pub seed: u64,
}

/// Splits `g`'s edges into train/test positives and draws the same number of
/// negatives per split, uniformly without replacement from the non-edges of
/// the whole graph.
pub fn split_edges(g: &Graph, test_fraction: f64, seed: u64) -> Result<SplitEdges> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let e = g.edge_count();
    if e < 10 {
        return Err(Error::GraphTooSmall(format!(
            "{e} edges; splitting needs at least 10"
        )));
    }
    let n_test = (e as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == e {
        return Err(Error::GraphTooSmall(format!(
            "fraction {test_fraction} of {e} edges leaves an empty split"
        )));
    }

    let mut rng = rng::substream(seed, tag::SPLIT, 0);
    let mut order: Vec<usize> = (0..e).collect();
    order.shuffle(&mut rng);
    let mut test_pos: Vec<Edge> = order[..n_test].iter().map(|&k| g.edges()[k]).collect();
    let mut train_pos: Vec<Edge> = order[n_test..].iter().map(|&k| g.edges()[k]).collect();
    test_pos.sort_unstable();
    train_pos.sort_unstable();

    let n = g.n() as u128;
    let non_edges = (n * n.saturating_sub(1) / 2) as usize - e;
    if non_edges < e {
        return Err(Error::GraphTooSmall(format!(
            "{non_edges} non-edges cannot supply {e} negatives"
        )));
    }
    let mut negatives = sample_non_edges(g, e, non_edges, &mut rng);
    let test_neg = negatives.split_off(e - n_test);
    Ok(SplitEdges {
        train_pos,
        test_pos,
        train_neg: negatives,
        test_neg,
        seed,
    })
}

fn sample_non_edges(g: &Graph, count: usize, available: usize, rng: &mut rng::Rng) -> Vec<Edge> {
    if count * 2 > available {
        let mut all: Vec<Edge> = (0..g.n())
            .flat_map(|a| (a + 1..g.n()).map(move |b| (a, b)))
            .filter(|&(a, b)| !g.has_edge(a, b))
            .collect();
        let (chosen, _) = all.partial_shuffle(rng, count);
        return chosen.to_vec();
    }
    let n = g.n();
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || g.has_edge(a, b) {
            continue;
        }
        let pair = canonical(a, b);
        if seen.insert(pair) {
            out.push(pair);
        }
    }
    out
}
