use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{self, tag};

/// Random-walk and skip-gram hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    /// Nodes per walk, root included.
    pub walk_length: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    /// Training passes, one fresh graph copy and walk corpus each.
    pub epochs: usize,
    pub lr: f64,
    pub dim: usize,
    /// Context nodes following the center within a walk.
    pub window: usize,
    pub negatives: usize,
    /// Walks per optimizer step.
    pub batch_walks: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 30,
            p: 1.0,
            q: 1.0,
            epochs: 50,
            lr: 0.01,
            dim: 128,
            window: 10,
            negatives: 5,
            batch_walks: 128,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("walks_per_node", self.walks_per_node),
            ("walk_length", self.walk_length),
            ("window", self.window),
            ("negatives", self.negatives),
            ("batch_walks", self.batch_walks),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.dim < 2 {
            return Err(Error::InvalidParameter("dim must be at least 2".into()));
        }
        if !(self.p > 0.0 && self.q > 0.0 && self.lr > 0.0) {
            return Err(Error::InvalidParameter(
                "p, q and lr must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
    pub batch: u64,
}

impl WalkCorpus {
    /// Occurrences of each node across all walks.
    pub fn node_counts(&self, n: usize) -> Vec<usize> {
        let mut counts = vec![0; n];
        for w in &self.walks {
            for &v in w {
                counts[v] += 1;
            }
        }
        counts
    }
}

/// Second-order biased walks, `walks_per_node` rooted at every node. Each
/// root draws from its own substream, so roots can be walked in any order.
pub fn generate_walks(g: &Graph, cfg: &WalkConfig, seed: u64) -> Result<WalkCorpus> {
    cfg.validate()?;
    if g.n() == 0 {
        return Err(Error::Empty("graph has no nodes".into()));
    }
    let mut walks = Vec::with_capacity(g.n() * cfg.walks_per_node);
    for root in 0..g.n() {
        let mut rng = rng::substream(seed, tag::WALKS, root as u64);
        for _ in 0..cfg.walks_per_node {
            walks.push(walk_from(g, root, cfg, &mut rng));
        }
    }
    Ok(WalkCorpus { walks, batch: 0 })
}

fn walk_from(g: &Graph, root: usize, cfg: &WalkConfig, rng: &mut rng::Rng) -> Vec<usize> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(root);
    let unbiased = cfg.p == 1.0 && cfg.q == 1.0;
    let mut weights = Vec::new();
    while walk.len() < cfg.walk_length {
        let cur = *walk.last().unwrap();
        let nb = g.neighbors(cur);
        if nb.is_empty() {
            break;
        }
        let next = if unbiased || walk.len() == 1 {
            nb[rng.random_range(0..nb.len())]
        } else {
            let prev = walk[walk.len() - 2];
            weights.clear();
            weights.extend(nb.iter().map(|&x| transition_weight(g, prev, x, cfg)));
            nb[sample_index(&weights, rng)]
        };
        walk.push(next);
    }
    walk
}

/// Unnormalized weight of stepping to `next` after arriving from `prev`.
pub(crate) fn transition_weight(g: &Graph, prev: usize, next: usize, cfg: &WalkConfig) -> f64 {
    if next == prev {
        1.0 / cfg.p
    } else if g.has_edge(next, prev) {
        1.0
    } else {
        1.0 / cfg.q
    }
}

fn sample_index(weights: &[f64], rng: &mut rng::Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sbm_generate;

    #[test]
    fn counts_and_lengths() {
        let (g, _) = sbm_generate(&[20, 20], 0.3, 0.05, 0).unwrap();
        let cfg = WalkConfig::default();
        let c = generate_walks(&g, &cfg, 1).unwrap();
        assert_eq!(c.walks.len(), 10 * g.n());
        assert!(c.walks.iter().all(|w| !w.is_empty() && w.len() <= 30));
        for (k, w) in c.walks.iter().enumerate() {
            assert_eq!(w[0], k / cfg.walks_per_node);
        }
    }

    #[test]
    fn consecutive_nodes_are_adjacent() {
        let (g, _) = sbm_generate(&[8, 8], 0.4, 0.1, 3).unwrap();
        let cfg = WalkConfig {
            p: 0.5,
            q: 2.0,
            ..WalkConfig::default()
        };
        let c = generate_walks(&g, &cfg, 2).unwrap();
        for w in &c.walks {
            for pair in w.windows(2) {
                assert!(g.has_edge(pair[0], pair[1]));
            }
        }
    }

    #[test]
    fn isolated_nodes_give_singletons() {
        let g = Graph::from_edges(4, [(0, 1)]).unwrap();
        let c = generate_walks(&g, &WalkConfig::default(), 0).unwrap();
        for w in &c.walks {
            if w[0] >= 2 {
                assert_eq!(w.len(), 1);
            } else {
                assert_eq!(w.len(), 30);
            }
        }
    }

    #[test]
    fn deterministic() {
        let (g, _) = sbm_generate(&[10, 10], 0.4, 0.1, 3).unwrap();
        let cfg = WalkConfig {
            p: 0.25,
            q: 4.0,
            ..WalkConfig::default()
        };
        assert_eq!(
            generate_walks(&g, &cfg, 5).unwrap(),
            generate_walks(&g, &cfg, 5).unwrap()
        );
        assert_ne!(
            generate_walks(&g, &cfg, 5).unwrap(),
            generate_walks(&g, &cfg, 6).unwrap()
        );
    }

    #[test]
    fn rejects_bad_config() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let cfg = WalkConfig {
            q: 0.0,
            ..WalkConfig::default()
        };
        assert!(generate_walks(&g, &cfg, 0).is_err());
        assert!(generate_walks(&Graph::empty(0), &WalkConfig::default(), 0).is_err());
    }
}
