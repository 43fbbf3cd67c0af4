//! FairDrop: biased edge dropout against sensitive-attribute homophily.
//!
//! Each training epoch sees a random copy of the graph built in three steps:
//!
//! 1. [`homophily_mask`] marks every edge whose endpoints carry different
//!    attribute values (heterophilous edges get bit 1);
//! 2. [`randomized_response`] keeps each bit with probability `1/2 + δ` and
//!    flips it otherwise;
//! 3. [`apply_drop`] keeps exactly the edges whose perturbed bit is 1.
//!
//! Heterophilous edges therefore survive with probability `1/2 + δ` and
//! homophilous ones with `1/2 - δ`. `δ = 0` is unbiased dropout at rate 1/2;
//! `δ = 1/2` deterministically keeps only the heterophilous edges.
//!
//! There is one mask bit per undirected edge, so both directions of an edge
//! are always kept or dropped together.

use std::borrow::Cow;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, SensitiveAttributes};
use crate::rng::{self, tag};

/// One bit per undirected edge, aligned with [`Graph::edges`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    bits: Vec<bool>,
}

impl EdgeMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn ones(len: usize) -> Self {
        Self::new(vec![true; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![false; len])
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

pub fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=0.5).contains(&delta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "delta {delta} outside [0, 1/2]"
        )))
    }
}

/// Bit `k` is 1 iff the endpoints of edge `k` have different attributes.
pub fn homophily_mask(g: &Graph, s: &SensitiveAttributes) -> Result<EdgeMask> {
    s.check_len(g.n())?;
    Ok(EdgeMask::new(
        g.edges()
            .iter()
            .map(|&(i, j)| s.get(i) != s.get(j))
            .collect(),
    ))
}

pub fn randomized_response(m: &EdgeMask, delta: f64, seed: u64) -> Result<EdgeMask> {
    randomized_response_with(m, delta, &mut rng::seeded(seed))
}

/// Keeps each bit with probability `1/2 + delta`, flips it otherwise.
pub fn randomized_response_with<R: Rng + ?Sized>(
    m: &EdgeMask,
    delta: f64,
    rng: &mut R,
) -> Result<EdgeMask> {
    check_delta(delta)?;
    let keep = 0.5 + delta;
    Ok(EdgeMask::new(
        m.bits
            .iter()
            .map(|&b| if rng.random::<f64>() < keep { b } else { !b })
            .collect(),
    ))
}

/// Hadamard product of the adjacency with the mask.
pub fn apply_drop(g: &Graph, mask: &EdgeMask) -> Result<Graph> {
    if mask.len() != g.edge_count() {
        return Err(Error::LengthMismatch {
            expected: g.edge_count(),
            found: mask.len(),
        });
    }
    Ok(g.filter_edges(|k| mask.bits[k]))
}

/// Which attribute set drives the mask at each epoch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum AttributeSchedule {
    /// Epoch `e` uses set `e mod k`.
    #[default]
    RoundRobin,
    /// Epoch `e` uses set `schedule[e mod len]`.
    Sequence(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairDropConfig {
    pub delta: f64,
    pub seed: u64,
    pub schedule: AttributeSchedule,
}

impl FairDropConfig {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            delta,
            seed,
            schedule: AttributeSchedule::RoundRobin,
        })
    }

    pub fn with_schedule(mut self, schedule: AttributeSchedule) -> Self {
        self.schedule = schedule;
        self
    }
}

/// FairDrop sampler over a fixed graph and one or more attribute sets.
/// Masks are computed once; each epoch only redraws the randomized response.
#[derive(Debug, Clone)]
pub struct FairDrop<'g> {
    graph: &'g Graph,
    masks: Vec<EdgeMask>,
    cfg: FairDropConfig,
}

impl<'g> FairDrop<'g> {
    pub fn new(
        graph: &'g Graph,
        attribute_sets: &[SensitiveAttributes],
        cfg: FairDropConfig,
    ) -> Result<Self> {
        check_delta(cfg.delta)?;
        if attribute_sets.is_empty() {
            return Err(Error::Empty("attribute sets".into()));
        }
        if let AttributeSchedule::Sequence(seq) = &cfg.schedule {
            if seq.is_empty() {
                return Err(Error::Empty("attribute schedule".into()));
            }
            if let Some(&bad) = seq.iter().find(|&&k| k >= attribute_sets.len()) {
                return Err(Error::InvalidParameter(format!(
                    "schedule references attribute set {bad}, only {} supplied",
                    attribute_sets.len()
                )));
            }
        }
        let masks = attribute_sets
            .iter()
            .map(|s| homophily_mask(graph, s))
            .collect::<Result<_>>()?;
        Ok(Self { graph, masks, cfg })
    }

    pub fn config(&self) -> &FairDropConfig {
        &self.cfg
    }

    pub fn attribute_set_for_epoch(&self, epoch: u64) -> usize {
        match &self.cfg.schedule {
            AttributeSchedule::RoundRobin => (epoch % self.masks.len() as u64) as usize,
            AttributeSchedule::Sequence(seq) => seq[(epoch % seq.len() as u64) as usize],
        }
    }

    pub fn homophily_mask(&self, set: usize) -> &EdgeMask {
        &self.masks[set]
    }

    /// Randomized mask for `epoch`, drawn from the epoch's own substream.
    pub fn epoch_mask(&self, epoch: u64) -> EdgeMask {
        let mask = &self.masks[self.attribute_set_for_epoch(epoch)];
        let mut rng = rng::substream(self.cfg.seed, tag::FAIRDROP, epoch);
        randomized_response_with(mask, self.cfg.delta, &mut rng)
            .expect("delta validated at construction")
    }

    pub fn epoch_graph(&self, epoch: u64) -> Graph {
        let mask = self.epoch_mask(epoch);
        apply_drop(self.graph, &mask).expect("mask aligned with graph")
    }
}

/// Fair random copy of `g` for `epoch` (single attribute set).
pub fn fair_epoch_graph(
    g: &Graph,
    s: &SensitiveAttributes,
    cfg: &FairDropConfig,
    epoch: u64,
) -> Result<Graph> {
    let sampler = FairDrop::new(g, std::slice::from_ref(s), cfg.clone())?;
    Ok(sampler.epoch_graph(epoch))
}

/// Unbiased edge dropout: every edge independently dropped with probability `p`.
pub fn edge_dropout(g: &Graph, p: f64, seed: u64, epoch: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "dropout probability {p} outside [0, 1]"
        )));
    }
    let mut rng = rng::substream(seed, tag::EDGEDROP, epoch);
    Ok(g.filter_edges(|_| rng.random::<f64>() >= p))
}

/// Graph augmentation applied per training epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DropoutMode {
    None,
    /// Unbiased dropout with rate `p`.
    EdgeDrop { p: f64 },
    FairDrop { delta: f64 },
}

impl DropoutMode {
    pub fn name(&self) -> &'static str {
        match self {
            DropoutMode::None => "none",
            DropoutMode::EdgeDrop { .. } => "edgedrop",
            DropoutMode::FairDrop { .. } => "fairdrop",
        }
    }
}

/// Produces the per-epoch graph copies for a dropout mode.
#[derive(Debug, Clone)]
pub struct EpochGraphs<'g> {
    graph: &'g Graph,
    mode: DropoutMode,
    seed: u64,
    fair: Option<FairDrop<'g>>,
}

impl<'g> EpochGraphs<'g> {
    pub fn new(
        graph: &'g Graph,
        attrs: &SensitiveAttributes,
        mode: DropoutMode,
        seed: u64,
    ) -> Result<Self> {
        let fair = match mode {
            DropoutMode::FairDrop { delta } => Some(FairDrop::new(
                graph,
                std::slice::from_ref(attrs),
                FairDropConfig::new(delta, seed)?,
            )?),
            DropoutMode::EdgeDrop { p } if !(0.0..=1.0).contains(&p) => {
                return Err(Error::InvalidParameter(format!(
                    "dropout probability {p} outside [0, 1]"
                )))
            }
            _ => None,
        };
        Ok(Self {
            graph,
            mode,
            seed,
            fair,
        })
    }

    pub fn graph(&self, epoch: u64) -> Cow<'g, Graph> {
        match (self.mode, &self.fair) {
            (DropoutMode::FairDrop { .. }, Some(f)) => Cow::Owned(f.epoch_graph(epoch)),
            (DropoutMode::EdgeDrop { p }, _) => Cow::Owned(
                edge_dropout(self.graph, p, self.seed, epoch).expect("p validated"),
            ),
            _ => Cow::Borrowed(self.graph),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sbm_generate;

    fn path_graph() -> (Graph, SensitiveAttributes) {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let s = SensitiveAttributes::new(vec![0, 0, 1, 1], 2).unwrap();
        (g, s)
    }

    #[test]
    fn mask_marks_heterophilous_edges() {
        let (g, s) = path_graph();
        assert_eq!(homophily_mask(&g, &s).unwrap().bits(), &[false, true, false]);
    }

    #[test]
    fn single_attribute_value_gives_zero_mask() {
        let (g, _) = sbm_generate(&[20], 0.3, 0.3, 1).unwrap();
        let s = SensitiveAttributes::new(vec![0; 20], 1).unwrap();
        assert_eq!(homophily_mask(&g, &s).unwrap().count_ones(), 0);
    }

    #[test]
    fn pure_inter_block_graph_gives_all_ones() {
        let (g, s) = sbm_generate(&[10, 10, 10], 0.0, 0.0, 2).unwrap();
        assert_eq!(g.edge_count(), 0);
        let bipartite = Graph::from_edges(30, (0..10).flat_map(|a| (10..30).map(move |b| (a, b))))
            .unwrap();
        let m = homophily_mask(&bipartite, &s).unwrap();
        assert_eq!(m.count_ones(), m.len());
    }

    #[test]
    fn mask_length_checked() {
        let (g, _) = path_graph();
        let short = SensitiveAttributes::new(vec![0, 1], 2).unwrap();
        assert!(homophily_mask(&g, &short).is_err());
        assert!(apply_drop(&g, &EdgeMask::ones(2)).is_err());
    }

    #[test]
    fn delta_half_is_identity() {
        let bits: Vec<bool> = (0..1000).map(|k| k % 3 == 0).collect();
        let m = EdgeMask::new(bits);
        assert_eq!(randomized_response(&m, 0.5, 99).unwrap(), m);
    }

    #[test]
    fn delta_out_of_range() {
        let m = EdgeMask::ones(3);
        assert!(randomized_response(&m, -0.1, 0).is_err());
        assert!(randomized_response(&m, 0.51, 0).is_err());
        assert!(FairDropConfig::new(0.7, 0).is_err());
    }

    #[test]
    fn apply_drop_definition() {
        let (g, _) = path_graph();
        assert_eq!(apply_drop(&g, &EdgeMask::ones(3)).unwrap(), g);
        let empty = apply_drop(&g, &EdgeMask::zeros(3)).unwrap();
        assert_eq!(empty.edge_count(), 0);
        assert_eq!(empty.n(), 4);
        let kept = apply_drop(&g, &EdgeMask::new(vec![true, false, true])).unwrap();
        assert_eq!(kept.edges(), &[(0, 1), (2, 3)]);
        assert!(kept.has_edge(1, 0) && kept.has_edge(0, 1));
        assert!(!kept.has_edge(2, 1) && !kept.has_edge(1, 2));
    }

    #[test]
    fn delta_half_keeps_exactly_heterophilous_edges() {
        let (g, s) = sbm_generate(&[15, 15, 10], 0.4, 0.1, 8).unwrap();
        let cfg = FairDropConfig::new(0.5, 3).unwrap();
        let mask = homophily_mask(&g, &s).unwrap();
        let expected = apply_drop(&g, &mask).unwrap();
        for epoch in 0..5 {
            assert_eq!(fair_epoch_graph(&g, &s, &cfg, epoch).unwrap(), expected);
        }
    }

    #[test]
    fn epochs_reproduce_and_differ() {
        let (g, s) = sbm_generate(&[20, 20], 0.3, 0.05, 1).unwrap();
        let cfg = FairDropConfig::new(0.25, 17).unwrap();
        let a0 = fair_epoch_graph(&g, &s, &cfg, 0).unwrap();
        let b0 = fair_epoch_graph(&g, &s, &cfg, 0).unwrap();
        let a1 = fair_epoch_graph(&g, &s, &cfg, 1).unwrap();
        assert_eq!(a0, b0);
        assert_ne!(a0, a1);
    }

    #[test]
    fn alternating_schedule_uses_each_attribute_set() {
        let (g, s0) = path_graph();
        let s1 = SensitiveAttributes::new(vec![0, 1, 1, 0], 2).unwrap();
        let cfg = FairDropConfig::new(0.5, 0).unwrap();
        let fd = FairDrop::new(&g, &[s0.clone(), s1.clone()], cfg.clone()).unwrap();
        assert_eq!(fd.attribute_set_for_epoch(0), 0);
        assert_eq!(fd.attribute_set_for_epoch(1), 1);
        assert_eq!(fd.epoch_graph(0).edges(), &[(1, 2)]);
        assert_eq!(fd.epoch_graph(1).edges(), &[(0, 1), (2, 3)]);

        let seq = cfg.with_schedule(AttributeSchedule::Sequence(vec![1, 1, 0]));
        let fd = FairDrop::new(&g, &[s0, s1], seq).unwrap();
        let used: Vec<usize> = (0..6).map(|e| fd.attribute_set_for_epoch(e)).collect();
        assert_eq!(used, vec![1, 1, 0, 1, 1, 0]);
    }

    #[test]
    fn bad_schedule_rejected() {
        let (g, s) = path_graph();
        let cfg = FairDropConfig::new(0.2, 0)
            .unwrap()
            .with_schedule(AttributeSchedule::Sequence(vec![0, 2]));
        assert!(FairDrop::new(&g, &[s.clone(), s], cfg).is_err());
    }

    #[test]
    fn edge_dropout_extremes() {
        let (g, s) = sbm_generate(&[10, 10], 0.5, 0.1, 0).unwrap();
        assert_eq!(edge_dropout(&g, 0.0, 1, 0).unwrap(), g);
        assert_eq!(edge_dropout(&g, 1.0, 1, 0).unwrap().edge_count(), 0);
        let none = EpochGraphs::new(&g, &s, DropoutMode::None, 0).unwrap();
        assert_eq!(*none.graph(3), g);
    }
}
