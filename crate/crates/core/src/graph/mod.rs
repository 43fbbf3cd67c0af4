//! Undirected graphs, node attributes and features.

mod io;
mod sbm;
mod sparse;
mod split;

pub use io::{
    load_attributes, load_dataset, load_features, load_graph, write_attributes, write_edges,
    Dataset,
};
pub use sbm::sbm_generate;
pub use sparse::{normalized_adjacency, CsrMatrix};
pub use split::{split_edges, SplitEdges};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Undirected edge in canonical orientation (`.0 < .1`).
pub type Edge = (usize, usize);

/// Immutable undirected, unweighted graph on nodes `0..n`.
///
/// Edges are stored once, canonicalized and sorted; the CSR adjacency index
/// holds both directions with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Builds a graph from arbitrary-orientation pairs. Duplicates collapse;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn from_edges<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            if a >= n {
                return Err(Error::NodeOutOfRange { id: a, n });
            }
            if b >= n {
                return Err(Error::NodeOutOfRange { id: b, n });
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            edges.push(canonical(a, b));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted_unique(n, edges))
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sorted_unique(n, Vec::new())
    }

    /// `edges` must already be canonical, sorted and duplicate-free.
    pub(crate) fn from_sorted_unique(n: usize, edges: Vec<Edge>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.iter().all(|&(a, b)| a < b && b < n));

        let mut degree = vec![0usize; n];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        for &(a, b) in &edges {
            neighbors[cursor[a]] = b;
            cursor[a] += 1;
            neighbors[cursor[b]] = a;
            cursor[b] += 1;
        }
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self {
            n,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list; masks are aligned to this order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && b < self.n && self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Rebuilds the edge list from the adjacency index.
    pub fn edges_from_adjacency(&self) -> Vec<Edge> {
        (0..self.n)
            .flat_map(|v| {
                self.neighbors(v)
                    .iter()
                    .filter(move |&&u| u > v)
                    .map(move |&u| (v, u))
            })
            .collect()
    }

    /// Keeps the edges whose index satisfies `keep`.
    pub(crate) fn filter_edges(&self, mut keep: impl FnMut(usize) -> bool) -> Graph {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(k, _)| keep(*k))
            .map(|(_, &e)| e)
            .collect();
        Graph::from_sorted_unique(self.n, edges)
    }
}

pub fn canonical(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Per-node categorical sensitive attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensitiveAttributes {
    values: Vec<usize>,
    num_classes: usize,
    labels: Option<Vec<String>>,
}

impl SensitiveAttributes {
    pub fn new(values: Vec<usize>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParameter(
                "attribute must have at least one class".into(),
            ));
        }
        if let Some(&bad) = values.iter().find(|&&v| v >= num_classes) {
            return Err(Error::InvalidParameter(format!(
                "attribute value {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            values,
            num_classes,
            labels: None,
        })
    }

    /// Infers `num_classes` as `max + 1`.
    pub fn from_values(values: Vec<usize>) -> Result<Self> {
        let k = values.iter().max().map_or(1, |m| m + 1);
        Self::new(values, k)
    }

    pub(crate) fn with_labels(mut self, labels: Vec<String>) -> Self {
        debug_assert_eq!(labels.len(), self.num_classes);
        self.labels = Some(labels);
        self
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn get(&self, node: usize) -> usize {
        self.values[node]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// String labels, when the attribute file used them.
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &v in &self.values {
            counts[v] += 1;
        }
        counts
    }

    pub fn empty_classes(&self) -> Vec<usize> {
        self.class_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(k, _)| k)
            .collect()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Node feature matrix. Featureless graphs use the implicit identity.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeFeatures {
    Dense(Array2<f64>),
    Identity(usize),
}

impl NodeFeatures {
    pub fn dense(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("node features".into()));
        }
        Ok(NodeFeatures::Dense(data))
    }

    pub fn rows(&self) -> usize {
        match self {
            NodeFeatures::Dense(x) => x.nrows(),
            NodeFeatures::Identity(n) => *n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NodeFeatures::Dense(x) => x.ncols(),
            NodeFeatures::Identity(n) => *n,
        }
    }

    /// `X · W`
    pub fn project(&self, w: &Array2<f64>) -> Array2<f64> {
        match self {
            NodeFeatures::Dense(x) => x.dot(w),
            NodeFeatures::Identity(_) => w.clone(),
        }
    }

    /// `Xᵀ · G`
    pub fn transpose_project(&self, g: &Array2<f64>) -> Array2<f64> {
        match self {
            NodeFeatures::Dense(x) => x.t().dot(g),
            NodeFeatures::Identity(_) => g.clone(),
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            NodeFeatures::Dense(x) => x.clone(),
            NodeFeatures::Identity(n) => Array2::eye(*n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalizes_and_dedups() {
        let g = Graph::from_edges(3, [(0, 1), (2, 1), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.edges_from_adjacency(), g.edges());
    }

    #[test]
    fn rejects_self_loops_and_range() {
        assert!(matches!(
            Graph::from_edges(3, [(1, 1)]),
            Err(Error::SelfLoop(1))
        ));
        assert!(matches!(
            Graph::from_edges(3, [(0, 3)]),
            Err(Error::NodeOutOfRange { id: 3, n: 3 })
        ));
    }

    #[test]
    fn isolated_nodes_are_kept() {
        let g = Graph::from_edges(5, [(0, 1)]).unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(g.degree(4), 0);
        assert!(g.neighbors(3).is_empty());
    }

    #[test]
    fn attribute_validation() {
        assert!(SensitiveAttributes::new(vec![0, 2], 2).is_err());
        assert!(SensitiveAttributes::new(vec![], 0).is_err());
        let s = SensitiveAttributes::new(vec![0, 0, 2], 4).unwrap();
        assert_eq!(s.class_counts(), vec![2, 0, 1, 0]);
        assert_eq!(s.empty_classes(), vec![1, 3]);
    }

    #[test]
    fn identity_features_project_like_dense() {
        let w = Array2::from_shape_fn((3, 2), |(i, j)| (i * 2 + j) as f64);
        let id = NodeFeatures::Identity(3);
        let dense = NodeFeatures::dense(Array2::eye(3)).unwrap();
        assert_eq!(id.project(&w), dense.project(&w));
        assert_eq!(id.transpose_project(&w), dense.transpose_project(&w));
    }

    #[test]
    fn rejects_non_finite_features() {
        let mut x = Array2::zeros((2, 2));
        x[[1, 1]] = f64::NAN;
        assert!(NodeFeatures::dense(x).is_err());
    }
}
