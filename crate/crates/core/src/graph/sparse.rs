use ndarray::Array2;

use super::Graph;
use crate::error::{Error, Result};

/// Square sparse matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `self · rhs`
    pub fn mul_dense(&self, rhs: &Array2<f64>) -> Result<Array2<f64>> {
        if rhs.nrows() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "operator is {0}x{0}, right-hand side has {1} rows",
                self.n,
                rhs.nrows()
            )));
        }
        let mut out = Array2::zeros((self.n, rhs.ncols()));
        for i in 0..self.n {
            let mut row = out.row_mut(i);
            for (j, w) in self.row(i) {
                row.scaled_add(w, &rhs.row(j));
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                out[[i, j]] = w;
            }
        }
        out
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the degrees of `A + I`.
pub fn normalized_adjacency(g: &Graph) -> CsrMatrix {
    let n = g.n();
    let deg: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(n + 2 * g.edge_count());
    let mut values = Vec::with_capacity(indices.capacity());
    indptr.push(0);
    for i in 0..n {
        let nb = g.neighbors(i);
        let split = nb.partition_point(|&j| j < i);
        let entries = nb[..split]
            .iter()
            .copied()
            .chain(std::iter::once(i))
            .chain(nb[split..].iter().copied());
        for j in entries {
            indices.push(j);
            values.push(1.0 / (deg[i] * deg[j]).sqrt());
        }
        indptr.push(indices.len());
    }
    CsrMatrix {
        n,
        indptr,
        indices,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sbm_generate;

    #[test]
    fn single_edge_by_hand() {
        // (A+I) = [[1,1],[1,1]], D̃ = 2I, so every entry is 1/2
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let op = normalized_adjacency(&g).to_dense();
        assert_eq!(op, ndarray::array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn empty_graph_is_identity() {
        let op = normalized_adjacency(&Graph::empty(4));
        assert_eq!(op, CsrMatrix::identity(4));
    }

    #[test]
    fn symmetric_on_random_graphs() {
        for seed in 0..5 {
            let (g, _) = sbm_generate(&[15, 20], 0.3, 0.05, seed).unwrap();
            let op = normalized_adjacency(&g).to_dense();
            let diff = (&op - &op.t()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert_eq!(diff, 0.0);
            assert!(op.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn matches_dense_formula() {
        let (g, _) = sbm_generate(&[6, 6], 0.5, 0.2, 11).unwrap();
        let n = g.n();
        let mut a = Array2::<f64>::eye(n);
        for &(i, j) in g.edges() {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
        let expected = Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (d[i] * d[j]).sqrt());
        let op = normalized_adjacency(&g);
        for i in 0..n {
            for j in 0..n {
                assert!((op.get(i, j) - expected[[i, j]]).abs() < 1e-15);
            }
        }
        let x = Array2::from_shape_fn((n, 3), |(i, j)| (i as f64) - 2.0 * j as f64);
        let prod = op.mul_dense(&x).unwrap();
        let dense = expected.dot(&x);
        assert!(prod.iter().zip(dense.iter()).all(|(p, q)| (p - q).abs() < 1e-12));
    }
}
