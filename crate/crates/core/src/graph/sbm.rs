use rand::Rng as _;

use super::{Edge, Graph, SensitiveAttributes};
use crate::error::{Error, Result};
use crate::rng;

/// Stochastic block model. Node attributes are block ids, nodes numbered
/// block by block.
pub fn sbm_generate(
    block_sizes: &[usize],
    p_intra: f64,
    p_inter: f64,
    seed: u64,
) -> Result<(Graph, SensitiveAttributes)> {
    if block_sizes.is_empty() {
        return Err(Error::InvalidParameter("empty block list".into()));
    }
    if !(0.0..=1.0).contains(&p_inter) || !(0.0..=1.0).contains(&p_intra) || p_inter > p_intra {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= p_inter <= p_intra <= 1, got p_inter={p_inter}, p_intra={p_intra}"
        )));
    }
    let block: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = block.len();
    let mut rng = rng::seeded(seed);
    let mut edges: Vec<Edge> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] { p_intra } else { p_inter };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let attrs = SensitiveAttributes::new(block, block_sizes.len())?;
    Ok((Graph::from_sorted_unique(n, edges), attrs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_probabilities_give_disjoint_cliques() {
        let (g, s) = sbm_generate(&[3, 3], 1.0, 0.0, 0).unwrap();
        assert_eq!(
            g.edges(),
            &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]
        );
        assert_eq!(s.values(), &[0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn validates_inputs() {
        assert!(sbm_generate(&[], 0.5, 0.1, 0).is_err());
        assert!(sbm_generate(&[3], 0.1, 0.5, 0).is_err());
        assert!(sbm_generate(&[3], 1.5, 0.5, 0).is_err());
    }

    #[test]
    fn attribute_equals_block_index() {
        let sizes = [4, 0, 7, 2];
        let (_, s) = sbm_generate(&sizes, 0.3, 0.1, 5).unwrap();
        let mut v = 0;
        for (b, &size) in sizes.iter().enumerate() {
            for _ in 0..size {
                assert_eq!(s.get(v), b);
                v += 1;
            }
        }
        assert_eq!(s.empty_classes(), vec![1]);
    }

    #[test]
    fn uniform_density_concentrates() {
        // 10 seeds x C(60,2) pairs at p = 0.1
        let p = 0.1;
        let pairs = 60 * 59 / 2;
        let trials = (10 * pairs) as f64;
        let total: usize = (0..10)
            .map(|seed| sbm_generate(&[30, 30], p, p, seed).unwrap().0.edge_count())
            .sum();
        let sd = (trials * p * (1.0 - p)).sqrt();
        assert!(((total as f64) - trials * p).abs() < 3.0 * sd);
    }

    #[test]
    fn heterophilous_fraction_matches_expected_counts() {
        let (inter, intra) = (0.02 * 2500.0, 0.2 * 2.0 * 1225.0);
        let expected = inter / (inter + intra);
        let mut het = 0usize;
        let mut total = 0usize;
        for seed in 0..10 {
            let (g, s) = sbm_generate(&[50, 50], 0.2, 0.02, seed).unwrap();
            het += g.edges().iter().filter(|&&(a, b)| s.get(a) != s.get(b)).count();
            total += g.edge_count();
        }
        let frac = het as f64 / total as f64;
        let sd = (expected * (1.0 - expected) / total as f64).sqrt();
        assert!((frac - expected).abs() < 3.0 * sd, "{frac} vs {expected}");
    }
}
