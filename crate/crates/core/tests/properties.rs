use std::collections::HashSet;

use fairdrop::dyadic::{
    assign_dyadic, delta_dp_with, delta_eo_with, subgroup_count, subgroup_id, DyadicScheme,
    GroupPolicy, PredictionBatch,
};
use fairdrop::fairdrop::{apply_drop, randomized_response, EdgeMask};
use fairdrop::graph::{load_graph, normalized_adjacency, split_edges, write_attributes, write_edges};
use fairdrop::{Graph, SensitiveAttributes};
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = (Graph, SensitiveAttributes)> {
    (3..max_n, 1usize..4).prop_flat_map(|(n, k)| {
        (
            proptest::collection::vec((0..n, 0..n), 0..3 * n),
            proptest::collection::vec(0..k, n),
        )
            .prop_map(move |(pairs, values)| {
                let g = Graph::from_edges(n, pairs.into_iter().filter(|(a, b)| a != b)).unwrap();
                (g, SensitiveAttributes::new(values, k).unwrap())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn metrics_ignore_row_order(
        (g, s) in graph_strategy(12),
        scores in proptest::collection::vec(0.0f64..1.0, 40),
        labels in proptest::collection::vec(any::<bool>(), 40),
        rotate in 0usize..40,
    ) {
        let n = g.n();
        let pairs: Vec<(usize, usize)> = (0..40).map(|k| (k % n, (k * 7 + 1) % n)).collect();
        let mut order: Vec<usize> = (0..40).collect();
        order.rotate_left(rotate);
        order.reverse();
        let permute = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let p_pairs: Vec<_> = order.iter().map(|&i| pairs[i]).collect();
        let p_labels: Vec<_> = order.iter().map(|&i| labels[i]).collect();
        let a = PredictionBatch::new(scores.clone(), labels.clone(), 0.5).unwrap();
        let b = PredictionBatch::new(permute(&scores), p_labels, 0.5).unwrap();
        for scheme in DyadicScheme::ALL {
            let (ga, gb) = (assign_dyadic(&pairs, &s, scheme).unwrap(), assign_dyadic(&p_pairs, &s, scheme).unwrap());
            let policy = GroupPolicy::SkipDeficient;
            let (da, db) = (delta_dp_with(&a, &ga, policy), delta_dp_with(&b, &gb, policy));
            prop_assert_eq!(da.map(|d| d.value).ok(), db.map(|d| d.value).ok());
            let (ea, eb) = (delta_eo_with(&a, &ga, policy), delta_eo_with(&b, &gb, policy));
            prop_assert_eq!(ea.map(|e| e.delta_eo).ok(), eb.map(|e| e.delta_eo).ok());
        }
    }

    #[test]
    fn split_partitions_edges((g, _) in graph_strategy(30), seed in any::<u64>()) {
        let pairs = g.n() * (g.n() - 1) / 2;
    prop_assume!(g.edge_count() >= 10 && pairs - g.edge_count() >= g.edge_count());
        let split = split_edges(&g, 0.2, seed).unwrap();
        let mut all: Vec<_> = split.train_pos.iter().chain(&split.test_pos).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all.as_slice(), g.edges());
        let negs: HashSet<_> = split.train_neg.iter().chain(&split.test_neg).copied().collect();
        prop_assert_eq!(negs.len(), split.train_neg.len() + split.test_neg.len());
        prop_assert!(negs.iter().all(|&(a, b)| a != b && !g.has_edge(a, b)));
    }

    #[test]
    fn reloading_written_files_is_lossless((g, s) in graph_strategy(20)) {
        // an isolated top node would be invisible in the edge file; the attribute file keeps it
        let dir = tempfile::tempdir().unwrap();
        let (e, a) = (dir.path().join("e.txt"), dir.path().join("a.csv"));
        write_edges(&g, std::fs::File::create(&e).unwrap()).unwrap();
        write_attributes(&s, std::fs::File::create(&a).unwrap()).unwrap();
        let (g2, s2) = load_graph(&e, &a).unwrap();
        prop_assert_eq!(g2.edges(), g.edges());
        prop_assert_eq!(g2.n(), g.n());
        // attribute tokens are relabelled densely in sorted order
        let (x, y) = (s.values(), s2.values());
        for i in 0..x.len() {
            for j in 0..x.len() {
                prop_assert_eq!(x[i] == x[j], y[i] == y[j]);
                prop_assert_eq!(x[i] < x[j], y[i] < y[j]);
            }
        }
    }

    #[test]
    fn full_bias_response_is_identity(bits in proptest::collection::vec(any::<bool>(), 0..200), seed in any::<u64>()) {
        let m = EdgeMask::new(bits);
        prop_assert_eq!(randomized_response(&m, 0.5, seed).unwrap(), m);
    }

    #[test]
    fn dropping_keeps_exactly_the_marked_edges((g, _) in graph_strategy(15), seed in any::<u64>()) {
        let m = randomized_response(&EdgeMask::ones(g.edge_count()), 0.0, seed).unwrap();
        let kept = apply_drop(&g, &m).unwrap();
        let expected: Vec<_> = g.edges().iter().zip(m.bits()).filter(|(_, &b)| b).map(|(&e, _)| e).collect();
        prop_assert_eq!(kept.edges(), expected.as_slice());
        prop_assert_eq!(kept.n(), g.n());
    }

    #[test]
    fn propagation_operator_is_symmetric((g, _) in graph_strategy(15)) {
        let a = normalized_adjacency(&g).to_dense();
        for i in 0..g.n() {
            for j in 0..g.n() {
                prop_assert_eq!(a[[i, j]], a[[j, i]]);
            }
        }
    }
}

#[test]
fn subgroup_ids_biject_onto_the_count() {
    for k in 1..=8 {
        let ids: HashSet<usize> = (0..k).flat_map(|b| (0..=b).map(move |a| subgroup_id(a, b))).collect();
        let count = subgroup_count(k).unwrap();
        assert_eq!(ids.len(), count);
        assert!(ids.iter().all(|&i| i < count));
    }
}
