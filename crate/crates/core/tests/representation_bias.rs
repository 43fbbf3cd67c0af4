use fairdrop::embedding::{embed, EmbeddingMatrix, WalkConfig};
use fairdrop::error::Result;
use fairdrop::fairdrop::DropoutMode;
use fairdrop::graph::sbm_generate;
use fairdrop::rb::{link_rb, node_rb, LogisticProbe, Probe, ProbeFit};
use fairdrop::SensitiveAttributes;
use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn balanced(n: usize) -> SensitiveAttributes {
    SensitiveAttributes::new((0..n).map(|i| i % 2).collect(), 2).unwrap()
}

fn gaussian(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingMatrix::new(Array2::from_shape_fn((n, d), |_| {
        let (u, v): (f64, f64) = (1.0 - r.random::<f64>(), r.random());
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }))
}

#[test]
fn independent_embeddings_sit_at_chance() {
    let probe = LogisticProbe::default();
    let s = balanced(200);
    let wide = balanced(1000);
    let (mut node, mut link) = (0.0, 0.0);
    for seed in 0..10 {
        node += node_rb(&gaussian(200, 8, seed), &s, &probe, seed).unwrap().weighted;
        // a random matching, so no node identity is shared across the split
        let mut order: Vec<usize> = (0..1000).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 50));
        let edges: Vec<(usize, usize)> = order.chunks(2).map(|c| (c[0], c[1])).collect();
        link += link_rb(&gaussian(1000, 8, seed), &edges, &wide, &probe, seed).unwrap().weighted;
    }
    let (node, link) = (node / 10.0, link / 10.0);
    assert!((node - 0.5).abs() <= 0.05, "node {node}");
    assert!((link - 0.5).abs() <= 0.05, "link {link}");
}

/// Wraps a probe and blanks the first `width` feature columns.
struct BlankPrefix<P> {
    inner: P,
    width: usize,
}

impl<P: Probe> Probe for BlankPrefix<P> {
    fn fit_predict(
        &self,
        train: ArrayView2<f64>,
        train_y: &[usize],
        num_classes: usize,
        test: ArrayView2<f64>,
        seed: u64,
    ) -> Result<ProbeFit> {
        let blank = |x: ArrayView2<f64>| {
            let mut x = x.to_owned();
            x.slice_mut(s![.., ..self.width]).fill(0.0);
            x
        };
        self.inner
            .fit_predict(blank(train).view(), train_y, num_classes, blank(test).view(), seed)
    }
}

#[test]
fn blanking_source_features_drops_source_head_to_prior() {
    let n = 120;
    let s = balanced(n);
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let z = EmbeddingMatrix::new(Array2::from_shape_fn((n, 4), |(i, j)| {
        let signal = if j == s.get(i) { 3.0 } else { 0.0 };
        signal + r.random_range(-0.3..0.3)
    }));
    // attribute-independent edges
    let mut nodes: Vec<usize> = (0..n).collect();
    let mut edges = Vec::new();
    for _ in 0..6 {
        nodes.shuffle(&mut r);
        edges.extend(nodes.chunks(2).map(|c| (c[0], c[1])));
    }
    let full = link_rb(&z, &edges, &s, &LogisticProbe::default(), 0).unwrap();
    let probe = BlankPrefix { inner: LogisticProbe::default(), width: 4 };
    let blanked = link_rb(&z, &edges, &s, &probe, 0).unwrap();
    assert_eq!(full.src.weighted, 1.0);
    assert_eq!(blanked.dst.weighted, 1.0);
    let prior = full
        .src
        .classes
        .iter()
        .map(|c| c.count as f64)
        .fold(0.0, f64::max)
        / full.src.classes.iter().map(|c| c.count as f64).sum::<f64>();
    assert!(blanked.src.weighted <= prior + 0.1, "{} vs prior {prior}", blanked.src.weighted);
    assert!(blanked.src.weighted < full.src.weighted);
}

#[test]
fn shuffled_attributes_remove_the_signal() {
    let cfg = WalkConfig { dim: 16, window: 5, epochs: 5, ..WalkConfig::default() };
    let probe = LogisticProbe::default();
    let (mut truth, mut shuffled) = (0.0, 0.0);
    for seed in 0..10 {
        let (g, s) = sbm_generate(&[50, 50], 0.15, 0.01, seed).unwrap();
        let z = embed(&g, &s, DropoutMode::None, &WalkConfig { seed, ..cfg }).unwrap();
        let mut values = s.values().to_vec();
        values.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let fake = SensitiveAttributes::new(values, 2).unwrap();
        truth += node_rb(&z, &s, &probe, seed).unwrap().weighted;
        shuffled += node_rb(&z, &fake, &probe, seed).unwrap().weighted;
    }
    let (truth, shuffled) = (truth / 10.0, shuffled / 10.0);
    assert!(shuffled <= truth + 0.05, "shuffled {shuffled} true {truth}");
    assert!(truth > 0.65, "true {truth}");
}

#[test]
fn scores_are_bounded() {
    let s = SensitiveAttributes::new((0..90).map(|i| i % 3).collect(), 3).unwrap();
    for seed in 0..3 {
        let r = node_rb(&gaussian(90, 5, seed), &s, &LogisticProbe::default(), seed).unwrap();
        assert!((0.0..=1.0).contains(&r.weighted) && (0.0..=1.0).contains(&r.macro_avg));
        let h = r.hyperparams.unwrap();
        assert!([1e-3, 1e-2].contains(&h.lr) && [0.0, 1e-4, 1e-2].contains(&h.l2));
    }
}
