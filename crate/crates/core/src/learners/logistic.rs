use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng as _;

use super::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            epochs: 300,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Softmax regression. `weights` is `k x (d + 1)`, last column the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Array2<f64>,
    pub config: LogisticConfig,
    /// Training loss after each epoch.
    pub losses: Vec<f64>,
}

impl LogisticModel {
    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols() - 1
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} features, got {}",
                self.dim(),
                x.ncols()
            )));
        }
        let w = self.weights.slice(s![.., ..self.dim()]);
        let b = self.weights.column(self.dim());
        Ok(x.dot(&w.t()) + &b)
    }
}

/// Row-wise softmax, shifted by the row max.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let z = row.sum();
        row /= z;
    }
    p
}

/// Mean cross-entropy plus `l2/2 * ||W||²` (bias excluded), and its gradient.
pub fn cross_entropy_loss_and_grad(
    weights: &Array2<f64>,
    x: ArrayView2<f64>,
    y: &[usize],
    l2: f64,
) -> (f64, Array2<f64>) {
    let (m, d) = x.dim();
    let w = weights.slice(s![.., ..d]);
    let b = weights.column(d);
    let logits = x.dot(&w.t()) + &b;
    let mut p = softmax_rows(&logits);

    let mut loss = 0.0;
    for (i, &c) in y.iter().enumerate() {
        loss -= p[[i, c]].max(f64::MIN_POSITIVE).ln();
        p[[i, c]] -= 1.0;
    }
    loss /= m as f64;
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();

    // p now holds (P - Y)
    let mut grad = Array2::zeros(weights.dim());
    let gw = p.t().dot(&x) / m as f64 + &(&w * l2);
    grad.slice_mut(s![.., ..d]).assign(&gw);
    grad.column_mut(d)
        .assign(&(p.sum_axis(Axis(0)) / m as f64));
    (loss, grad)
}

/// Full-batch Adam on the regularized cross-entropy.
pub fn lr_train(
    x: ArrayView2<f64>,
    y: &[usize],
    num_classes: usize,
    cfg: LogisticConfig,
) -> Result<LogisticModel> {
    let (m, d) = x.dim();
    if m == 0 {
        return Err(Error::Empty("training rows".into()));
    }
    if num_classes < 2 {
        return Err(Error::InvalidParameter(
            "logistic regression needs at least two classes".into(),
        ));
    }
    if y.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: y.len(),
        });
    }
    if m < num_classes {
        return Err(Error::InvalidParameter(format!(
            "{m} rows cannot cover {num_classes} classes"
        )));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= num_classes) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} outside [0, {num_classes})"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features".into()));
    }

    let mut r = rng::substream(cfg.seed, rng::tag::PROBE, 0);
    let mut weights =
        Array2::from_shape_fn((num_classes, d + 1), |_| r.random_range(-0.01..0.01));
    let mut adam = Adam::new(weights.len(), AdamConfig::with_lr(cfg.lr));
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (loss, grad) = cross_entropy_loss_and_grad(&weights, x, y, cfg.l2);
        if !loss.is_finite() {
            return Err(Error::NonFinite("logistic regression loss".into()));
        }
        losses.push(loss);
        adam.step(
            weights.as_slice_mut().expect("standard layout"),
            grad.as_slice().expect("standard layout"),
        );
    }
    Ok(LogisticModel {
        weights,
        config: cfg,
        losses,
    })
}

/// Predicted classes and class probabilities.
pub fn lr_predict(
    model: &LogisticModel,
    x: ArrayView2<f64>,
) -> Result<(Vec<usize>, Array2<f64>)> {
    let p = softmax_rows(&model.logits(x)?);
    let classes = p.rows().into_iter().map(argmax).collect();
    Ok((classes, p))
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs(seed: u64, per_class: usize) -> (Array2<f64>, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let mut x = Array2::zeros((2 * per_class, 2));
        let mut y = Vec::new();
        for i in 0..2 * per_class {
            let c = i % 2;
            let center = if c == 0 { -2.0 } else { 2.0 };
            x[[i, 0]] = center + r.random_range(-1.0..1.0);
            x[[i, 1]] = center + r.random_range(-1.0..1.0);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs(1, 50);
        let model = lr_train(x.view(), &y, 2, LogisticConfig::default()).unwrap();
        let (pred, _) = lr_predict(&model, x.view()).unwrap();
        assert_eq!(pred, y);
    }

    #[test]
    fn loss_settles_late_in_training() {
        let (x, y) = blobs(2, 40);
        let model = lr_train(x.view(), &y, 2, LogisticConfig::default()).unwrap();
        let tail = &model.losses[model.losses.len() * 9 / 10..];
        for w in tail.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::seeded(5);
        for _ in 0..5 {
            let x = Array2::from_shape_fn((5, 3), |_| r.random_range(-1.0..1.0));
            let y: Vec<usize> = (0..5).map(|_| r.random_range(0..3)).collect();
            let w = Array2::from_shape_fn((3, 4), |_| r.random_range(-1.0..1.0));
            let l2 = 0.1;
            let (_, grad) = cross_entropy_loss_and_grad(&w, x.view(), &y, l2);
            let h = 1e-5;
            for idx in ndarray::indices(w.dim()) {
                let mut wp = w.clone();
                wp[idx] += h;
                let mut wm = w.clone();
                wm[idx] -= h;
                let num = (cross_entropy_loss_and_grad(&wp, x.view(), &y, l2).0
                    - cross_entropy_loss_and_grad(&wm, x.view(), &y, l2).0)
                    / (2.0 * h);
                let rel = (num - grad[idx]).abs() / num.abs().max(grad[idx].abs()).max(1e-8);
                assert!(rel < 1e-5, "{idx:?}: {num} vs {}", grad[idx]);
            }
        }
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let model = LogisticModel {
            weights: Array2::zeros((4, 3)),
            config: LogisticConfig::default(),
            losses: vec![],
        };
        let x = array![[1.0, -2.0], [0.5, 3.0]];
        let (_, p) = lr_predict(&model, x.view()).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn probabilities_match_direct_softmax() {
        let mut r = rng::seeded(3);
        let model = LogisticModel {
            weights: Array2::from_shape_fn((3, 5), |_| r.random_range(-2.0..2.0)),
            config: LogisticConfig::default(),
            losses: vec![],
        };
        let x = Array2::from_shape_fn((1000, 4), |_| r.random_range(-3.0..3.0));
        let (classes, p) = lr_predict(&model, x.view()).unwrap();
        for (i, row) in p.rows().into_iter().enumerate() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            if i < 20 {
                let z: Vec<f64> = (0..3)
                    .map(|k| {
                        (0..4).map(|j| model.weights[[k, j]] * x[[i, j]]).sum::<f64>()
                            + model.weights[[k, 4]]
                    })
                    .collect();
                let denom: f64 = z.iter().map(|v| v.exp()).sum();
                for k in 0..3 {
                    assert!((row[k] - z[k].exp() / denom).abs() < 1e-12);
                }
                let best = (0..3).max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap();
                assert_eq!(classes[i], best);
            }
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let logits = array![[1.0, 2.0, -0.5], [0.0, 0.0, 3.0]];
        let shifted = &logits + 17.5;
        let a = softmax_rows(&logits);
        let b = softmax_rows(&shifted);
        assert!(a.iter().zip(b.iter()).all(|(p, q)| (p - q).abs() < 1e-15));
    }

    #[test]
    fn input_validation() {
        let x = Array2::<f64>::zeros((0, 2));
        assert!(lr_train(x.view(), &[], 2, LogisticConfig::default()).is_err());
        let mut x = Array2::<f64>::zeros((3, 2));
        x[[0, 0]] = f64::NAN;
        assert!(lr_train(x.view(), &[0, 1, 0], 2, LogisticConfig::default()).is_err());
        let (x, y) = blobs(0, 3);
        let model = lr_train(x.view(), &y, 2, LogisticConfig::default()).unwrap();
        assert!(lr_predict(&model, Array2::zeros((2, 5)).view()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = blobs(4, 20);
        let cfg = LogisticConfig {
            seed: 11,
            ..LogisticConfig::default()
        };
        let a = lr_train(x.view(), &y, 2, cfg).unwrap();
        let b = lr_train(x.view(), &y, 2, cfg).unwrap();
        assert_eq!(a, b);
    }
}
