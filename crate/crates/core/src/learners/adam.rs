#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam over a flat parameter buffer.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(len: usize, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter length changed");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.step += 1;
        let (c1, c2) = self.corrections();
        for k in 0..params.len() {
            self.update(k, params, grads[k], c1, c2);
        }
    }

    /// Lazy update touching only the listed rows of a row-major `? x dim`
    /// buffer; untouched rows keep their moments and values.
    pub fn step_rows(&mut self, params: &mut [f64], grads: &[f64], rows: &[usize], dim: usize) {
        assert_eq!(params.len(), self.m.len(), "parameter length changed");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.step += 1;
        let (c1, c2) = self.corrections();
        for &r in rows {
            for k in r * dim..(r + 1) * dim {
                self.update(k, params, grads[k], c1, c2);
            }
        }
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step as i32;
        (
            1.0 - self.cfg.beta1.powi(t),
            1.0 - self.cfg.beta2.powi(t),
        )
    }

    #[inline]
    fn update(&mut self, k: usize, params: &mut [f64], g: f64, c1: f64, c2: f64) {
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
        self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
        let m_hat = self.m[k] / c1;
        let v_hat = self.v[k] / c2;
        params[k] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
