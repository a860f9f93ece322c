//! Greedily stacked RBMs with a supervised two-way softmax head.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::layer::{cd1_train_layer, sigmoid, Cd1Config, RbmLayer};
use crate::error::{Error, Result};
use crate::kdd::{BinaryClass, Row};

pub const FORMAT_VERSION: u32 = 1;

/// Two output units, intrusive and normal, each a linear function of the
/// top hidden layer, combined by softmax. Inputs are first min-max rescaled
/// to [0, 1] with bounds taken from the training activations, since the
/// raw sigmoid activations of a lightly trained stack sit in a narrow band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxHead {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub intrusive_weights: Vec<f64>,
    pub intrusive_bias: f64,
    pub normal_weights: Vec<f64>,
    pub normal_bias: f64,
}

impl SoftmaxHead {
    pub fn zeros(inputs: usize) -> Self {
        SoftmaxHead {
            input_min: vec![0.0; inputs],
            input_max: vec![1.0; inputs],
            intrusive_weights: vec![0.0; inputs],
            intrusive_bias: 0.0,
            normal_weights: vec![0.0; inputs],
            normal_bias: 0.0,
        }
    }

    pub fn inputs(&self) -> usize {
        self.intrusive_weights.len()
    }

    fn rescale(&self, h: &[f64]) -> Vec<f64> {
        h.iter()
            .zip(self.input_min.iter().zip(&self.input_max))
            .map(|(x, (lo, hi))| if hi > lo { ((x - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    }

    /// (P(intrusive), P(normal)).
    pub fn probabilities(&self, h: &[f64]) -> (f64, f64) {
        let p = self.linear_probability(&self.rescale(h));
        (p, 1.0 - p)
    }

    fn linear_probability(&self, u: &[f64]) -> f64 {
        let dot = |w: &[f64]| w.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        sigmoid(dot(&self.intrusive_weights) + self.intrusive_bias - dot(&self.normal_weights) - self.normal_bias)
    }

    /// Fits the input bounds, then the logistic weights by Newton's method
    /// on the ridge-penalised mean cross-entropy. The intrusive and normal
    /// units receive opposite halves of the fitted logit.
    pub fn fit(&mut self, features: &[Vec<f64>], intrusive: &[bool], cfg: &HeadConfig) {
        let n = self.inputs();
        self.input_min = vec![f64::INFINITY; n];
        self.input_max = vec![f64::NEG_INFINITY; n];
        for f in features {
            for ((lo, hi), x) in self.input_min.iter_mut().zip(&mut self.input_max).zip(f) {
                *lo = lo.min(*x);
                *hi = hi.max(*x);
            }
        }
        // Last coordinate is the bias.
        let rows: Vec<Vec<f64>> = features
            .iter()
            .map(|f| {
                let mut u = self.rescale(f);
                u.push(1.0);
                u
            })
            .collect();
        let m = rows.len() as f64;
        let mut w = DVector::<f64>::zeros(n + 1);
        for _ in 0..cfg.iterations {
            let mut grad = DVector::<f64>::zeros(n + 1);
            let mut hess = DMatrix::<f64>::zeros(n + 1, n + 1);
            for (u, &y) in rows.iter().zip(intrusive) {
                let z: f64 = u.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                let p = sigmoid(z);
                let err = p - f64::from(u8::from(y));
                let curv = (p * (1.0 - p)).max(1e-12);
                for i in 0..=n {
                    grad[i] += err * u[i] / m;
                    for j in 0..=i {
                        hess[(i, j)] += curv * u[i] * u[j] / m;
                    }
                }
            }
            for i in 0..=n {
                for j in 0..i {
                    hess[(j, i)] = hess[(i, j)];
                }
                if i < n {
                    grad[i] += cfg.ridge * w[i];
                }
                hess[(i, i)] += cfg.ridge;
            }
            let Some(chol) = hess.cholesky() else { break };
            let step = chol.solve(&grad);
            w -= &step;
            if step.amax() < 1e-9 {
                break;
            }
        }
        for k in 0..n {
            self.intrusive_weights[k] = w[k] / 2.0;
            self.normal_weights[k] = -w[k] / 2.0;
        }
        self.intrusive_bias = w[n] / 2.0;
        self.normal_bias = -w[n] / 2.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    /// Newton iterations.
    pub iterations: usize,
    /// L2 penalty on the weights (not the bias).
    pub ridge: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            iterations: 50,
            ridge: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub hidden_sizes: Vec<usize>,
    pub layer: Cd1Config,
    pub head: HeadConfig,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig {
            hidden_sizes: vec![24, 16, 8],
            layer: Cd1Config::default(),
            head: HeadConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmStack {
    pub version: u32,
    pub layers: Vec<RbmLayer>,
    pub head: SoftmaxHead,
}

impl RbmStack {
    pub fn new(layers: Vec<RbmLayer>, head: SoftmaxHead) -> Result<Self> {
        let s = RbmStack {
            version: FORMAT_VERSION,
            layers,
            head,
        };
        s.validate()?;
        Ok(s)
    }

    /// Checks every layer and that each layer's hidden size feeds the next.
    pub fn validate(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported rbm stack version {}",
                self.version
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("rbm stack has no layers".into()));
        }
        for l in &self.layers {
            l.validate()?;
        }
        for pair in self.layers.windows(2) {
            if pair[0].hidden() != pair[1].visible() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].hidden(),
                    found: pair[1].visible(),
                });
            }
        }
        let top = self.layers.last().map(RbmLayer::hidden).unwrap_or(0);
        let h = &self.head;
        for len in [h.input_min.len(), h.input_max.len(), h.intrusive_weights.len(), h.normal_weights.len()] {
            if len != top {
                return Err(Error::DimensionMismatch { expected: top, found: len });
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].visible()
    }

    /// Activation probabilities of the top hidden layer.
    pub fn features(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut x = v.to_vec();
        for l in &self.layers {
            x = l.hidden_probs(&x)?;
        }
        Ok(x)
    }

    /// (P(intrusive), P(normal)).
    pub fn classify(&self, v: &[f64]) -> Result<(f64, f64)> {
        Ok(self.head.probabilities(&self.features(v)?))
    }

    /// Intrusive iff P(intrusive) >= 0.5; the score is P(intrusive).
    pub fn verdict(&self, v: &[f64]) -> Result<(BinaryClass, f64)> {
        let (p, _) = self.classify(v)?;
        Ok((BinaryClass::from_intrusive(p >= 0.5), p))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        serde_json::to_writer(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s: RbmStack = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        s.validate()?;
        Ok(s)
    }
}

/// Greedy layer-wise training: each layer is trained by CD-1 on the
/// previous layer's activation probabilities, then the head is fitted on
/// the top activations against the binary labels.
pub fn train_stack(rows: &[Row], cfg: &StackConfig) -> Result<RbmStack> {
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if cfg.hidden_sizes.is_empty() {
        return Err(Error::InvalidArgument("at least one hidden layer is required".into()));
    }
    let mut data: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    let mut layers = Vec::with_capacity(cfg.hidden_sizes.len());
    for (k, &hidden) in cfg.hidden_sizes.iter().enumerate() {
        let layer_cfg = Cd1Config {
            seed: cfg.layer.seed.wrapping_add(k as u64),
            ..cfg.layer
        };
        let (layer, _) = cd1_train_layer(&data, hidden, &layer_cfg)?;
        data = data
            .iter()
            .map(|v| layer.hidden_probs(v))
            .collect::<Result<_>>()?;
        layers.push(layer);
    }
    let labels: Vec<bool> = rows.iter().map(|r| r.truth.is_intrusive()).collect();
    let top = *cfg.hidden_sizes.last().expect("non-empty");
    let mut head = SoftmaxHead::zeros(top);
    head.fit(&data, &labels, &cfg.head);
    RbmStack::new(layers, head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdd::AttackClass;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_rows(seed: u64, n: usize) -> Vec<Row> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..4).map(|_| rng.gen()).collect();
                let bad = x[0] + x[1] > 1.0;
                Row::new(x, if bad { AttackClass::Probe } else { AttackClass::Normal })
            })
            .collect()
    }

    /// Plain logistic regression on the raw inputs, as a separability check.
    fn raw_logistic_accuracy(rows: &[Row]) -> f64 {
        let n = rows[0].features.len();
        let (mut w, mut b) = (vec![0.0; n], 0.0);
        for _ in 0..2000 {
            let mut gw = vec![0.0; n];
            let mut gb = 0.0;
            for r in rows {
                let z: f64 = w.iter().zip(&r.features).map(|(a, x)| a * x).sum::<f64>() + b;
                let err = 1.0 / (1.0 + (-z).exp()) - if r.truth.is_intrusive() { 1.0 } else { 0.0 };
                for (g, x) in gw.iter_mut().zip(&r.features) {
                    *g += err * x;
                }
                gb += err;
            }
            for k in 0..n {
                w[k] -= 2.0 * gw[k] / rows.len() as f64;
            }
            b -= 2.0 * gb / rows.len() as f64;
        }
        let ok = rows
            .iter()
            .filter(|r| {
                let z: f64 = w.iter().zip(&r.features).map(|(a, x)| a * x).sum::<f64>() + b;
                (z >= 0.0) == r.truth.is_intrusive()
            })
            .count();
        ok as f64 / rows.len() as f64
    }

    #[test]
    fn separable_toy_set() {
        let rows = toy_rows(1, 400);
        assert!(raw_logistic_accuracy(&rows) >= 0.95);
        let cfg = StackConfig {
            hidden_sizes: vec![4],
            layer: Cd1Config { epochs: 10, seed: 2, ..Default::default() },
            head: HeadConfig::default(),
        };
        let stack = train_stack(&rows, &cfg).unwrap();
        let ok = rows
            .iter()
            .filter(|r| stack.verdict(&r.features).unwrap().0 == r.truth)
            .count();
        assert!(ok as f64 / rows.len() as f64 >= 0.95, "{ok}");
    }

    #[test]
    fn three_layer_depth_and_zero_epochs() {
        let rows = toy_rows(3, 50);
        let mut cfg = StackConfig::default();
        cfg.layer.epochs = 0;
        let stack = train_stack(&rows, &cfg).unwrap();
        assert_eq!(stack.layers.len(), 3);
        assert_eq!(stack.layers[2].hidden(), 8);
        let (p, q) = stack.classify(&rows[0].features).unwrap();
        assert!((p + q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_head_is_undecided() {
        let stack = RbmStack::new(vec![RbmLayer::zeros(3, 2)], SoftmaxHead::zeros(2)).unwrap();
        assert_eq!(stack.classify(&[0.2, 0.9, 0.0]).unwrap(), (0.5, 0.5));
        assert_eq!(stack.verdict(&[0.2, 0.9, 0.0]).unwrap().0, BinaryClass::Intrusive);
    }

    #[test]
    fn serialization_round_trip_and_validation() {
        let rows = toy_rows(5, 80);
        let mut cfg = StackConfig::default();
        cfg.layer.epochs = 2;
        let stack = train_stack(&rows, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rbm.json");
        stack.save_json(&path).unwrap();
        assert_eq!(RbmStack::load_json(&path).unwrap(), stack);

        let broken = RbmStack {
            layers: vec![RbmLayer::zeros(3, 2), RbmLayer::zeros(3, 2)],
            ..stack.clone()
        };
        assert!(matches!(broken.validate(), Err(Error::DimensionMismatch { .. })));
        let old = RbmStack { version: 0, ..stack };
        assert!(old.validate().is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let rows = toy_rows(9, 60);
        let mut cfg = StackConfig::default();
        cfg.layer.epochs = 2;
        assert_eq!(train_stack(&rows, &cfg).unwrap(), train_stack(&rows, &cfg).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn outputs_sum_to_one_and_head_is_monotone(seed: u64, bump in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l1 = RbmLayer::random(5, 3, 1.0, &mut rng);
            let mut head = SoftmaxHead::zeros(3);
            for w in head.intrusive_weights.iter_mut().chain(head.normal_weights.iter_mut()) {
                *w = rng.gen_range(-2.0..2.0);
            }
            let stack = RbmStack::new(vec![l1], head).unwrap();
            let v: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
            let (p, q) = stack.classify(&v).unwrap();
            prop_assert!((p + q - 1.0).abs() < 1e-12);
            let mut raised = stack.clone();
            raised.head.intrusive_weights[1] += bump;
            prop_assert!(raised.classify(&v).unwrap().0 >= p);
        }
    }
}
