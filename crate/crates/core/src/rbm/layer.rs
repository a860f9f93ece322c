//! A single restricted Boltzmann machine and its contrastive-divergence
//! trainer.
//!
//! Visible inputs may be real values in [0, 1]; they are read as the
//! activation probabilities of binary visible units.

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `visible + hidden` for which the joint is enumerated.
pub const EXHAUSTIVE_LIMIT: usize = 20;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmLayer {
    visible: usize,
    hidden: usize,
    /// Row-major `visible x hidden`.
    weights: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl RbmLayer {
    pub fn zeros(visible: usize, hidden: usize) -> Self {
        RbmLayer {
            visible,
            hidden,
            weights: vec![0.0; visible * hidden],
            visible_bias: vec![0.0; visible],
            hidden_bias: vec![0.0; hidden],
        }
    }

    /// Weights drawn from N(0, std²), zero biases.
    pub fn random(visible: usize, hidden: usize, std: f64, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let mut layer = RbmLayer::zeros(visible, hidden);
        for w in &mut layer.weights {
            *w = normal.sample(rng);
        }
        layer
    }

    pub fn from_parts(
        visible: usize,
        hidden: usize,
        weights: Vec<f64>,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
    ) -> Result<Self> {
        let layer = RbmLayer {
            visible,
            hidden,
            weights,
            visible_bias,
            hidden_bias,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.visible * self.hidden, self.weights.len())?;
        check_len(self.visible, self.visible_bias.len())?;
        check_len(self.hidden, self.hidden_bias.len())?;
        let all = self.weights.iter().chain(&self.visible_bias).chain(&self.hidden_bias);
        if let Some(bad) = all.copied().find(|v| !v.is_finite()) {
            return Err(Error::Range {
                what: "rbm parameter",
                value: bad,
            });
        }
        Ok(())
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.weights[x * self.hidden + y]
    }

    pub fn set_weight(&mut self, x: usize, y: usize, value: f64) {
        self.weights[x * self.hidden + y] = value;
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn visible_bias_mut(&mut self) -> &mut [f64] {
        &mut self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_bias
    }

    /// `E(v, h) = -a.v - b.h - v^T W h`.
    pub fn energy(&self, v: &[f64], h: &[f64]) -> Result<f64> {
        check_len(self.visible, v.len())?;
        check_len(self.hidden, h.len())?;
        let mut e = 0.0;
        for (a, x) in self.visible_bias.iter().zip(v) {
            e -= a * x;
        }
        for (b, y) in self.hidden_bias.iter().zip(h) {
            e -= b * y;
        }
        for (x, vx) in v.iter().enumerate() {
            let row = &self.weights[x * self.hidden..(x + 1) * self.hidden];
            for (w, hy) in row.iter().zip(h) {
                e -= vx * hy * w;
            }
        }
        Ok(e)
    }

    /// `P(h_y = 1 | v) = sigmoid(b_y + sum_x v_x W_xy)` per hidden unit.
    pub fn hidden_probs(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.visible, v.len())?;
        let mut act = self.hidden_bias.clone();
        for (x, vx) in v.iter().enumerate() {
            if *vx == 0.0 {
                continue;
            }
            let row = &self.weights[x * self.hidden..(x + 1) * self.hidden];
            for (a, w) in act.iter_mut().zip(row) {
                *a += vx * w;
            }
        }
        Ok(act.into_iter().map(sigmoid).collect())
    }

    /// `P(v_x = 1 | h) = sigmoid(a_x + sum_y W_xy h_y)` per visible unit.
    pub fn visible_probs(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len(self.hidden, h.len())?;
        Ok((0..self.visible)
            .map(|x| {
                let row = &self.weights[x * self.hidden..(x + 1) * self.hidden];
                let s: f64 = row.iter().zip(h).map(|(w, y)| w * y).sum();
                sigmoid(self.visible_bias[x] + s)
            })
            .collect())
    }
}

/// The full Boltzmann distribution of a small layer.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub visible: usize,
    pub hidden: usize,
    /// Indexed by `v_bits << hidden | h_bits`; bit `i` of `v_bits` is `v_i`.
    pub joint: Vec<f64>,
    pub marginal_visible: Vec<f64>,
    pub marginal_hidden: Vec<f64>,
}

pub fn bits(index: usize, len: usize) -> Vec<f64> {
    (0..len).map(|i| f64::from(u8::from(index >> i & 1 == 1))).collect()
}

impl JointDistribution {
    pub fn p(&self, v_bits: usize, h_bits: usize) -> f64 {
        self.joint[v_bits << self.hidden | h_bits]
    }
}

/// Enumerates all `2^(X+Y)` binary configurations; normalised with a
/// log-sum-exp so large energies do not overflow.
pub fn exhaustive_distribution(layer: &RbmLayer) -> Result<JointDistribution> {
    let units = layer.visible + layer.hidden;
    if units > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            units,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let (nv, nh) = (1usize << layer.visible, 1usize << layer.hidden);
    let hs: Vec<Vec<f64>> = (0..nh).map(|j| bits(j, layer.hidden)).collect();
    let mut neg_energy = Vec::with_capacity(nv * nh);
    for i in 0..nv {
        let v = bits(i, layer.visible);
        for h in &hs {
            neg_energy.push(-layer.energy(&v, h)?);
        }
    }
    let max = neg_energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = neg_energy.iter().map(|e| (e - max).exp()).sum();
    let joint: Vec<f64> = neg_energy.iter().map(|e| (e - max).exp() / z).collect();
    let mut marginal_visible = vec![0.0; nv];
    let mut marginal_hidden = vec![0.0; nh];
    for i in 0..nv {
        for j in 0..nh {
            let p = joint[i * nh + j];
            marginal_visible[i] += p;
            marginal_hidden[j] += p;
        }
    }
    Ok(JointDistribution {
        visible: layer.visible,
        hidden: layer.hidden,
        joint,
        marginal_visible,
        marginal_hidden,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cd1Config {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for Cd1Config {
    fn default() -> Self {
        Cd1Config {
            epochs: 15,
            learning_rate: 0.05,
            batch_size: 64,
            init_std: 0.01,
            seed: 0,
        }
    }
}

/// Trains one layer by CD-1 over shuffled mini-batches. Returns the layer
/// and the mean squared reconstruction error of each epoch.
pub fn cd1_train_layer(data: &[Vec<f64>], hidden: usize, cfg: &Cd1Config) -> Result<(RbmLayer, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if hidden == 0 {
        return Err(Error::InvalidArgument("hidden layer needs at least one unit".into()));
    }
    let visible = data[0].len();
    for d in data {
        check_len(visible, d.len())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layer = RbmLayer::random(visible, hidden, cfg.init_std, &mut rng);
    let batch_size = cfg.batch_size.max(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut errors = Vec::with_capacity(cfg.epochs);

    let mut dw = vec![0.0; visible * hidden];
    let mut da = vec![0.0; visible];
    let mut db = vec![0.0; hidden];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sq_err = 0.0;
        for chunk in order.chunks(batch_size) {
            dw.fill(0.0);
            da.fill(0.0);
            db.fill(0.0);
            for &i in chunk {
                let v0 = &data[i];
                let h0 = layer.hidden_probs(v0)?;
                let h0_sample: Vec<f64> = h0.iter().map(|&p| f64::from(u8::from(rng.gen::<f64>() < p))).collect();
                let v1 = layer.visible_probs(&h0_sample)?;
                let h1 = layer.hidden_probs(&v1)?;
                for x in 0..visible {
                    let row = &mut dw[x * hidden..(x + 1) * hidden];
                    for y in 0..hidden {
                        row[y] += v0[x] * h0[y] - v1[x] * h1[y];
                    }
                    da[x] += v0[x] - v1[x];
                    sq_err += (v0[x] - v1[x]) * (v0[x] - v1[x]);
                }
                for y in 0..hidden {
                    db[y] += h0[y] - h1[y];
                }
            }
            let scale = cfg.learning_rate / chunk.len() as f64;
            for (w, d) in layer.weights.iter_mut().zip(&dw) {
                *w += scale * d;
            }
            for (a, d) in layer.visible_bias.iter_mut().zip(&da) {
                *a += scale * d;
            }
            for (b, d) in layer.hidden_bias.iter_mut().zip(&db) {
                *b += scale * d;
            }
        }
        let mean = sq_err / (data.len() * visible) as f64;
        debug!("rbm {visible}x{hidden} epoch {epoch}: reconstruction error {mean:.6}");
        errors.push(mean);
    }
    Ok((layer, errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    #[test]
    fn energy_examples() {
        let zero = RbmLayer::zeros(3, 2);
        assert_eq!(zero.energy(&[1.0, 0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        let one = RbmLayer::from_parts(1, 1, vec![2.0], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(one.energy(&[1.0], &[1.0]).unwrap(), -2.0);
        assert!(matches!(one.energy(&[1.0, 0.0], &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn uniform_joint_for_zero_parameters() {
        let d = exhaustive_distribution(&RbmLayer::zeros(2, 1)).unwrap();
        assert_eq!(d.joint.len(), 8);
        for p in &d.joint {
            assert!((p - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn too_large_is_rejected() {
        assert!(matches!(
            exhaustive_distribution(&RbmLayer::zeros(15, 6)),
            Err(Error::TooLarge { units: 21, limit: 20 })
        ));
    }

    #[test]
    fn conditionals_of_zero_layer_are_half() {
        let l = RbmLayer::zeros(4, 3);
        assert!(l.hidden_probs(&[1.0, 0.0, 1.0, 0.5]).unwrap().iter().all(|&p| p == 0.5));
        assert!(l.visible_probs(&[1.0, 0.0, 1.0]).unwrap().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn saturated_bias() {
        let mut l = RbmLayer::zeros(2, 1);
        l.hidden_bias_mut()[0] = 20.0;
        assert!(l.hidden_probs(&[0.3, 0.9]).unwrap()[0] >= 1.0 - 1e-8);
    }

    #[test]
    fn zero_learning_rate_keeps_initialisation() {
        let data = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]];
        let cfg = Cd1Config {
            learning_rate: 0.0,
            epochs: 5,
            seed: 4,
            ..Default::default()
        };
        let (trained, errs) = cd1_train_layer(&data, 2, &cfg).unwrap();
        let init = RbmLayer::random(3, 2, cfg.init_std, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(trained, init);
        assert_eq!(errs.len(), 5);
    }

    #[test]
    fn deterministic_under_seed() {
        let data: Vec<Vec<f64>> = (0..30).map(|i| bits(i % 16, 4)).collect();
        let cfg = Cd1Config { seed: 77, ..Default::default() };
        assert_eq!(cd1_train_layer(&data, 3, &cfg).unwrap(), cd1_train_layer(&data, 3, &cfg).unwrap());
        assert!(matches!(cd1_train_layer(&[], 3, &cfg), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn training_raises_probability_of_the_patterns() {
        let a = vec![1.0, 1.0, 0.0, 0.0];
        let b = vec![0.0, 0.0, 1.0, 1.0];
        let data: Vec<Vec<f64>> = (0..100).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        let idx = |v: &[f64]| v.iter().enumerate().map(|(i, x)| (*x as usize) << i).sum::<usize>();
        let mass = |l: &RbmLayer| {
            let d = exhaustive_distribution(l).unwrap();
            d.marginal_visible[idx(&a)] + d.marginal_visible[idx(&b)]
        };
        let cfg = Cd1Config {
            epochs: 200,
            learning_rate: 0.1,
            batch_size: 10,
            seed: 3,
            ..Default::default()
        };
        let init = RbmLayer::random(4, 2, cfg.init_std, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
        let (trained, _) = cd1_train_layer(&data, 2, &cfg).unwrap();
        let (before, after) = (mass(&init), mass(&trained));
        assert!(after > before + 0.2, "before {before}, after {after}");
    }

    /// P(h_y = 1 | v) computed directly from the enumerated joint.
    fn joint_hidden_conditional(d: &JointDistribution, v_bits: usize, y: usize) -> f64 {
        let nh = 1usize << d.hidden;
        let row: f64 = (0..nh).map(|j| d.p(v_bits, j)).sum();
        let on: f64 = (0..nh).filter(|j| j >> y & 1 == 1).map(|j| d.p(v_bits, j)).sum();
        on / row
    }

    fn joint_visible_conditional(d: &JointDistribution, h_bits: usize, x: usize) -> f64 {
        let nv = 1usize << d.visible;
        let col: f64 = (0..nv).map(|i| d.p(i, h_bits)).sum();
        let on: f64 = (0..nv).filter(|i| i >> x & 1 == 1).map(|i| d.p(i, h_bits)).sum();
        on / col
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn factorised_conditionals_match_joint(seed: u64, x in 1usize..7, y in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut l = RbmLayer::random(x, y, 1.0, &mut rng);
            for a in l.visible_bias_mut() { *a = rng.gen_range(-1.0..1.0); }
            for b in l.hidden_bias_mut() { *b = rng.gen_range(-1.0..1.0); }
            let d = exhaustive_distribution(&l).unwrap();
            prop_assert!((d.joint.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..1usize << x {
                let hp = l.hidden_probs(&bits(i, x)).unwrap();
                for (k, p) in hp.iter().enumerate() {
                    prop_assert!((p - joint_hidden_conditional(&d, i, k)).abs() < 1e-9);
                }
            }
            for j in 0..1usize << y {
                let vp = l.visible_probs(&bits(j, y)).unwrap();
                for (k, p) in vp.iter().enumerate() {
                    prop_assert!((p - joint_visible_conditional(&d, j, k)).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn energy_is_linear_in_parameters(seed: u64, delta in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = RbmLayer::random(3, 2, 1.0, &mut rng);
            let v = bits(rng.gen_range(0..8), 3);
            let h = bits(rng.gen_range(0..4), 2);
            let e = l.energy(&v, &h).unwrap();
            let mut shifted = l.clone();
            shifted.visible_bias_mut()[1] += delta;
            prop_assert!((shifted.energy(&v, &h).unwrap() - (e - delta * v[1])).abs() < 1e-12);
            let mut w = l.clone();
            w.set_weight(2, 1, l.weight(2, 1) + 1.0);
            prop_assert!((w.energy(&v, &h).unwrap() - (e - v[2] * h[1])).abs() < 1e-12);
        }
    }
}
