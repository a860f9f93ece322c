//! Learning agents. The IDS environment: the state is the discretized
//! record, the actions are alarm and pass, the reward is +1 for a correct
//! verdict and -1 otherwise, and the next state is the next record of the
//! shuffled episode.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::discretize::{Discretizer, StateId};
use super::mdp::MdpSpec;
use super::table::{q_update, sarsa_update, td_update, Action, QTable, VTable};
use crate::error::{Error, Result};
use crate::kdd::{BinaryClass, Row};

const IDS_ACTIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    QLearning,
    Sarsa,
}

/// How the step size evolves for a state-action pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSize {
    /// Always the configured learning rate.
    Constant,
    /// `learning_rate * ((1 + offset) / (n + offset))^power` on the `n`-th
    /// visit: flat for roughly `offset` visits, then polynomial decay.
    VisitDecay { power: f64, offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub start: f64,
    /// Multiplier applied once per episode.
    pub decay: f64,
    pub floor: f64,
}

impl Default for Exploration {
    fn default() -> Self {
        Exploration {
            start: 1.0,
            decay: 0.995,
            floor: 0.01,
        }
    }
}

impl Exploration {
    pub fn epsilon(&self, episode: usize) -> f64 {
        let decayed = self.start * self.decay.powi(episode.min(i32::MAX as usize) as i32);
        decayed.max(self.floor).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub step_size: StepSize,
    pub discount: f64,
    pub exploration: Exploration,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            learning_rate: 0.1,
            step_size: StepSize::Constant,
            discount: 0.9,
            exploration: Exploration::default(),
            episodes: 20,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.learning_rate) {
            return Err(Error::Range {
                what: "learning rate",
                value: self.learning_rate,
            });
        }
        if !open_unit(self.discount) {
            return Err(Error::Range {
                what: "discount",
                value: self.discount,
            });
        }
        let e = &self.exploration;
        for (what, v) in [("exploration start", e.start), ("exploration floor", e.floor)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Range { what, value: v });
            }
        }
        if !(e.decay > 0.0 && e.decay <= 1.0) {
            return Err(Error::Range {
                what: "exploration decay",
                value: e.decay,
            });
        }
        if let StepSize::VisitDecay { power, offset } = self.step_size {
            if !(power > 0.0 && power <= 1.0) {
                return Err(Error::Range {
                    what: "step size power",
                    value: power,
                });
            }
            if !(offset >= 0.0 && offset.is_finite()) {
                return Err(Error::Range {
                    what: "step size offset",
                    value: offset,
                });
            }
        }
        Ok(())
    }
}

/// Per-pair visit counts driving the step size.
struct Steps {
    rule: StepSize,
    base: f64,
    visits: HashMap<(u64, usize), u64>,
}

impl Steps {
    fn new(cfg: &AgentConfig) -> Self {
        Steps {
            rule: cfg.step_size,
            base: cfg.learning_rate,
            visits: HashMap::new(),
        }
    }

    fn next(&mut self, s: u64, a: usize) -> f64 {
        match self.rule {
            StepSize::Constant => self.base,
            StepSize::VisitDecay { power, offset } => {
                let n = self.visits.entry((s, a)).or_insert(0);
                *n += 1;
                self.base * ((1.0 + offset) / (*n as f64 + offset)).powf(power)
            }
        }
    }
}

fn epsilon_greedy(q: &QTable, s: StateId, actions: usize, epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..actions)
    } else {
        q.greedy(s, actions)
    }
}

pub fn reward(action: Action, truth: BinaryClass) -> f64 {
    if (action == Action::Alarm) == truth.is_intrusive() {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub epsilon: f64,
}

fn states_of(rows: &[Row], disc: &Discretizer) -> Result<Vec<StateId>> {
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    rows.iter().map(|r| disc.state(&r.features)).collect()
}

/// Trains Q-learning or SARSA on the labelled record stream.
pub fn train_agent(rows: &[Row], disc: &Discretizer, algorithm: Algorithm, cfg: &AgentConfig) -> Result<(QTable, Vec<EpisodeTrace>)> {
    cfg.validate()?;
    let states = states_of(rows, disc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut q = QTable::new();
    let mut steps = Steps::new(cfg);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut trace = Vec::with_capacity(cfg.episodes);
    let gamma = cfg.discount;

    for episode in 0..cfg.episodes {
        let eps = cfg.exploration.epsilon(episode);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut action = epsilon_greedy(&q, states[order[0]], IDS_ACTIONS, eps, &mut rng);
        for t in 0..order.len() {
            let i = order[t];
            let s = states[i];
            let r = reward(Action::ALL[action], rows[i].truth);
            total += r;
            let next = order.get(t + 1).map(|&j| states[j]);
            let alpha = steps.next(s, action);
            match algorithm {
                Algorithm::QLearning => {
                    q_update(&mut q, s, action, r, next, IDS_ACTIONS, alpha, gamma);
                    if let Some(n) = next {
                        action = epsilon_greedy(&q, n, IDS_ACTIONS, eps, &mut rng);
                    }
                }
                Algorithm::Sarsa => {
                    let next_action = next.map(|n| (n, epsilon_greedy(&q, n, IDS_ACTIONS, eps, &mut rng)));
                    sarsa_update(&mut q, s, action, r, next_action, alpha, gamma);
                    if let Some((_, a)) = next_action {
                        action = a;
                    }
                }
            }
        }
        trace.push(EpisodeTrace {
            episode,
            cumulative_reward: total,
            epsilon: eps,
        });
    }
    Ok((q, trace))
}

/// Intrusive iff Q(alarm) >= Q(pass); unseen states therefore raise an
/// alarm. The score is Q(alarm) - Q(pass).
pub fn rl_classify(q: &QTable, s: StateId) -> (BinaryClass, f64) {
    let diff = q.get(s, Action::Alarm as usize) - q.get(s, Action::Pass as usize);
    (BinaryClass::from_intrusive(diff >= 0.0), diff)
}

/// Two value tables, one per action: each is learned by TD(0) from the
/// reward that action would have earned on every transition, bootstrapping
/// from the next state's value under the greedy policy the tables define.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TdIds {
    pub alarm: VTable,
    pub pass: VTable,
}

impl TdIds {
    /// Intrusive iff V_alarm >= V_pass; the score is their difference.
    pub fn classify(&self, s: StateId) -> (BinaryClass, f64) {
        let diff = self.alarm.get(s) - self.pass.get(s);
        (BinaryClass::from_intrusive(diff >= 0.0), diff)
    }

    /// Value of `s` under the greedy policy.
    pub fn value(&self, s: StateId) -> f64 {
        self.alarm.get(s).max(self.pass.get(s))
    }
}

pub fn train_td_ids(rows: &[Row], disc: &Discretizer, cfg: &AgentConfig) -> Result<(TdIds, Vec<EpisodeTrace>)> {
    cfg.validate()?;
    let states = states_of(rows, disc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = TdIds::default();
    let mut steps = Steps::new(cfg);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut trace = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for t in 0..order.len() {
            let i = order[t];
            let s = states[i];
            let truth = rows[i].truth;
            let next = order.get(t + 1).map(|&j| states[j]);
            let taken = if model.classify(s).0.is_intrusive() { Action::Alarm } else { Action::Pass };
            total += reward(taken, truth);
            let alpha = steps.next(s, 0);
            // Both tables share one bootstrap value, so their difference
            // tracks the immediate advantage of alarming rather than each
            // action's own long-run average.
            let future = next.map_or(0.0, |n| model.value(n));
            for (table, action) in [(&mut model.alarm, Action::Alarm), (&mut model.pass, Action::Pass)] {
                let target = reward(action, truth) + cfg.discount * future;
                td_update(table, s, target, None, alpha, cfg.discount);
            }
        }
        trace.push(EpisodeTrace {
            episode,
            cumulative_reward: total,
            epsilon: 0.0,
        });
    }
    Ok((model, trace))
}

/// Learns Q on a simulated MDP. Every episode starts in a uniformly random
/// state and runs `horizon` steps.
pub fn train_on_mdp(mdp: &MdpSpec, algorithm: Algorithm, cfg: &AgentConfig, horizon: usize) -> Result<QTable> {
    cfg.validate()?;
    let actions = mdp.actions();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut q = QTable::new();
    let mut steps = Steps::new(cfg);
    for episode in 0..cfg.episodes {
        let eps = cfg.exploration.epsilon(episode);
        let mut s = rng.gen_range(0..mdp.states());
        let mut a = epsilon_greedy(&q, s as StateId, actions, eps, &mut rng);
        for _ in 0..horizon {
            let (to, r) = mdp.step(s, a, &mut rng);
            let alpha = steps.next(s as StateId, a);
            let next_a = epsilon_greedy(&q, to as StateId, actions, eps, &mut rng);
            match algorithm {
                Algorithm::QLearning => {
                    q_update(&mut q, s as StateId, a, r, Some(to as StateId), actions, alpha, mdp.discount());
                }
                Algorithm::Sarsa => {
                    sarsa_update(&mut q, s as StateId, a, r, Some((to as StateId, next_a)), alpha, mdp.discount());
                }
            }
            s = to;
            a = next_a;
        }
    }
    Ok(q)
}

/// TD(0) evaluation of a fixed deterministic policy on a simulated MDP.
pub fn td_evaluate_policy(mdp: &MdpSpec, policy: &[usize], cfg: &AgentConfig, horizon: usize) -> Result<VTable> {
    cfg.validate()?;
    if policy.len() != mdp.states() {
        return Err(Error::DimensionMismatch {
            expected: mdp.states(),
            found: policy.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v = VTable::default();
    let mut steps = Steps::new(cfg);
    for _ in 0..cfg.episodes {
        let mut s = rng.gen_range(0..mdp.states());
        for _ in 0..horizon {
            let (to, r) = mdp.step(s, policy[s], &mut rng);
            let alpha = steps.next(s as StateId, 0);
            td_update(&mut v, s as StateId, r, Some(to as StateId), alpha, mdp.discount());
            s = to;
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdd::AttackClass;

    fn single_state_rows(n: usize, class: AttackClass) -> (Vec<Row>, Discretizer) {
        let rows = vec![Row::new(vec![0.5], class); n];
        let disc = Discretizer::with_ranges(1, vec![0], vec![0.0], vec![1.0], 3).unwrap();
        (rows, disc)
    }

    #[test]
    fn always_intrusive_state_learns_to_alarm() {
        let (rows, disc) = single_state_rows(50, AttackClass::DoS);
        for alg in [Algorithm::QLearning, Algorithm::Sarsa] {
            let (q, trace) = train_agent(&rows, &disc, alg, &AgentConfig { episodes: 10, ..Default::default() }).unwrap();
            let s = disc.state(&rows[0].features).unwrap();
            assert!(q.get(s, Action::Alarm as usize) > q.get(s, Action::Pass as usize));
            assert_eq!(rl_classify(&q, s).0, BinaryClass::Intrusive);
            assert_eq!(trace.len(), 10);
        }
    }

    #[test]
    fn always_random_exploration_still_traces() {
        let (rows, disc) = single_state_rows(20, AttackClass::Normal);
        let cfg = AgentConfig {
            episodes: 4,
            exploration: Exploration {
                start: 1.0,
                decay: 1.0,
                floor: 1.0,
            },
            ..Default::default()
        };
        let (_, trace) = train_agent(&rows, &disc, Algorithm::QLearning, &cfg).unwrap();
        assert!(trace.iter().all(|t| t.epsilon == 1.0 && t.cumulative_reward.abs() <= 20.0));
    }

    #[test]
    fn deterministic_under_seed() {
        let rows: Vec<Row> = (0..60)
            .map(|i| Row::new(vec![(i % 7) as f64 / 7.0], if i % 3 == 0 { AttackClass::Probe } else { AttackClass::Normal }))
            .collect();
        let disc = Discretizer::with_ranges(1, vec![0], vec![0.0], vec![1.0], 3).unwrap();
        let cfg = AgentConfig { episodes: 5, seed: 11, ..Default::default() };
        let a = train_agent(&rows, &disc, Algorithm::Sarsa, &cfg).unwrap();
        let b = train_agent(&rows, &disc, Algorithm::Sarsa, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(train_td_ids(&rows, &disc, &cfg).unwrap(), train_td_ids(&rows, &disc, &cfg).unwrap());
    }

    #[test]
    fn classify_rules() {
        let mut q = QTable::new();
        q.set(0, Action::Alarm as usize, 1.0);
        assert_eq!(rl_classify(&q, 0).0, BinaryClass::Intrusive);
        assert_eq!(rl_classify(&q, 7).0, BinaryClass::Intrusive);
        q.set(1, Action::Alarm as usize, -1.0);
        assert_eq!(rl_classify(&q, 1).0, BinaryClass::Normal);
        assert_eq!(TdIds::default().classify(3).0, BinaryClass::Intrusive);
    }

    #[test]
    fn td_ids_separates_labels() {
        let rows: Vec<Row> = (0..40)
            .map(|i| {
                let bad = i % 2 == 0;
                Row::new(vec![if bad { 0.9 } else { 0.1 }], if bad { AttackClass::R2L } else { AttackClass::Normal })
            })
            .collect();
        let disc = Discretizer::with_ranges(1, vec![0], vec![0.0], vec![1.0], 3).unwrap();
        let (m, _) = train_td_ids(&rows, &disc, &AgentConfig { episodes: 20, ..Default::default() }).unwrap();
        for r in &rows {
            assert_eq!(m.classify(disc.state(&r.features).unwrap()).0, r.truth);
        }
    }

    #[test]
    fn td_ids_is_not_swayed_by_class_imbalance() {
        // four intrusive records per normal one
        let rows: Vec<Row> = (0..100)
            .map(|i| {
                let bad = i % 5 != 0;
                Row::new(vec![if bad { 0.9 } else { 0.1 }], if bad { AttackClass::DoS } else { AttackClass::Normal })
            })
            .collect();
        let disc = Discretizer::with_ranges(1, vec![0], vec![0.0], vec![1.0], 3).unwrap();
        let (m, _) = train_td_ids(&rows, &disc, &AgentConfig { episodes: 20, ..Default::default() }).unwrap();
        assert_eq!(m.classify(disc.state(&[0.1]).unwrap()).0, BinaryClass::Normal);
        assert_eq!(m.classify(disc.state(&[0.9]).unwrap()).0, BinaryClass::Intrusive);
    }

    #[test]
    fn bad_config_and_data() {
        let (rows, disc) = single_state_rows(3, AttackClass::Normal);
        let bad = AgentConfig { learning_rate: 1.0, ..Default::default() };
        assert!(train_agent(&rows, &disc, Algorithm::QLearning, &bad).is_err());
        assert!(matches!(
            train_agent(&[], &disc, Algorithm::QLearning, &AgentConfig::default()),
            Err(Error::EmptyTrainingSet)
        ));
        assert!(matches!(
            train_agent(&rows, &Discretizer::default(), Algorithm::QLearning, &AgentConfig::default()),
            Err(Error::UnfittedSpec)
        ));
    }
}
