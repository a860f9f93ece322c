//! Finite MDPs with known dynamics: value iteration, exact policy
//! evaluation and a sampler for simulation-based learners.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    states: usize,
    actions: usize,
    /// `[s][a][s']`, flattened.
    transition: Vec<f64>,
    /// `[s][a][s']`, flattened.
    reward: Vec<f64>,
    discount: f64,
}

const ROW_TOLERANCE: f64 = 1e-9;

impl MdpSpec {
    pub fn new(states: usize, actions: usize, transition: Vec<f64>, reward: Vec<f64>, discount: f64) -> Result<Self> {
        let cells = states * actions * states;
        for len in [transition.len(), reward.len()] {
            if len != cells {
                return Err(Error::DimensionMismatch { expected: cells, found: len });
            }
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::Range {
                what: "discount",
                value: discount,
            });
        }
        for s in 0..states {
            for a in 0..actions {
                let row = &transition[(s * actions + a) * states..(s * actions + a + 1) * states];
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::NonStochasticTransition { state: s, action: a, sum });
                }
            }
        }
        Ok(MdpSpec {
            states,
            actions,
            transition,
            reward,
            discount,
        })
    }

    /// A deterministic MDP: `next[s][a]` with reward `reward[s][a]`.
    pub fn deterministic(next: &[Vec<usize>], reward: &[Vec<f64>], discount: f64) -> Result<Self> {
        let states = next.len();
        let actions = next.first().map_or(0, Vec::len);
        let mut t = vec![0.0; states * actions * states];
        let mut r = vec![0.0; states * actions * states];
        for s in 0..states {
            for a in 0..actions {
                let to = next[s][a];
                if to >= states {
                    return Err(Error::InvalidArgument(format!("transition to unknown state {to}")));
                }
                t[(s * actions + a) * states + to] = 1.0;
                r[(s * actions + a) * states + to] = reward[s][a];
            }
        }
        MdpSpec::new(states, actions, t, r, discount)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    fn at(&self, s: usize, a: usize, to: usize) -> usize {
        (s * self.actions + a) * self.states + to
    }

    pub fn probability(&self, s: usize, a: usize, to: usize) -> f64 {
        self.transition[self.at(s, a, to)]
    }

    pub fn reward(&self, s: usize, a: usize, to: usize) -> f64 {
        self.reward[self.at(s, a, to)]
    }

    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        (0..self.states)
            .map(|to| self.probability(s, a, to) * self.reward(s, a, to))
            .sum()
    }

    /// Expected one-step return of action `a` in `s` given next-state values.
    pub fn backup(&self, values: &[f64], s: usize, a: usize) -> f64 {
        (0..self.states)
            .map(|to| self.probability(s, a, to) * (self.reward(s, a, to) + self.discount * values[to]))
            .sum()
    }

    /// Samples `(next state, reward)`.
    pub fn step(&self, s: usize, a: usize, rng: &mut impl Rng) -> (usize, f64) {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for to in 0..self.states {
            let p = self.probability(s, a, to);
            if p > 0.0 {
                last = to;
                acc += p;
                if u < acc {
                    return (to, self.reward(s, a, to));
                }
            }
        }
        (last, self.reward(s, a, last))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIteration {
    pub values: Vec<f64>,
    /// Greedy action per state, lowest index on ties.
    pub policy: Vec<usize>,
    /// Sup-norm change of each sweep.
    pub deltas: Vec<f64>,
}

/// Iterates the Bellman optimality backup until the sup-norm change of a
/// sweep falls below `tol`.
pub fn value_iteration(mdp: &MdpSpec, tol: f64) -> ValueIteration {
    let n = mdp.states;
    let mut v = vec![0.0; n];
    let mut deltas = Vec::new();
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..mdp.actions)
                    .map(|a| mdp.backup(&v, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        deltas.push(delta);
        if delta < tol || mdp.actions == 0 {
            break;
        }
    }
    let policy = (0..n).map(|s| greedy_action(mdp, &v, s)).collect();
    ValueIteration {
        values: v,
        policy,
        deltas,
    }
}

pub fn greedy_action(mdp: &MdpSpec, values: &[f64], s: usize) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for a in 0..mdp.actions {
        let q = mdp.backup(values, s, a);
        if q > best_value {
            best = a;
            best_value = q;
        }
    }
    best
}

/// Exact `V^pi` of a deterministic policy from `(I - gamma P_pi) V = R_pi`.
pub fn evaluate_policy(mdp: &MdpSpec, policy: &[usize]) -> Result<Vec<f64>> {
    let n = mdp.states;
    if policy.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: policy.len(),
        });
    }
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        let a = policy[s];
        r[s] = mdp.expected_reward(s, a);
        for to in 0..n {
            m[(s, to)] -= mdp.discount * mdp.probability(s, a, to);
        }
    }
    let solved = m
        .lu()
        .solve(&r)
        .ok_or_else(|| Error::InvalidArgument("policy evaluation system is singular".into()))?;
    Ok(solved.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_discount_gives_best_immediate_reward() {
        let mdp = MdpSpec::deterministic(&[vec![0, 1], vec![1, 0]], &[vec![0.3, 0.8], vec![-1.0, 2.0]], 0.0).unwrap();
        let vi = value_iteration(&mdp, 1e-12);
        assert_eq!(vi.values, vec![0.8, 2.0]);
        assert_eq!(vi.policy, vec![1, 1]);
    }

    #[test]
    fn two_state_chain_closed_form() {
        // state 1 is the goal; its self-loop pays 1, state 0 moves to it.
        let mdp = MdpSpec::deterministic(&[vec![1, 0], vec![1, 1]], &[vec![0.0, 0.0], vec![1.0, 1.0]], 0.9).unwrap();
        let vi = value_iteration(&mdp, 1e-12);
        assert!((vi.values[1] - 10.0).abs() < 1e-9);
        assert!((vi.values[0] - 9.0).abs() < 1e-9);
        assert_eq!(vi.policy[0], 0);
        // brute force: discounted sum along the greedy path
        let brute: f64 = (1..2000).map(|t| 0.9f64.powi(t)).sum();
        assert!((vi.values[0] - brute).abs() < 1e-9);
    }

    #[test]
    fn sweeps_contract() {
        let mdp = MdpSpec::new(
            2,
            2,
            vec![0.5, 0.5, 0.1, 0.9, 0.7, 0.3, 0.0, 1.0],
            vec![1.0, 0.0, 0.5, 2.0, -1.0, 0.0, 0.3, 0.3],
            0.8,
        )
        .unwrap();
        let vi = value_iteration(&mdp, 1e-10);
        for w in vi.deltas.windows(2) {
            assert!(w[1] <= 0.8 * w[0] + 1e-12);
        }
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = MdpSpec::new(1, 1, vec![0.9], vec![0.0], 0.5).unwrap_err();
        assert!(matches!(err, Error::NonStochasticTransition { state: 0, action: 0, .. }));
    }

    #[test]
    fn exact_evaluation_matches_iteration() {
        let mdp = MdpSpec::deterministic(&[vec![1, 0], vec![1, 1]], &[vec![0.0, 0.0], vec![1.0, 1.0]], 0.9).unwrap();
        let v = evaluate_policy(&mdp, &[0, 0]).unwrap();
        assert!((v[0] - 9.0).abs() < 1e-12 && (v[1] - 10.0).abs() < 1e-12);
    }
}
