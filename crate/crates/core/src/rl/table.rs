//! Action-value and state-value tables and their one-step updates.
//!
//! All three rules blend the old value with a target as
//! `(1 - alpha) * old + alpha * target`, so a SARSA step whose next action
//! is the greedy one is bit-identical to a Q-learning step.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::discretize::StateId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Alarm,
    Pass,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Alarm, Action::Pass];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Alarm => "alarm",
            Action::Pass => "pass",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alarm" => Ok(Action::Alarm),
            "pass" => Ok(Action::Pass),
            other => Err(Error::InvalidArgument(format!("unknown action {other:?}"))),
        }
    }
}

/// Tabular Q over a generic action index. Unseen pairs read as 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    values: HashMap<(StateId, usize), f64>,
}

impl QTable {
    pub fn new() -> Self {
        QTable::default()
    }

    pub fn get(&self, s: StateId, a: usize) -> f64 {
        self.values.get(&(s, a)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, s: StateId, a: usize, value: f64) {
        self.values.insert((s, a), value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains_state(&self, s: StateId, actions: usize) -> bool {
        (0..actions).any(|a| self.values.contains_key(&(s, a)))
    }

    pub fn max_value(&self, s: StateId, actions: usize) -> f64 {
        (0..actions).map(|a| self.get(s, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-valued action, lowest index on ties.
    pub fn greedy(&self, s: StateId, actions: usize) -> usize {
        let mut best = 0;
        for a in 1..actions {
            if self.get(s, a) > self.get(s, best) {
                best = a;
            }
        }
        best
    }

    pub fn entries(&self) -> impl Iterator<Item = ((StateId, usize), f64)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }
}

/// Serialized as `"state:action" -> value`, with IDS actions by name.
impl Serialize for QTable {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<(StateId, usize), f64> = self.values.iter().map(|(k, v)| (*k, *v)).collect();
        let named: Vec<(String, f64)> = map
            .into_iter()
            .map(|((s, a), v)| {
                let action = Action::ALL.get(a).map_or_else(|| a.to_string(), |x| x.as_str().to_string());
                (format!("{s}:{action}"), v)
            })
            .collect();
        ser.collect_map(named)
    }
}

impl<'de> Deserialize<'de> for QTable {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw: BTreeMap<String, f64> = BTreeMap::deserialize(de)?;
        let mut q = QTable::new();
        for (key, v) in raw {
            let (s, a) = key
                .split_once(':')
                .ok_or_else(|| D::Error::custom(format!("bad q-table key {key:?}")))?;
            let s: StateId = s.parse().map_err(D::Error::custom)?;
            let a = match a.parse::<Action>() {
                Ok(action) => action as usize,
                Err(_) => a.parse().map_err(D::Error::custom)?,
            };
            q.set(s, a, v);
        }
        Ok(q)
    }
}

/// Tabular state values. Unseen states read as 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VTable {
    values: BTreeMap<StateId, f64>,
}

impl VTable {
    pub fn get(&self, s: StateId) -> f64 {
        self.values.get(&s).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, s: StateId, v: f64) {
        self.values.insert(s, v);
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.values.contains_key(&s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn blend(old: f64, target: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * old + alpha * target
}

/// Q-learning: bootstraps from the best next action. `next = None` marks a
/// terminal transition.
#[allow(clippy::too_many_arguments)]
pub fn q_update(q: &mut QTable, s: StateId, a: usize, r: f64, next: Option<StateId>, actions: usize, alpha: f64, gamma: f64) {
    let future = next.map_or(0.0, |n| q.max_value(n, actions));
    let v = blend(q.get(s, a), r + gamma * future, alpha);
    q.set(s, a, v);
}

/// SARSA: bootstraps from the action actually taken next.
pub fn sarsa_update(q: &mut QTable, s: StateId, a: usize, r: f64, next: Option<(StateId, usize)>, alpha: f64, gamma: f64) {
    let future = next.map_or(0.0, |(n, b)| q.get(n, b));
    let v = blend(q.get(s, a), r + gamma * future, alpha);
    q.set(s, a, v);
}

/// TD(0) state-value update.
pub fn td_update(v: &mut VTable, s: StateId, r: f64, next: Option<StateId>, alpha: f64, gamma: f64) {
    let future = next.map_or(0.0, |n| v.get(n));
    let value = blend(v.get(s), r + gamma * future, alpha);
    v.set(s, value);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    #[test]
    fn q_update_examples() {
        let mut q = QTable::new();
        q.set(1, 0, 7.0);
        q.set(2, 1, 3.0);
        q_update(&mut q, 1, 0, 2.5, Some(2), 2, 1.0, 0.0);
        assert_eq!(q.get(1, 0), 2.5);

        let mut q = QTable::new();
        q_update(&mut q, 0, 1, 1.0, Some(0), 2, 0.5, 0.9);
        assert_eq!(q.get(0, 1), 0.5);
    }

    #[test]
    fn sarsa_examples() {
        let mut q = QTable::new();
        q.set(4, 0, -2.0);
        sarsa_update(&mut q, 4, 0, 1.5, Some((5, 1)), 1.0, 0.0);
        assert_eq!(q.get(4, 0), 1.5);
        let mut q = QTable::new();
        sarsa_update(&mut q, 0, 0, 1.0, Some((1, 0)), 0.5, 0.9);
        assert_eq!(q.get(0, 0), 0.5);
    }

    #[test]
    fn td_examples() {
        let mut v = VTable::default();
        v.set(3, 9.0);
        td_update(&mut v, 3, -1.0, Some(4), 1.0, 0.0);
        assert_eq!(v.get(3), -1.0);
        let mut v = VTable::default();
        td_update(&mut v, 0, 1.0, Some(1), 0.5, 1.0);
        assert_eq!(v.get(0), 0.5);
    }

    #[test]
    fn self_loop_converges_to_geometric_sum() {
        let (r, gamma) = (1.0, 0.9);
        let fixed = r / (1.0 - gamma);
        let mut q = QTable::new();
        let mut v = VTable::default();
        for _ in 0..2000 {
            q_update(&mut q, 0, 0, r, Some(0), 1, 0.5, gamma);
            td_update(&mut v, 0, r, Some(0), 0.5, gamma);
        }
        assert!((q.get(0, 0) - fixed).abs() < 1e-6);
        assert!((v.get(0) - fixed).abs() < 1e-6);
    }

    #[test]
    fn unseen_lookup_does_not_insert() {
        let q = QTable::new();
        assert_eq!(q.get(99, 1), 0.0);
        assert!(q.is_empty());
    }

    #[test]
    fn json_keys_name_the_action() {
        let mut q = QTable::new();
        q.set(12, Action::Alarm as usize, 0.25);
        q.set(3, Action::Pass as usize, -1.0);
        let text = serde_json::to_string(&q).unwrap();
        assert_eq!(text, r#"{"3:pass":-1.0,"12:alarm":0.25}"#);
        let back: QTable = serde_json::from_str(&text).unwrap();
        assert_eq!(back, q);
    }

    proptest! {
        #[test]
        fn greedy_sarsa_step_equals_q_step(
            vals in proptest::collection::vec(-5.0f64..5.0, 4),
            r in -1.0f64..1.0, alpha in 0.01f64..0.99, gamma in 0.01f64..0.99,
        ) {
            let mut base = QTable::new();
            base.set(0, 0, vals[0]);
            base.set(0, 1, vals[1]);
            base.set(1, 0, vals[2]);
            base.set(1, 1, vals[3]);
            let mut a = base.clone();
            let mut b = base.clone();
            q_update(&mut a, 0, 1, r, Some(1), 2, alpha, gamma);
            let greedy = base.greedy(1, 2);
            sarsa_update(&mut b, 0, 1, r, Some((1, greedy)), alpha, gamma);
            prop_assert_eq!(a.get(0, 1).to_bits(), b.get(0, 1).to_bits());
            // other entries untouched
            for (s, act) in [(0, 0), (1, 0), (1, 1)] {
                prop_assert_eq!(a.get(s, act), base.get(s, act));
                prop_assert_eq!(b.get(s, act), base.get(s, act));
            }
            prop_assert!(a.len() == 4);
        }
    }
}
