//! Uniform training and frozen evaluation of the five detectors.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DetectorKind, ExperimentConfig};
use super::derive_seed;
use crate::error::{Error, Result};
use crate::hybrid::{
    edbscan_fit, hybrid_classify, suggest_eps, train_forest, AschConfig, AschState, EDbscanConfig, EDbscanModel,
    Forest, ForestConfig, SplitterMode, TraceRow,
};
use crate::kdd::{BinaryClass, Row};
use crate::metrics::ConfusionCounts;
use crate::rbm::{train_stack, Cd1Config, RbmStack, StackConfig};
use crate::rl::{
    rl_classify, train_agent, train_td_ids, AgentConfig, Algorithm, Discretizer, EpisodeTrace, Exploration, QTable,
    StepSize, TdIds,
};
use crate::wsn::{stream_slots, ClusterAssignment};

/// Smallest ε the elbow heuristic may return.
const EPS_FLOOR: f64 = 1e-6;

// Seed streams, so each component of a run draws independent randomness.
const STREAM_FOREST: u64 = 1;
const STREAM_EDBSCAN: u64 = 2;
const STREAM_SPLITTER: u64 = 3;
const STREAM_RBM: u64 = 4;
const STREAM_AGENT: u64 = 5;

/// A fitted detector. Evaluation only reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedDetector {
    Asch {
        forest: Forest,
        anomaly: EDbscanModel,
        splitter: AschState,
        splitter_seed: u64,
    },
    Rbc {
        stack: RbmStack,
    },
    Ql {
        discretizer: Discretizer,
        q: QTable,
    },
    Sarsa {
        discretizer: Discretizer,
        q: QTable,
    },
    Td {
        discretizer: Discretizer,
        tables: TdIds,
    },
}

/// Side information gathered while training.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainingLog {
    /// Splitter trajectory over the training stream (hybrid only).
    pub splitter: Vec<TraceRow>,
    /// Per-episode reward and exploration (RL only).
    pub episodes: Vec<EpisodeTrace>,
    /// ε actually used by the anomaly model (hybrid only).
    pub eps: Option<f64>,
}

pub fn forest_config(cfg: &ExperimentConfig, seed: u64) -> ForestConfig {
    ForestConfig {
        trees: cfg.forest_trees,
        features_per_split: cfg.forest_features,
        max_depth: cfg.forest_max_depth,
        min_leaf: cfg.forest_min_leaf,
        seed: derive_seed(seed, STREAM_FOREST),
    }
}

pub fn asch_config(cfg: &ExperimentConfig) -> AschConfig {
    AschConfig {
        alpha: cfg.asch_alpha,
        step: cfg.asch_step,
        lower: cfg.asch_lower,
        upper: cfg.asch_upper,
        ..AschConfig::default()
    }
}

pub fn stack_config(cfg: &ExperimentConfig, seed: u64) -> StackConfig {
    StackConfig {
        hidden_sizes: cfg.rbm_hidden.clone(),
        layer: Cd1Config {
            epochs: cfg.rbm_epochs,
            learning_rate: cfg.rbm_learning_rate,
            batch_size: cfg.rbm_batch,
            seed: derive_seed(seed, STREAM_RBM),
            ..Cd1Config::default()
        },
        ..StackConfig::default()
    }
}

pub fn agent_config(cfg: &ExperimentConfig, seed: u64) -> AgentConfig {
    AgentConfig {
        learning_rate: cfg.rl_learning_rate,
        step_size: StepSize::Constant,
        discount: cfg.rl_discount,
        exploration: Exploration {
            start: cfg.rl_epsilon_start,
            decay: cfg.rl_epsilon_decay,
            floor: cfg.rl_epsilon_floor,
        },
        episodes: cfg.rl_episodes,
        seed: derive_seed(seed, STREAM_AGENT),
    }
}

/// Fits the anomaly model on up to `edbscan.sample` normal training rows.
fn fit_anomaly(cfg: &ExperimentConfig, rows: &[Row], seed: u64) -> Result<(EDbscanModel, f64)> {
    let normal: Vec<&Row> = rows.iter().filter(|r| !r.truth.is_intrusive()).collect();
    if normal.is_empty() {
        return Err(Error::InvalidArgument("the anomaly model needs normal training rows".into()));
    }
    let take = normal.len().min(cfg.edbscan_sample);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_EDBSCAN));
    let mut picked = sample(&mut rng, normal.len(), take).into_vec();
    picked.sort_unstable();
    let points: Vec<Vec<f64>> = picked.iter().map(|&i| normal[i].features.clone()).collect();
    let eps = match cfg.edbscan_eps {
        Some(e) => e,
        None => suggest_eps(&points, cfg.edbscan_min_pts, EPS_FLOOR),
    };
    let model = edbscan_fit(
        &points,
        &EDbscanConfig {
            eps,
            min_pts: cfg.edbscan_min_pts,
            var_threshold: cfg.edbscan_var_threshold,
        },
    )?;
    Ok((model, eps))
}

/// Trains one detector on normalized training rows. The hybrid splitter is
/// tuned over the training stream dealt through `topology`.
pub fn train_detector(
    kind: DetectorKind,
    cfg: &ExperimentConfig,
    rows: &[Row],
    topology: &ClusterAssignment,
    seed: u64,
) -> Result<(TrainedDetector, TrainingLog)> {
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut log = TrainingLog::default();
    let detector = match kind {
        DetectorKind::Asch => {
            let forest = train_forest(rows, &forest_config(cfg, seed))?;
            let (anomaly, eps) = fit_anomaly(cfg, rows, seed)?;
            log.eps = Some(eps);
            let mut splitter = AschState::new(asch_config(cfg))?;
            let splitter_seed = derive_seed(seed, STREAM_SPLITTER);
            for batch in stream_slots(rows, topology, cfg.slot_length)? {
                let (_, row) = hybrid_classify(&mut splitter, &forest, &anomaly, &batch, splitter_seed, SplitterMode::Tuning)?;
                log.splitter.push(row);
            }
            TrainedDetector::Asch {
                forest,
                anomaly,
                splitter,
                splitter_seed,
            }
        }
        DetectorKind::Rbc => TrainedDetector::Rbc {
            stack: train_stack(rows, &stack_config(cfg, seed))?,
        },
        DetectorKind::Ql | DetectorKind::Sarsa | DetectorKind::Td => {
            let view: Vec<&[f64]> = rows.iter().map(|r| r.features.as_slice()).collect();
            let discretizer = Discretizer::fit(&view, cfg.rl_features, cfg.rl_bins)?;
            let agent = agent_config(cfg, seed);
            match kind {
                DetectorKind::Td => {
                    let (tables, trace) = train_td_ids(rows, &discretizer, &agent)?;
                    log.episodes = trace;
                    TrainedDetector::Td { discretizer, tables }
                }
                DetectorKind::Ql => {
                    let (q, trace) = train_agent(rows, &discretizer, Algorithm::QLearning, &agent)?;
                    log.episodes = trace;
                    TrainedDetector::Ql { discretizer, q }
                }
                _ => {
                    let (q, trace) = train_agent(rows, &discretizer, Algorithm::Sarsa, &agent)?;
                    log.episodes = trace;
                    TrainedDetector::Sarsa { discretizer, q }
                }
            }
        }
    };
    Ok((detector, log))
}

/// Outcome of streaming a test set past a frozen detector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evaluation {
    pub counts: ConfusionCounts,
    /// (score, truth) per record in stream order; higher is more intrusive.
    pub scored: Vec<(f64, BinaryClass)>,
    /// Confusion counts per attack group.
    pub per_class: BTreeMap<String, ConfusionCounts>,
    /// Splitter state after every window (hybrid only).
    pub trace: Vec<TraceRow>,
    pub slots: usize,
}

impl TrainedDetector {
    pub fn kind(&self) -> DetectorKind {
        match self {
            TrainedDetector::Asch { .. } => DetectorKind::Asch,
            TrainedDetector::Rbc { .. } => DetectorKind::Rbc,
            TrainedDetector::Ql { .. } => DetectorKind::Ql,
            TrainedDetector::Sarsa { .. } => DetectorKind::Sarsa,
            TrainedDetector::Td { .. } => DetectorKind::Td,
        }
    }

    /// Verdict and score for one encoded, normalized record. The hybrid's
    /// routing needs a whole batch, so it is handled by
    /// [`TrainedDetector::evaluate`] only.
    pub fn classify_one(&self, x: &[f64]) -> Result<(BinaryClass, f64)> {
        match self {
            TrainedDetector::Asch { .. } => Err(Error::InvalidArgument("the hybrid classifies whole batches".into())),
            TrainedDetector::Rbc { stack } => stack.verdict(x),
            TrainedDetector::Ql { discretizer, q } | TrainedDetector::Sarsa { discretizer, q } => {
                Ok(rl_classify(q, discretizer.state(x)?))
            }
            TrainedDetector::Td { discretizer, tables } => Ok(tables.classify(discretizer.state(x)?)),
        }
    }

    /// Streams `rows` slot by slot through the detector. The detector is
    /// never modified; with `tune_splitter` the hybrid adapts a private
    /// copy of its splitter as it goes.
    pub fn evaluate(
        &self,
        rows: &[Row],
        topology: &ClusterAssignment,
        slot_length: usize,
        tune_splitter: bool,
    ) -> Result<Evaluation> {
        let mut ev = Evaluation::default();
        let mut splitter = match self {
            TrainedDetector::Asch { splitter, .. } => Some(splitter.clone()),
            _ => None,
        };
        let mode = if tune_splitter { SplitterMode::Tuning } else { SplitterMode::Frozen };
        for batch in stream_slots(rows, topology, slot_length)? {
            ev.slots += 1;
            let verdicts: Vec<(BinaryClass, f64)> = match (self, splitter.as_mut()) {
                (
                    TrainedDetector::Asch {
                        forest,
                        anomaly,
                        splitter_seed,
                        ..
                    },
                    Some(state),
                ) => {
                    // Evaluation routing draws from its own seed, apart from training.
                    let seed = derive_seed(*splitter_seed, 1);
                    let (routed, trace) = hybrid_classify(state, forest, anomaly, &batch, seed, mode)?;
                    ev.trace.push(trace);
                    routed.into_iter().map(|r| (r.verdict, r.score)).collect()
                }
                _ => batch
                    .records
                    .iter()
                    .map(|r| self.classify_one(&r.features))
                    .collect::<Result<_>>()?,
            };
            for (row, (verdict, score)) in batch.records.iter().zip(verdicts) {
                ev.counts.accumulate(verdict, row.truth);
                ev.per_class
                    .entry(row.class.to_string())
                    .or_default()
                    .accumulate(verdict, row.truth);
                ev.scored.push((score, row.truth));
            }
        }
        Ok(ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdd::AttackClass;
    use crate::wsn::Cluster;

    fn topology() -> ClusterAssignment {
        ClusterAssignment {
            clusters: vec![
                Cluster {
                    head: 0,
                    members: vec![1],
                    head_trust: 0.9,
                },
                Cluster {
                    head: 2,
                    members: vec![3],
                    head_trust: 0.8,
                },
            ],
        }
    }

    /// Label decided by feature 0; the rest is noise.
    fn rows(n: usize, seed: u64) -> Vec<Row> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let bad = rng.gen_bool(0.5);
                let mut x: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..0.1)).collect();
                x[0] = if bad { 0.9 + x[0] } else { x[0] };
                Row::new(x, if bad { AttackClass::DoS } else { AttackClass::Normal })
            })
            .collect()
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            forest_trees: 5,
            rbm_hidden: vec![4, 3],
            rbm_epochs: 5,
            rl_features: 2,
            slot_length: 25,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn every_detector_separates_the_toy_set() {
        let cfg = small_config();
        let (train, test) = (rows(400, 1), rows(200, 2));
        for kind in DetectorKind::ALL {
            let (det, log) = train_detector(kind, &cfg, &train, &topology(), 9).unwrap();
            assert_eq!(det.kind(), kind);
            let ev = det.evaluate(&test, &topology(), cfg.slot_length, false).unwrap();
            assert_eq!(ev.counts.total(), 200);
            assert_eq!(ev.scored.len(), 200);
            assert_eq!(ev.slots, 8);
            let ar = ev.counts.accuracy_rate().unwrap();
            assert!(ar > 0.95, "{kind}: {ar}");
            match kind {
                DetectorKind::Asch => {
                    assert_eq!(log.splitter.len(), 16);
                    assert_eq!(ev.trace.len(), 8);
                }
                DetectorKind::Rbc => assert!(log.episodes.is_empty()),
                _ => assert_eq!(log.episodes.len(), cfg.rl_episodes),
            }
        }
    }

    #[test]
    fn frozen_evaluation_leaves_the_splitter_alone() {
        let cfg = small_config();
        let (det, _) = train_detector(DetectorKind::Asch, &cfg, &rows(300, 3), &topology(), 1).unwrap();
        let before = det.clone();
        let ev = det.evaluate(&rows(100, 4), &topology(), 10, false).unwrap();
        assert_eq!(det, before);
        let shares: Vec<f64> = ev.trace.iter().map(|t| t.share_anomaly).collect();
        assert!(shares.windows(2).all(|w| w[0] == w[1]));
        // tuning only touches the private copy
        det.evaluate(&rows(100, 4), &topology(), 10, true).unwrap();
        assert_eq!(det, before);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small_config();
        let train = rows(300, 5);
        for kind in DetectorKind::ALL {
            let a = train_detector(kind, &cfg, &train, &topology(), 3).unwrap().0;
            let b = train_detector(kind, &cfg, &train, &topology(), 3).unwrap().0;
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap(),
                "{kind}"
            );
        }
    }

    #[test]
    fn anomaly_model_needs_normal_rows() {
        let cfg = small_config();
        let train: Vec<Row> = rows(100, 6).into_iter().filter(|r| r.truth.is_intrusive()).collect();
        assert!(train_detector(DetectorKind::Asch, &cfg, &train, &topology(), 0).is_err());
        assert!(matches!(
            train_detector(DetectorKind::Ql, &cfg, &[], &topology(), 0),
            Err(Error::EmptyTrainingSet)
        ));
    }
}
