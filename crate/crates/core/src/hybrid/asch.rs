//! Adaptive splitter that routes traffic between the anomaly and misuse
//! subsystems by tracking each one's smoothed TP/FP ratio.
//!
//! Subsystem 1 is the anomaly detector (E-DBSCAN), subsystem 2 the misuse
//! detector (random forest). Per window the ratios are smoothed as
//! `mu = alpha * mu + (1 - alpha) * (dTP + 1) / (dFP + 1)` and the indicator
//! `I = mu1 / mu2` decides whether the anomaly share grows or shrinks by one
//! step.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::edbscan::EDbscanModel;
use super::forest::Forest;
use crate::error::{Error, Result};
use crate::kdd::BinaryClass;
use crate::wsn::SlotBatch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AschConfig {
    /// Weight of the previous smoothed ratio.
    pub alpha: f64,
    /// Initial smoothed ratio of both subsystems.
    pub init: f64,
    /// Share moved per reallocation.
    pub step: f64,
    pub lower: f64,
    pub upper: f64,
    /// Starting anomaly share.
    pub initial_share: f64,
}

impl Default for AschConfig {
    fn default() -> Self {
        AschConfig {
            alpha: 0.7,
            init: 0.5,
            step: 0.05,
            lower: 0.1,
            upper: 0.9,
            initial_share: 0.5,
        }
    }
}

impl AschConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &'static str, value: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::Range { what, value })
            }
        };
        check(self.alpha > 0.0 && self.alpha < 1.0, "splitter alpha", self.alpha)?;
        check(self.init > 0.0 && self.init.is_finite(), "splitter initial ratio", self.init)?;
        check((0.0..=1.0).contains(&self.step), "splitter step", self.step)?;
        check(
            0.0 <= self.lower && self.lower <= self.upper && self.upper <= 1.0,
            "splitter lower bound",
            self.lower,
        )?;
        check(
            self.lower <= self.initial_share && self.initial_share <= self.upper,
            "splitter initial share",
            self.initial_share,
        )
    }
}

/// TP/FP counts of one window for both subsystems.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowCounts {
    pub tp_anomaly: u64,
    pub fp_anomaly: u64,
    pub tp_misuse: u64,
    pub fp_misuse: u64,
}

/// Add-one smoothed TP/FP ratio; finite for any counts.
pub fn smoothed_ratio(tp: u64, fp: u64) -> f64 {
    (tp as f64 + 1.0) / (fp as f64 + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AschState {
    pub config: AschConfig,
    pub mu_anomaly: f64,
    pub mu_misuse: f64,
    pub indicator: f64,
    pub prev_indicator: f64,
    pub share_anomaly: f64,
    pub share_misuse: f64,
    pub windows: u64,
}

impl AschState {
    pub fn new(config: AschConfig) -> Result<Self> {
        config.validate()?;
        let mut s = AschState {
            config,
            mu_anomaly: config.init,
            mu_misuse: config.init,
            indicator: 1.0,
            prev_indicator: 1.0,
            share_anomaly: 0.0,
            share_misuse: 0.0,
            windows: 0,
        };
        s.set_share(config.initial_share);
        Ok(s)
    }

    fn set_share(&mut self, anomaly: f64) {
        let (lo, hi) = (self.config.lower, self.config.upper);
        self.share_anomaly = anomaly.clamp(lo, hi);
        // 1 - x is exact for x >= 0.5 and otherwise within half an ulp, so
        // the sum below rounds back to exactly 1.
        self.share_misuse = (1.0 - self.share_anomaly).clamp(lo, hi);
    }

    fn smooth(&self, old: f64, window: f64) -> f64 {
        let a = self.config.alpha;
        // The clamp only absorbs rounding: a convex combination lies between
        // its two inputs.
        (a * old + (1.0 - a) * window).clamp(old.min(window), old.max(window))
    }

    /// Folds one window into both smoothed ratios and recomputes the
    /// indicator, remembering the previous one.
    pub fn ratio_update(&mut self, w: &WindowCounts) {
        self.mu_anomaly = self.smooth(self.mu_anomaly, smoothed_ratio(w.tp_anomaly, w.fp_anomaly));
        self.mu_misuse = self.smooth(self.mu_misuse, smoothed_ratio(w.tp_misuse, w.fp_misuse));
        self.prev_indicator = self.indicator;
        self.indicator = self.mu_anomaly / self.mu_misuse;
        self.windows += 1;
    }

    /// Moves one step of traffic toward the anomaly subsystem when the
    /// indicator rose, away from it when it fell.
    pub fn reallocate(&mut self) {
        let step = self.config.step;
        if self.indicator > self.prev_indicator {
            self.set_share(self.share_anomaly + step);
        } else if self.indicator < self.prev_indicator {
            self.set_share(self.share_anomaly - step);
        }
    }

    pub fn update(&mut self, w: &WindowCounts) {
        self.ratio_update(w);
        self.reallocate();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitterMode {
    /// Shares stay fixed; no labels are consulted.
    Frozen,
    /// Shares adapt after every window using the batch's labels.
    Tuning,
}

/// Verdict, score and which subsystem produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutedVerdict {
    pub verdict: BinaryClass,
    pub score: f64,
    pub anomaly: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub window: u64,
    pub mu_anomaly: f64,
    pub mu_misuse: f64,
    pub indicator: f64,
    pub share_anomaly: f64,
    pub share_misuse: f64,
    pub counts: WindowCounts,
}

impl TraceRow {
    fn of(state: &AschState, counts: WindowCounts) -> Self {
        TraceRow {
            window: state.windows,
            mu_anomaly: state.mu_anomaly,
            mu_misuse: state.mu_misuse,
            indicator: state.indicator,
            share_anomaly: state.share_anomaly,
            share_misuse: state.share_misuse,
            counts,
        }
    }
}

/// Classifies one slot batch. A seeded random `round(D_a * n)` records go
/// to the anomaly subsystem, the rest to the forest; verdicts come back in
/// batch order. In tuning mode the state is updated from this window.
pub fn hybrid_classify(
    state: &mut AschState,
    forest: &Forest,
    anomaly: &EDbscanModel,
    batch: &SlotBatch<'_>,
    seed: u64,
    mode: SplitterMode,
) -> Result<(Vec<RoutedVerdict>, TraceRow)> {
    let n = batch.records.len();
    let to_anomaly = ((state.share_anomaly * n as f64).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch.slot_index as u64);
    let mut routed = vec![false; n];
    for i in sample(&mut rng, n, to_anomaly) {
        routed[i] = true;
    }

    let mut counts = WindowCounts::default();
    let mut out = Vec::with_capacity(n);
    for (row, &use_anomaly) in batch.records.iter().zip(&routed) {
        let (verdict, score) = if use_anomaly {
            anomaly.classify(&row.features)?
        } else {
            forest.classify(&row.features)?
        };
        if verdict.is_intrusive() {
            let hit = row.truth.is_intrusive();
            match (use_anomaly, hit) {
                (true, true) => counts.tp_anomaly += 1,
                (true, false) => counts.fp_anomaly += 1,
                (false, true) => counts.tp_misuse += 1,
                (false, false) => counts.fp_misuse += 1,
            }
        }
        out.push(RoutedVerdict {
            verdict,
            score,
            anomaly: use_anomaly,
        });
    }
    if mode == SplitterMode::Tuning {
        state.update(&counts);
    }
    Ok((out, TraceRow::of(state, counts)))
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "window,mu_anomaly,mu_misuse,indicator,share_anomaly,share_misuse,tp_anomaly,fp_anomaly,tp_misuse,fp_misuse"
    )?;
    for r in rows {
        let c = r.counts;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.window,
            r.mu_anomaly,
            r.mu_misuse,
            r.indicator,
            r.share_anomaly,
            r.share_misuse,
            c.tp_anomaly,
            c.fp_anomaly,
            c.tp_misuse,
            c.fp_misuse
        )?;
    }
    out.flush()?;
    Ok(())
}
