//! Confusion accounting, rate metrics and ROC analysis.
//!
//! `detection_rate` is TP / (TP + FP) as the detectors' evaluation defines
//! it, which coincides with precision; conventional recall TP / (TP + FN)
//! is always reported next to it. `false_negative_rate` divides by the
//! total record count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::{Add, AddAssign};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdd::BinaryClass;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Increments exactly one counter.
    pub fn accumulate(&mut self, verdict: BinaryClass, truth: BinaryClass) {
        match (verdict.is_intrusive(), truth.is_intrusive()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (BinaryClass, BinaryClass)>,
    {
        let mut c = ConfusionCounts::default();
        for (v, t) in pairs {
            c.accumulate(v, t);
        }
        c
    }

    pub fn accuracy_rate(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyCounts);
        }
        Ok((self.tp + self.tn) as f64 / total as f64)
    }

    pub fn detection_rate(&self) -> Result<f64> {
        let flagged = self.tp + self.fp;
        if flagged == 0 {
            return Err(Error::NoPositiveVerdicts);
        }
        Ok(self.tp as f64 / flagged as f64)
    }

    pub fn false_negative_rate(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyCounts);
        }
        Ok(self.fn_ as f64 / total as f64)
    }

    pub fn precision(&self) -> Result<f64> {
        let d = self.tp + self.fp;
        if d == 0 {
            return Err(Error::UndefinedMetric("precision"));
        }
        Ok(self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Result<f64> {
        let d = self.tp + self.fn_;
        if d == 0 {
            return Err(Error::UndefinedMetric("recall"));
        }
        Ok(self.tp as f64 / d as f64)
    }

    /// (precision, recall, F1). F1 is 0 when both precision and recall are 0.
    pub fn precision_recall_f1(&self) -> Result<(f64, f64, f64)> {
        let p = self.precision()?;
        let r = self.recall()?;
        Ok((p, r, f1(p, r)))
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: ConfusionCounts) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps the decision threshold over distinct scores in descending order
/// (higher score = more intrusive). Equal scores form a single step. AUC by
/// the trapezoid rule.
pub fn roc_curve(scored: &[(f64, BinaryClass)]) -> Result<RocCurve> {
    let pos = scored.iter().filter(|s| s.1.is_intrusive()).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<(f64, bool)> = scored.iter().map(|&(s, t)| (s, t.is_intrusive())).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (pos as f64, neg as f64);
    let mut points = vec![(0.0, 0.0)];
    // Twice the area in integer units, so the AUC is exact up to one division.
    let mut twice_area: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let (prev_tp, prev_fp) = (tp, fp);
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(fp - prev_fp) * u128::from(tp + prev_tp);
        points.push((fp as f64 / n, tp as f64 / p));
    }
    let auc = twice_area as f64 / (2.0 * p * n);
    Ok(RocCurve { points, auc })
}

/// ROC points as `fpr,tpr` lines.
pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "fpr,tpr")?;
    for (x, y) in &curve.points {
        writeln!(out, "{x},{y}")?;
    }
    out.flush()?;
    Ok(())
}

/// All metrics of one evaluation. Undefined ratios serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ar: Option<f64>,
    pub dr: Option<f64>,
    pub fnr: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub counts: ConfusionCounts,
}

impl MetricsReport {
    pub fn from_counts(counts: ConfusionCounts, auc: Option<f64>) -> Self {
        let precision = counts.precision().ok();
        let recall = counts.recall().ok();
        MetricsReport {
            ar: counts.accuracy_rate().ok(),
            dr: counts.detection_rate().ok(),
            fnr: counts.false_negative_rate().ok(),
            precision,
            recall,
            f1: precision.zip(recall).map(|(p, r)| f1(p, r)),
            auc,
            counts,
        }
    }

    /// Named metric values in a fixed order.
    pub fn values(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("ar", self.ar),
            ("dr", self.dr),
            ("fnr", self.fnr),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("auc", self.auc),
        ]
    }
}
