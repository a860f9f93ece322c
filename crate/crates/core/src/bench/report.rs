//! Report files: metrics JSON, ROC points, splitter trace, topology,
//! comparison tables and run timings.
//!
//! Everything except `timing.json` is a pure function of the config and
//! seed, so reruns reproduce the files byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::config::DetectorKind;
use super::experiment::{Aggregate, RunReport};
use crate::error::Result;
use crate::hybrid::asch::write_trace_csv;
use crate::metrics::write_roc_csv;
use crate::wsn::write_topology_json;

/// Metric columns, in table order.
pub const METRICS: [&str; 7] = ["ar", "dr", "fnr", "precision", "recall", "f1", "auc"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    /// Detector name, suffixed with `_<k>` when it repeats.
    pub label: String,
    pub detector: DetectorKind,
    pub runs: usize,
    pub metrics: BTreeMap<String, Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

fn labels(reports: &[RunReport]) -> Vec<String> {
    let mut seen: BTreeMap<DetectorKind, usize> = BTreeMap::new();
    reports
        .iter()
        .map(|r| {
            let k = seen.entry(r.detector).or_default();
            *k += 1;
            if *k == 1 {
                r.detector.to_string()
            } else {
                format!("{}_{k}", r.detector)
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Comparison {
    pub fn from_reports(reports: &[RunReport]) -> Self {
        let rows = reports
            .iter()
            .zip(labels(reports))
            .map(|(r, label)| ComparisonRow {
                label,
                detector: r.detector,
                runs: r.runs.len(),
                metrics: r.aggregate.clone(),
            })
            .collect();
        Comparison { rows }
    }

    /// `detector,runs,ar_mean,ar_ci,...`; undefined values are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("detector,runs");
        for m in METRICS {
            let _ = write!(out, ",{m}_mean,{m}_ci");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.label, row.runs);
            for m in METRICS {
                let a = row.metrics.get(m);
                let _ = write!(
                    out,
                    ",{},{}",
                    cell(a.and_then(|a| a.mean)),
                    cell(a.and_then(|a| a.half_width))
                );
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width text table with `mean ± half-width` cells.
    pub fn render_table(&self) -> String {
        let mut out = format!("{:<10}", "detector");
        for m in METRICS {
            let _ = write!(out, " {m:>17}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<10}", row.label);
            for m in METRICS {
                let text = match row.metrics.get(m).and_then(|a| a.mean.zip(a.half_width)) {
                    Some((mean, hw)) => format!("{mean:.4} ± {hw:.4}"),
                    None => "n/a".to_string(),
                };
                let _ = write!(out, " {text:>17}");
            }
            out.push('\n');
        }
        out
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Timing<'a> {
    detector: DetectorKind,
    run_seconds: &'a [f64],
    total_seconds: f64,
}

fn timing(report: &RunReport) -> Timing<'_> {
    Timing {
        detector: report.detector,
        run_seconds: &report.wall_clock,
        total_seconds: report.wall_clock.iter().sum(),
    }
}

fn write_artifacts(dir: &Path, report: &RunReport, label: &str) -> Result<()> {
    if let Some(roc) = &report.artifacts.roc {
        write_roc_csv(&dir.join(format!("roc_{label}.csv")), roc)?;
    }
    if report.detector == DetectorKind::Asch {
        write_trace_csv(&dir.join("splitter_trace.csv"), &report.artifacts.trace)?;
    }
    Ok(())
}

/// Writes `metrics.json`, `roc_<detector>.csv`, `splitter_trace.csv`
/// (hybrid only), `comparison.csv`, `topology.json` and `timing.json`.
pub fn write_experiment(dir: &Path, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("metrics.json"), report)?;
    write_artifacts(dir, report, report.detector.as_str())?;
    if let Some(topo) = &report.artifacts.topology {
        write_topology_json(&dir.join("topology.json"), &report.artifacts.nodes, topo)?;
    }
    let table = Comparison::from_reports(std::slice::from_ref(report));
    fs::write(dir.join("comparison.csv"), table.to_csv())?;
    write_json(&dir.join("timing.json"), &timing(report))?;
    Ok(())
}

/// Writes the comparison CSV and text table, every report in
/// `metrics.json`, one ROC file per row and the shared topology.
pub fn write_comparison(dir: &Path, comparison: &Comparison, reports: &[RunReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("comparison.csv"), comparison.to_csv())?;
    fs::write(dir.join("comparison.txt"), comparison.render_table())?;
    let by_label: BTreeMap<&str, &RunReport> = comparison
        .rows
        .iter()
        .map(|r| r.label.as_str())
        .zip(reports)
        .collect();
    write_json(&dir.join("metrics.json"), &by_label)?;
    for (row, report) in comparison.rows.iter().zip(reports) {
        write_artifacts(dir, report, &row.label)?;
    }
    if let Some(first) = reports.first() {
        if let Some(topo) = &first.artifacts.topology {
            write_topology_json(&dir.join("topology.json"), &first.artifacts.nodes, topo)?;
        }
    }
    let timings: BTreeMap<&str, Timing<'_>> = by_label.iter().map(|(k, r)| (*k, timing(r))).collect();
    write_json(&dir.join("timing.json"), &timings)?;
    Ok(())
}

/// `seed,ar_mean,ar_ci,...` per swept master seed.
pub fn write_sweep_csv(path: &Path, seeds: &[u64], reports: &[RunReport]) -> Result<()> {
    let mut out = String::from("seed");
    for m in METRICS {
        let _ = write!(out, ",{m}_mean,{m}_ci");
    }
    out.push('\n');
    for (seed, r) in seeds.iter().zip(reports) {
        let _ = write!(out, "{seed}");
        for m in METRICS {
            let a = r.aggregate.get(m);
            let _ = write!(
                out,
                ",{},{}",
                cell(a.and_then(|a| a.mean)),
                cell(a.and_then(|a| a.half_width))
            );
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::experiment::RunArtifacts;

    fn report(detector: DetectorKind, ar: f64) -> RunReport {
        let mut aggregate = BTreeMap::new();
        for m in METRICS {
            aggregate.insert(m.to_string(), Aggregate::of(&[ar]));
        }
        aggregate.insert("auc".into(), Aggregate::of(&[]));
        RunReport {
            detector,
            splitter: None,
            config: BTreeMap::new(),
            runs: Vec::new(),
            aggregate,
            wall_clock: vec![0.5],
            artifacts: RunArtifacts::default(),
        }
    }

    #[test]
    fn one_row_per_report_with_unique_labels() {
        let c = Comparison::from_reports(&[
            report(DetectorKind::Ql, 1.0),
            report(DetectorKind::Td, 0.5),
            report(DetectorKind::Ql, 1.0),
        ]);
        let labels: Vec<&str> = c.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["ql", "td", "ql_2"]);
        let csv = c.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("detector,runs,ar_mean,ar_ci,dr_mean"));
        // undefined AUC renders as empty cells
        assert!(csv.lines().nth(2).unwrap().ends_with(",0.5,0,,"));
        let table = c.render_table();
        assert!(table.contains("1.0000 ± 0.0000") && table.contains("n/a"));
    }

    #[test]
    fn experiment_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        write_experiment(dir.path(), &report(DetectorKind::Asch, 0.9)).unwrap();
        for f in ["metrics.json", "comparison.csv", "timing.json", "splitter_trace.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let sweep = dir.path().join("sweep.csv");
        write_sweep_csv(&sweep, &[1, 2], &[report(DetectorKind::Ql, 1.0), report(DetectorKind::Ql, 0.0)]).unwrap();
        let text = fs::read_to_string(sweep).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().starts_with("2,0,0,"));
    }
}
