//! Labeled, encoded datasets: loading, normalization and seeded splitting.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoding::{encoded_column_names, EncodingTable};
use super::labels::{AttackClass, BinaryClass, LabelMap};
use super::record::{parse_record, ConnectionRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub features: Vec<f64>,
    pub class: AttackClass,
    pub truth: BinaryClass,
}

impl Row {
    pub fn new(features: Vec<f64>, class: AttackClass) -> Self {
        Row {
            features,
            truth: class.binary(),
            class,
        }
    }
}

/// Counts gathered while reading a KDD file. Rejected lines are never
/// dropped silently; each lands in one of the counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: usize,
    pub parsed: usize,
    pub field_count_errors: usize,
    pub numeric_errors: usize,
    pub unknown_labels: BTreeMap<String, usize>,
    pub label_counts: BTreeMap<String, usize>,
    pub class_counts: BTreeMap<String, usize>,
    pub unseen_categories: usize,
}

impl IngestReport {
    pub fn unknown_label_total(&self) -> usize {
        self.unknown_labels.values().sum()
    }
}

/// Parses every non-empty line of a KDD-format file. Lines are parsed in
/// parallel and returned in file order.
pub fn read_records(path: &Path) -> Result<(Vec<ConnectionRecord>, IngestReport)> {
    let file = File::open(path).map_err(|e| Error::Dataset {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    Ok(parse_lines(lines.iter().map(String::as_str).collect()))
}

pub fn parse_lines(lines: Vec<&str>) -> (Vec<ConnectionRecord>, IngestReport) {
    let parsed: Vec<Result<ConnectionRecord>> = lines
        .par_iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse_record(l))
        .collect();
    let mut report = IngestReport {
        lines: parsed.len(),
        ..Default::default()
    };
    let mut records = Vec::with_capacity(parsed.len());
    for r in parsed {
        match r {
            Ok(rec) => {
                *report.label_counts.entry(rec.label.clone()).or_default() += 1;
                records.push(rec);
            }
            Err(Error::FieldCount { .. }) => report.field_count_errors += 1,
            Err(_) => report.numeric_errors += 1,
        }
    }
    report.parsed = records.len();
    (records, report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationBounds {
    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// Min-max maps each feature into [0, 1]; constant features map to 0 and
    /// values outside the fitted range are clamped.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                found: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                let range = hi - lo;
                if range > 0.0 {
                    ((x - lo) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub rows: Vec<Row>,
    pub encoding: EncodingTable,
    pub bounds: Option<NormalizationBounds>,
    width: usize,
}

impl Dataset {
    /// Builds a dataset from rows that share one encoding. All rows must have
    /// the same width.
    pub fn from_rows(rows: Vec<Row>, encoding: EncodingTable) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.features.len());
        if let Some(bad) = rows.iter().find(|r| r.features.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: bad.features.len(),
            });
        }
        Ok(Dataset {
            rows,
            encoding,
            bounds: None,
            width,
        })
    }

    /// Encodes records into labeled rows. With `encoding = None` a table is
    /// built from `records` themselves (so encoding never fails); otherwise
    /// the given table is used and unseen service/flag values take the
    /// fallback rank, counted in `report.unseen_categories`.
    ///
    /// Records whose label the map rejects are excluded and counted in
    /// `report.unknown_labels`.
    pub fn from_records(
        records: &[ConnectionRecord],
        labels: &LabelMap,
        encoding: Option<&EncodingTable>,
        report: &mut IngestReport,
    ) -> Result<Self> {
        let table = match encoding {
            Some(t) => t.clone(),
            None => EncodingTable::build(records),
        };
        let mut rows = Vec::with_capacity(records.len());
        for r in records {
            let class = match labels.group_attack(&r.label) {
                Ok(c) => c,
                Err(Error::UnknownLabel(l)) => {
                    *report.unknown_labels.entry(l).or_default() += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let features = if encoding.is_some() {
                let (v, unseen) = table.encode_with_unseen(r)?;
                report.unseen_categories += usize::from(unseen);
                v
            } else {
                table.encode(r)?
            };
            *report.class_counts.entry(class.to_string()).or_default() += 1;
            rows.push(Row::new(features, class));
        }
        Dataset::from_rows(rows, table)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn intrusive_count(&self) -> usize {
        self.rows.iter().filter(|r| r.truth.is_intrusive()).count()
    }

    /// A dataset with the same encoding and bounds holding `rows`.
    pub fn with_rows(&self, rows: Vec<Row>) -> Self {
        Dataset {
            rows,
            encoding: self.encoding.clone(),
            bounds: self.bounds.clone(),
            width: self.width,
        }
    }

    /// Fits min-max bounds on this (training) dataset.
    pub fn fit_normalizer(&self) -> Result<NormalizationBounds> {
        if self.rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut min = vec![f64::INFINITY; self.width];
        let mut max = vec![f64::NEG_INFINITY; self.width];
        for row in &self.rows {
            for (j, &x) in row.features.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(NormalizationBounds { min, max })
    }

    /// Applies `bounds` to every row and records them on the dataset.
    pub fn normalize(&mut self, bounds: &NormalizationBounds) -> Result<()> {
        for row in &mut self.rows {
            row.features = bounds.apply(&row.features)?;
        }
        self.bounds = Some(bounds.clone());
        Ok(())
    }

    /// Seeded shuffle, then the first ⌊fraction·n⌋ rows form the first part.
    pub fn sample_split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let (a, b) = shuffle_split(&self.rows, fraction, seed)?;
        Ok((self.with_rows(a), self.with_rows(b)))
    }

    /// Writes the encoded rows as CSV with a header naming each column, plus
    /// `attack_class` and `truth` columns.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let mut header = encoded_column_names();
        header.truncate(self.width);
        writeln!(out, "{},attack_class,truth", header.join(","))?;
        for row in &self.rows {
            for x in &row.features {
                write!(out, "{x},")?;
            }
            let truth = if row.truth.is_intrusive() { 1 } else { 0 };
            writeln!(out, "{},{truth}", row.class)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Seeded reproducible split of any slice.
pub fn shuffle_split<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Range {
            what: "split fraction",
            value: fraction,
        });
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (fraction * items.len() as f64).floor() as usize;
    let first = idx[..cut].iter().map(|&i| items[i].clone()).collect();
    let second = idx[cut..].iter().map(|&i| items[i].clone()).collect();
    Ok((first, second))
}
