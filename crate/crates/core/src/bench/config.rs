//! Flat `key = value` experiment configuration with command-line overrides.
//!
//! Files hold one setting per line; `#` starts a comment. Flags given as
//! `--key value` (or `--key=value`) replace file values. Every effective
//! value is echoed into the reports through [`ExperimentConfig::entries`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdd::LabelMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Asch,
    Rbc,
    Ql,
    Sarsa,
    Td,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::Asch,
        DetectorKind::Rbc,
        DetectorKind::Ql,
        DetectorKind::Sarsa,
        DetectorKind::Td,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Asch => "asch",
            DetectorKind::Rbc => "rbc",
            DetectorKind::Ql => "ql",
            DetectorKind::Sarsa => "sarsa",
            DetectorKind::Td => "td",
        }
    }

    pub fn is_rl(self) -> bool {
        matches!(self, DetectorKind::Ql | DetectorKind::Sarsa | DetectorKind::Td)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = DetectorKind::ALL.iter().map(|d| d.as_str()).collect();
                Error::config_key(
                    "detector",
                    format!("unknown detector {s:?}; valid options: {}", valid.join(", ")),
                )
            })
    }
}

/// Where records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    /// KDD-format files. Without a test file, the training file is split.
    Files { train: PathBuf, test: Option<PathBuf> },
    /// Generated KDD-like traffic.
    Synthetic,
    /// Generated traffic whose label is decided by one feature alone.
    Separable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub detector: DetectorKind,
    pub nodes: usize,
    pub clusters: usize,
    pub slot_length: usize,
    pub runs: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub label_mode: LabelMode,
    /// Fraction of the training file sampled per run.
    pub train_fraction: f64,
    /// Fraction of the test file sampled per run (or of the held-out part
    /// when the training file is split).
    pub test_fraction: f64,
    /// Records generated per synthetic file.
    pub synthetic_train_rows: usize,
    pub synthetic_test_rows: usize,
    pub area: f64,
    /// Recorded for provenance only; nothing depends on them.
    pub sim_time: f64,
    pub packet_size: f64,

    pub forest_trees: usize,
    pub forest_max_depth: usize,
    pub forest_min_leaf: usize,
    pub forest_features: Option<usize>,
    /// `None` picks ε from the k-distance elbow.
    pub edbscan_eps: Option<f64>,
    pub edbscan_min_pts: usize,
    pub edbscan_var_threshold: f64,
    pub edbscan_sample: usize,
    pub asch_alpha: f64,
    pub asch_step: f64,
    pub asch_lower: f64,
    pub asch_upper: f64,
    /// Keeps the splitter adapting during evaluation.
    pub asch_tune_eval: bool,

    pub rbm_hidden: Vec<usize>,
    pub rbm_epochs: usize,
    pub rbm_learning_rate: f64,
    pub rbm_batch: usize,

    pub rl_features: usize,
    pub rl_bins: usize,
    pub rl_learning_rate: f64,
    pub rl_discount: f64,
    pub rl_episodes: usize,
    pub rl_epsilon_start: f64,
    pub rl_epsilon_decay: f64,
    pub rl_epsilon_floor: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: DataSource::Synthetic,
            detector: DetectorKind::Ql,
            nodes: 20,
            clusters: 4,
            slot_length: 250,
            runs: 10,
            seed: 42,
            output: PathBuf::from("out"),
            label_mode: LabelMode::Strict,
            train_fraction: 0.1,
            test_fraction: 0.1,
            synthetic_train_rows: 49_000,
            synthetic_test_rows: 31_000,
            area: 100.0,
            sim_time: 600.0,
            packet_size: 250.0,
            forest_trees: 20,
            forest_max_depth: 32,
            forest_min_leaf: 1,
            forest_features: None,
            edbscan_eps: None,
            edbscan_min_pts: 5,
            edbscan_var_threshold: f64::INFINITY,
            edbscan_sample: 2000,
            asch_alpha: 0.7,
            asch_step: 0.05,
            asch_lower: 0.1,
            asch_upper: 0.9,
            asch_tune_eval: false,
            rbm_hidden: vec![24, 16, 8],
            rbm_epochs: 15,
            rbm_learning_rate: 0.05,
            rbm_batch: 64,
            rl_features: 8,
            rl_bins: 3,
            rl_learning_rate: 0.1,
            rl_discount: 0.9,
            rl_episodes: 20,
            rl_epsilon_start: 1.0,
            rl_epsilon_decay: 0.995,
            rl_epsilon_floor: 0.01,
        }
    }
}

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "dataset",
    "test_dataset",
    "detector",
    "nodes",
    "clusters",
    "slot_length",
    "runs",
    "seed",
    "output",
    "label_mode",
    "train_fraction",
    "test_fraction",
    "synthetic_train_rows",
    "synthetic_test_rows",
    "area",
    "sim_time",
    "packet_size",
    "forest.trees",
    "forest.max_depth",
    "forest.min_leaf",
    "forest.features",
    "edbscan.eps",
    "edbscan.min_pts",
    "edbscan.var_threshold",
    "edbscan.sample",
    "asch.alpha",
    "asch.step",
    "asch.lower",
    "asch.upper",
    "asch.tune_eval",
    "rbm.hidden",
    "rbm.epochs",
    "rbm.learning_rate",
    "rbm.batch",
    "rl.features",
    "rl.bins",
    "rl.learning_rate",
    "rl.discount",
    "rl.episodes",
    "rl.epsilon_start",
    "rl.epsilon_decay",
    "rl.epsilon_floor",
];

/// One raw setting and the file line it came from (`None` for flags).
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub value: String,
    pub line: Option<usize>,
}

fn located(key: &str, line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Config {
        key: Some(key.to_string()),
        line,
        message: message.into(),
    }
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.')
}

/// Parses the text of a configuration file into raw settings.
pub fn parse_settings(text: &str) -> Result<BTreeMap<String, Setting>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |key: Option<String>| Error::Config {
            key,
            line: Some(line_no),
            message: format!("malformed line {line:?}; expected key = value"),
        };
        let (key, value) = line.split_once('=').ok_or_else(|| malformed(None))?;
        let (key, value) = (key.trim(), value.trim());
        if !valid_key(key) {
            return Err(malformed(None));
        }
        if value.is_empty() || value.contains('=') {
            return Err(malformed(Some(key.to_string())));
        }
        if !KEYS.contains(&key) {
            return Err(located(key, Some(line_no), "unknown key"));
        }
        let setting = Setting {
            value: value.to_string(),
            line: Some(line_no),
        };
        if let Some(prev) = out.insert(key.to_string(), setting) {
            return Err(located(
                key,
                Some(line_no),
                format!("duplicate key, first set on line {}", prev.line.unwrap_or(0)),
            ));
        }
    }
    Ok(out)
}

/// Reads `--key value` and `--key=value` pairs. Dashes in keys become
/// underscores, so `--slot-length` and `--slot_length` are the same key.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let body = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::config(format!("expected --key value, found {arg:?}")))?;
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::config_key(body.replace('-', "_"), "flag has no value"))?;
                (body.to_string(), v.clone())
            }
        };
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::config_key(key, "unknown key"));
        }
        if value.is_empty() {
            return Err(Error::config_key(key, "empty value"));
        }
        out.push((key, value));
    }
    Ok(out)
}

/// Builds a config from an optional file plus overrides. Without a file the
/// defaults and the flags alone define the experiment.
pub fn parse_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut settings = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::config(format!("cannot read config {}: {e}", p.display())))?;
            parse_settings(&text)?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in overrides {
        settings.insert(
            k.clone(),
            Setting {
                value: v.clone(),
                line: None,
            },
        );
    }
    ExperimentConfig::from_settings(&settings)
}

fn parse_value<T: FromStr>(key: &str, s: &Setting, what: &str) -> Result<T> {
    s.value
        .parse()
        .map_err(|_| located(key, s.line, format!("expected {what}, found {:?}", s.value)))
}

fn auto_or<T: FromStr>(key: &str, s: &Setting, what: &str) -> Result<Option<T>> {
    if s.value == "auto" {
        Ok(None)
    } else {
        parse_value(key, s, what).map(Some)
    }
}

impl ExperimentConfig {
    pub fn from_settings(settings: &BTreeMap<String, Setting>) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let mut train: Option<String> = None;
        let mut test: Option<PathBuf> = None;
        for (key, s) in settings {
            let k = key.as_str();
            match k {
                "dataset" => train = Some(s.value.clone()),
                "test_dataset" => test = Some(PathBuf::from(&s.value)),
                "detector" => {
                    c.detector = s.value.parse().map_err(|e: Error| match e {
                        Error::Config { key, message, .. } => Error::Config {
                            key,
                            line: s.line,
                            message,
                        },
                        other => other,
                    })?
                }
                "nodes" => c.nodes = parse_value(k, s, "an integer")?,
                "clusters" => c.clusters = parse_value(k, s, "an integer")?,
                "slot_length" => c.slot_length = parse_value(k, s, "an integer")?,
                "runs" => c.runs = parse_value(k, s, "an integer")?,
                "seed" => c.seed = parse_value(k, s, "an unsigned integer")?,
                "output" => c.output = PathBuf::from(&s.value),
                "label_mode" => {
                    c.label_mode = s
                        .value
                        .parse()
                        .map_err(|e: Error| located(k, s.line, e.to_string()))?
                }
                "train_fraction" => c.train_fraction = parse_value(k, s, "a number")?,
                "test_fraction" => c.test_fraction = parse_value(k, s, "a number")?,
                "synthetic_train_rows" => c.synthetic_train_rows = parse_value(k, s, "an integer")?,
                "synthetic_test_rows" => c.synthetic_test_rows = parse_value(k, s, "an integer")?,
                "area" => c.area = parse_value(k, s, "a number")?,
                "sim_time" => c.sim_time = parse_value(k, s, "a number")?,
                "packet_size" => c.packet_size = parse_value(k, s, "a number")?,
                "forest.trees" => c.forest_trees = parse_value(k, s, "an integer")?,
                "forest.max_depth" => c.forest_max_depth = parse_value(k, s, "an integer")?,
                "forest.min_leaf" => c.forest_min_leaf = parse_value(k, s, "an integer")?,
                "forest.features" => c.forest_features = auto_or(k, s, "an integer or auto")?,
                "edbscan.eps" => c.edbscan_eps = auto_or(k, s, "a number or auto")?,
                "edbscan.min_pts" => c.edbscan_min_pts = parse_value(k, s, "an integer")?,
                "edbscan.var_threshold" => {
                    c.edbscan_var_threshold = if s.value == "off" {
                        f64::INFINITY
                    } else {
                        parse_value(k, s, "a number or off")?
                    }
                }
                "edbscan.sample" => c.edbscan_sample = parse_value(k, s, "an integer")?,
                "asch.alpha" => c.asch_alpha = parse_value(k, s, "a number")?,
                "asch.step" => c.asch_step = parse_value(k, s, "a number")?,
                "asch.lower" => c.asch_lower = parse_value(k, s, "a number")?,
                "asch.upper" => c.asch_upper = parse_value(k, s, "a number")?,
                "asch.tune_eval" => c.asch_tune_eval = parse_value(k, s, "true or false")?,
                "rbm.hidden" => {
                    c.rbm_hidden = s
                        .value
                        .split(',')
                        .map(|p| p.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| located(k, s.line, format!("expected a comma-separated list of sizes, found {:?}", s.value)))?
                }
                "rbm.epochs" => c.rbm_epochs = parse_value(k, s, "an integer")?,
                "rbm.learning_rate" => c.rbm_learning_rate = parse_value(k, s, "a number")?,
                "rbm.batch" => c.rbm_batch = parse_value(k, s, "an integer")?,
                "rl.features" => c.rl_features = parse_value(k, s, "an integer")?,
                "rl.bins" => c.rl_bins = parse_value(k, s, "an integer")?,
                "rl.learning_rate" => c.rl_learning_rate = parse_value(k, s, "a number")?,
                "rl.discount" => c.rl_discount = parse_value(k, s, "a number")?,
                "rl.episodes" => c.rl_episodes = parse_value(k, s, "an integer")?,
                "rl.epsilon_start" => c.rl_epsilon_start = parse_value(k, s, "a number")?,
                "rl.epsilon_decay" => c.rl_epsilon_decay = parse_value(k, s, "a number")?,
                "rl.epsilon_floor" => c.rl_epsilon_floor = parse_value(k, s, "a number")?,
                other => return Err(located(other, s.line, "unknown key")),
            }
        }
        c.source = match train.as_deref() {
            None | Some("synthetic") => DataSource::Synthetic,
            Some("separable") => DataSource::Separable,
            Some(path) => DataSource::Files {
                train: PathBuf::from(path),
                test,
            },
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nodes", self.nodes),
            ("clusters", self.clusters),
            ("slot_length", self.slot_length),
            ("runs", self.runs),
            ("forest.trees", self.forest_trees),
            ("forest.max_depth", self.forest_max_depth),
            ("forest.min_leaf", self.forest_min_leaf),
            ("edbscan.sample", self.edbscan_sample),
            ("rbm.batch", self.rbm_batch),
            ("rl.features", self.rl_features),
            ("rl.bins", self.rl_bins),
            ("rl.episodes", self.rl_episodes),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config_key(key, "must be at least 1"));
            }
        }
        if self.clusters > self.nodes {
            return Err(Error::config_key("clusters", "cannot exceed nodes"));
        }
        if self.edbscan_min_pts < 2 {
            return Err(Error::config_key("edbscan.min_pts", "must be at least 2"));
        }
        for (key, v) in [("train_fraction", self.train_fraction), ("test_fraction", self.test_fraction)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config_key(key, "must be in (0, 1]"));
            }
        }
        if matches!(self.source, DataSource::Files { test: None, .. }) && self.train_fraction + self.test_fraction > 1.0 {
            return Err(Error::config_key(
                "test_fraction",
                "train_fraction + test_fraction must not exceed 1 when the training file is split",
            ));
        }
        if self.rbm_hidden.is_empty() || self.rbm_hidden.contains(&0) {
            return Err(Error::config_key("rbm.hidden", "sizes must be positive"));
        }
        if self.edbscan_eps.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::config_key("edbscan.eps", "must be positive"));
        }
        Ok(())
    }

    /// Effective settings, by key, as they would be written in a file.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        match &self.source {
            DataSource::Files { train, test } => {
                put("dataset", train.display().to_string());
                put(
                    "test_dataset",
                    test.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string()),
                );
            }
            DataSource::Synthetic => put("dataset", "synthetic".into()),
            DataSource::Separable => put("dataset", "separable".into()),
        }
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        put("detector", self.detector.to_string());
        put("nodes", self.nodes.to_string());
        put("clusters", self.clusters.to_string());
        put("slot_length", self.slot_length.to_string());
        put("runs", self.runs.to_string());
        put("seed", self.seed.to_string());
        put("output", self.output.display().to_string());
        put(
            "label_mode",
            match self.label_mode {
                LabelMode::Strict => "strict".into(),
                LabelMode::Lenient(g) => format!("lenient:{g}"),
            },
        );
        put("train_fraction", self.train_fraction.to_string());
        put("test_fraction", self.test_fraction.to_string());
        put("synthetic_train_rows", self.synthetic_train_rows.to_string());
        put("synthetic_test_rows", self.synthetic_test_rows.to_string());
        put("area", self.area.to_string());
        put("sim_time", self.sim_time.to_string());
        put("packet_size", self.packet_size.to_string());
        put("forest.trees", self.forest_trees.to_string());
        put("forest.max_depth", self.forest_max_depth.to_string());
        put("forest.min_leaf", self.forest_min_leaf.to_string());
        put("forest.features", opt(self.forest_features.map(|v| v.to_string())));
        put("edbscan.eps", opt(self.edbscan_eps.map(|v| v.to_string())));
        put("edbscan.min_pts", self.edbscan_min_pts.to_string());
        put(
            "edbscan.var_threshold",
            if self.edbscan_var_threshold.is_infinite() {
                "off".into()
            } else {
                self.edbscan_var_threshold.to_string()
            },
        );
        put("edbscan.sample", self.edbscan_sample.to_string());
        put("asch.alpha", self.asch_alpha.to_string());
        put("asch.step", self.asch_step.to_string());
        put("asch.lower", self.asch_lower.to_string());
        put("asch.upper", self.asch_upper.to_string());
        put("asch.tune_eval", self.asch_tune_eval.to_string());
        put(
            "rbm.hidden",
            self.rbm_hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
        );
        put("rbm.epochs", self.rbm_epochs.to_string());
        put("rbm.learning_rate", self.rbm_learning_rate.to_string());
        put("rbm.batch", self.rbm_batch.to_string());
        put("rl.features", self.rl_features.to_string());
        put("rl.bins", self.rl_bins.to_string());
        put("rl.learning_rate", self.rl_learning_rate.to_string());
        put("rl.discount", self.rl_discount.to_string());
        put("rl.episodes", self.rl_episodes.to_string());
        put("rl.epsilon_start", self.rl_epsilon_start.to_string());
        put("rl.epsilon_decay", self.rl_epsilon_decay.to_string());
        put("rl.epsilon_floor", self.rl_epsilon_floor.to_string());
        m
    }

    /// The effective settings as file text; parsing it gives back `self`.
    pub fn to_file_text(&self) -> String {
        self.entries()
            .into_iter()
            .filter(|(k, v)| !(k == "test_dataset" && v == "none"))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
