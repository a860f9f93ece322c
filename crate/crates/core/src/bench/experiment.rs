//! Multi-run experiments: data sampling, topology election, training,
//! frozen evaluation and aggregation over runs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, DetectorKind, ExperimentConfig};
use super::derive_seed;
use super::detector::{train_detector, TrainedDetector};
use super::report::{self, Comparison};
use crate::error::{Error, Result};
use crate::hybrid::TraceRow;
use crate::kdd::synth::{separable_records, Flavor, Generator};
use crate::kdd::{
    parse_record, read_records, BinaryClass, ConnectionRecord, Dataset, EncodingTable, IngestReport, LabelMap,
    NormalizationBounds,
};
use crate::metrics::{roc_curve, ConfusionCounts, MetricsReport, RocCurve};
use crate::wsn::{elect_cluster_heads, seeded_pairwise_trust, synthesize_nodes, ClusterAssignment, ElectionParams, SensorNode};

// Seed streams below the per-run seed.
const STREAM_SAMPLE: u64 = 10;
const STREAM_SYNTH_TRAIN: u64 = 11;
const STREAM_SYNTH_TEST: u64 = 12;
const STREAM_NODES: u64 = 13;
const STREAM_TRUST: u64 = 14;
const STREAM_DETECTOR: u64 = 15;

/// Normal-approximation 95% quantile.
const Z95: f64 = 1.96;

/// Records read once per experiment and shared by every run.
#[derive(Debug, Clone)]
pub enum SourceData {
    Files {
        train: Vec<ConnectionRecord>,
        test: Option<Vec<ConnectionRecord>>,
        ingest: BTreeMap<String, IngestReport>,
    },
    /// Records are generated per run from the run seed.
    Generated,
}

fn read_checked(path: &Path) -> Result<(Vec<ConnectionRecord>, IngestReport)> {
    let (records, report) = read_records(path)?;
    if records.is_empty() {
        return Err(Error::Dataset {
            path: path.to_path_buf(),
            message: "no parseable records".into(),
        });
    }
    if report.field_count_errors + report.numeric_errors > 0 {
        log::warn!(
            "{}: {} field-count and {} numeric errors",
            path.display(),
            report.field_count_errors,
            report.numeric_errors
        );
    }
    Ok((records, report))
}

pub fn load_source(cfg: &ExperimentConfig) -> Result<SourceData> {
    match &cfg.source {
        DataSource::Files { train, test } => {
            let mut ingest = BTreeMap::new();
            let (train_records, report) = read_checked(train)?;
            ingest.insert(train.display().to_string(), report);
            let test_records = match test {
                Some(p) => {
                    let (records, report) = read_checked(p)?;
                    ingest.insert(p.display().to_string(), report);
                    Some(records)
                }
                None => None,
            };
            Ok(SourceData::Files {
                train: train_records,
                test: test_records,
                ingest,
            })
        }
        DataSource::Synthetic | DataSource::Separable => Ok(SourceData::Generated),
    }
}

fn pick(records: &[ConnectionRecord], idx: &[usize]) -> Vec<ConnectionRecord> {
    idx.iter().map(|&i| records[i].clone()).collect()
}

fn sample_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).floor() as usize).clamp(1, n)
}

/// Raw train and test records of one run.
pub fn sample_records(
    cfg: &ExperimentConfig,
    data: &SourceData,
    seed: u64,
) -> Result<(Vec<ConnectionRecord>, Vec<ConnectionRecord>)> {
    match (data, &cfg.source) {
        (SourceData::Files { train, test, .. }, _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SAMPLE));
            let k_train = sample_size(cfg.train_fraction, train.len());
            match test {
                Some(test) => {
                    let a = sample(&mut rng, train.len(), k_train).into_vec();
                    let b = sample(&mut rng, test.len(), sample_size(cfg.test_fraction, test.len())).into_vec();
                    Ok((pick(train, &a), pick(test, &b)))
                }
                None => {
                    if train.len() < 2 {
                        return Err(Error::InvalidArgument("cannot split a one-record file".into()));
                    }
                    let k_train = k_train.min(train.len() - 1);
                    let k_test = sample_size(cfg.test_fraction, train.len()).min(train.len() - k_train);
                    let idx = sample(&mut rng, train.len(), k_train + k_test).into_vec();
                    Ok((pick(train, &idx[..k_train]), pick(train, &idx[k_train..])))
                }
            }
        }
        (SourceData::Generated, DataSource::Separable) => Ok((
            separable_records(cfg.synthetic_train_rows, derive_seed(seed, STREAM_SYNTH_TRAIN)),
            separable_records(cfg.synthetic_test_rows, derive_seed(seed, STREAM_SYNTH_TEST)),
        )),
        (SourceData::Generated, _) => Ok((
            Generator::new(Flavor::Training, derive_seed(seed, STREAM_SYNTH_TRAIN)).records(cfg.synthetic_train_rows),
            Generator::new(Flavor::Test, derive_seed(seed, STREAM_SYNTH_TEST)).records(cfg.synthetic_test_rows),
        )),
    }
}

/// Everything one run needs before training.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub run: usize,
    pub seed: u64,
    pub train: Dataset,
    pub test: Dataset,
    pub bounds: NormalizationBounds,
    pub nodes: Vec<SensorNode>,
    pub topology: ClusterAssignment,
    pub ingest: IngestReport,
}

/// Seed of run `run` under the experiment's master seed.
pub fn run_seed(cfg: &ExperimentConfig, run: usize) -> u64 {
    derive_seed(cfg.seed, run as u64)
}

/// Encodes test records with a fitted encoding and normalizer.
pub fn encode_test(
    records: &[ConnectionRecord],
    labels: &LabelMap,
    encoding: &EncodingTable,
    bounds: &NormalizationBounds,
    report: &mut IngestReport,
) -> Result<Dataset> {
    let mut test = Dataset::from_records(records, labels, Some(encoding), report)?;
    test.normalize(bounds)?;
    Ok(test)
}

pub fn elect_topology(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<SensorNode>, ClusterAssignment)> {
    let nodes = synthesize_nodes(cfg.nodes, cfg.area, derive_seed(seed, STREAM_NODES));
    let params = ElectionParams {
        clusters: cfg.clusters,
        capacity: None,
        coefficients: Default::default(),
    };
    let topology = elect_cluster_heads(&nodes, &params, seeded_pairwise_trust(derive_seed(seed, STREAM_TRUST)))?;
    Ok((nodes, topology))
}

/// Seeded sampling, encoding, normalization (fitted on training rows only)
/// and cluster-head election for one run.
pub fn prepare_run(cfg: &ExperimentConfig, data: &SourceData, run: usize) -> Result<PreparedRun> {
    let seed = run_seed(cfg, run);
    let (train_records, test_records) = sample_records(cfg, data, seed)?;
    let labels = LabelMap::new(cfg.label_mode);
    let mut ingest = IngestReport::default();
    let mut train = Dataset::from_records(&train_records, &labels, None, &mut ingest)?;
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let bounds = train.fit_normalizer()?;
    train.normalize(&bounds)?;
    let test = encode_test(&test_records, &labels, &train.encoding, &bounds, &mut ingest)?;
    if test.is_empty() {
        return Err(Error::InvalidArgument("the test sample is empty".into()));
    }
    let (nodes, topology) = elect_topology(cfg, seed)?;
    Ok(PreparedRun {
        run,
        seed,
        train,
        test,
        bounds,
        nodes,
        topology,
        ingest,
    })
}

/// Metrics of one run, as written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_intrusive: usize,
    pub test_intrusive: usize,
    pub unseen_categories: usize,
    pub unknown_labels: usize,
    pub metrics: MetricsReport,
    pub per_class: BTreeMap<String, ConfusionCounts>,
    /// ε of the anomaly model (hybrid only).
    pub eps: Option<f64>,
    /// Anomaly share the splitter settled on in training (hybrid only).
    pub share_anomaly: Option<f64>,
}

/// Mean and 95% half-width of one metric over the runs where it is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub half_width: Option<f64>,
    pub runs: usize,
}

impl Aggregate {
    /// `mean ± 1.96 · s / √n` with the sample standard deviation `s`; one
    /// run gives a zero half-width.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Aggregate {
                mean: None,
                half_width: None,
                runs: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = if n == 1 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z95 * (var / n as f64).sqrt()
        };
        Aggregate {
            mean: Some(mean),
            half_width: Some(half_width),
            runs: n,
        }
    }
}

/// Artifacts of the first run, written next to the metrics.
#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub roc: Option<RocCurve>,
    pub trace: Vec<TraceRow>,
    pub nodes: Vec<SensorNode>,
    pub topology: Option<ClusterAssignment>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub detector: DetectorKind,
    /// Hybrid splitter behaviour during evaluation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splitter: Option<&'static str>,
    /// Effective settings (the output directory excepted, so reports
    /// written to different places stay comparable byte for byte).
    pub config: BTreeMap<String, String>,
    pub runs: Vec<RunMetrics>,
    pub aggregate: BTreeMap<String, Aggregate>,
    /// Seconds per run; kept out of `metrics.json`.
    #[serde(skip)]
    pub wall_clock: Vec<f64>,
    #[serde(skip)]
    pub artifacts: RunArtifacts,
}

struct RunOutcome {
    metrics: RunMetrics,
    seconds: f64,
    artifacts: RunArtifacts,
}

fn run_once(cfg: &ExperimentConfig, data: &SourceData, run: usize) -> Result<RunOutcome> {
    let started = Instant::now();
    let prep = prepare_run(cfg, data, run)?;
    let detector_seed = derive_seed(prep.seed, STREAM_DETECTOR);
    let (detector, log) = train_detector(cfg.detector, cfg, &prep.train.rows, &prep.topology, detector_seed)?;
    let ev = detector.evaluate(&prep.test.rows, &prep.topology, cfg.slot_length, cfg.asch_tune_eval)?;
    let roc = roc_curve(&ev.scored).ok();
    let share_anomaly = match &detector {
        TrainedDetector::Asch { splitter, .. } => Some(splitter.share_anomaly),
        _ => None,
    };
    let metrics = RunMetrics {
        run,
        seed: prep.seed,
        train_rows: prep.train.len(),
        test_rows: prep.test.len(),
        train_intrusive: prep.train.intrusive_count(),
        test_intrusive: prep.test.intrusive_count(),
        unseen_categories: prep.ingest.unseen_categories,
        unknown_labels: prep.ingest.unknown_label_total(),
        metrics: MetricsReport::from_counts(ev.counts, roc.as_ref().map(|r| r.auc)),
        per_class: ev.per_class,
        eps: log.eps,
        share_anomaly,
    };
    log::info!(
        "{} run {run}: ar {:?} dr {:?} ({} test rows)",
        cfg.detector,
        metrics.metrics.ar,
        metrics.metrics.dr,
        metrics.test_rows
    );
    Ok(RunOutcome {
        metrics,
        seconds: started.elapsed().as_secs_f64(),
        artifacts: RunArtifacts {
            roc,
            trace: ev.trace,
            nodes: prep.nodes,
            topology: Some(prep.topology),
        },
    })
}

fn aggregate_runs(runs: &[RunMetrics]) -> BTreeMap<String, Aggregate> {
    let names = runs.first().map(|r| r.metrics.values().map(|(n, _)| n)).unwrap_or_default();
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let values: Vec<f64> = runs.iter().filter_map(|r| r.metrics.values()[i].1).collect();
            (name.to_string(), Aggregate::of(&values))
        })
        .collect()
}

/// Runs every configured run in parallel (each from its own derived seed)
/// and assembles the report in run order.
pub fn execute(cfg: &ExperimentConfig, data: &SourceData) -> Result<RunReport> {
    cfg.validate()?;
    let outcomes: Vec<RunOutcome> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_once(cfg, data, run))
        .collect::<Result<_>>()?;
    let mut config = cfg.entries();
    config.remove("output");
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut wall_clock = Vec::with_capacity(outcomes.len());
    let mut artifacts = None;
    for o in outcomes {
        runs.push(o.metrics);
        wall_clock.push(o.seconds);
        artifacts.get_or_insert(o.artifacts);
    }
    Ok(RunReport {
        detector: cfg.detector,
        splitter: (cfg.detector == DetectorKind::Asch).then_some(if cfg.asch_tune_eval { "tuning" } else { "frozen" }),
        config,
        aggregate: aggregate_runs(&runs),
        runs,
        wall_clock,
        artifacts: artifacts.unwrap_or_default(),
    })
}

/// Loads the data, runs the experiment and writes every report file into
/// the configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let data = load_source(cfg)?;
    let report = execute(cfg, &data)?;
    report::write_experiment(&cfg.output, &report)?;
    Ok(report)
}

/// Runs every config on one shared dataset and writes a comparison table
/// (one row per config) into the first config's output directory.
pub fn compare(cfgs: &[ExperimentConfig]) -> Result<(Comparison, Vec<RunReport>)> {
    if cfgs.len() < 2 {
        return Err(Error::config("compare needs at least two configs"));
    }
    if cfgs.iter().any(|c| c.source != cfgs[0].source) {
        return Err(Error::config_key("dataset", "compared configs must share a dataset"));
    }
    let data = load_source(&cfgs[0])?;
    let reports: Vec<RunReport> = cfgs.iter().map(|c| execute(c, &data)).collect::<Result<_>>()?;
    let comparison = Comparison::from_reports(&reports);
    report::write_comparison(&cfgs[0].output, &comparison, &reports)?;
    Ok((comparison, reports))
}

/// Repeats the experiment once per master seed, writing each into
/// `output/seed_<s>` and a summary `sweep.csv` into `output`.
pub fn sweep(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<RunReport>> {
    if seeds.is_empty() {
        return Err(Error::config_key("seeds", "at least one seed is required"));
    }
    let data = load_source(cfg)?;
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let c = ExperimentConfig {
            seed,
            output: cfg.output.join(format!("seed_{seed}")),
            ..cfg.clone()
        };
        let r = execute(&c, &data)?;
        report::write_experiment(&c.output, &r)?;
        reports.push(r);
    }
    report::write_sweep_csv(&cfg.output.join("sweep.csv"), seeds, &reports)?;
    Ok(reports)
}

pub const BUNDLE_VERSION: u32 = 1;

/// A trained detector with the encoding and normalizer its inputs need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: u32,
    pub detector: TrainedDetector,
    pub encoding: EncodingTable,
    pub bounds: NormalizationBounds,
    pub config: BTreeMap<String, String>,
}

impl ModelBundle {
    /// Trains on run 0's training sample.
    pub fn train(cfg: &ExperimentConfig, data: &SourceData) -> Result<Self> {
        let prep = prepare_run(cfg, data, 0)?;
        let seed = derive_seed(prep.seed, STREAM_DETECTOR);
        let (detector, _) = train_detector(cfg.detector, cfg, &prep.train.rows, &prep.topology, seed)?;
        let mut config = cfg.entries();
        config.remove("output");
        Ok(ModelBundle {
            version: BUNDLE_VERSION,
            detector,
            encoding: prep.train.encoding,
            bounds: prep.bounds,
            config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        serde_json::to_writer(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut b: ModelBundle = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if b.version != BUNDLE_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported model bundle version {}", b.version)));
        }
        if let TrainedDetector::Rbc { stack } = &b.detector {
            stack.validate()?;
        }
        b.encoding.reindex();
        Ok(b)
    }

    /// Verdict and score for one KDD-format line. Unseen service or flag
    /// values take the fallback rank; the hybrid detector is rejected.
    pub fn classify_line(&self, line: &str) -> Result<(BinaryClass, f64)> {
        let record = parse_record(line)?;
        let (encoded, _) = self.encoding.encode_with_unseen(&record)?;
        self.detector.classify_one(&self.bounds.apply(&encoded)?)
    }

    /// Evaluates the frozen detector on run 0's test sample of `cfg`,
    /// encoded with the bundle's own encoding and normalizer.
    pub fn evaluate(&self, cfg: &ExperimentConfig, data: &SourceData) -> Result<RunReport> {
        let started = Instant::now();
        let seed = run_seed(cfg, 0);
        let (_, test_records) = sample_records(cfg, data, seed)?;
        let labels = LabelMap::new(cfg.label_mode);
        let mut ingest = IngestReport::default();
        let test = encode_test(&test_records, &labels, &self.encoding, &self.bounds, &mut ingest)?;
        let (nodes, topology) = elect_topology(cfg, seed)?;
        let ev = self.detector.evaluate(&test.rows, &topology, cfg.slot_length, cfg.asch_tune_eval)?;
        let roc = roc_curve(&ev.scored).ok();
        let metrics = RunMetrics {
            run: 0,
            seed,
            train_rows: 0,
            test_rows: test.len(),
            train_intrusive: 0,
            test_intrusive: test.intrusive_count(),
            unseen_categories: ingest.unseen_categories,
            unknown_labels: ingest.unknown_label_total(),
            metrics: MetricsReport::from_counts(ev.counts, roc.as_ref().map(|r| r.auc)),
            per_class: ev.per_class,
            eps: None,
            share_anomaly: None,
        };
        let kind = self.detector.kind();
        let mut config = self.config.clone();
        config.insert("detector".into(), kind.to_string());
        let runs = vec![metrics];
        Ok(RunReport {
            detector: kind,
            splitter: (kind == DetectorKind::Asch).then_some(if cfg.asch_tune_eval { "tuning" } else { "frozen" }),
            config,
            aggregate: aggregate_runs(&runs),
            runs,
            wall_clock: vec![started.elapsed().as_secs_f64()],
            artifacts: RunArtifacts {
                roc,
                trace: ev.trace,
                nodes,
                topology: Some(topology),
            },
        })
    }
}

/// Default model file inside an output directory.
pub fn bundle_path(output: &Path) -> PathBuf {
    output.join("model.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(detector: DetectorKind, runs: usize) -> ExperimentConfig {
        ExperimentConfig {
            detector,
            runs,
            synthetic_train_rows: 600,
            synthetic_test_rows: 300,
            slot_length: 50,
            forest_trees: 5,
            rbm_hidden: vec![6, 4],
            rbm_epochs: 3,
            rl_episodes: 5,
            edbscan_sample: 300,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn aggregate_of_identical_runs_has_zero_width() {
        let a = Aggregate::of(&[0.8; 5]);
        assert_eq!(a.mean, Some(0.8));
        assert_eq!(a.half_width, Some(0.0));
        let one = Aggregate::of(&[0.3]);
        assert_eq!((one.mean, one.half_width, one.runs), (Some(0.3), Some(0.0), 1));
        assert_eq!(Aggregate::of(&[]).mean, None);
    }

    #[test]
    fn aggregate_matches_hand_computation() {
        // mean 2, sample variance 1, stderr 1/sqrt(3)
        let a = Aggregate::of(&[1.0, 2.0, 3.0]);
        assert_eq!(a.mean, Some(2.0));
        assert!((a.half_width.unwrap() - 1.96 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_run_aggregate_equals_the_run() {
        let cfg = tiny(DetectorKind::Ql, 1);
        let report = execute(&cfg, &load_source(&cfg).unwrap()).unwrap();
        assert_eq!(report.runs.len(), 1);
        for (name, value) in report.runs[0].metrics.values() {
            let agg = report.aggregate[name];
            assert_eq!(agg.mean, value, "{name}");
            if value.is_some() {
                assert_eq!(agg.half_width, Some(0.0));
            }
        }
    }

    #[test]
    fn runs_are_reproducible_and_seeded_apart() {
        let cfg = tiny(DetectorKind::Td, 3);
        let data = load_source(&cfg).unwrap();
        let a = execute(&cfg, &data).unwrap();
        let b = execute(&cfg, &data).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.runs.len(), 3);
        assert_ne!(a.runs[0].seed, a.runs[1].seed);
        assert!(!a.config.contains_key("output"));
    }

    #[test]
    fn split_of_a_single_file_is_disjoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.txt");
        Generator::new(Flavor::Training, 1).write_file(&path, 500).unwrap();
        let cfg = ExperimentConfig {
            source: DataSource::Files {
                train: path.clone(),
                test: None,
            },
            train_fraction: 0.5,
            test_fraction: 0.3,
            ..tiny(DetectorKind::Ql, 1)
        };
        let data = load_source(&cfg).unwrap();
        let (train, test) = sample_records(&cfg, &data, 9).unwrap();
        assert_eq!((train.len(), test.len()), (250, 150));
        let SourceData::Files { train: all, .. } = &data else { panic!() };
        // identical records may repeat in the file, so compare multiplicities
        let count = |v: &[ConnectionRecord], r: &ConnectionRecord| v.iter().filter(|x| *x == r).count();
        for r in &test {
            assert!(count(&train, r) + count(&test, r) <= count(all, r));
        }
    }

    #[test]
    fn missing_dataset_is_a_data_error() {
        let cfg = ExperimentConfig {
            source: DataSource::Files {
                train: PathBuf::from("/nonexistent/kdd.txt"),
                test: None,
            },
            ..tiny(DetectorKind::Ql, 1)
        };
        let err = load_source(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bundle_round_trip_reproduces_evaluation() {
        let cfg = tiny(DetectorKind::Rbc, 1);
        let data = load_source(&cfg).unwrap();
        let bundle = ModelBundle::train(&cfg, &data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = bundle_path(dir.path());
        bundle.save(&path).unwrap();
        let back = ModelBundle::load(&path).unwrap();
        let a = bundle.evaluate(&cfg, &data).unwrap();
        let b = back.evaluate(&cfg, &data).unwrap();
        assert_eq!(a.runs, b.runs);
        // same numbers as the in-process experiment's first run
        let full = execute(&cfg, &data).unwrap();
        assert_eq!(a.runs[0].metrics, full.runs[0].metrics);
    }
}
