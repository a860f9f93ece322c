use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sentry_bench::bench::experiment::bundle_path;
use sentry_bench::bench::report::write_experiment;
use sentry_bench::bench::{
    compare, load_source, parse_config, parse_overrides, run_experiment, sweep, Comparison, DetectorKind,
    ExperimentConfig, ModelBundle,
};
use sentry_bench::kdd::synth::{separable_records, Flavor, Generator};
use sentry_bench::kdd::{read_records, Dataset, LabelMap, LabelMode};
use sentry_bench::{Error, Result};

/// Benchmarks intrusion detectors on KDD'99-format traffic streamed through
/// a clustered sensor network.
#[derive(Parser)]
#[command(name = "sentry-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Settings {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` pairs, after all other options.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl Settings {
    fn load(&self) -> Result<ExperimentConfig> {
        parse_config(self.config.as_deref(), &parse_overrides(&self.overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a KDD-format file and report counts; optionally write the encoded CSV.
    Ingest {
        file: PathBuf,
        /// strict, lenient or lenient:<group>
        #[arg(long, default_value = "strict")]
        labels: String,
        /// Encoded, normalized dataset as CSV.
        #[arg(long)]
        encoded: Option<PathBuf>,
    },
    /// Train one detector on run 0's sample and save `model.json`.
    Train(Settings),
    /// Evaluate a saved model on run 0's test sample.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Train and evaluate over all runs and write the report files.
    Run(Settings),
    /// Run several detectors on the same data and tabulate them.
    Compare {
        /// Comma-separated detectors.
        #[arg(long, default_value = "asch,rbc,ql,sarsa,td", value_delimiter = ',')]
        detectors: Vec<String>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Repeat the experiment for several master seeds.
    Sweep {
        /// Comma-separated master seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write generated KDD-format traffic.
    Synth {
        #[arg(long, value_enum, default_value = "training")]
        flavor: SynthFlavor,
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthFlavor {
    Training,
    Test,
    Separable,
}

fn print_table(reports: &[sentry_bench::bench::RunReport]) {
    print!("{}", Comparison::from_reports(reports).render_table());
}

fn ingest(file: &Path, labels: &str, encoded: Option<&Path>) -> Result<()> {
    let mode: LabelMode = labels.parse().map_err(|e: Error| Error::Config {
        key: Some("labels".into()),
        line: None,
        message: e.to_string(),
    })?;
    let (records, mut report) = read_records(file)?;
    let mut dataset = Dataset::from_records(&records, &LabelMap::new(mode), None, &mut report)?;
    if let Some(path) = encoded {
        let bounds = dataset.fit_normalizer()?;
        dataset.normalize(&bounds)?;
        dataset.write_csv(path)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn synth(flavor: SynthFlavor, rows: usize, seed: u64, out: &Path) -> Result<()> {
    match flavor {
        SynthFlavor::Training => Generator::new(Flavor::Training, seed).write_file(out, rows),
        SynthFlavor::Test => Generator::new(Flavor::Test, seed).write_file(out, rows),
        SynthFlavor::Separable => {
            let text: String = separable_records(rows, seed)
                .iter()
                .map(|r| sentry_bench::kdd::record::format_record(r) + "\n")
                .collect();
            std::fs::write(out, text)?;
            Ok(())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest { file, labels, encoded } => ingest(&file, &labels, encoded.as_deref()),
        Command::Train(settings) => {
            let cfg = settings.load()?;
            let bundle = ModelBundle::train(&cfg, &load_source(&cfg)?)?;
            std::fs::create_dir_all(&cfg.output)?;
            let path = bundle_path(&cfg.output);
            bundle.save(&path)?;
            println!("saved {} model to {}", cfg.detector, path.display());
            Ok(())
        }
        Command::Eval { model, settings } => {
            let cfg = settings.load()?;
            let bundle = ModelBundle::load(&model)?;
            let report = bundle.evaluate(&cfg, &load_source(&cfg)?)?;
            write_experiment(&cfg.output, &report)?;
            print_table(std::slice::from_ref(&report));
            Ok(())
        }
        Command::Run(settings) => {
            let cfg = settings.load()?;
            let report = run_experiment(&cfg)?;
            print_table(std::slice::from_ref(&report));
            Ok(())
        }
        Command::Compare { detectors, settings } => {
            let base = settings.load()?;
            let cfgs = detectors
                .iter()
                .map(|d| {
                    Ok(ExperimentConfig {
                        detector: d.trim().parse::<DetectorKind>()?,
                        ..base.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let (comparison, _) = compare(&cfgs)?;
            print!("{}", comparison.render_table());
            Ok(())
        }
        Command::Sweep { seeds, settings } => {
            let cfg = settings.load()?;
            let reports = sweep(&cfg, &seeds)?;
            print_table(&reports);
            Ok(())
        }
        Command::Synth { flavor, rows, seed, out } => synth(flavor, rows, seed, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
