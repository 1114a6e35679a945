use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

use uxfl_core::datasets::{read_dataset, write_dataset};
use uxfl_core::harness::{self, DatasetKind, RunConfig};
use uxfl_core::metrics::MetricsReport;
use uxfl_core::model::{ConceptPredictor, ModelParams, PredictorConfig};
use uxfl_core::rules::{format_rules, parse_rules, DnfRule};
use uxfl_core::server::AggregationMode;
use uxfl_core::XflError;

#[derive(Parser)]
#[command(name = "uxfl", version, about = "Uncertainty-aware explainable federated learning simulator")]
struct Cli {
    /// -v for per-decision debug output, -vv for aggregation traces.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Only print errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file (and the planted rules for cub_like data).
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Dataset file to write.
        #[arg(long)]
        out: PathBuf,
        /// Where to write the planted rules.
        #[arg(long)]
        rules_out: Option<PathBuf>,
    },
    /// Run one federated training session.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Print the effective configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Run several modes over several seeds and tabulate the final metrics.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated modes.
        #[arg(long, value_delimiter = ',', default_value = "uncertainty,fedavg,no_uncertainty")]
        modes: Vec<AggregationMode>,
        /// Comma-separated seeds, or a range such as 0..10.
        #[arg(long, default_value = "0..5")]
        seeds: String,
        /// Also write the comparison as JSON.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Score a rule file on a dataset file.
    EvalRule {
        /// Rules in textual form, one per line.
        #[arg(long)]
        rules: PathBuf,
        /// Dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Model checkpoint; enables model accuracy and rule fidelity.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file with one `key = value` per line.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    dataset_path: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    rounds_max: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    target_accuracy: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, XflError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&fs::read_to_string(path)?)?;
        }
        let path_text = |p: &Path| p.display().to_string();
        let flags = [
            ("dataset", self.dataset.clone()),
            ("dataset_path", self.dataset_path.as_deref().map(path_text)),
            ("mode", self.mode.clone()),
            ("seed", self.seed.map(|x| x.to_string())),
            ("clients", self.clients.map(|x| x.to_string())),
            ("rounds_max", self.rounds_max.map(|x| x.to_string())),
            ("epochs", self.epochs.map(|x| x.to_string())),
            ("m", self.m.map(|x| x.to_string())),
            ("target_accuracy", self.target_accuracy.map(|x| x.to_string())),
            ("output_dir", self.output_dir.as_deref().map(path_text)),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for s in &self.sets {
            cfg.apply_override(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, XflError> {
    let bad = || XflError::Config(format!("seeds: cannot parse {text:?}"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn generate(cfg: &RunConfig, out: &Path, rules_out: Option<&Path>) -> Result<(), XflError> {
    if cfg.dataset == DatasetKind::File {
        return Err(XflError::Config("dataset: generate needs cub_like or mnist_like".into()));
    }
    let data = harness::load_dataset(cfg)?;
    let mut w = BufWriter::new(File::create(out)?);
    write_dataset(&mut w, &data.schema, &data.points)?;
    w.flush()?;
    log::info!("wrote {} points to {}", data.points.len(), out.display());
    if let Some(path) = rules_out {
        let planted = data.planted_rules.unwrap_or_default();
        fs::write(path, format_rules(&planted, &data.schema))?;
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), XflError> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn run(cfg: &RunConfig) -> Result<(), XflError> {
    let report = harness::run(cfg)?;
    let mut out = harness::metrics_text(&report);
    out.push('\n');
    for line in &report.final_rule_texts {
        out.push_str(line);
        out.push('\n');
    }
    emit(&out)?;
    if let Some(dir) = &cfg.output_dir {
        let path = harness::write_report(&report, dir)?;
        log::info!("report written to {}", path.display());
    }
    Ok(())
}

fn compare(cfg: &RunConfig, modes: &[AggregationMode], seeds: &str, json_out: Option<&Path>) -> Result<(), XflError> {
    let seeds = parse_seeds(seeds)?;
    let table = harness::compare_modes(cfg, modes, &seeds)?;
    emit(&table.to_string())?;
    if let Some(path) = json_out {
        fs::write(path, harness::comparison_json(&table)?)?;
    }
    Ok(())
}

fn eval_rule(rules: &Path, data: &Path, model: Option<&Path>, threshold: f64) -> Result<(), XflError> {
    let (schema, points) = read_dataset(BufReader::new(File::open(data)?))?;
    let parsed = parse_rules(&fs::read_to_string(rules)?, &schema)?;
    let mut by_class: Vec<Option<DnfRule>> = vec![None; schema.n_classes()];
    for r in parsed {
        let c = r.class_index();
        if by_class[c].is_some() {
            return Err(XflError::InvalidArgument(format!(
                "more than one rule for class {}",
                schema.class_name(c)
            )));
        }
        by_class[c] = Some(r);
    }
    let predictor = match model {
        Some(path) => {
            let params = ModelParams::from_checkpoint(&fs::read_to_string(path)?)?;
            let config = PredictorConfig {
                satisfaction_threshold: threshold,
                ..PredictorConfig::default()
            };
            Some(ConceptPredictor::from_params(&params, config)?)
        }
        None => None,
    };
    match predictor {
        Some(p) => {
            let report = MetricsReport::evaluate(&p, &by_class, &points, threshold)?;
            emit(&report.to_string())?;
        }
        None => {
            let score = uxfl_core::metrics::rule_accuracy(&by_class, &points, schema.n_classes(), threshold)?;
            let mut out = String::new();
            for (c, acc) in score.per_class.iter().enumerate() {
                out.push_str(&format!("{:<18} {:>7.2}%\n", schema.class_name(c), acc * 100.0));
            }
            out.push_str(&format!("{:<18} {:>7.2}%\n", "rule accuracy", score.overall * 100.0));
            emit(&out)?;
        }
    }
    Ok(())
}

fn exit_code(e: &XflError) -> u8 {
    match e {
        XflError::Config(_) | XflError::InvalidArgument(_) => 2,
        XflError::Io(_) => 3,
        XflError::Parse { .. } | XflError::Json(_) | XflError::Generation(_) => 4,
        XflError::Numeric(_) => 5,
        XflError::Conflict(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => LevelFilter::Error,
        (false, 0) => LevelFilter::Info,
        (false, 1) => LevelFilter::Debug,
        (false, _) => LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .parse_default_env()
        .init();

    let result = match &cli.command {
        Command::Generate {
            config,
            out,
            rules_out,
        } => config.resolve().and_then(|cfg| generate(&cfg, out, rules_out.as_deref())),
        Command::Run { config, print_config } => config.resolve().and_then(|cfg| {
            if *print_config {
                emit(&cfg.to_text())
            } else {
                run(&cfg)
            }
        }),
        Command::Compare {
            config,
            modes,
            seeds,
            json_out,
        } => config
            .resolve()
            .and_then(|cfg| compare(&cfg, modes, seeds, json_out.as_deref())),
        Command::EvalRule {
            rules,
            data,
            model,
            threshold,
        } => eval_rule(rules, data, model.as_deref(), *threshold),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
