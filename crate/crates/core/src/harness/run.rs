use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetKind, RunConfig};
use super::seed::{derive_seed, SeedDomain};
use crate::client::{ClientConfig, ClientState, RuleReport};
use crate::datasets::{
    generate_cub_like, generate_mnist_like, partition, plant_rules, read_dataset, FederatedSplit, GeneratorSpec,
    OverlaySpec,
};
use crate::error::{Result, XflError};
use crate::metrics::{model_accuracy, rule_accuracy, MetricsReport};
use crate::model::{ConceptDataPoint, ConceptPredictor, ModelParams, PredictorConfig};
use crate::rules::{format_rule, DnfRule, FeatureSchema};
use crate::server::{server_round, AggregationMode, GlobalRound, ServerConfig, ValidationSet};

/// Data ready for a run: schema, ground truth when known, and the split.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub schema: FeatureSchema,
    /// Planted rules of generated CUB-like data.
    pub planted_rules: Option<Vec<DnfRule>>,
    pub split: FederatedSplit,
    /// Clients whose shards were regenerated with the heterogeneous settings.
    pub hetero_clients: Vec<usize>,
}

/// A full dataset before partitioning.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub planted_rules: Option<Vec<DnfRule>>,
    pub points: Vec<ConceptDataPoint>,
}

/// Generates or loads the dataset the config describes.
pub fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    config.validate()?;
    let seed = config.seed;
    let (schema, planted_rules, points) = match config.dataset {
        DatasetKind::CubLike => {
            let schema = FeatureSchema::uniform(config.n_features, config.n_groups, config.n_classes)?;
            let planted = plant_rules(
                &schema,
                config.literals_per_conjunction,
                config.conjunctions_per_class,
                derive_seed(seed, SeedDomain::Planting, 0, 0),
            )?;
            let spec = GeneratorSpec {
                schema: schema.clone(),
                planted_rules: planted.clone(),
                confidence_mix: config.confidence,
                noise_rate: config.noise_rate,
                n_points: config.n_points,
                seed: derive_seed(seed, SeedDomain::Data, 0, 0),
            };
            let points = generate_cub_like(&spec)?;
            (schema, Some(planted), points)
        }
        DatasetKind::MnistLike => {
            let mut spec = OverlaySpec::digits(config.n_points, derive_seed(seed, SeedDomain::Data, 0, 0));
            spec.p_unchanged = config.p_unchanged;
            (OverlaySpec::digits_schema(), None, generate_mnist_like(&spec)?)
        }
        DatasetKind::File => {
            let path = config.dataset_path.as_ref().expect("checked by validate");
            let file = File::open(path)?;
            let (schema, points) = read_dataset(BufReader::new(file))?;
            (schema, None, points)
        }
    };
    Ok(Dataset {
        schema,
        planted_rules,
        points,
    })
}

/// Builds the dataset, partitions it, swaps in heterogeneous shards, and
/// strips uncertainty when the mode ignores it.
pub fn prepare_data(config: &RunConfig) -> Result<PreparedData> {
    let Dataset {
        schema,
        planted_rules,
        points,
    } = load_dataset(config)?;
    let seed = config.seed;
    let mut split = partition(
        &points,
        config.clients,
        config.val_frac,
        config.test_frac,
        derive_seed(seed, SeedDomain::Partition, 0, 0),
    )?;

    // the last `hetero_clients` clients get noisier, less confident shards
    let hetero: Vec<usize> = (config.clients - config.hetero_clients..config.clients).collect();
    if let Some(planted) = &planted_rules {
        for &k in &hetero {
            let spec = GeneratorSpec {
                schema: schema.clone(),
                planted_rules: planted.clone(),
                confidence_mix: config.hetero_confidence,
                noise_rate: config.hetero_noise,
                n_points: split.client_shards[k].len(),
                seed: derive_seed(seed, SeedDomain::Hetero, k as u64, 0),
            };
            split.client_shards[k] = generate_cub_like(&spec)?;
        }
    }

    if !config.mode.uses_uncertainty() {
        let strip = |ps: &mut Vec<ConceptDataPoint>| {
            for p in ps.iter_mut() {
                *p = p.without_uncertainty();
            }
        };
        split.client_shards.iter_mut().for_each(strip);
        strip(&mut split.validation);
        strip(&mut split.test);
    }

    Ok(PreparedData {
        schema,
        planted_rules,
        split,
        hetero_clients: hetero,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    RoundLimit,
}

/// Everything recorded about one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub validation_model_accuracy: f64,
    pub validation_rule_accuracy: f64,
    /// Textual global rules, one per class that has one.
    pub rule_texts: Vec<String>,
    pub reports: Vec<RuleReport>,
    pub server: GlobalRound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Key-value echo of the configuration.
    pub config: Vec<(String, String)>,
    pub schema: FeatureSchema,
    pub planted_rules: Option<Vec<DnfRule>>,
    pub hetero_clients: Vec<usize>,
    pub rounds: Vec<RoundRecord>,
    pub stop_reason: StopReason,
    pub final_validation_model_accuracy: f64,
    pub final_metrics: MetricsReport,
    pub final_rules: Vec<Option<DnfRule>>,
    pub final_rule_texts: Vec<String>,
    pub final_params: ModelParams,
    /// Kept out of the serialized report so that it stays reproducible.
    #[serde(skip)]
    pub wall_clock: Duration,
}

fn predictor_config(config: &RunConfig) -> PredictorConfig {
    PredictorConfig {
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        relevance_threshold: config.relevance_threshold,
        satisfaction_threshold: config.satisfaction_threshold,
    }
}

fn rule_texts(rules: &[Option<DnfRule>], schema: &FeatureSchema) -> Vec<String> {
    rules.iter().flatten().map(|r| format_rule(r, schema)).collect()
}

/// Runs the federated loop on freshly prepared data.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let data = prepare_data(config)?;
    run_prepared(config, data)
}

/// Runs the federated loop until the validation model accuracy reaches the
/// target or the round limit is hit, then scores the final global model and
/// rules on the test set.
pub fn run_prepared(config: &RunConfig, data: PreparedData) -> Result<RunReport> {
    let started = Instant::now();
    let PreparedData {
        schema,
        planted_rules,
        split,
        hetero_clients,
    } = data;
    let schema = Arc::new(schema);
    let pcfg = predictor_config(config);
    let client_cfg = ClientConfig {
        predictor: pcfg.clone(),
        local_test_frac: config.local_test_frac,
        max_conjunctions: config.max_conjunctions,
    };
    let init_seed = derive_seed(config.seed, SeedDomain::Init, 0, 0);
    let mut clients = split
        .client_shards
        .into_iter()
        .enumerate()
        .map(|(k, shard)| {
            ClientState::new(
                k,
                shard,
                Arc::clone(&schema),
                client_cfg.clone(),
                derive_seed(config.seed, SeedDomain::Client, k as u64, 0),
                init_seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let validation = ValidationSet::new(&split.validation)?;
    let server_cfg = ServerConfig {
        top_m: config.m,
        mode: config.mode,
        tally: config.tally,
        satisfaction_threshold: config.satisfaction_threshold,
    };

    let mut global = ConceptPredictor::new(schema.n_features(), schema.n_classes(), pcfg.clone(), init_seed);
    let mut global_rules: Vec<Option<DnfRule>> = vec![None; schema.n_classes()];
    let mut val_acc = model_accuracy(&global, &split.validation)?;
    let mut rounds = Vec::new();
    let mut stop_reason = StopReason::RoundLimit;

    for round in 0..config.rounds_max {
        let params = global.params();
        let reports = clients
            .par_iter_mut()
            .map(|c| c.local_round(Some(&params), config.epochs, round))
            .collect::<Result<Vec<_>>>()?;
        let server = server_round(&reports, &validation, &schema, &server_cfg, round)?;
        for agg in &server.classes {
            for step in &agg.trace {
                log::trace!(
                    "round {round} class {} rank {} {:?}: val rule acc {:.4} accepted={}",
                    agg.class_index,
                    step.rank,
                    step.combinator,
                    step.validation_accuracy,
                    step.accepted
                );
            }
        }
        global.load_params(&server.global_params)?;
        global_rules.clone_from(&server.global_rules);
        val_acc = model_accuracy(&global, &split.validation)?;
        let val_rule_acc = rule_accuracy(
            &global_rules,
            &split.validation,
            schema.n_classes(),
            config.satisfaction_threshold,
        )?
        .overall;
        log::info!(
            "round {round}: validation model accuracy {val_acc:.4}, rule accuracy {val_rule_acc:.4}, weights {:?}",
            server.weights
        );
        rounds.push(RoundRecord {
            round,
            validation_model_accuracy: val_acc,
            validation_rule_accuracy: val_rule_acc,
            rule_texts: rule_texts(&global_rules, &schema),
            reports,
            server,
        });
        if val_acc >= config.target_accuracy {
            stop_reason = StopReason::TargetReached;
            break;
        }
    }

    // the test split is touched only here
    let final_metrics = MetricsReport::evaluate(&global, &global_rules, &split.test, config.satisfaction_threshold)?;
    Ok(RunReport {
        // where the report lands does not affect its content
        config: config
            .pairs()
            .into_iter()
            .filter(|(k, _)| *k != "output_dir")
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        final_rule_texts: rule_texts(&global_rules, &schema),
        schema: Arc::unwrap_or_clone(schema),
        planted_rules,
        hetero_clients,
        rounds,
        stop_reason,
        final_validation_model_accuracy: val_acc,
        final_metrics,
        final_rules: global_rules,
        final_params: global.params(),
        wall_clock: started.elapsed(),
    })
}

/// Convenience for callers that want a different mode on otherwise equal
/// settings.
pub fn with_mode(config: &RunConfig, mode: AggregationMode) -> RunConfig {
    RunConfig {
        mode,
        ..config.clone()
    }
}

pub(crate) fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(XflError::invalid(msg))
    }
}
