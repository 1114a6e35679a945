//! Simulated federated client.
//!
//! Each round the client loads the broadcast parameters, trains on its local
//! training split, extracts a sample-level rule for every training point,
//! folds the rules predicted for each class into one DNF rule and scores that
//! rule on its local test split.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, XflError};
use crate::metrics::class_rule_accuracy;
use crate::model::{ConceptDataPoint, ConceptPredictor, ModelParams, PredictorConfig, RuleExtractor};
use crate::rules::{Conjunction, DnfRule, FeatureSchema};

pub type ClientId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub predictor: PredictorConfig,
    /// Share of the shard held out to score the client's own rules.
    pub local_test_frac: f64,
    /// Upper bound on conjunctions in one class rule.
    pub max_conjunctions: usize,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            predictor: PredictorConfig::default(),
            local_test_frac: 0.2,
            max_conjunctions: 5,
        }
    }
}

/// What a client reports about one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRuleReport {
    pub rule: DnfRule,
    /// Rule accuracy on the client's local test split.
    pub accuracy: f64,
    pub uncertainty: f64,
}

/// A client's message to the server for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub client_id: ClientId,
    /// Ascending by class; classes without any extracted rule are absent.
    pub entries: Vec<ClassRuleReport>,
    pub params: ModelParams,
    pub n_samples: usize,
}

impl RuleReport {
    pub fn entry(&self, class: usize) -> Option<&ClassRuleReport> {
        self.entries.iter().find(|e| e.rule.class_index() == class)
    }
}

#[derive(Debug, Clone)]
pub struct ClientState {
    id: ClientId,
    schema: Arc<FeatureSchema>,
    local_train: Vec<ConceptDataPoint>,
    local_test: Vec<ConceptDataPoint>,
    predictor: ConceptPredictor,
    config: ClientConfig,
    seed: u64,
    last_report: Option<RuleReport>,
}

impl ClientState {
    /// Takes ownership of the shard and splits it with `seed`. The predictor
    /// starts from `init_seed`, which the harness shares across clients.
    pub fn new(
        id: ClientId,
        shard: Vec<ConceptDataPoint>,
        schema: Arc<FeatureSchema>,
        config: ClientConfig,
        seed: u64,
        init_seed: u64,
    ) -> Result<Self> {
        if shard.is_empty() {
            return Err(XflError::invalid(format!("client {id} has no data")));
        }
        if !(0.0..1.0).contains(&config.local_test_frac) {
            return Err(XflError::invalid("local test fraction must lie in [0, 1)"));
        }
        if config.max_conjunctions == 0 {
            return Err(XflError::invalid("max_conjunctions must be positive"));
        }
        for p in &shard {
            p.check_schema(&schema)?;
        }
        let mut shard = shard;
        shard.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((shard.len() as f64) * config.local_test_frac).round() as usize;
        let n_test = n_test.min(shard.len() - 1);
        let local_train = shard.split_off(n_test);
        let predictor = ConceptPredictor::new(
            schema.n_features(),
            schema.n_classes(),
            config.predictor.clone(),
            init_seed,
        );
        Ok(ClientState {
            id,
            schema,
            local_train,
            local_test: shard,
            predictor,
            config,
            seed,
            last_report: None,
        })
    }

    pub fn id(&self) -> ClientId {
        self.id
    }

    pub fn predictor(&self) -> &ConceptPredictor {
        &self.predictor
    }

    pub fn local_train(&self) -> &[ConceptDataPoint] {
        &self.local_train
    }

    pub fn local_test(&self) -> &[ConceptDataPoint] {
        &self.local_test
    }

    pub fn last_report(&self) -> Option<&RuleReport> {
        self.last_report.as_ref()
    }

    /// One client round: load, train, extract, score, report.
    pub fn local_round(&mut self, global: Option<&ModelParams>, epochs: usize, round: usize) -> Result<RuleReport> {
        if let Some(params) = global {
            self.predictor.load_params(params)?;
        }
        let train_seed = self.seed ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        self.predictor.train(&self.local_train, epochs, train_seed)?;

        let extractor = RuleExtractor::new(&self.predictor, &self.schema);
        let mut by_class: Vec<Vec<Conjunction>> = vec![Vec::new(); self.schema.n_classes()];
        for p in &self.local_train {
            if let (class, Some(conj)) = extractor.extract_with_class(p) {
                by_class[class].push(conj);
            }
        }

        // an empty local test split only happens for single-point shards
        let scoring = if self.local_test.is_empty() {
            &self.local_train
        } else {
            &self.local_test
        };
        let threshold = self.config.predictor.satisfaction_threshold;
        let mut entries = Vec::new();
        for (class, sample_rules) in by_class.into_iter().enumerate() {
            let Some(rule) = build_class_rule(class, sample_rules, self.config.max_conjunctions)? else {
                continue;
            };
            entries.push(ClassRuleReport {
                accuracy: class_rule_accuracy(&rule, scoring, threshold),
                uncertainty: rule.uncertainty(),
                rule,
            });
        }

        let report = RuleReport {
            client_id: self.id,
            entries,
            params: self.predictor.params(),
            n_samples: self.local_train.len(),
        };
        self.last_report = Some(report.clone());
        Ok(report)
    }
}

/// Folds sample-level rules into one class rule.
///
/// Identical conjunctions are merged (frequency counted, uncertainty
/// averaged), conjunctions absorbed by a strictly smaller one are dropped
/// (`A OR (A AND B)` is `A`), and the `cap` conjunctions with the largest
/// frequency times uncertainty are kept. The rule uncertainty is the mean of
/// the kept conjunctions' uncertainties.
pub fn build_class_rule(class: usize, sample_rules: Vec<Conjunction>, cap: usize) -> Result<Option<DnfRule>> {
    let mut tally: BTreeMap<Vec<usize>, (usize, f64)> = BTreeMap::new();
    for c in &sample_rules {
        let e = tally.entry(c.features().collect()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += c.uncertainty();
    }
    let keys: Vec<Vec<usize>> = tally.keys().cloned().collect();
    let is_absorbed = |k: &Vec<usize>| {
        keys.iter()
            .any(|other| other.len() < k.len() && other.iter().all(|f| k.contains(f)))
    };
    let mut kept: Vec<(Vec<usize>, usize, f64)> = tally
        .iter()
        .filter(|(k, _)| !is_absorbed(k))
        .map(|(k, &(n, sum))| (k.clone(), n, (sum / n as f64).clamp(0.0, 1.0)))
        .collect();
    // stable sort keeps lexicographic order among equal scores
    kept.sort_by(|a, b| (b.1 as f64 * b.2).total_cmp(&(a.1 as f64 * a.2)));
    kept.truncate(cap);
    if kept.is_empty() {
        return Ok(None);
    }
    let conjunctions = kept
        .into_iter()
        .map(|(fs, _, u)| Conjunction::new(fs, u))
        .collect::<Result<Vec<_>>>()?;
    DnfRule::from_conjunctions(class, conjunctions).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_cub_like, plant_rules, ConfidenceMix, GeneratorSpec};

    fn conj(fs: &[usize], u: f64) -> Conjunction {
        Conjunction::new(fs.iter().copied(), u).unwrap()
    }

    fn planted(noise: f64, n: usize, seed: u64) -> (GeneratorSpec, Vec<ConceptDataPoint>) {
        let schema = FeatureSchema::uniform(12, 4, 3).unwrap();
        let spec = GeneratorSpec {
            planted_rules: plant_rules(&schema, 2, 1, seed).unwrap(),
            schema,
            confidence_mix: ConfidenceMix::default(),
            noise_rate: noise,
            n_points: n,
            seed,
        };
        let data = generate_cub_like(&spec).unwrap();
        (spec, data)
    }

    #[test]
    fn class_rule_merges_absorbs_and_caps() {
        let samples = vec![
            conj(&[1, 4], 1.0),
            conj(&[1, 4], 0.8),
            conj(&[1, 4, 7], 1.0),
            conj(&[2], 0.7),
            conj(&[3, 5], 0.9),
            conj(&[6, 8], 0.6),
        ];
        let r = build_class_rule(0, samples.clone(), 5).unwrap().unwrap();
        assert_eq!(r.key().conjunctions, vec![vec![1, 4], vec![2], vec![3, 5], vec![6, 8]]);
        assert!((r.conjunctions()[0].uncertainty() - 0.9).abs() < 1e-12);
        let mean = (0.9 + 0.7 + 0.9 + 0.6) / 4.0;
        assert!((r.uncertainty() - mean).abs() < 1e-12);

        let capped = build_class_rule(0, samples, 2).unwrap().unwrap();
        // scores: [1,4] 2*0.9, [3,5] 0.9, [2] 0.7, [6,8] 0.6
        assert_eq!(capped.key().conjunctions, vec![vec![1, 4], vec![3, 5]]);
        assert!(build_class_rule(0, vec![], 5).unwrap().is_none());
    }

    #[test]
    fn class_rule_uncertainty_within_member_range() {
        let samples = vec![conj(&[0], 0.5), conj(&[1], 0.9), conj(&[2], 0.7)];
        let r = build_class_rule(1, samples, 5).unwrap().unwrap();
        assert!(r.uncertainty() >= 0.5 && r.uncertainty() <= 0.9);
    }

    #[test]
    fn single_class_shard_reports_only_that_class() {
        let (spec, data) = planted(0.0, 300, 1);
        let shard: Vec<_> = data.into_iter().filter(|p| p.label() == 2).collect();
        let mut client = ClientState::new(0, shard, Arc::new(spec.schema.clone()), ClientConfig::default(), 3, 4).unwrap();
        let report = client.local_round(None, 30, 0).unwrap();
        assert!(!report.entries.is_empty());
        assert!(report.entries.iter().all(|e| e.rule.class_index() == 2));
    }

    #[test]
    fn fully_confident_shard_has_unit_rule_uncertainty() {
        let (spec, data) = planted(0.0, 300, 2);
        let mut client = ClientState::new(0, data, Arc::new(spec.schema.clone()), ClientConfig::default(), 3, 4).unwrap();
        let report = client.local_round(None, 100, 0).unwrap();
        assert!(!report.entries.is_empty());
        for e in &report.entries {
            assert_eq!(e.uncertainty, 1.0);
            assert!(e.rule.conjunctions().iter().all(|c| c.uncertainty() == 1.0));
        }
    }

    #[test]
    fn noiseless_rules_stay_inside_planted_conjunctions() {
        for seed in 0..4 {
            let (spec, data) = planted(0.0, 400, seed);
            let mut client =
                ClientState::new(0, data, Arc::new(spec.schema.clone()), ClientConfig::default(), seed, 9).unwrap();
            let report = client.local_round(None, 100, 0).unwrap();
            assert!(!report.entries.is_empty());
            for e in &report.entries {
                let planted = &spec.planted_rules[e.rule.class_index()];
                for c in e.rule.conjunctions() {
                    assert!(
                        planted.conjunctions().iter().any(|p| c.is_subset_of(p)),
                        "seed {seed}: {:?} not inside {:?}",
                        c,
                        planted
                    );
                }
            }
        }
    }

    #[test]
    fn reports_are_deterministic_and_carry_metadata() {
        let (spec, data) = planted(0.05, 200, 3);
        let schema = Arc::new(spec.schema.clone());
        let mut a = ClientState::new(4, data.clone(), schema.clone(), ClientConfig::default(), 8, 1).unwrap();
        let mut b = ClientState::new(4, data, schema, ClientConfig::default(), 8, 1).unwrap();
        let ra = a.local_round(None, 20, 0).unwrap();
        let rb = b.local_round(None, 20, 0).unwrap();
        assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
        assert_eq!(ra.client_id, 4);
        assert_eq!(ra.n_samples, 160);
        assert_eq!(a.local_test().len(), 40);
        assert_eq!(a.last_report(), Some(&ra));
        for e in &ra.entries {
            assert!((0.0..=1.0).contains(&e.accuracy));
            assert!((0.0..=1.0).contains(&e.uncertainty));
        }
    }

    #[test]
    fn global_params_are_loaded_before_training() {
        let (spec, data) = planted(0.0, 100, 4);
        let schema = Arc::new(spec.schema.clone());
        let mut client = ClientState::new(0, data, schema, ClientConfig::default(), 1, 1).unwrap();
        let zero = ModelParams::zeros(12, 3);
        let report = client.local_round(Some(&zero), 0, 0).unwrap();
        assert_eq!(report.params, zero);
        assert!(report.entries.is_empty(), "an all-zero model has no relevant features");
        assert!(client.local_round(Some(&ModelParams::zeros(5, 3)), 1, 1).is_err());
    }

    #[test]
    fn rejects_bad_construction() {
        let (spec, data) = planted(0.0, 20, 5);
        let schema = Arc::new(spec.schema.clone());
        assert!(ClientState::new(0, vec![], schema.clone(), ClientConfig::default(), 0, 0).is_err());
        let bad = ClientConfig {
            local_test_frac: 1.0,
            ..Default::default()
        };
        assert!(ClientState::new(0, data.clone(), schema.clone(), bad, 0, 0).is_err());
        let other = Arc::new(FeatureSchema::uniform(4, 2, 2).unwrap());
        assert!(ClientState::new(0, data, other, ClientConfig::default(), 0, 0).is_err());
    }

    #[test]
    fn training_only_touches_the_clients_own_shard() {
        // a client's report depends on its own shard alone: swapping every
        // other client's data leaves it byte-identical
        let (spec, data) = planted(0.05, 600, 6);
        let schema = Arc::new(spec.schema.clone());
        let own = data[..200].to_vec();
        let run = |neighbour: Vec<ConceptDataPoint>| {
            let mut me = ClientState::new(0, own.clone(), schema.clone(), ClientConfig::default(), 2, 2).unwrap();
            let mut other = ClientState::new(1, neighbour, schema.clone(), ClientConfig::default(), 3, 2).unwrap();
            let _ = other.local_round(None, 10, 0).unwrap();
            let r = me.local_round(None, 10, 0).unwrap();
            assert_eq!(r.n_samples, me.local_train().len());
            serde_json::to_string(&r).unwrap()
        };
        assert_eq!(run(data[200..400].to_vec()), run(data[400..].to_vec()));
    }
}
