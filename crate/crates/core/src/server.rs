//! Server side of a round: rank client rules, build one conflict-free global
//! rule per class behind a validation gate, weight clients by how often their
//! rules were selected, and average the models with those weights.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::client::{ClientId, RuleReport};
use crate::error::{Result, XflError};
use crate::metrics::class_rule_accuracy_with;
use crate::model::{ConceptDataPoint, ModelParams};
use crate::rules::{combine_and, combine_or, conflicts, DnfRule, FeatureSchema, RuleKey};

/// How client weights are formed and whether uncertainty enters ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Rank by accuracy times uncertainty, weight by selection tallies.
    Uncertainty,
    /// Same ranking, sample-count weights.
    FedAvg,
    /// Uncertainty treated as 1 everywhere, sample-count weights.
    NoUncertainty,
}

impl AggregationMode {
    pub const ALL: [AggregationMode; 3] = [
        AggregationMode::Uncertainty,
        AggregationMode::FedAvg,
        AggregationMode::NoUncertainty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregationMode::Uncertainty => "uncertainty",
            AggregationMode::FedAvg => "fedavg",
            AggregationMode::NoUncertainty => "no_uncertainty",
        }
    }

    pub fn uses_uncertainty(self) -> bool {
        self != AggregationMode::NoUncertainty
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationMode {
    type Err = XflError;

    fn from_str(s: &str) -> Result<Self> {
        AggregationMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| XflError::invalid(format!("unknown mode {s:?} (uncertainty, fedavg, no_uncertainty)")))
    }
}

/// What earns a client a tally point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TallyPolicy {
    /// Its rule group ranked within the top `m` for a class.
    TopM,
    /// Its rule group was merged into the global rule.
    Accepted,
}

impl FromStr for TallyPolicy {
    type Err = XflError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top_m" => Ok(TallyPolicy::TopM),
            "accepted" => Ok(TallyPolicy::Accepted),
            _ => Err(XflError::invalid(format!("unknown tally policy {s:?} (top_m, accepted)"))),
        }
    }
}

impl fmt::Display for TallyPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TallyPolicy::TopM => "top_m",
            TallyPolicy::Accepted => "accepted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerConfig {
    /// Rule groups considered per class.
    pub top_m: usize,
    pub mode: AggregationMode,
    pub tally: TallyPolicy,
    pub satisfaction_threshold: f64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            top_m: 3,
            mode: AggregationMode::Uncertainty,
            tally: TallyPolicy::TopM,
            satisfaction_threshold: 0.5,
        }
    }
}

/// Clients that submitted structurally identical rules for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleGroup {
    pub class_index: usize,
    /// Shared structure; uncertainties averaged over contributors.
    pub rule: DnfRule,
    /// Positions in the report batch, ascending.
    pub contributors: Vec<usize>,
    /// Mean of accuracy times uncertainty over contributors.
    pub score: f64,
}

impl RuleGroup {
    pub fn n(&self) -> usize {
        self.contributors.len()
    }
}

/// Groups identical rules for `class` and ranks them by score, then group
/// size, then rule order.
pub fn group_and_rank(reports: &[RuleReport], class: usize, use_uncertainty: bool) -> Vec<RuleGroup> {
    let mut groups: BTreeMap<RuleKey, Vec<(usize, &DnfRule, f64)>> = BTreeMap::new();
    for (pos, report) in reports.iter().enumerate() {
        if let Some(entry) = report.entry(class) {
            let u = if use_uncertainty { entry.uncertainty } else { 1.0 };
            groups
                .entry(entry.rule.key())
                .or_default()
                .push((pos, &entry.rule, entry.accuracy * u));
        }
    }
    let mut ranked: Vec<(RuleKey, RuleGroup)> = groups
        .into_iter()
        .map(|(key, members)| {
            let n = members.len() as f64;
            let score = members.iter().map(|m| m.2).sum::<f64>() / n;
            (key, RuleGroup {
                class_index: class,
                rule: average_rule(members.iter().map(|m| m.1)),
                contributors: members.iter().map(|m| m.0).collect(),
                score,
            })
        })
        .collect();
    ranked.sort_by(|(ka, a), (kb, b)| {
        b.score
            .total_cmp(&a.score)
            .then(b.n().cmp(&a.n()))
            .then_with(|| ka.cmp(kb))
    });
    ranked.into_iter().map(|(_, g)| g).collect()
}

/// Structurally identical rules with conjunction and rule uncertainties
/// averaged member-wise.
fn average_rule<'a>(rules: impl Iterator<Item = &'a DnfRule>) -> DnfRule {
    let rules: Vec<&DnfRule> = rules.collect();
    let n = rules.len() as f64;
    let first = rules[0];
    let conjunctions = (0..first.conjunctions().len())
        .map(|i| {
            let u = rules.iter().map(|r| r.conjunctions()[i].uncertainty()).sum::<f64>() / n;
            crate::rules::Conjunction::new(first.conjunctions()[i].features(), u.clamp(0.0, 1.0))
                .expect("same literals as an existing conjunction")
        })
        .collect();
    let u = (rules.iter().map(|r| r.uncertainty()).sum::<f64>() / n).clamp(0.0, 1.0);
    DnfRule::new(first.class_index(), conjunctions, u).expect("non-empty rule")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combinator {
    /// Starting point: the top-ranked rule.
    Seed,
    Or,
    And,
}

/// One decision of the greedy aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Rank of the group considered (0 = best).
    pub rank: usize,
    pub combinator: Combinator,
    /// Validation rule accuracy of the candidate.
    pub validation_accuracy: f64,
    pub accepted: bool,
}

/// Adjusted validation vectors and labels, computed once per round.
pub struct ValidationSet {
    adjusted: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl ValidationSet {
    pub fn new(points: &[ConceptDataPoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(XflError::invalid("validation set must not be empty"));
        }
        Ok(ValidationSet {
            adjusted: points.iter().map(ConceptDataPoint::adjusted).collect(),
            labels: points.iter().map(ConceptDataPoint::label).collect(),
        })
    }

    pub fn rule_accuracy(&self, rule: &DnfRule, threshold: f64) -> f64 {
        class_rule_accuracy_with(Some(rule), rule.class_index(), &self.adjusted, &self.labels, threshold)
    }
}

/// Greedy aggregation of the top `m` groups of one class.
///
/// Starts from the best group's rule; each following group is joined with OR
/// when it shares a feature group with the current rule and with AND
/// otherwise, and the candidate replaces the current rule only if its
/// validation rule accuracy is strictly higher.
pub fn aggregate_class_rule(
    ranked: &[RuleGroup],
    m: usize,
    validation: &ValidationSet,
    schema: &FeatureSchema,
    threshold: f64,
) -> Result<(DnfRule, Vec<TraceStep>)> {
    let first = ranked
        .first()
        .ok_or_else(|| XflError::invalid("no rule groups to aggregate"))?;
    let mut global = first.rule.clone();
    let mut best = validation.rule_accuracy(&global, threshold);
    let mut trace = vec![TraceStep {
        rank: 0,
        combinator: Combinator::Seed,
        validation_accuracy: best,
        accepted: true,
    }];
    for (rank, group) in ranked.iter().enumerate().take(m.max(1)).skip(1) {
        let (combinator, candidate) = if conflicts(&global, &group.rule, schema) {
            (Combinator::Or, combine_or(&global, &group.rule)?)
        } else {
            (Combinator::And, combine_and(&global, &group.rule, schema)?)
        };
        let acc = validation.rule_accuracy(&candidate, threshold);
        let accepted = acc > best;
        trace.push(TraceStep {
            rank,
            combinator,
            validation_accuracy: acc,
            accepted,
        });
        if accepted {
            global = candidate;
            best = acc;
        }
    }
    Ok((global, trace))
}

/// `t_k / sum(t)`, or uniform when nobody scored.
pub fn client_weights(tallies: &[u32]) -> Vec<f64> {
    let total: u64 = tallies.iter().map(|&t| u64::from(t)).sum();
    if total == 0 {
        let k = tallies.len() as f64;
        return vec![1.0 / k; tallies.len()];
    }
    tallies.iter().map(|&t| f64::from(t) / total as f64).collect()
}

/// Sample-count-proportional weights.
pub fn fedavg_weights(sample_counts: &[usize]) -> Vec<f64> {
    let total: usize = sample_counts.iter().sum();
    if total == 0 {
        return vec![1.0 / sample_counts.len() as f64; sample_counts.len()];
    }
    sample_counts.iter().map(|&n| n as f64 / total as f64).collect()
}

/// Coordinatewise weighted average of parameter snapshots.
pub fn aggregate_models(snapshots: &[ModelParams], weights: &[f64]) -> Result<ModelParams> {
    let first = snapshots
        .first()
        .ok_or_else(|| XflError::invalid("no parameter snapshots to aggregate"))?;
    if weights.len() != snapshots.len() {
        return Err(XflError::invalid(format!(
            "{} weights for {} snapshots",
            weights.len(),
            snapshots.len()
        )));
    }
    if snapshots.iter().any(|s| !s.same_shape(first)) {
        return Err(XflError::invalid("parameter snapshots differ in shape"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(XflError::invalid("weights must be non-negative and sum to 1"));
    }
    let mut values = vec![0.0; first.values.len()];
    for (s, &w) in snapshots.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (acc, x) in values.iter_mut().zip(&s.values) {
            *acc += w * x;
        }
    }
    // exact copy for a single full-weight snapshot, no rounding drift
    if let Some(i) = weights.iter().position(|&w| w == 1.0) {
        values.clone_from(&snapshots[i].values);
    }
    Ok(ModelParams {
        n_features: first.n_features,
        n_classes: first.n_classes,
        values,
    })
}

/// Aggregation outcome for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregation {
    pub class_index: usize,
    pub rule: DnfRule,
    pub trace: Vec<TraceStep>,
    /// Top-`m` groups in rank order.
    pub selected: Vec<RuleGroup>,
}

/// Server-side record of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRound {
    pub round: usize,
    /// Indexed by class; `None` when no client reported that class.
    pub global_rules: Vec<Option<DnfRule>>,
    pub classes: Vec<ClassAggregation>,
    /// Client ids in report order; tallies and weights align with them.
    pub client_ids: Vec<ClientId>,
    pub tallies: Vec<u32>,
    pub weights: Vec<f64>,
    pub global_params: ModelParams,
}

/// Runs ranking, aggregation, tallying and model averaging for one round.
pub fn server_round(
    reports: &[RuleReport],
    validation: &ValidationSet,
    schema: &FeatureSchema,
    config: &ServerConfig,
    round: usize,
) -> Result<GlobalRound> {
    if reports.is_empty() {
        return Err(XflError::invalid("server round needs at least one report"));
    }
    for r in reports {
        for e in &r.entries {
            e.rule.validate(schema)?;
            if !e.rule.is_conflict_free(schema) {
                return Err(XflError::Conflict(format!(
                    "client {} reported a rule for class {} that asserts two features of one group",
                    r.client_id,
                    e.rule.class_index()
                )));
            }
        }
    }
    let m = config.top_m.max(1);
    let mut tallies = vec![0u32; reports.len()];
    let mut global_rules = vec![None; schema.n_classes()];
    let mut classes = Vec::new();

    for (class, slot) in global_rules.iter_mut().enumerate() {
        let ranked = group_and_rank(reports, class, config.mode.uses_uncertainty());
        if ranked.is_empty() {
            continue;
        }
        let (rule, trace) = aggregate_class_rule(&ranked, m, validation, schema, config.satisfaction_threshold)?;
        let selected: Vec<RuleGroup> = ranked.into_iter().take(m).collect();
        for (rank, group) in selected.iter().enumerate() {
            let counts = match config.tally {
                TallyPolicy::TopM => true,
                TallyPolicy::Accepted => trace.iter().any(|s| s.rank == rank && s.accepted),
            };
            if counts {
                for &pos in &group.contributors {
                    tallies[pos] += 1;
                }
            }
        }
        if !rule.is_conflict_free(schema) {
            return Err(XflError::Conflict(format!("global rule for class {class} asserts two features of one group")));
        }
        *slot = Some(rule.clone());
        classes.push(ClassAggregation {
            class_index: class,
            rule,
            trace,
            selected,
        });
    }

    let weights = match config.mode {
        AggregationMode::Uncertainty => client_weights(&tallies),
        AggregationMode::FedAvg | AggregationMode::NoUncertainty => {
            fedavg_weights(&reports.iter().map(|r| r.n_samples).collect::<Vec<_>>())
        }
    };
    let snapshots: Vec<ModelParams> = reports.iter().map(|r| r.params.clone()).collect();
    let global_params = aggregate_models(&snapshots, &weights)?;

    Ok(GlobalRound {
        round,
        global_rules,
        classes,
        client_ids: reports.iter().map(|r| r.client_id).collect(),
        tallies,
        weights,
        global_params,
    })
}
