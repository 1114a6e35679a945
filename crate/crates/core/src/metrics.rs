//! Model accuracy, rule accuracy, rule fidelity and rule uncertainty.
//!
//! Rule accuracy for class `c` is `(m + n) / (M + N)`: `M` points of class
//! `c`, `m` of which satisfy the rule; `N` other points, `n` of which do not.
//! The headline value averages over classes. Fidelity is the same quantity
//! with the model's predictions in place of the labels. A class with no rule
//! is scored with the always-false rule and reported in `missing_rules`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, XflError};
use crate::model::{ConceptDataPoint, ConceptPredictor};
use crate::rules::DnfRule;

fn require_points(points: &[ConceptDataPoint]) -> Result<()> {
    if points.is_empty() {
        return Err(XflError::invalid("metrics need a non-empty evaluation set"));
    }
    Ok(())
}

pub fn model_accuracy(model: &ConceptPredictor, points: &[ConceptDataPoint]) -> Result<f64> {
    require_points(points)?;
    let correct = points.iter().filter(|p| model.predict(p) == p.label()).count();
    Ok(correct as f64 / points.len() as f64)
}

/// Per-class rule accuracy against arbitrary reference labels. `adjusted`
/// holds the uncertainty-adjusted vectors, `reference` the label per point.
pub fn class_rule_accuracy_with(
    rule: Option<&DnfRule>,
    class: usize,
    adjusted: &[Vec<f64>],
    reference: &[usize],
    threshold: f64,
) -> f64 {
    let mut hits = 0usize;
    for (x, &label) in adjusted.iter().zip(reference) {
        let fires = rule.is_some_and(|r| r.is_satisfied_by(x, threshold));
        if fires == (label == class) {
            hits += 1;
        }
    }
    if adjusted.is_empty() {
        0.0
    } else {
        hits as f64 / adjusted.len() as f64
    }
}

/// Rule accuracy of one class rule against the true labels.
pub fn class_rule_accuracy(rule: &DnfRule, points: &[ConceptDataPoint], threshold: f64) -> f64 {
    let adjusted: Vec<Vec<f64>> = points.iter().map(ConceptDataPoint::adjusted).collect();
    let labels: Vec<usize> = points.iter().map(ConceptDataPoint::label).collect();
    class_rule_accuracy_with(Some(rule), rule.class_index(), &adjusted, &labels, threshold)
}

/// Headline value plus its per-class breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleScore {
    pub overall: f64,
    pub per_class: Vec<f64>,
    pub missing_rules: Vec<usize>,
}

/// Rule for class `c` is `rules[c]`; missing entries count as always false.
fn score_rules(
    rules: &[Option<DnfRule>],
    adjusted: &[Vec<f64>],
    reference: &[usize],
    n_classes: usize,
    threshold: f64,
) -> RuleScore {
    let per_class: Vec<f64> = (0..n_classes)
        .map(|c| {
            let rule = rules.get(c).and_then(Option::as_ref);
            class_rule_accuracy_with(rule, c, adjusted, reference, threshold)
        })
        .collect();
    let missing_rules = (0..n_classes)
        .filter(|&c| rules.get(c).and_then(Option::as_ref).is_none())
        .collect();
    RuleScore {
        overall: per_class.iter().sum::<f64>() / n_classes as f64,
        per_class,
        missing_rules,
    }
}

pub fn rule_accuracy(
    rules: &[Option<DnfRule>],
    points: &[ConceptDataPoint],
    n_classes: usize,
    threshold: f64,
) -> Result<RuleScore> {
    require_points(points)?;
    let adjusted: Vec<Vec<f64>> = points.iter().map(ConceptDataPoint::adjusted).collect();
    let labels: Vec<usize> = points.iter().map(ConceptDataPoint::label).collect();
    Ok(score_rules(rules, &adjusted, &labels, n_classes, threshold))
}

pub fn rule_fidelity(
    rules: &[Option<DnfRule>],
    model: &ConceptPredictor,
    points: &[ConceptDataPoint],
    threshold: f64,
) -> Result<RuleScore> {
    require_points(points)?;
    let adjusted: Vec<Vec<f64>> = points.iter().map(ConceptDataPoint::adjusted).collect();
    let predicted: Vec<usize> = adjusted.iter().map(|x| model.predict_adjusted(x)).collect();
    Ok(score_rules(rules, &adjusted, &predicted, model.n_classes(), threshold))
}

/// Mean uncertainty of the rules present; 0 when there are none.
pub fn rule_uncertainty(rules: &[Option<DnfRule>]) -> f64 {
    let us: Vec<f64> = rules.iter().flatten().map(DnfRule::uncertainty).collect();
    if us.is_empty() {
        0.0
    } else {
        us.iter().sum::<f64>() / us.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_index: usize,
    pub rule_accuracy: f64,
    pub rule_fidelity: f64,
    pub rule_uncertainty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_accuracy: f64,
    pub rule_accuracy: f64,
    pub rule_fidelity: f64,
    pub rule_uncertainty: f64,
    pub per_class: Vec<ClassMetrics>,
    pub missing_rules: Vec<usize>,
}

impl MetricsReport {
    pub fn evaluate(
        model: &ConceptPredictor,
        rules: &[Option<DnfRule>],
        points: &[ConceptDataPoint],
        threshold: f64,
    ) -> Result<Self> {
        let n_classes = model.n_classes();
        let accuracy = rule_accuracy(rules, points, n_classes, threshold)?;
        let fidelity = rule_fidelity(rules, model, points, threshold)?;
        let per_class = (0..n_classes)
            .map(|c| ClassMetrics {
                class_index: c,
                rule_accuracy: accuracy.per_class[c],
                rule_fidelity: fidelity.per_class[c],
                rule_uncertainty: rules.get(c).and_then(Option::as_ref).map(DnfRule::uncertainty),
            })
            .collect();
        Ok(MetricsReport {
            model_accuracy: model_accuracy(model, points)?,
            rule_accuracy: accuracy.overall,
            rule_fidelity: fidelity.overall,
            rule_uncertainty: rule_uncertainty(rules),
            per_class,
            missing_rules: accuracy.missing_rules,
        })
    }

    /// `(row label, value)` in table order.
    pub fn rows(&self) -> [(&'static str, f64); 4] {
        [
            ("model accuracy", self.model_accuracy),
            ("rule accuracy", self.rule_accuracy),
            ("rule fidelity", self.rule_fidelity),
            ("rule uncertainty", self.rule_uncertainty),
        ]
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, value) in self.rows() {
            writeln!(f, "{name:<18} {:>7.2}%", value * 100.0)?;
        }
        if !self.missing_rules.is_empty() {
            writeln!(f, "classes without a global rule: {:?}", self.missing_rules)?;
        }
        Ok(())
    }
}
