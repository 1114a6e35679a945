//! Positive-literal DNF rules with attached uncertainty.
//!
//! A [`Conjunction`] is an AND of feature literals and a [`DnfRule`] is an OR
//! of conjunctions explaining one class. Negation is not representable.
//! Uncertainty propagates as:
//!
//! * within a conjunction: geometric mean of the activated adjusted feature
//!   values ([`conjunction_uncertainty`]);
//! * OR of two rules: arithmetic mean of the two rule uncertainties;
//! * AND of two rules: each merged conjunction takes the geometric mean of its
//!   two sources, the rule takes the arithmetic mean over its conjunctions.
//!
//! Rules are always held in canonical form, so structural equality (used to
//! group identical client rules) is plain comparison of [`DnfRule::key`].

mod schema;
pub mod text;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, XflError};
use crate::model::ConceptDataPoint;

pub use schema::{is_identifier, FeatureSchema};
pub use text::{format_rule, format_rules, parse_rule, parse_rules};

/// Default threshold an adjusted feature value must exceed to count as present.
pub const DEFAULT_SATISFACTION_THRESHOLD: f64 = 0.5;

/// A positive literal: "feature is present".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Literal(usize);

impl Literal {
    pub fn new(feature_index: usize) -> Self {
        Literal(feature_index)
    }

    pub fn feature(self) -> usize {
        self.0
    }
}

fn check_unit(what: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(XflError::invalid(format!("{what} {x} outside [0, 1]")))
    }
}

/// AND of positive literals, sorted by feature index, with an uncertainty score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConjunction")]
pub struct Conjunction {
    literals: Vec<Literal>,
    uncertainty: f64,
}

#[derive(Deserialize)]
struct RawConjunction {
    literals: Vec<Literal>,
    uncertainty: f64,
}

impl TryFrom<RawConjunction> for Conjunction {
    type Error = XflError;

    fn try_from(raw: RawConjunction) -> Result<Self> {
        Conjunction::new(raw.literals.into_iter().map(Literal::feature), raw.uncertainty)
    }
}

impl Conjunction {
    /// Repeated features collapse into one literal.
    pub fn new(features: impl IntoIterator<Item = usize>, uncertainty: f64) -> Result<Self> {
        let mut literals: Vec<Literal> = features.into_iter().map(Literal).collect();
        if literals.is_empty() {
            return Err(XflError::invalid("conjunction must contain at least one literal"));
        }
        check_unit("conjunction uncertainty", uncertainty)?;
        literals.sort_unstable();
        literals.dedup();
        Ok(Conjunction {
            literals,
            uncertainty,
        })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn features(&self) -> impl Iterator<Item = usize> + '_ {
        self.literals.iter().map(|l| l.0)
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// True if every literal of `self` also appears in `other`.
    pub fn is_subset_of(&self, other: &Conjunction) -> bool {
        self.literals.iter().all(|l| other.literals.binary_search(l).is_ok())
    }

    pub fn is_satisfied_by(&self, adjusted: &[f64], threshold: f64) -> bool {
        self.literals
            .iter()
            .all(|l| adjusted.get(l.0).is_some_and(|&x| x > threshold))
    }

    fn merged_with(&self, other: &Conjunction) -> Conjunction {
        let mut literals = self.literals.clone();
        literals.extend_from_slice(&other.literals);
        literals.sort_unstable();
        literals.dedup();
        Conjunction {
            literals,
            uncertainty: geometric_mean(&[self.uncertainty, other.uncertainty]),
        }
    }
}

/// One class's explanation: OR of conjunctions, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule")]
pub struct DnfRule {
    class_index: usize,
    conjunctions: Vec<Conjunction>,
    uncertainty: f64,
}

#[derive(Deserialize)]
struct RawRule {
    class_index: usize,
    conjunctions: Vec<Conjunction>,
    uncertainty: f64,
}

impl TryFrom<RawRule> for DnfRule {
    type Error = XflError;

    fn try_from(raw: RawRule) -> Result<Self> {
        DnfRule::new(raw.class_index, raw.conjunctions, raw.uncertainty)
    }
}

/// Literal structure of a rule, without uncertainties. Orders rules
/// lexicographically and identifies "the same rule" across clients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RuleKey {
    pub class_index: usize,
    pub conjunctions: Vec<Vec<usize>>,
}

impl DnfRule {
    /// Builds a rule and brings it into canonical form.
    pub fn new(class_index: usize, conjunctions: Vec<Conjunction>, uncertainty: f64) -> Result<Self> {
        if conjunctions.is_empty() {
            return Err(XflError::invalid("rule must contain at least one conjunction"));
        }
        check_unit("rule uncertainty", uncertainty)?;
        Ok(DnfRule {
            class_index,
            conjunctions: canonical_conjunctions(conjunctions),
            uncertainty,
        })
    }

    /// Rule whose uncertainty is the arithmetic mean of its (canonical)
    /// conjunctions' uncertainties.
    pub fn from_conjunctions(class_index: usize, conjunctions: Vec<Conjunction>) -> Result<Self> {
        if conjunctions.is_empty() {
            return Err(XflError::invalid("rule must contain at least one conjunction"));
        }
        let conjunctions = canonical_conjunctions(conjunctions);
        let uncertainty = mean_uncertainty(&conjunctions);
        Ok(DnfRule {
            class_index,
            conjunctions,
            uncertainty,
        })
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn conjunctions(&self) -> &[Conjunction] {
        &self.conjunctions
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    /// Same structure, different uncertainty.
    pub fn with_uncertainty(&self, uncertainty: f64) -> Result<Self> {
        check_unit("rule uncertainty", uncertainty)?;
        Ok(DnfRule {
            uncertainty,
            ..self.clone()
        })
    }

    pub fn key(&self) -> RuleKey {
        RuleKey {
            class_index: self.class_index,
            conjunctions: self
                .conjunctions
                .iter()
                .map(|c| c.features().collect())
                .collect(),
        }
    }

    /// Equal literal structure; uncertainties are ignored.
    pub fn same_structure(&self, other: &DnfRule) -> bool {
        self.class_index == other.class_index
            && self.conjunctions.len() == other.conjunctions.len()
            && self
                .conjunctions
                .iter()
                .zip(&other.conjunctions)
                .all(|(a, b)| a.literals == b.literals)
    }

    pub fn features(&self) -> impl Iterator<Item = usize> + '_ {
        self.conjunctions.iter().flat_map(|c| c.features())
    }

    pub fn max_feature(&self) -> usize {
        self.features().max().unwrap_or(0)
    }

    /// Checks feature and class indices against a schema.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        if self.class_index >= schema.n_classes() {
            return Err(XflError::invalid(format!(
                "rule class {} out of range for {} classes",
                self.class_index,
                schema.n_classes()
            )));
        }
        if self.max_feature() >= schema.n_features() {
            return Err(XflError::invalid(format!(
                "rule feature {} out of range for {} features",
                self.max_feature(),
                schema.n_features()
            )));
        }
        Ok(())
    }

    /// Evaluates the rule on an already uncertainty-adjusted feature vector.
    pub fn is_satisfied_by(&self, adjusted: &[f64], threshold: f64) -> bool {
        self.conjunctions
            .iter()
            .any(|c| c.is_satisfied_by(adjusted, threshold))
    }

    /// No conjunction holds two distinct literals from the same feature group.
    pub fn is_conflict_free(&self, schema: &FeatureSchema) -> bool {
        self.conjunctions.iter().all(|c| {
            let lits = c.literals();
            lits.iter().enumerate().all(|(i, a)| {
                lits[i + 1..]
                    .iter()
                    .all(|b| schema.group_of(a.0) != schema.group_of(b.0))
            })
        })
    }
}

fn compare_literals(a: &Conjunction, b: &Conjunction) -> Ordering {
    a.literals.cmp(&b.literals)
}

fn canonical_conjunctions(mut conjunctions: Vec<Conjunction>) -> Vec<Conjunction> {
    for c in &mut conjunctions {
        c.literals.sort_unstable();
        c.literals.dedup();
    }
    conjunctions.sort_by(compare_literals);
    let mut out: Vec<Conjunction> = Vec::with_capacity(conjunctions.len());
    for c in conjunctions {
        match out.last_mut() {
            Some(last) if last.literals == c.literals => {
                last.uncertainty = last.uncertainty.max(c.uncertainty);
            }
            _ => out.push(c),
        }
    }
    out
}

fn mean_uncertainty(conjunctions: &[Conjunction]) -> f64 {
    let sum: f64 = conjunctions.iter().map(|c| c.uncertainty).sum();
    (sum / conjunctions.len() as f64).clamp(0.0, 1.0)
}

/// Sorts literals and conjunctions and merges duplicate conjunctions, keeping
/// the largest uncertainty among the duplicates.
pub fn canonicalize(rule: &DnfRule) -> DnfRule {
    DnfRule {
        class_index: rule.class_index,
        conjunctions: canonical_conjunctions(rule.conjunctions.clone()),
        uncertainty: rule.uncertainty,
    }
}

// Product form keeps the one- and two-element cases exact to the last ulp or
// so; the clamp guards the [min, max] bound against rounding.
fn geometric_mean(values: &[f64]) -> f64 {
    let product: f64 = values.iter().product();
    let gm = product.powf(1.0 / values.len() as f64);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    gm.clamp(lo, hi)
}

/// Geometric mean of the adjusted values of the activated features.
pub fn conjunction_uncertainty(activated_values: &[f64]) -> Result<f64> {
    if activated_values.is_empty() {
        return Err(XflError::invalid("uncertainty of an empty conjunction is undefined"));
    }
    for &x in activated_values {
        check_unit("activated feature value", x)?;
    }
    Ok(geometric_mean(activated_values))
}

/// Anything that exposes a set of literals: conjunctions and whole rules.
pub trait LiteralSet {
    fn literal_features(&self) -> Vec<usize>;
}

impl LiteralSet for Conjunction {
    fn literal_features(&self) -> Vec<usize> {
        self.features().collect()
    }
}

impl LiteralSet for DnfRule {
    fn literal_features(&self) -> Vec<usize> {
        let mut fs: Vec<usize> = self.features().collect();
        fs.sort_unstable();
        fs.dedup();
        fs
    }
}

/// True iff some literal of `a` and some literal of `b` are different
/// features of the same group. Shared identical literals are not a conflict.
pub fn conflicts<A, B>(a: &A, b: &B, schema: &FeatureSchema) -> bool
where
    A: LiteralSet + ?Sized,
    B: LiteralSet + ?Sized,
{
    let fb = b.literal_features();
    a.literal_features().into_iter().any(|x| {
        fb.iter()
            .any(|&y| x != y && schema.group_of(x) == schema.group_of(y))
    })
}

fn check_same_class(a: &DnfRule, b: &DnfRule) -> Result<()> {
    if a.class_index != b.class_index {
        return Err(XflError::invalid(format!(
            "cannot combine rules for classes {} and {}",
            a.class_index, b.class_index
        )));
    }
    Ok(())
}

/// `a OR b`: conjunctions are pooled, uncertainty is the mean of the two.
pub fn combine_or(a: &DnfRule, b: &DnfRule) -> Result<DnfRule> {
    check_same_class(a, b)?;
    let mut conjunctions = a.conjunctions.clone();
    conjunctions.extend_from_slice(&b.conjunctions);
    Ok(DnfRule {
        class_index: a.class_index,
        conjunctions: canonical_conjunctions(conjunctions),
        uncertainty: ((a.uncertainty + b.uncertainty) / 2.0).clamp(0.0, 1.0),
    })
}

/// `a AND b` distributed into DNF. Refuses conflicting rules.
pub fn combine_and(a: &DnfRule, b: &DnfRule, schema: &FeatureSchema) -> Result<DnfRule> {
    check_same_class(a, b)?;
    if conflicts(a, b, schema) {
        return Err(XflError::Conflict(format!(
            "rules for class {} share a feature group; combine with OR",
            a.class_index
        )));
    }
    let merged: Vec<Conjunction> = a
        .conjunctions
        .iter()
        .flat_map(|x| b.conjunctions.iter().map(move |y| x.merged_with(y)))
        .collect();
    DnfRule::from_conjunctions(a.class_index, merged)
}

/// Evaluates `rule` on the uncertainty-adjusted features of `point`.
pub fn rule_satisfied(rule: &DnfRule, point: &ConceptDataPoint, threshold: f64) -> Result<bool> {
    if rule.max_feature() >= point.n_features() {
        return Err(XflError::invalid(format!(
            "rule references feature {} but point has {} features",
            rule.max_feature(),
            point.n_features()
        )));
    }
    Ok(rule.is_satisfied_by(&point.adjusted(), threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn conj(fs: &[usize], u: f64) -> Conjunction {
        Conjunction::new(fs.iter().copied(), u).unwrap()
    }

    fn rule(class: usize, cs: &[&[usize]], u: f64) -> DnfRule {
        DnfRule::new(class, cs.iter().map(|c| conj(c, u)).collect(), u).unwrap()
    }

    fn structure(r: &DnfRule) -> Vec<Vec<usize>> {
        r.key().conjunctions
    }

    fn birds() -> FeatureSchema {
        let f = |n: &str, g: &str| (n.to_string(), g.to_string());
        FeatureSchema::new(
            vec![
                f("wing_black", "wing_color"),
                f("wing_gray", "wing_color"),
                f("bill_short", "bill_length"),
                f("bill_long", "bill_length"),
            ],
            vec!["albatross".into(), "gull".into()],
        )
        .unwrap()
    }

    #[test]
    fn canonicalize_merges_permuted_duplicates() {
        let r = DnfRule::new(0, vec![conj(&[3, 1], 0.4), conj(&[1, 3], 0.9)], 0.5).unwrap();
        assert_eq!(structure(&r), vec![vec![1, 3]]);
        assert_eq!(r.conjunctions()[0].uncertainty(), 0.9);
    }

    #[test]
    fn canonicalize_identity_and_sorting() {
        let r = rule(0, &[&[2]], 1.0);
        assert_eq!(structure(&canonicalize(&r)), vec![vec![2]]);
        let r = rule(0, &[&[5, 2], &[1]], 1.0);
        assert_eq!(structure(&r), vec![vec![1], vec![2, 5]]);
    }

    #[test]
    fn conjunction_uncertainty_examples() {
        assert_eq!(conjunction_uncertainty(&[0.7]).unwrap(), 0.7);
        let gm = conjunction_uncertainty(&[0.7, 0.5]).unwrap();
        assert!((gm - 0.35f64.sqrt()).abs() < 1e-12);
        assert!((gm - 0.591_607_978_309_961_6).abs() < 1e-12);
        assert_eq!(conjunction_uncertainty(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(conjunction_uncertainty(&[]), Err(XflError::InvalidArgument(_))));
        assert!(conjunction_uncertainty(&[1.2]).is_err());
    }

    #[test]
    fn conflict_examples() {
        let schema = birds();
        assert!(conflicts(&conj(&[0], 1.0), &conj(&[1], 1.0), &schema));
        assert!(!conflicts(&conj(&[0], 1.0), &conj(&[0], 1.0), &schema));
        assert!(!conflicts(&conj(&[0], 1.0), &conj(&[2], 1.0), &schema));
        assert!(conflicts(&rule(0, &[&[0, 2]], 1.0), &rule(0, &[&[3]], 1.0), &schema));
    }

    #[test]
    fn combine_or_examples() {
        let a = rule(0, &[&[0]], 0.8);
        let b = rule(0, &[&[1]], 0.6);
        let ab = combine_or(&a, &b).unwrap();
        assert!((ab.uncertainty() - 0.7).abs() < 1e-12);
        assert_eq!(structure(&ab), vec![vec![0], vec![1]]);

        let aa = combine_or(&a, &a).unwrap();
        assert_eq!(aa, a);

        let x = rule(0, &[&[1]], 1.0);
        let y = rule(0, &[&[2]], 1.0);
        let xy = combine_or(&x, &y).unwrap();
        assert_eq!(structure(&xy), vec![vec![1], vec![2]]);
        assert_eq!(xy.uncertainty(), 1.0);

        assert!(matches!(combine_or(&a, &rule(1, &[&[0]], 1.0)), Err(XflError::InvalidArgument(_))));
    }

    #[test]
    fn combine_and_examples() {
        let schema = FeatureSchema::uniform(6, 6, 2).unwrap();
        let r = combine_and(&rule(0, &[&[1]], 1.0), &rule(0, &[&[2]], 1.0), &schema).unwrap();
        assert_eq!(structure(&r), vec![vec![1, 2]]);

        let r = combine_and(&rule(0, &[&[1], &[2]], 1.0), &rule(0, &[&[3]], 1.0), &schema).unwrap();
        assert_eq!(structure(&r), vec![vec![1, 3], vec![2, 3]]);

        let a = DnfRule::from_conjunctions(0, vec![conj(&[1], 0.81)]).unwrap();
        let b = DnfRule::from_conjunctions(0, vec![conj(&[2], 0.49)]).unwrap();
        let ab = combine_and(&a, &b, &schema).unwrap();
        assert!((ab.conjunctions()[0].uncertainty() - 0.63).abs() < 1e-12);
        assert!((ab.uncertainty() - 0.63).abs() < 1e-12);
    }

    #[test]
    fn combine_and_refuses_conflicts() {
        let schema = birds();
        let err = combine_and(&rule(0, &[&[0]], 1.0), &rule(0, &[&[1]], 1.0), &schema);
        assert!(matches!(err, Err(XflError::Conflict(_))));
        assert!(combine_and(&rule(0, &[&[0]], 1.0), &rule(1, &[&[2]], 1.0), &schema).is_err());
    }

    #[test]
    fn satisfaction_examples() {
        let p = |v: Vec<f64>| {
            let n = v.len();
            ConceptDataPoint::new(v, vec![1.0; n], 0).unwrap()
        };
        let t = DEFAULT_SATISFACTION_THRESHOLD;
        assert!(rule_satisfied(&rule(0, &[&[0]], 1.0), &p(vec![0.9, 0.0]), t).unwrap());
        assert!(!rule_satisfied(&rule(0, &[&[0, 1]], 1.0), &p(vec![0.9, 0.3]), t).unwrap());
        assert!(rule_satisfied(&rule(0, &[&[0], &[1]], 1.0), &p(vec![0.1, 0.9]), t).unwrap());
        // strictly greater
        assert!(!rule_satisfied(&rule(0, &[&[0]], 1.0), &p(vec![0.5, 0.0]), t).unwrap());
        assert!(rule_satisfied(&rule(0, &[&[2]], 1.0), &p(vec![0.9, 0.9]), t).is_err());
    }

    #[test]
    fn satisfaction_uses_adjusted_values() {
        let point = ConceptDataPoint::new(vec![1.0, 1.0], vec![0.5, 0.7], 0).unwrap();
        assert!(!rule_satisfied(&rule(0, &[&[0]], 1.0), &point, 0.5).unwrap());
        assert!(rule_satisfied(&rule(0, &[&[1]], 1.0), &point, 0.5).unwrap());
    }

    #[test]
    fn invalid_constructions() {
        assert!(Conjunction::new(Vec::<usize>::new(), 1.0).is_err());
        assert!(Conjunction::new([1], 1.5).is_err());
        assert!(Conjunction::new([1], f64::NAN).is_err());
        assert!(DnfRule::new(0, vec![], 1.0).is_err());
        let schema = FeatureSchema::uniform(4, 2, 2).unwrap();
        assert!(rule(2, &[&[0]], 1.0).validate(&schema).is_err());
        assert!(rule(0, &[&[4]], 1.0).validate(&schema).is_err());
        assert!(rule(1, &[&[3]], 1.0).validate(&schema).is_ok());
    }

    #[test]
    fn serde_round_trip_keeps_canonical_form() {
        let r = rule(1, &[&[4, 2], &[0]], 0.75);
        let json = serde_json::to_string(&r).unwrap();
        let back: DnfRule = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
        let raw = r#"{"class_index":0,"conjunctions":[{"literals":[3,1],"uncertainty":1.0},{"literals":[1,3],"uncertainty":0.5}],"uncertainty":1.0}"#;
        let parsed: DnfRule = serde_json::from_str(raw).unwrap();
        assert_eq!(structure(&parsed), vec![vec![1, 3]]);
        let empty = r#"{"class_index":0,"conjunctions":[],"uncertainty":1.0}"#;
        assert!(serde_json::from_str::<DnfRule>(empty).is_err());
    }

    const F: usize = 8;

    fn arb_conj() -> impl Strategy<Value = Conjunction> {
        (prop::collection::btree_set(0..F, 1..4), 0.0..=1.0f64)
            .prop_map(|(fs, u)| Conjunction::new(fs, u).unwrap())
    }

    fn arb_rule() -> impl Strategy<Value = DnfRule> {
        (prop::collection::vec(arb_conj(), 1..4), 0.0..=1.0f64)
            .prop_map(|(cs, u)| DnfRule::new(0, cs, u).unwrap())
    }

    fn arb_schema() -> impl Strategy<Value = FeatureSchema> {
        (1..=F).prop_map(|g| FeatureSchema::uniform(F, g, 2).unwrap())
    }

    proptest! {
        #[test]
        fn or_is_commutative_associative_idempotent(a in arb_rule(), b in arb_rule(), c in arb_rule()) {
            let ab = combine_or(&a, &b).unwrap();
            let ba = combine_or(&b, &a).unwrap();
            prop_assert!(ab.same_structure(&ba));
            prop_assert!((ab.uncertainty() - ba.uncertainty()).abs() < 1e-15);
            let l = combine_or(&ab, &c).unwrap();
            let r = combine_or(&a, &combine_or(&b, &c).unwrap()).unwrap();
            prop_assert!(l.same_structure(&r));
            let aa = combine_or(&a, &a).unwrap();
            prop_assert!(aa.same_structure(&a));
            prop_assert_eq!(aa.uncertainty(), a.uncertainty());
        }

        #[test]
        fn and_output_is_conflict_free(a in arb_rule(), b in arb_rule(), schema in arb_schema()) {
            // only rules that are individually conflict-free and mutually non-conflicting qualify
            prop_assume!(a.is_conflict_free(&schema) && b.is_conflict_free(&schema));
            prop_assume!(!conflicts(&a, &b, &schema));
            let ab = combine_and(&a, &b, &schema).unwrap();
            prop_assert!(ab.is_conflict_free(&schema));
        }

        #[test]
        fn geometric_mean_bounds_and_monotonicity(
            xs in prop::collection::vec(0.0..=1.0f64, 1..6),
            idx in 0usize..6,
            bump in 0.0..=1.0f64,
        ) {
            let gm = conjunction_uncertainty(&xs).unwrap();
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(gm >= lo && gm <= hi);
            prop_assert_eq!(gm == 1.0, xs.iter().all(|&x| x == 1.0));
            let mut ys = xs.clone();
            let i = idx % ys.len();
            ys[i] = (ys[i] + bump).min(1.0);
            prop_assert!(conjunction_uncertainty(&ys).unwrap() >= gm - 1e-15);
        }

        #[test]
        fn canonicalize_is_a_projection(r in arb_rule()) {
            let once = canonicalize(&r);
            prop_assert_eq!(canonicalize(&once), once);
        }

        #[test]
        fn or_satisfaction_distributes(a in arb_rule(), b in arb_rule(), v in prop::collection::vec(0.0..=1.0f64, F), t in 0.05..0.95f64) {
            let p = ConceptDataPoint::new(v, vec![1.0; F], 0).unwrap();
            let ab = combine_or(&a, &b).unwrap();
            prop_assert_eq!(
                rule_satisfied(&ab, &p, t).unwrap(),
                rule_satisfied(&a, &p, t).unwrap() || rule_satisfied(&b, &p, t).unwrap()
            );
        }
    }
}
