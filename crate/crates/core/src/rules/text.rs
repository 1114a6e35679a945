//! Line-oriented rule text:
//!
//! ```text
//! albatross <-> (wing_black AND bill_long) OR (wing_gray)@0.5 [u=0.75]
//! ```
//!
//! The trailing `[u=...]` is the rule uncertainty. A conjunction whose
//! uncertainty differs from the rule's carries an `@value` suffix; without
//! one it inherits the rule value. Numbers are printed in shortest
//! round-trip form, so printing and parsing a rule is lossless.

use std::fmt::Write as _;

use super::{Conjunction, DnfRule, FeatureSchema};
use crate::error::{Result, XflError};

pub fn format_rule(rule: &DnfRule, schema: &FeatureSchema) -> String {
    let mut out = String::new();
    out.push_str(schema.class_name(rule.class_index()));
    out.push_str(" <->");
    for (i, c) in rule.conjunctions().iter().enumerate() {
        out.push_str(if i == 0 { " (" } else { " OR (" });
        for (j, f) in c.features().enumerate() {
            if j > 0 {
                out.push_str(" AND ");
            }
            out.push_str(schema.feature_name(f));
        }
        out.push(')');
        if c.uncertainty().to_bits() != rule.uncertainty().to_bits() {
            let _ = write!(out, "@{}", c.uncertainty());
        }
    }
    let _ = write!(out, " [u={}]", rule.uncertainty());
    out
}

fn parse_unit(text: &str, line: usize) -> Result<f64> {
    let x: f64 = text
        .trim()
        .parse()
        .map_err(|_| XflError::parse(line, format!("bad number {text:?}")))?;
    if !(0.0..=1.0).contains(&x) {
        return Err(XflError::parse(line, format!("uncertainty {x} outside [0, 1]")));
    }
    Ok(x)
}

/// Parses one rule line. `line` is only used for error messages.
pub fn parse_rule(text: &str, schema: &FeatureSchema, line: usize) -> Result<DnfRule> {
    let (head, body) = text
        .split_once("<->")
        .ok_or_else(|| XflError::parse(line, "missing '<->'"))?;
    let class_name = head.trim();
    let class = schema
        .class_index(class_name)
        .ok_or_else(|| XflError::parse(line, format!("unknown class {class_name:?}")))?;

    let body = body.trim();
    let open = body
        .rfind("[u=")
        .ok_or_else(|| XflError::parse(line, "missing '[u=...]'"))?;
    let tail = &body[open + 3..];
    let close = tail
        .strip_suffix(']')
        .ok_or_else(|| XflError::parse(line, "'[u=...]' must end the line"))?;
    let rule_u = parse_unit(close, line)?;

    let mut rest = body[..open].trim();
    let mut parts: Vec<(Vec<usize>, Option<f64>)> = Vec::new();
    loop {
        rest = rest
            .strip_prefix('(')
            .ok_or_else(|| XflError::parse(line, "expected '('"))?;
        let end = rest
            .find(')')
            .ok_or_else(|| XflError::parse(line, "unclosed '('"))?;
        let mut features = Vec::new();
        for (i, tok) in rest[..end].split_whitespace().enumerate() {
            if i % 2 == 1 {
                if tok != "AND" {
                    return Err(XflError::parse(line, format!("expected AND, found {tok:?}")));
                }
                continue;
            }
            let f = schema
                .feature_index(tok)
                .ok_or_else(|| XflError::parse(line, format!("unknown feature {tok:?}")))?;
            features.push(f);
        }
        if features.is_empty() || rest[..end].split_whitespace().count() % 2 == 0 {
            return Err(XflError::parse(line, "malformed conjunction"));
        }
        rest = &rest[end + 1..];
        let mut u = None;
        if let Some(after) = rest.strip_prefix('@') {
            let stop = after.find(char::is_whitespace).unwrap_or(after.len());
            u = Some(parse_unit(&after[..stop], line)?);
            rest = &after[stop..];
        }
        parts.push((features, u));
        rest = rest.trim_start();
        if rest.is_empty() {
            break;
        }
        rest = rest
            .strip_prefix("OR")
            .ok_or_else(|| XflError::parse(line, format!("expected OR, found {rest:?}")))?
            .trim_start();
    }

    let conjunctions = parts
        .into_iter()
        .map(|(fs, u)| Conjunction::new(fs, u.unwrap_or(rule_u)))
        .collect::<Result<Vec<_>>>()?;
    DnfRule::new(class, conjunctions, rule_u)
}

/// One rule per non-empty line; lines starting with `#` are comments.
pub fn parse_rules(text: &str, schema: &FeatureSchema) -> Result<Vec<DnfRule>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| parse_rule(l, schema, i + 1))
        .collect()
}

pub fn format_rules<'a>(rules: impl IntoIterator<Item = &'a DnfRule>, schema: &FeatureSchema) -> String {
    let mut out = String::new();
    for r in rules {
        out.push_str(&format_rule(r, schema));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> FeatureSchema {
        let f = |n: &str, g: &str| (n.to_string(), g.to_string());
        FeatureSchema::new(
            vec![
                f("feat_a", "g0"),
                f("feat_b", "g1"),
                f("feat_c", "g2"),
                f("feat_d", "g2"),
            ],
            vec!["class_name".into(), "other".into()],
        )
        .unwrap()
    }

    #[test]
    fn prints_documented_form() {
        let s = schema();
        let r = DnfRule::new(
            0,
            vec![
                Conjunction::new([1, 0], 0.73).unwrap(),
                Conjunction::new([2], 0.73).unwrap(),
            ],
            0.73,
        )
        .unwrap();
        assert_eq!(format_rule(&r, &s), "class_name <-> (feat_a AND feat_b) OR (feat_c) [u=0.73]");
    }

    #[test]
    fn parses_documented_form() {
        let s = schema();
        let r = parse_rule("class_name <-> (feat_a AND feat_b) OR (feat_c) [u=0.73]", &s, 1).unwrap();
        assert_eq!(r.key().conjunctions, vec![vec![0, 1], vec![2]]);
        assert_eq!(r.uncertainty(), 0.73);
        assert!(r.conjunctions().iter().all(|c| c.uncertainty() == 0.73));
    }

    #[test]
    fn per_conjunction_uncertainty_annotation() {
        let s = schema();
        let r = parse_rule("other <-> (feat_d)@0.25 OR (feat_a AND feat_c)  [u=0.5]", &s, 1).unwrap();
        assert_eq!(r.class_index(), 1);
        assert_eq!(r.conjunctions()[0].uncertainty(), 0.5);
        assert_eq!(r.conjunctions()[1].uncertainty(), 0.25);
        assert_eq!(parse_rule(&format_rule(&r, &s), &s, 1).unwrap(), r);
    }

    #[test]
    fn rejects_malformed_lines() {
        let s = schema();
        for bad in [
            "class_name (feat_a) [u=1]",
            "nope <-> (feat_a) [u=1]",
            "class_name <-> (feat_z) [u=1]",
            "class_name <-> (feat_a) [u=2]",
            "class_name <-> (feat_a feat_b) [u=1]",
            "class_name <-> (feat_a AND) [u=1]",
            "class_name <-> () [u=1]",
            "class_name <-> (feat_a) (feat_b) [u=1]",
            "class_name <-> (feat_a) OR [u=1]",
            "class_name <-> (feat_a)",
        ] {
            assert!(parse_rule(bad, &s, 7).is_err(), "{bad}");
        }
        match parse_rule("x <-> (feat_a) [u=1]", &s, 7) {
            Err(XflError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rule_file_skips_comments() {
        let s = schema();
        let text = "# global rules\n\nclass_name <-> (feat_a) [u=1]\nother <-> (feat_b) [u=0.5]\n";
        let rules = parse_rules(text, &s).unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(format_rules(&rules, &s).lines().count(), 2);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_lossless(
            class in 0usize..2,
            cs in prop::collection::vec((prop::collection::btree_set(0usize..4, 1..4), 0.0..=1.0f64), 1..4),
            u in 0.0..=1.0f64,
        ) {
            let s = schema();
            let conjunctions = cs.into_iter().map(|(fs, cu)| Conjunction::new(fs, cu).unwrap()).collect();
            let r = DnfRule::new(class, conjunctions, u).unwrap();
            prop_assert_eq!(parse_rule(&format_rule(&r, &s), &s, 1).unwrap(), r);
        }
    }
}
