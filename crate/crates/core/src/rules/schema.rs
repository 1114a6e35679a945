use serde::{Deserialize, Serialize};

use crate::error::{Result, XflError};

/// Names the features, their groups and the class labels of a problem.
///
/// Groups are indexed in order of first appearance among the features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct FeatureSchema {
    feature_names: Vec<String>,
    group_of: Vec<usize>,
    group_names: Vec<String>,
    class_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    features: Vec<(String, String)>,
    classes: Vec<String>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = XflError;

    fn try_from(raw: RawSchema) -> Result<Self> {
        FeatureSchema::new(raw.features, raw.classes)
    }
}

impl From<FeatureSchema> for RawSchema {
    fn from(schema: FeatureSchema) -> Self {
        let features = (0..schema.n_features())
            .map(|f| {
                (
                    schema.feature_names[f].clone(),
                    schema.group_names[schema.group_of[f]].clone(),
                )
            })
            .collect();
        RawSchema {
            features,
            classes: schema.class_names,
        }
    }
}

/// Identifiers end up in the dataset header and the rule text format, so
/// they are restricted to characters neither format uses as delimiters.
pub fn is_identifier(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && name != "AND"
        && name != "OR"
}

fn check_unique(kind: &str, names: &[String]) -> Result<()> {
    for (i, name) in names.iter().enumerate() {
        if !is_identifier(name) {
            return Err(XflError::invalid(format!("{kind} name {name:?} is not a valid identifier")));
        }
        if names[..i].contains(name) {
            return Err(XflError::invalid(format!("duplicate {kind} name {name:?}")));
        }
    }
    Ok(())
}

impl FeatureSchema {
    /// Builds a schema from `(feature name, group name)` pairs and class names.
    pub fn new(features: Vec<(String, String)>, class_names: Vec<String>) -> Result<Self> {
        if features.is_empty() {
            return Err(XflError::invalid("schema needs at least one feature"));
        }
        if class_names.len() < 2 {
            return Err(XflError::invalid("schema needs at least two classes"));
        }
        let mut feature_names = Vec::with_capacity(features.len());
        let mut group_names: Vec<String> = Vec::new();
        let mut group_of = Vec::with_capacity(features.len());
        for (name, group) in features {
            if !is_identifier(&group) {
                return Err(XflError::invalid(format!("group name {group:?} is not a valid identifier")));
            }
            let g = match group_names.iter().position(|g| *g == group) {
                Some(g) => g,
                None => {
                    group_names.push(group);
                    group_names.len() - 1
                }
            };
            feature_names.push(name);
            group_of.push(g);
        }
        check_unique("feature", &feature_names)?;
        check_unique("class", &class_names)?;
        Ok(FeatureSchema {
            feature_names,
            group_of,
            group_names,
            class_names,
        })
    }

    /// `n_features` features split into `n_groups` contiguous, near-equal
    /// groups, named `g{group}_f{feature}`; classes are `c0..`.
    pub fn uniform(n_features: usize, n_groups: usize, n_classes: usize) -> Result<Self> {
        if n_groups == 0 || n_groups > n_features {
            return Err(XflError::invalid(format!(
                "cannot split {n_features} features into {n_groups} groups"
            )));
        }
        let features = (0..n_features)
            .map(|f| {
                let g = f * n_groups / n_features;
                (format!("g{g}_f{f}"), format!("g{g}"))
            })
            .collect();
        let classes = (0..n_classes).map(|c| format!("c{c}")).collect();
        FeatureSchema::new(features, classes)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_name(&self, feature: usize) -> &str {
        &self.feature_names[feature]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn group_of(&self, feature: usize) -> usize {
        self.group_of[feature]
    }

    pub fn group_name(&self, group: usize) -> &str {
        &self.group_names[group]
    }

    /// Feature indices belonging to `group`, ascending.
    pub fn group_members(&self, group: usize) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&f| self.group_of[f] == group)
            .collect()
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.class_names[class]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|n| n == name)
    }
}
