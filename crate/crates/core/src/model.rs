//! Concept data points and the concept-to-class predictor.
//!
//! The predictor is a linear softmax classifier over uncertainty-adjusted
//! concept vectors. Its absolute weights, normalised per class, form the
//! feature-by-class relevance matrix from which sample-level rules are read.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, XflError};
use crate::rules::{conjunction_uncertainty, Conjunction, FeatureSchema};

/// Feature presence `v`, labeller confidence `u` and the class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDataPoint {
    v: Vec<f64>,
    u: Vec<f64>,
    label: usize,
}

fn check_unit_vec(what: &str, xs: &[f64]) -> Result<()> {
    match xs.iter().position(|x| !(0.0..=1.0).contains(x)) {
        Some(i) => Err(XflError::invalid(format!("{what}[{i}] = {} outside [0, 1]", xs[i]))),
        None => Ok(()),
    }
}

/// Elementwise product `v * u`.
pub fn apply_uncertainty(v: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if v.len() != u.len() {
        return Err(XflError::invalid(format!(
            "feature vector has {} entries, uncertainty vector {}",
            v.len(),
            u.len()
        )));
    }
    Ok(v.iter().zip(u).map(|(a, b)| a * b).collect())
}

impl ConceptDataPoint {
    pub fn new(v: Vec<f64>, u: Vec<f64>, label: usize) -> Result<Self> {
        if v.len() != u.len() {
            return Err(XflError::invalid(format!(
                "feature vector has {} entries, uncertainty vector {}",
                v.len(),
                u.len()
            )));
        }
        check_unit_vec("v", &v)?;
        check_unit_vec("u", &u)?;
        Ok(ConceptDataPoint { v, u, label })
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn n_features(&self) -> usize {
        self.v.len()
    }

    /// The uncertainty-adjusted vector `v * u`.
    pub fn adjusted(&self) -> Vec<f64> {
        self.v.iter().zip(&self.u).map(|(a, b)| a * b).collect()
    }

    /// Same point with full confidence on every feature.
    pub fn without_uncertainty(&self) -> Self {
        ConceptDataPoint {
            v: self.v.clone(),
            u: vec![1.0; self.v.len()],
            label: self.label,
        }
    }

    /// Dimensions, label range, and group-constant confidence.
    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        if self.v.len() != schema.n_features() {
            return Err(XflError::invalid(format!(
                "point has {} features, schema {}",
                self.v.len(),
                schema.n_features()
            )));
        }
        if self.label >= schema.n_classes() {
            return Err(XflError::invalid(format!("label {} out of range", self.label)));
        }
        let mut seen: Vec<Option<f64>> = vec![None; schema.n_groups()];
        for (f, &u) in self.u.iter().enumerate() {
            let g = schema.group_of(f);
            match seen[g] {
                Some(prev) if prev != u => {
                    return Err(XflError::invalid(format!(
                        "group {} carries differing confidences {prev} and {u}",
                        schema.group_name(g)
                    )))
                }
                _ => seen[g] = Some(u),
            }
        }
        Ok(())
    }
}

/// Flat parameter snapshot: the `C x F` weights row by row, then `C` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_features: usize,
    pub n_classes: usize,
    pub values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        ModelParams {
            n_features,
            n_classes,
            values: vec![0.0; (n_features + 1) * n_classes],
        }
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.n_features == other.n_features
            && self.n_classes == other.n_classes
            && self.values.len() == other.values.len()
    }

    fn check(&self) -> Result<()> {
        if self.values.len() != (self.n_features + 1) * self.n_classes {
            return Err(XflError::invalid(format!(
                "{} parameters do not fit a {}x{} model",
                self.values.len(),
                self.n_classes,
                self.n_features
            )));
        }
        if self.values.iter().any(|x| !x.is_finite()) {
            return Err(XflError::Numeric("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Checkpoint text: a `F C` header line, then one value per line.
    pub fn to_checkpoint(&self) -> String {
        let mut out = format!("{} {}\n", self.n_features, self.n_classes);
        for x in &self.values {
            out.push_str(&format!("{x}\n"));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| XflError::parse(1, "empty checkpoint"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| XflError::parse(1, "header must be 'F C'"))?;
        let [n_features, n_classes] = dims[..] else {
            return Err(XflError::parse(1, "header must be 'F C'"));
        };
        let values = lines
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| XflError::parse(i + 1, format!("bad value {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let params = ModelParams {
            n_features,
            n_classes,
            values,
        };
        params.check()?;
        Ok(params)
    }
}

// finite but useless; treated the same as overflow
const DIVERGENCE_BOUND: f64 = 1e100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub learning_rate: f64,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Relevance a feature needs for its class to appear in a sample rule.
    pub relevance_threshold: f64,
    /// Adjusted value a feature must exceed to count as present.
    pub satisfaction_threshold: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            learning_rate: 0.1,
            batch_size: None,
            relevance_threshold: 0.5,
            satisfaction_threshold: 0.5,
        }
    }
}

/// Per-epoch mean cross-entropy, measured before each epoch's update, plus
/// the loss after the final update.
#[derive(Debug, Clone, Default)]
pub struct TrainSummary {
    pub losses: Vec<f64>,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptPredictor {
    n_features: usize,
    n_classes: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    config: PredictorConfig,
}

fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

impl ConceptPredictor {
    /// Small uniform weights in `[-0.01, 0.01]` drawn from `seed`, zero bias.
    pub fn new(n_features: usize, n_classes: usize, config: PredictorConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..n_features * n_classes)
            .map(|_| rng.gen_range(-0.01..=0.01))
            .collect();
        ConceptPredictor {
            n_features,
            n_classes,
            weights,
            bias: vec![0.0; n_classes],
            config,
        }
    }

    pub fn zeros(n_features: usize, n_classes: usize, config: PredictorConfig) -> Self {
        ConceptPredictor {
            n_features,
            n_classes,
            weights: vec![0.0; n_features * n_classes],
            bias: vec![0.0; n_classes],
            config,
        }
    }

    pub fn from_params(params: &ModelParams, config: PredictorConfig) -> Result<Self> {
        let mut p = ConceptPredictor::zeros(params.n_features, params.n_classes, config);
        p.load_params(params)?;
        Ok(p)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[class * self.n_features + feature]
    }

    pub fn set_weight(&mut self, class: usize, feature: usize, value: f64) {
        self.weights[class * self.n_features + feature] = value;
    }

    pub fn set_bias(&mut self, class: usize, value: f64) {
        self.bias[class] = value;
    }

    pub fn params(&self) -> ModelParams {
        let mut values = self.weights.clone();
        values.extend_from_slice(&self.bias);
        ModelParams {
            n_features: self.n_features,
            n_classes: self.n_classes,
            values,
        }
    }

    pub fn load_params(&mut self, params: &ModelParams) -> Result<()> {
        if params.n_features != self.n_features || params.n_classes != self.n_classes {
            return Err(XflError::invalid(format!(
                "parameters for a {}x{} model cannot load into {}x{}",
                params.n_classes, params.n_features, self.n_classes, self.n_features
            )));
        }
        params.check()?;
        let split = self.n_features * self.n_classes;
        self.weights.copy_from_slice(&params.values[..split]);
        self.bias.copy_from_slice(&params.values[split..]);
        Ok(())
    }

    pub fn scores(&self, adjusted: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let row = &self.weights[c * self.n_features..(c + 1) * self.n_features];
                self.bias[c] + row.iter().zip(adjusted).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }

    /// Argmax over class scores; the lowest class index wins ties.
    pub fn predict_adjusted(&self, adjusted: &[f64]) -> usize {
        let scores = self.scores(adjusted);
        let mut best = 0;
        for c in 1..scores.len() {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict(&self, point: &ConceptDataPoint) -> usize {
        self.predict_adjusted(&point.adjusted())
    }

    fn check_data(&self, data: &[ConceptDataPoint]) -> Result<()> {
        if data.is_empty() {
            return Err(XflError::invalid("cannot train on an empty dataset"));
        }
        for p in data {
            if p.n_features() != self.n_features {
                return Err(XflError::invalid(format!(
                    "point has {} features, model expects {}",
                    p.n_features(),
                    self.n_features
                )));
            }
            if p.label() >= self.n_classes {
                return Err(XflError::invalid(format!("label {} out of range", p.label())));
            }
        }
        Ok(())
    }

    /// Mean cross-entropy and its gradient over `batch` (indices into `xs`).
    fn loss_and_gradient(&self, xs: &[Vec<f64>], labels: &[usize], batch: &[usize]) -> (f64, Vec<f64>, Vec<f64>) {
        let f = self.n_features;
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.n_classes];
        let mut loss = 0.0;
        for &i in batch {
            let x = &xs[i];
            let mut p = self.scores(x);
            softmax_in_place(&mut p);
            loss -= p[labels[i]].max(f64::MIN_POSITIVE).ln();
            for (c, &pc) in p.iter().enumerate() {
                let g = pc - if c == labels[i] { 1.0 } else { 0.0 };
                gb[c] += g;
                for (gwj, xj) in gw[c * f..(c + 1) * f].iter_mut().zip(x) {
                    *gwj += g * xj;
                }
            }
        }
        let n = batch.len() as f64;
        gw.iter_mut().for_each(|g| *g /= n);
        gb.iter_mut().for_each(|g| *g /= n);
        (loss / n, gw, gb)
    }

    /// Gradient descent on softmax cross-entropy over adjusted inputs.
    /// `seed` only matters for mini-batch shuffling.
    pub fn train(&mut self, data: &[ConceptDataPoint], epochs: usize, seed: u64) -> Result<TrainSummary> {
        self.check_data(data)?;
        let xs: Vec<Vec<f64>> = data.iter().map(ConceptDataPoint::adjusted).collect();
        let labels: Vec<usize> = data.iter().map(ConceptDataPoint::label).collect();
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch_size = self.config.batch_size.unwrap_or(data.len()).clamp(1, data.len());
        let lr = self.config.learning_rate;
        let mut summary = TrainSummary::default();

        for epoch in 0..epochs {
            if batch_size < data.len() {
                order.shuffle(&mut rng);
            }
            let mut epoch_loss = 0.0;
            for batch in order.chunks(batch_size) {
                let (loss, gw, gb) = self.loss_and_gradient(&xs, &labels, batch);
                if !loss.is_finite() {
                    return Err(XflError::Numeric(format!("loss diverged at epoch {epoch}")));
                }
                epoch_loss += loss * batch.len() as f64;
                for (w, g) in self.weights.iter_mut().zip(&gw) {
                    *w -= lr * g;
                }
                for (b, g) in self.bias.iter_mut().zip(&gb) {
                    *b -= lr * g;
                }
            }
            if self.weights.iter().chain(&self.bias).any(|x| !(x.is_finite() && x.abs() < DIVERGENCE_BOUND)) {
                return Err(XflError::Numeric(format!("parameters diverged at epoch {epoch}")));
            }
            summary.losses.push(epoch_loss / data.len() as f64);
        }
        if epochs > 0 {
            let all: Vec<usize> = (0..data.len()).collect();
            summary.final_loss = Some(self.loss_and_gradient(&xs, &labels, &all).0);
        }
        Ok(summary)
    }

    /// Mean cross-entropy of the current parameters on `data`.
    pub fn loss(&self, data: &[ConceptDataPoint]) -> Result<f64> {
        self.check_data(data)?;
        let xs: Vec<Vec<f64>> = data.iter().map(ConceptDataPoint::adjusted).collect();
        let labels: Vec<usize> = data.iter().map(ConceptDataPoint::label).collect();
        let all: Vec<usize> = (0..data.len()).collect();
        Ok(self.loss_and_gradient(&xs, &labels, &all).0)
    }

    /// `|weight(c, f)|`, each class column scaled so its maximum is 1.
    pub fn relevance_matrix(&self) -> RelevanceMatrix {
        let (f_n, c_n) = (self.n_features, self.n_classes);
        let mut data = vec![0.0; f_n * c_n];
        for c in 0..c_n {
            let row = &self.weights[c * f_n..(c + 1) * f_n];
            let max = row.iter().map(|w| w.abs()).fold(0.0, f64::max);
            if max > 0.0 {
                for f in 0..f_n {
                    data[f * c_n + c] = row[f].abs() / max;
                }
            }
        }
        RelevanceMatrix {
            n_features: f_n,
            n_classes: c_n,
            data,
        }
    }

    /// The positive-literal rule explaining this point's prediction, if any
    /// feature activates.
    pub fn extract_sample_rule(&self, point: &ConceptDataPoint, schema: &FeatureSchema) -> Option<Conjunction> {
        RuleExtractor::new(self, schema).extract(point)
    }
}

/// Feature-by-class relevance, entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix {
    n_features: usize,
    n_classes: usize,
    data: Vec<f64>,
}

impl RelevanceMatrix {
    pub fn get(&self, feature: usize, class: usize) -> f64 {
        self.data[feature * self.n_classes + class]
    }

    pub fn column(&self, class: usize) -> Vec<f64> {
        (0..self.n_features).map(|f| self.get(f, class)).collect()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }
}

/// Builds the sample rule from one relevance column and one adjusted vector.
///
/// A feature activates when its relevance exceeds `relevance_threshold` and
/// its adjusted value exceeds `satisfaction_threshold`; absent features are
/// dropped rather than negated. At most one literal per feature group is
/// kept (highest relevance, then highest value, then lowest index), since
/// same-group features must never be joined by AND.
pub fn activated_conjunction(
    relevance_column: &[f64],
    adjusted: &[f64],
    schema: &FeatureSchema,
    relevance_threshold: f64,
    satisfaction_threshold: f64,
) -> Option<Conjunction> {
    let mut best: Vec<Option<usize>> = vec![None; schema.n_groups()];
    for f in 0..relevance_column.len().min(adjusted.len()) {
        if relevance_column[f] <= relevance_threshold || adjusted[f] <= satisfaction_threshold {
            continue;
        }
        let slot = &mut best[schema.group_of(f)];
        let better = match *slot {
            None => true,
            Some(g) => {
                (relevance_column[f], adjusted[f]) > (relevance_column[g], adjusted[g])
            }
        };
        if better {
            *slot = Some(f);
        }
    }
    let features: Vec<usize> = best.into_iter().flatten().collect();
    if features.is_empty() {
        return None;
    }
    let values: Vec<f64> = features.iter().map(|&f| adjusted[f]).collect();
    let u = conjunction_uncertainty(&values).ok()?;
    Conjunction::new(features, u).ok()
}

/// Sample-rule extraction with the relevance matrix computed once.
pub struct RuleExtractor<'a> {
    predictor: &'a ConceptPredictor,
    schema: &'a FeatureSchema,
    relevance: RelevanceMatrix,
    columns: Vec<Vec<f64>>,
}

impl<'a> RuleExtractor<'a> {
    pub fn new(predictor: &'a ConceptPredictor, schema: &'a FeatureSchema) -> Self {
        let relevance = predictor.relevance_matrix();
        let columns = (0..relevance.n_classes()).map(|c| relevance.column(c)).collect();
        RuleExtractor {
            predictor,
            schema,
            relevance,
            columns,
        }
    }

    pub fn relevance(&self) -> &RelevanceMatrix {
        &self.relevance
    }

    /// Predicted class and the sample rule for it.
    pub fn extract_with_class(&self, point: &ConceptDataPoint) -> (usize, Option<Conjunction>) {
        let adjusted = point.adjusted();
        let class = self.predictor.predict_adjusted(&adjusted);
        let cfg = self.predictor.config();
        let rule = activated_conjunction(
            &self.columns[class],
            &adjusted,
            self.schema,
            cfg.relevance_threshold,
            cfg.satisfaction_threshold,
        );
        (class, rule)
    }

    pub fn extract(&self, point: &ConceptDataPoint) -> Option<Conjunction> {
        self.extract_with_class(point).1
    }
}
