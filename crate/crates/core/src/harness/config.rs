//! Run configuration as a flat `key = value` document.
//!
//! Keys (defaults in parentheses):
//!
//! ```text
//! dataset                   cub_like | mnist_like | file (cub_like)
//! dataset_path              dataset file when dataset = file
//! n_points                  generated points (2000)
//! n_features, n_groups      generated schema size (20, 5)
//! n_classes                 generated classes (4)
//! literals_per_conjunction  planted conjunction length (3)
//! conjunctions_per_class    planted conjunctions per class (1)
//! noise_rate                feature flip probability (0.05)
//! confidence                confidence mix, e.g. definitely=0.8,probably=0.2 (definitely=1)
//! hetero_clients            clients whose shards are regenerated (0)
//! hetero_noise              their feature flip probability (0.3)
//! hetero_confidence         their confidence mix (guessing=0.8,definitely=0.1,probably=0.1)
//! p_unchanged               overlay: chance a point keeps its digit (0.5)
//! clients                   number of clients (10)
//! rounds_max                round limit (30)
//! target_accuracy           validation model accuracy that stops the run (0.95)
//! epochs                    local epochs per round (20)
//! learning_rate             (0.5)
//! batch_size                full | positive integer (full)
//! m                         rule groups aggregated per class (3)
//! relevance_threshold       (0.5)
//! satisfaction_threshold    (0.5)
//! max_conjunctions          per client class rule (5)
//! val_frac, test_frac       server-held fractions (0.05, 0.05)
//! local_test_frac           client-held fraction for rule scoring (0.2)
//! mode                      uncertainty | fedavg | no_uncertainty (uncertainty)
//! tally                     top_m | accepted (top_m)
//! seed                      root seed (0)
//! output_dir                where `run` writes its report (unset)
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::datasets::{ConfidenceMix, DEFAULT_CLIENTS, DEFAULT_TEST_FRACTION, DEFAULT_VALIDATION_FRACTION};
use crate::error::{Result, XflError};
use crate::server::{AggregationMode, TallyPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    CubLike,
    MnistLike,
    File,
}

impl FromStr for DatasetKind {
    type Err = XflError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cub_like" => Ok(DatasetKind::CubLike),
            "mnist_like" => Ok(DatasetKind::MnistLike),
            "file" => Ok(DatasetKind::File),
            _ => Err(XflError::Config(format!(
                "dataset: unknown kind {s:?} (cub_like, mnist_like, file)"
            ))),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::CubLike => "cub_like",
            DatasetKind::MnistLike => "mnist_like",
            DatasetKind::File => "file",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub dataset_path: Option<PathBuf>,
    pub n_points: usize,
    pub n_features: usize,
    pub n_groups: usize,
    pub n_classes: usize,
    pub literals_per_conjunction: usize,
    pub conjunctions_per_class: usize,
    pub noise_rate: f64,
    pub confidence: ConfidenceMix,
    pub hetero_clients: usize,
    pub hetero_noise: f64,
    pub hetero_confidence: ConfidenceMix,
    pub p_unchanged: f64,
    pub clients: usize,
    pub rounds_max: usize,
    pub target_accuracy: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: Option<usize>,
    pub m: usize,
    pub relevance_threshold: f64,
    pub satisfaction_threshold: f64,
    pub max_conjunctions: usize,
    pub val_frac: f64,
    pub test_frac: f64,
    pub local_test_frac: f64,
    pub mode: AggregationMode,
    pub tally: TallyPolicy,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetKind::CubLike,
            dataset_path: None,
            n_points: 2000,
            n_features: 20,
            n_groups: 5,
            n_classes: 4,
            literals_per_conjunction: 3,
            conjunctions_per_class: 1,
            noise_rate: 0.05,
            confidence: ConfidenceMix::default(),
            hetero_clients: 0,
            hetero_noise: 0.3,
            hetero_confidence: "guessing=0.8,definitely=0.1,probably=0.1"
                .parse()
                .expect("valid built-in mix"),
            p_unchanged: 0.5,
            clients: DEFAULT_CLIENTS,
            rounds_max: 30,
            target_accuracy: 0.95,
            epochs: 20,
            learning_rate: 0.5,
            batch_size: None,
            m: 3,
            relevance_threshold: 0.5,
            satisfaction_threshold: 0.5,
            max_conjunctions: 5,
            val_frac: DEFAULT_VALIDATION_FRACTION,
            test_frac: DEFAULT_TEST_FRACTION,
            local_test_frac: 0.2,
            mode: AggregationMode::Uncertainty,
            tally: TallyPolicy::TopM,
            seed: 0,
            output_dir: None,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| XflError::Config(format!("{key}: cannot parse {value:?}")))
}

fn with_key<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        XflError::Config(m) => XflError::Config(m),
        other => XflError::Config(format!("{key}: {other}")),
    })
}

impl RunConfig {
    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "dataset" => self.dataset = value.parse()?,
            "dataset_path" => self.dataset_path = (!value.is_empty()).then(|| PathBuf::from(value)),
            "n_points" => self.n_points = num(key, value)?,
            "n_features" => self.n_features = num(key, value)?,
            "n_groups" => self.n_groups = num(key, value)?,
            "n_classes" => self.n_classes = num(key, value)?,
            "literals_per_conjunction" => self.literals_per_conjunction = num(key, value)?,
            "conjunctions_per_class" => self.conjunctions_per_class = num(key, value)?,
            "noise_rate" => self.noise_rate = num(key, value)?,
            "confidence" => self.confidence = with_key(key, value.parse())?,
            "hetero_clients" => self.hetero_clients = num(key, value)?,
            "hetero_noise" => self.hetero_noise = num(key, value)?,
            "hetero_confidence" => self.hetero_confidence = with_key(key, value.parse())?,
            "p_unchanged" => self.p_unchanged = num(key, value)?,
            "clients" => self.clients = num(key, value)?,
            "rounds_max" => self.rounds_max = num(key, value)?,
            "target_accuracy" => self.target_accuracy = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "batch_size" => {
                self.batch_size = if value == "full" { None } else { Some(num(key, value)?) };
            }
            "m" => self.m = num(key, value)?,
            "relevance_threshold" => self.relevance_threshold = num(key, value)?,
            "satisfaction_threshold" => self.satisfaction_threshold = num(key, value)?,
            "max_conjunctions" => self.max_conjunctions = num(key, value)?,
            "val_frac" => self.val_frac = num(key, value)?,
            "test_frac" => self.test_frac = num(key, value)?,
            "local_test_frac" => self.local_test_frac = num(key, value)?,
            "mode" => self.mode = with_key(key, value.parse())?,
            "tally" => self.tally = with_key(key, value.parse())?,
            "seed" => self.seed = num(key, value)?,
            "output_dir" => self.output_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            other => return Err(XflError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// `key=value` override as given on a command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| XflError::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k, v)
    }

    /// Applies a config document on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| XflError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)
                .map_err(|e| XflError::Config(format!("line {}: {}", i + 1, strip_config_prefix(e))))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Every key with its current value, in documentation order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        vec![
            ("dataset", self.dataset.to_string()),
            ("dataset_path", path(&self.dataset_path)),
            ("n_points", self.n_points.to_string()),
            ("n_features", self.n_features.to_string()),
            ("n_groups", self.n_groups.to_string()),
            ("n_classes", self.n_classes.to_string()),
            ("literals_per_conjunction", self.literals_per_conjunction.to_string()),
            ("conjunctions_per_class", self.conjunctions_per_class.to_string()),
            ("noise_rate", self.noise_rate.to_string()),
            ("confidence", self.confidence.to_string()),
            ("hetero_clients", self.hetero_clients.to_string()),
            ("hetero_noise", self.hetero_noise.to_string()),
            ("hetero_confidence", self.hetero_confidence.to_string()),
            ("p_unchanged", self.p_unchanged.to_string()),
            ("clients", self.clients.to_string()),
            ("rounds_max", self.rounds_max.to_string()),
            ("target_accuracy", self.target_accuracy.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.map_or("full".to_string(), |b| b.to_string())),
            ("m", self.m.to_string()),
            ("relevance_threshold", self.relevance_threshold.to_string()),
            ("satisfaction_threshold", self.satisfaction_threshold.to_string()),
            ("max_conjunctions", self.max_conjunctions.to_string()),
            ("val_frac", self.val_frac.to_string()),
            ("test_frac", self.test_frac.to_string()),
            ("local_test_frac", self.local_test_frac.to_string()),
            ("mode", self.mode.to_string()),
            ("tally", self.tally.to_string()),
            ("seed", self.seed.to_string()),
            ("output_dir", path(&self.output_dir)),
        ]
    }

    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Range checks, reported with the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(XflError::Config(format!("{key}: {why}")));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.dataset == DatasetKind::File && self.dataset_path.is_none() {
            return bad("dataset_path", "required when dataset = file");
        }
        if self.dataset != DatasetKind::CubLike && self.hetero_clients > 0 {
            return bad("hetero_clients", "only supported for cub_like data");
        }
        if self.n_points == 0 {
            return bad("n_points", "must be positive");
        }
        if self.n_groups == 0 || self.n_groups > self.n_features {
            return bad("n_groups", "must lie in 1..=n_features");
        }
        if self.n_classes < 2 {
            return bad("n_classes", "need at least two classes");
        }
        if self.literals_per_conjunction == 0 || self.literals_per_conjunction > self.n_groups {
            return bad("literals_per_conjunction", "must lie in 1..=n_groups");
        }
        if self.conjunctions_per_class == 0 {
            return bad("conjunctions_per_class", "must be positive");
        }
        if !unit(self.noise_rate) {
            return bad("noise_rate", "must lie in [0, 1]");
        }
        if !unit(self.hetero_noise) {
            return bad("hetero_noise", "must lie in [0, 1]");
        }
        if self.hetero_clients > self.clients {
            return bad("hetero_clients", "cannot exceed clients");
        }
        if !unit(self.p_unchanged) {
            return bad("p_unchanged", "must lie in [0, 1]");
        }
        if self.clients == 0 {
            return bad("clients", "must be positive");
        }
        if !unit(self.target_accuracy) {
            return bad("target_accuracy", "must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive and finite");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size", "must be positive or full");
        }
        if self.m == 0 {
            return bad("m", "must be positive");
        }
        if !unit(self.relevance_threshold) {
            return bad("relevance_threshold", "must lie in [0, 1]");
        }
        if !unit(self.satisfaction_threshold) {
            return bad("satisfaction_threshold", "must lie in [0, 1]");
        }
        if self.max_conjunctions == 0 {
            return bad("max_conjunctions", "must be positive");
        }
        if !(0.0..0.5).contains(&self.val_frac) || self.val_frac * self.n_points as f64 <= 0.5 {
            return bad("val_frac", "must lie in [0, 0.5) and leave at least one validation point");
        }
        if !(0.0..0.5).contains(&self.test_frac) || self.test_frac * self.n_points as f64 <= 0.5 {
            return bad("test_frac", "must lie in [0, 0.5) and leave at least one test point");
        }
        if !(0.0..1.0).contains(&self.local_test_frac) {
            return bad("local_test_frac", "must lie in [0, 1)");
        }
        Ok(())
    }
}

fn strip_config_prefix(e: XflError) -> String {
    match e {
        XflError::Config(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("mode", "fedavg").unwrap();
        cfg.set("batch_size", "32").unwrap();
        cfg.set("confidence", "definitely=0.8,probably=0.2").unwrap();
        cfg.set("output_dir", "/tmp/out").unwrap();
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(RunConfig::from_text(&RunConfig::default().to_text()).unwrap(), RunConfig::default());
    }

    #[test]
    fn comments_and_overrides() {
        let mut cfg = RunConfig::from_text("# sweep\n\nclients = 4\nseed=9\n").unwrap();
        assert_eq!((cfg.clients, cfg.seed), (4, 9));
        cfg.apply_override("rounds_max=0").unwrap();
        assert_eq!(cfg.rounds_max, 0);
        assert!(cfg.apply_override("rounds_max").is_err());
    }

    #[test]
    fn errors_name_the_key() {
        let err = RunConfig::from_text("clients = 3\nepochs = many\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("epochs"), "{err}");
        let err = RunConfig::from_text("colour = blue").unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        let err = RunConfig::from_text("mode = best").unwrap_err().to_string();
        assert!(err.contains("mode"), "{err}");
    }

    #[test]
    fn validation_ranges() {
        assert!(RunConfig::default().validate().is_ok());
        let cases = [
            ("clients", "0"),
            ("m", "0"),
            ("noise_rate", "1.5"),
            ("target_accuracy", "-0.1"),
            ("learning_rate", "0"),
            ("n_groups", "30"),
            ("literals_per_conjunction", "6"),
            ("hetero_clients", "11"),
            ("val_frac", "0.6"),
            ("batch_size", "0"),
            ("dataset", "file"),
        ];
        for (k, v) in cases {
            let mut cfg = RunConfig::default();
            cfg.set(k, v).unwrap();
            let err = cfg.validate().unwrap_err().to_string();
            assert!(err.contains(if k == "dataset" { "dataset_path" } else { k }), "{k}: {err}");
        }
    }
}
