//! Synthetic concept datasets, federated partitioning and the dataset file.
//!
//! Two generators:
//!
//! * [`generate_cub_like`] plants one DNF rule per class over grouped binary
//!   features, flips features with a noise rate and assigns one labeller
//!   confidence level per feature group.
//! * [`generate_mnist_like`] overlays digit prototypes: half the points stay
//!   untouched, the rest are mixed 70/30 or 50/50 with another digit and
//!   carry the mixing ratio as their confidence. Labels are even/odd.
//!
//! Each generator draws from independent ChaCha streams of the same seed, so
//! for instance changing the noise rate leaves class choices and confidence
//! levels untouched.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, XflError};
use crate::model::ConceptDataPoint;
use crate::rules::{Conjunction, DnfRule, FeatureSchema};

/// Labeller confidence levels and their numeric values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceLevel {
    Definitely,
    Probably,
    Guessing,
    NotVisible,
}

impl ConfidenceLevel {
    pub const ALL: [ConfidenceLevel; 4] = [
        ConfidenceLevel::Definitely,
        ConfidenceLevel::Probably,
        ConfidenceLevel::Guessing,
        ConfidenceLevel::NotVisible,
    ];

    pub fn value(self) -> f64 {
        match self {
            ConfidenceLevel::Definitely => 1.0,
            ConfidenceLevel::Probably => 0.7,
            ConfidenceLevel::Guessing => 0.5,
            ConfidenceLevel::NotVisible => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConfidenceLevel::Definitely => "definitely",
            ConfidenceLevel::Probably => "probably",
            ConfidenceLevel::Guessing => "guessing",
            ConfidenceLevel::NotVisible => "not_visible",
        }
    }
}

impl FromStr for ConfidenceLevel {
    type Err = XflError;

    fn from_str(s: &str) -> Result<Self> {
        ConfidenceLevel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| XflError::invalid(format!("unknown confidence level {s:?}")))
    }
}

/// Probability of each confidence level, indexed like [`ConfidenceLevel::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceMix {
    probabilities: [f64; 4],
}

impl ConfidenceMix {
    pub fn new(probabilities: [f64; 4]) -> Result<Self> {
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(XflError::invalid("confidence probabilities must lie in [0, 1]"));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(XflError::invalid(format!("confidence probabilities sum to {sum}, not 1")));
        }
        Ok(ConfidenceMix { probabilities })
    }

    pub fn only(level: ConfidenceLevel) -> Self {
        let mut probabilities = [0.0; 4];
        probabilities[level as usize] = 1.0;
        ConfidenceMix { probabilities }
    }

    pub fn probability(&self, level: ConfidenceLevel) -> f64 {
        self.probabilities[level as usize]
    }

    pub fn sample(&self, rng: &mut impl Rng) -> ConfidenceLevel {
        let r: f64 = rng.gen();
        let mut acc = 0.0;
        for level in ConfidenceLevel::ALL {
            acc += self.probabilities[level as usize];
            if r < acc {
                return level;
            }
        }
        // rounding left a sliver above the cumulative sum
        *ConfidenceLevel::ALL
            .iter()
            .rev()
            .find(|l| self.probabilities[**l as usize] > 0.0)
            .unwrap_or(&ConfidenceLevel::Definitely)
    }
}

impl Default for ConfidenceMix {
    fn default() -> Self {
        ConfidenceMix::only(ConfidenceLevel::Definitely)
    }
}

/// `definitely=0.8,probably=0.2`; unlisted levels get probability 0.
impl FromStr for ConfidenceMix {
    type Err = XflError;

    fn from_str(s: &str) -> Result<Self> {
        let mut probabilities = [0.0; 4];
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, p) = part
                .split_once('=')
                .ok_or_else(|| XflError::invalid(format!("expected level=probability, got {part:?}")))?;
            let level: ConfidenceLevel = name.trim().parse()?;
            probabilities[level as usize] = p
                .trim()
                .parse()
                .map_err(|_| XflError::invalid(format!("bad probability {p:?}")))?;
        }
        ConfidenceMix::new(probabilities)
    }
}

impl fmt::Display for ConfidenceMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = ConfidenceLevel::ALL
            .iter()
            .filter(|l| self.probabilities[**l as usize] > 0.0)
            .map(|l| format!("{}={}", l.name(), self.probabilities[*l as usize]))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Parameters of the planted-rule generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub schema: FeatureSchema,
    /// One rule per class, in class order.
    pub planted_rules: Vec<DnfRule>,
    pub confidence_mix: ConfidenceMix,
    pub noise_rate: f64,
    pub n_points: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Checks the planted rules: one per class, valid indices, and no point
    /// built from one class's conjunction satisfying another class's rule.
    pub fn validate(&self) -> Result<()> {
        let schema = &self.schema;
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(XflError::invalid(format!("noise rate {} outside [0, 1]", self.noise_rate)));
        }
        if self.planted_rules.len() != schema.n_classes() {
            return Err(XflError::Generation(format!(
                "{} planted rules for {} classes",
                self.planted_rules.len(),
                schema.n_classes()
            )));
        }
        for (c, rule) in self.planted_rules.iter().enumerate() {
            if rule.class_index() != c {
                return Err(XflError::Generation(format!("planted rule {c} is for class {}", rule.class_index())));
            }
            rule.validate(schema)
                .map_err(|e| XflError::Generation(e.to_string()))?;
        }
        for (c, a) in self.planted_rules.iter().enumerate() {
            for b in &self.planted_rules[c + 1..] {
                for x in a.conjunctions() {
                    for y in b.conjunctions() {
                        if x.is_subset_of(y) || y.is_subset_of(x) {
                            return Err(XflError::Generation(format!(
                                "planted rules for classes {} and {} overlap: a point of one satisfies the other",
                                a.class_index(),
                                b.class_index()
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Draws `conjunctions_per_class` conjunctions of `literals_per_conjunction`
/// features (distinct groups) for each class, preferring features no other
/// class uses yet. The result always passes [`GeneratorSpec::validate`].
pub fn plant_rules(
    schema: &FeatureSchema,
    literals_per_conjunction: usize,
    conjunctions_per_class: usize,
    seed: u64,
) -> Result<Vec<DnfRule>> {
    if literals_per_conjunction == 0 || literals_per_conjunction > schema.n_groups() {
        return Err(XflError::Generation(format!(
            "cannot draw {literals_per_conjunction} literals from distinct groups of {}",
            schema.n_groups()
        )));
    }
    if conjunctions_per_class == 0 {
        return Err(XflError::Generation("need at least one conjunction per class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members: Vec<Vec<usize>> = (0..schema.n_groups()).map(|g| schema.group_members(g)).collect();
    let mut used = vec![false; schema.n_features()];
    let mut planted: Vec<Vec<Vec<usize>>> = Vec::new();
    const ATTEMPTS: usize = 500;

    for _class in 0..schema.n_classes() {
        let mut conjs: Vec<Vec<usize>> = Vec::new();
        for _ in 0..conjunctions_per_class {
            let mut chosen = None;
            for attempt in 0..ATTEMPTS {
                let mut groups: Vec<usize> = (0..schema.n_groups()).collect();
                groups.shuffle(&mut rng);
                let mut fs: Vec<usize> = groups[..literals_per_conjunction]
                    .iter()
                    .map(|&g| {
                        let fresh: Vec<usize> = members[g].iter().copied().filter(|&f| !used[f]).collect();
                        // fresh features alone can be too few to keep conjunctions distinct
                        let pool = if fresh.is_empty() || attempt >= ATTEMPTS / 2 {
                            &members[g]
                        } else {
                            &fresh
                        };
                        pool[rng.gen_range(0..pool.len())]
                    })
                    .collect();
                fs.sort_unstable();
                let subset = |a: &[usize], b: &[usize]| a.iter().all(|x| b.contains(x));
                let clash = planted
                    .iter()
                    .flatten()
                    .any(|other| subset(other, &fs) || subset(&fs, other))
                    || conjs.contains(&fs);
                if !clash {
                    chosen = Some(fs);
                    break;
                }
            }
            let fs = chosen.ok_or_else(|| {
                XflError::Generation("could not plant mutually distinct rules; schema too small".into())
            })?;
            conjs.push(fs);
        }
        for f in conjs.iter().flatten() {
            used[*f] = true;
        }
        planted.push(conjs);
    }

    planted
        .into_iter()
        .enumerate()
        .map(|(c, conjs)| {
            let conjunctions = conjs
                .into_iter()
                .map(|fs| Conjunction::new(fs, 1.0))
                .collect::<Result<Vec<_>>>()?;
            DnfRule::new(c, conjunctions, 1.0)
        })
        .collect()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Samples points that satisfy their class's planted rule, then applies
/// feature noise and per-group confidence levels.
pub fn generate_cub_like(spec: &GeneratorSpec) -> Result<Vec<ConceptDataPoint>> {
    spec.validate()?;
    let schema = &spec.schema;
    let (n_f, n_g, n_c) = (schema.n_features(), schema.n_groups(), schema.n_classes());
    let mut structure = stream(spec.seed, 0);
    let mut noise = stream(spec.seed, 1);
    let mut confidence = stream(spec.seed, 2);

    let mut points = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let class = structure.gen_range(0..n_c);
        let conjs = spec.planted_rules[class].conjunctions();
        let conj = &conjs[structure.gen_range(0..conjs.len())];
        let mut v = vec![0.0; n_f];
        for f in conj.features() {
            v[f] = 1.0;
        }
        for x in v.iter_mut() {
            if noise.gen::<f64>() < spec.noise_rate {
                *x = 1.0 - *x;
            }
        }
        let levels: Vec<f64> = (0..n_g)
            .map(|_| spec.confidence_mix.sample(&mut confidence).value())
            .collect();
        let u = (0..n_f).map(|f| levels[schema.group_of(f)]).collect();
        points.push(ConceptDataPoint::new(v, u, class)?);
    }
    Ok(points)
}

/// Parameters of the overlay generator.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlaySpec {
    /// One feature vector per digit.
    pub prototypes: Vec<Vec<f64>>,
    /// Class of each digit.
    pub labels: Vec<usize>,
    pub p_unchanged: f64,
    /// Share of the base digit kept when mixing; chosen uniformly.
    pub ratios: Vec<f64>,
    pub n_points: usize,
    pub seed: u64,
}

impl OverlaySpec {
    /// Ten one-hot digit prototypes labelled even (0) / odd (1), half the
    /// points unchanged, mixes at 0.7 and 0.5.
    pub fn digits(n_points: usize, seed: u64) -> Self {
        let prototypes = (0..10)
            .map(|d| {
                let mut v = vec![0.0; 10];
                v[d] = 1.0;
                v
            })
            .collect();
        OverlaySpec {
            prototypes,
            labels: (0..10).map(|d| d % 2).collect(),
            p_unchanged: 0.5,
            ratios: vec![0.7, 0.5],
            n_points,
            seed,
        }
    }

    /// One feature per digit, all in one group, classes `even` and `odd`.
    pub fn digits_schema() -> FeatureSchema {
        FeatureSchema::new(
            (0..10).map(|d| (format!("digit_{d}"), "digit".to_string())).collect(),
            vec!["even".into(), "odd".into()],
        )
        .expect("static schema")
    }

    pub fn validate(&self) -> Result<()> {
        if self.prototypes.len() < 2 {
            return Err(XflError::invalid("overlay needs at least two prototypes"));
        }
        if self.labels.len() != self.prototypes.len() {
            return Err(XflError::invalid("one label per prototype required"));
        }
        let n_f = self.prototypes[0].len();
        if n_f == 0 || self.prototypes.iter().any(|p| p.len() != n_f || p.iter().any(|x| !(0.0..=1.0).contains(x))) {
            return Err(XflError::invalid("prototypes must share a non-zero length with values in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.p_unchanged) {
            return Err(XflError::invalid("p_unchanged outside [0, 1]"));
        }
        if self.ratios.is_empty() || self.ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(XflError::invalid("mix ratios must lie in (0, 1]"));
        }
        Ok(())
    }
}

pub fn generate_mnist_like(spec: &OverlaySpec) -> Result<Vec<ConceptDataPoint>> {
    spec.validate()?;
    let n_digits = spec.prototypes.len();
    let n_f = spec.prototypes[0].len();
    let mut digits = stream(spec.seed, 0);
    let mut mixing = stream(spec.seed, 1);
    let mut points = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let d = digits.gen_range(0..n_digits);
        let own = &spec.prototypes[d];
        let point = if mixing.gen::<f64>() < spec.p_unchanged {
            ConceptDataPoint::new(own.clone(), vec![1.0; n_f], spec.labels[d])?
        } else {
            let r = spec.ratios[mixing.gen_range(0..spec.ratios.len())];
            let mut other = mixing.gen_range(0..n_digits - 1);
            if other >= d {
                other += 1;
            }
            let v = own
                .iter()
                .zip(&spec.prototypes[other])
                .map(|(a, b)| (r * a + (1.0 - r) * b).clamp(0.0, 1.0))
                .collect();
            ConceptDataPoint::new(v, vec![r; n_f], spec.labels[d])?
        };
        points.push(point);
    }
    Ok(points)
}

/// Client shards plus the server's validation and test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedSplit {
    pub client_shards: Vec<Vec<ConceptDataPoint>>,
    pub validation: Vec<ConceptDataPoint>,
    pub test: Vec<ConceptDataPoint>,
}

pub const DEFAULT_CLIENTS: usize = 10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.05;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.05;

/// Shuffles, carves off the test then validation sets, and deals the rest
/// into `k` shards whose sizes differ by at most one.
pub fn partition(
    data: &[ConceptDataPoint],
    k: usize,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
) -> Result<FederatedSplit> {
    if k == 0 {
        return Err(XflError::invalid("need at least one client"));
    }
    for (name, frac) in [("validation", val_frac), ("test", test_frac)] {
        if !(0.0..0.5).contains(&frac) {
            return Err(XflError::invalid(format!("{name} fraction {frac} outside [0, 0.5)")));
        }
    }
    let n = data.len();
    let n_test = (n as f64 * test_frac).round() as usize;
    let n_val = (n as f64 * val_frac).round() as usize;
    let n_train = n.saturating_sub(n_test + n_val);
    if n_train < k {
        return Err(XflError::invalid(format!(
            "{n} points leave {n_train} for training, fewer than {k} clients"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();

    let test = take(&order[..n_test]);
    let validation = take(&order[n_test..n_test + n_val]);
    let rest = &order[n_test + n_val..];
    let (base, extra) = (n_train / k, n_train % k);
    let mut shards = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        shards.push(take(&rest[start..start + len]));
        start += len;
    }
    Ok(FederatedSplit {
        client_shards: shards,
        validation,
        test,
    })
}

const SCHEMA_TAG: &str = "#schema";

/// Writes the header line and one `label,v...,u...` record per point.
pub fn write_dataset<W: Write>(mut out: W, schema: &FeatureSchema, points: &[ConceptDataPoint]) -> Result<()> {
    let features: Vec<String> = (0..schema.n_features())
        .map(|f| format!("{}:{}", schema.feature_name(f), schema.group_name(schema.group_of(f))))
        .collect();
    writeln!(
        out,
        "{SCHEMA_TAG}\tfeatures={}\tclasses={}",
        features.join(","),
        schema.class_names().join(",")
    )?;
    for p in points {
        let mut line = p.label().to_string();
        for x in p.v().iter().chain(p.u()) {
            line.push(',');
            line.push_str(&x.to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<FeatureSchema> {
    let mut fields = line.split('\t');
    if fields.next() != Some(SCHEMA_TAG) {
        return Err(XflError::parse(1, format!("header must start with {SCHEMA_TAG:?}")));
    }
    let mut features = None;
    let mut classes = None;
    for field in fields {
        match field.split_once('=') {
            Some(("features", list)) => {
                let parsed = list
                    .split(',')
                    .map(|entry| {
                        entry
                            .split_once(':')
                            .map(|(f, g)| (f.to_string(), g.to_string()))
                            .ok_or_else(|| XflError::parse(1, format!("feature entry {entry:?} lacks ':group'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                features = Some(parsed);
            }
            Some(("classes", list)) => classes = Some(list.split(',').map(str::to_string).collect()),
            _ => return Err(XflError::parse(1, format!("unexpected header field {field:?}"))),
        }
    }
    let features = features.ok_or_else(|| XflError::parse(1, "header lacks features="))?;
    let classes = classes.ok_or_else(|| XflError::parse(1, "header lacks classes="))?;
    FeatureSchema::new(features, classes).map_err(|e| XflError::parse(1, e.to_string()))
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<(FeatureSchema, Vec<ConceptDataPoint>)> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| XflError::parse(1, "empty dataset file"))??;
    let schema = parse_header(header.trim_end())?;
    let n_f = schema.n_features();
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 1 + 2 * n_f {
            return Err(XflError::parse(
                lineno,
                format!("expected {} fields, found {}", 1 + 2 * n_f, fields.len()),
            ));
        }
        let label: usize = fields[0]
            .parse()
            .map_err(|_| XflError::parse(lineno, format!("bad label {:?}", fields[0])))?;
        let nums = fields[1..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| XflError::parse(lineno, format!("bad number {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let point = ConceptDataPoint::new(nums[..n_f].to_vec(), nums[n_f..].to_vec(), label)
            .and_then(|p| p.check_schema(&schema).map(|_| p))
            .map_err(|e| XflError::parse(lineno, e.to_string()))?;
        points.push(point);
    }
    Ok((schema, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::rule_satisfied;
    use proptest::prelude::*;

    fn spec(noise: f64, mix: ConfidenceMix, n: usize) -> GeneratorSpec {
        let schema = FeatureSchema::uniform(20, 5, 4).unwrap();
        let planted_rules = plant_rules(&schema, 3, 1, 11).unwrap();
        GeneratorSpec {
            schema,
            planted_rules,
            confidence_mix: mix,
            noise_rate: noise,
            n_points: n,
            seed: 5,
        }
    }

    #[test]
    fn noiseless_confident_points_satisfy_their_planted_rule() {
        let s = spec(0.0, ConfidenceMix::default(), 500);
        let data = generate_cub_like(&s).unwrap();
        for p in &data {
            assert!(p.u().iter().all(|&u| u == 1.0));
            assert!(rule_satisfied(&s.planted_rules[p.label()], p, 0.5).unwrap());
            for (c, r) in s.planted_rules.iter().enumerate() {
                if c != p.label() {
                    assert!(!rule_satisfied(r, p, 0.5).unwrap());
                }
            }
        }
    }

    #[test]
    fn probably_level_still_satisfies_planted_rules() {
        let mix: ConfidenceMix = "definitely=0.5,probably=0.5".parse().unwrap();
        let s = spec(0.0, mix, 300);
        for p in generate_cub_like(&s).unwrap() {
            assert!(rule_satisfied(&s.planted_rules[p.label()], &p, 0.5).unwrap());
        }
    }

    #[test]
    fn not_visible_zeroes_everything() {
        let s = spec(0.1, ConfidenceMix::only(ConfidenceLevel::NotVisible), 100);
        for p in generate_cub_like(&s).unwrap() {
            assert!(p.u().iter().all(|&u| u == 0.0));
            assert!(p.adjusted().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn noise_flips_about_the_requested_fraction() {
        let clean = generate_cub_like(&spec(0.0, ConfidenceMix::default(), 1000)).unwrap();
        let noisy = generate_cub_like(&spec(0.1, ConfidenceMix::default(), 1000)).unwrap();
        let mut flipped = 0usize;
        let mut slots = 0usize;
        for (a, b) in clean.iter().zip(&noisy) {
            assert_eq!(a.label(), b.label());
            flipped += a.v().iter().zip(b.v()).filter(|(x, y)| x != y).count();
            slots += a.n_features();
        }
        let frac = flipped as f64 / slots as f64;
        assert!((frac - 0.1).abs() <= 0.02, "flip fraction {frac}");
    }

    #[test]
    fn confidence_is_constant_within_groups() {
        let mix: ConfidenceMix = "definitely=0.4,probably=0.3,guessing=0.2,not_visible=0.1".parse().unwrap();
        let s = spec(0.05, mix, 400);
        for p in generate_cub_like(&s).unwrap() {
            p.check_schema(&s.schema).unwrap();
        }
    }

    #[test]
    fn overlapping_planted_rules_are_rejected() {
        let mut s = spec(0.0, ConfidenceMix::default(), 10);
        let first = s.planted_rules[0].conjunctions()[0].clone();
        let sub = Conjunction::new(first.features().take(1), 1.0).unwrap();
        s.planted_rules[1] = DnfRule::new(1, vec![sub], 1.0).unwrap();
        assert!(matches!(generate_cub_like(&s), Err(XflError::Generation(_))));
        s.planted_rules.pop();
        assert!(generate_cub_like(&s).is_err());
        let tiny = FeatureSchema::uniform(2, 1, 4).unwrap();
        assert!(plant_rules(&tiny, 1, 1, 0).is_err());
        assert!(plant_rules(&tiny, 2, 1, 0).is_err());
    }

    #[test]
    fn confidence_mix_parsing() {
        let m: ConfidenceMix = "guessing=0.8, definitely=0.1,probably=0.1".parse().unwrap();
        assert_eq!(m.probability(ConfidenceLevel::Guessing), 0.8);
        assert_eq!(m.to_string().parse::<ConfidenceMix>().unwrap(), m);
        assert!("definitely=0.5".parse::<ConfidenceMix>().is_err());
        assert!("sure=1".parse::<ConfidenceMix>().is_err());
        assert!("definitely".parse::<ConfidenceMix>().is_err());
    }

    #[test]
    fn overlay_levels() {
        let data = generate_mnist_like(&OverlaySpec::digits(2000, 3)).unwrap();
        let schema = OverlaySpec::digits_schema();
        for p in &data {
            p.check_schema(&schema).unwrap();
            let u = p.u()[0];
            let own = p.v().iter().copied().fold(0.0, f64::max);
            if u == 1.0 {
                assert_eq!(p.v().iter().filter(|&&x| x == 1.0).count(), 1);
            } else {
                assert!(u == 0.7 || u == 0.5);
                assert!((own - u).abs() < 1e-12 || (u == 0.5 && (own - 0.5).abs() < 1e-12));
                let total: f64 = p.v().iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
            let digit = p.v().iter().position(|&x| x == own).unwrap();
            if u != 0.5 {
                assert_eq!(p.label(), digit % 2);
            }
        }
        let mut spec = OverlaySpec::digits(10, 0);
        spec.prototypes.truncate(1);
        spec.labels.truncate(1);
        assert!(matches!(generate_mnist_like(&spec), Err(XflError::InvalidArgument(_))));
    }

    #[test]
    fn partition_examples() {
        let data = generate_cub_like(&spec(0.05, ConfidenceMix::default(), 1000)).unwrap();
        let split = partition(&data, 10, 0.05, 0.05, 1).unwrap();
        assert_eq!(split.test.len(), 50);
        assert_eq!(split.validation.len(), 50);
        assert!(split.client_shards.iter().all(|s| s.len() == 90));

        let one = partition(&data, 1, 0.05, 0.05, 1).unwrap();
        assert_eq!(one.client_shards.len(), 1);
        assert_eq!(one.client_shards[0].len(), 900);

        assert_eq!(partition(&data, 10, 0.05, 0.05, 9).unwrap(), partition(&data, 10, 0.05, 0.05, 9).unwrap());
        assert!(partition(&data[..5], 10, 0.05, 0.05, 1).is_err());
        assert!(partition(&data, 0, 0.05, 0.05, 1).is_err());
        assert!(partition(&data, 2, 0.5, 0.05, 1).is_err());
    }

    #[test]
    fn dataset_file_round_trip() {
        let s = spec(0.05, "definitely=0.6,probably=0.2,guessing=0.2".parse().unwrap(), 50);
        let data = generate_cub_like(&s).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &s.schema, &data).unwrap();
        let (schema, back) = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(schema, s.schema);
        assert_eq!(back, data);

        let mnist = generate_mnist_like(&OverlaySpec::digits(40, 1)).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &OverlaySpec::digits_schema(), &mnist).unwrap();
        assert_eq!(read_dataset(buf.as_slice()).unwrap().1, mnist);
    }

    #[test]
    fn dataset_file_errors_name_the_line() {
        let schema = FeatureSchema::uniform(2, 1, 2).unwrap();
        let text = "#schema\tfeatures=g0_f0:g0,g0_f1:g0\tclasses=c0,c1\n0,1,0,1,1\n1,1,0,1\n";
        match read_dataset(text.as_bytes()) {
            Err(XflError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let mixed = "#schema\tfeatures=g0_f0:g0,g0_f1:g0\tclasses=c0,c1\n0,1,0,1,0.5\n";
        assert!(read_dataset(mixed.as_bytes()).is_err());
        assert!(read_dataset("features=a:b\n".as_bytes()).is_err());
        let ok = "#schema\tfeatures=g0_f0:g0,g0_f1:g0\tclasses=c0,c1\n1,1,0,0.7,0.7\n";
        let (s, pts) = read_dataset(ok.as_bytes()).unwrap();
        assert_eq!(s, schema);
        assert_eq!(pts[0].adjusted(), vec![0.7, 0.0]);
    }

    proptest! {
        #[test]
        fn partition_preserves_the_multiset(n in 20usize..200, k in 1usize..10, seed in any::<u64>()) {
            let data: Vec<ConceptDataPoint> = (0..n)
                .map(|i| ConceptDataPoint::new(vec![i as f64 / n as f64], vec![1.0], i % 2).unwrap())
                .collect();
            let split = partition(&data, k, 0.05, 0.05, seed).unwrap();
            let sizes: Vec<usize> = split.client_shards.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<f64> = split.client_shards.iter().flatten()
                .chain(&split.validation).chain(&split.test)
                .map(|p| p.v()[0]).collect();
            all.sort_by(f64::total_cmp);
            let mut expected: Vec<f64> = data.iter().map(|p| p.v()[0]).collect();
            expected.sort_by(f64::total_cmp);
            prop_assert_eq!(all, expected);
        }
    }
}
