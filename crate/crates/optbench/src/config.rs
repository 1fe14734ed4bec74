//! TOML run configuration.
//!
//! ```toml
//! experiment = "train"          # train | compare | regret | ablation | checkgrad
//! steps = 1000                  # or `epochs = 5`
//! seed = 7
//!
//! [objective]
//! kind = "quadratic"
//! dim = 10
//!
//! [[optimizer]]
//! name = "adam"
//! alpha = { min = 1e-4, max = 1e-1, points = 4 }
//! ```
//!
//! `optimizer` also accepts a bare name (`optimizer = "adam"`) or a single table. Every
//! hyperparameter that takes a grid accepts a number, a list, or a `{ min, max, points }` range
//! (log-spaced unless `scale = "linear"`). Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use optbench_core::hyper::HyperParams;
use optbench_core::objectives::SamplingPolicy;
use optbench_core::{AlphaSchedule, Beta1Schedule, OptimizerKind};
use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Deserialize;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}: cannot read config: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse {
        line: usize,
        /// Offending key, when the parser names one.
        key: Option<String>,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<optbench_core::Error> for ConfigError {
    fn from(e: optbench_core::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Train,
    Compare,
    Regret,
    Ablation,
    Checkgrad,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Train => "train",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Regret => "regret",
            ExperimentKind::Ablation => "ablation",
            ExperimentKind::Checkgrad => "checkgrad",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Self::Train, Self::Compare, Self::Regret, Self::Ablation, Self::Checkgrad]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
pub enum Emit {
    #[default]
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "csv+gnuplot_dat")]
    CsvAndDat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Shuffle,
    Iid,
}

impl From<Sampling> for SamplingPolicy {
    fn from(s: Sampling) -> Self {
        match s {
            Sampling::Shuffle => SamplingPolicy::ShuffleEachEpoch,
            Sampling::Iid => SamplingPolicy::IidWithReplacement,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    #[default]
    SparseBow,
    DensePlanted,
    File,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic {
        dim: usize,
        #[serde(default = "one")]
        condition_number: f64,
        #[serde(default)]
        noise_std: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        /// Generator seed; defaults to the run seed.
        seed: Option<u64>,
    },
    Logreg {
        #[serde(default)]
        data: DataKind,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_features")]
        features: usize,
        #[serde(default = "two")]
        classes: usize,
        #[serde(default = "default_density")]
        density: f64,
        path: Option<PathBuf>,
        #[serde(default)]
        l2: f64,
        seed: Option<u64>,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn default_samples() -> usize {
    optbench_core::objectives::DEFAULT_QUADRATIC_SAMPLES
}
fn default_n() -> usize {
    1000
}
fn default_features() -> usize {
    100
}
fn default_density() -> f64 {
    0.05
}
fn default_batch() -> usize {
    1
}
fn default_replicates() -> u64 {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("optbench-out")
}

/// A hyperparameter axis: one value, an explicit list, or an evenly spaced range.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeSpec {
    min: f64,
    max: f64,
    points: usize,
    #[serde(default)]
    scale: Scale,
}

#[derive(Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Scale {
    #[default]
    Log,
    Linear,
}

/// Rounds to 12 significant digits so that `1e-4 * 10^k` lands on the decimal literal.
fn tidy(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

impl RangeSpec {
    fn expand(&self) -> Result<Vec<f64>, String> {
        if self.points == 0 {
            return Err("range needs at least one point".into());
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let n = (self.points - 1) as f64;
        match self.scale {
            Scale::Log => {
                if !(self.min > 0.0 && self.max > 0.0) {
                    return Err("log-spaced range needs positive endpoints".into());
                }
                let (lo, hi) = (self.min.log10(), self.max.log10());
                Ok((0..self.points).map(|k| tidy(10f64.powf(lo + (hi - lo) * k as f64 / n))).collect())
            }
            Scale::Linear => {
                Ok((0..self.points).map(|k| tidy(self.min + (self.max - self.min) * k as f64 / n)).collect())
            }
        }
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct GridVisitor;
        impl<'de> Visitor<'de> for GridVisitor {
            type Value = Grid;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, a list of numbers or a { min, max, points } table")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Grid, E> {
                Ok(Grid(vec![v]))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Grid, E> {
                Ok(Grid(vec![v as f64]))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Grid, A::Error> {
                let mut out = Vec::new();
                while let Some(v) = seq.next_element::<f64>()? {
                    out.push(v);
                }
                if out.is_empty() {
                    return Err(de::Error::custom("empty grid"));
                }
                Ok(Grid(out))
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Grid, A::Error> {
                let range = RangeSpec::deserialize(de::value::MapAccessDeserializer::new(map))?;
                range.expand().map(Grid).map_err(de::Error::custom)
            }
        }
        d.deserialize_any(GridVisitor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaScheduleSpec {
    Constant,
    InvSqrtT,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beta1ScheduleSpec {
    Constant,
    ExponentialDecay,
}

fn kind_from_str<'de, D: Deserializer<'de>>(d: D) -> Result<OptimizerKind, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(de::Error::custom)
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(deserialize_with = "kind_from_str")]
    pub name: OptimizerKind,
    pub alpha: Option<Grid>,
    pub beta1: Option<Grid>,
    pub beta2: Option<Grid>,
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha_schedule: Option<AlphaScheduleSpec>,
    pub beta1_schedule: Option<Beta1ScheduleSpec>,
    /// Momentum coefficient of the SGD and RMSProp-momentum baselines.
    pub momentum: Option<f64>,
}

impl OptimizerSpec {
    pub fn named(name: OptimizerKind) -> Self {
        Self {
            name,
            alpha: None,
            beta1: None,
            beta2: None,
            epsilon: None,
            lambda: None,
            alpha_schedule: None,
            beta1_schedule: None,
            momentum: None,
        }
    }

    fn base(&self, regret_mode: bool) -> HyperParams<f64> {
        let mut h = if regret_mode {
            HyperParams::regret_defaults()
        } else if self.name == OptimizerKind::AdaMax {
            HyperParams::adamax_defaults()
        } else {
            HyperParams::default()
        };
        if let Some(e) = self.epsilon {
            h.epsilon = e;
        }
        if let Some(l) = self.lambda {
            h.lambda = l;
        }
        if let Some(s) = self.alpha_schedule {
            h.alpha_schedule = match s {
                AlphaScheduleSpec::Constant => AlphaSchedule::Constant,
                AlphaScheduleSpec::InvSqrtT => AlphaSchedule::InvSqrtT,
            };
        }
        if let Some(s) = self.beta1_schedule {
            h.beta1_schedule = match s {
                Beta1ScheduleSpec::Constant => Beta1Schedule::Constant,
                Beta1ScheduleSpec::ExponentialDecay => Beta1Schedule::ExponentialDecay,
            };
        }
        h
    }

    /// Cartesian product of the alpha, beta1 and beta2 axes, alpha varying slowest.
    pub fn expand(&self, regret_mode: bool) -> Vec<HyperParams<f64>> {
        let base = self.base(regret_mode);
        let axis = |g: &Option<Grid>, default: f64| g.as_ref().map_or_else(|| vec![default], |g| g.0.clone());
        let mut out = Vec::new();
        for &alpha in &axis(&self.alpha, base.alpha) {
            for &beta1 in &axis(&self.beta1, base.beta1) {
                for &beta2 in &axis(&self.beta2, base.beta2) {
                    out.push(HyperParams { alpha, beta1, beta2, ..base });
                }
            }
        }
        out
    }

    pub fn rho(&self) -> f64 {
        self.momentum.unwrap_or(optbench_core::optim::DEFAULT_MOMENTUM)
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<OptimizerSpec>, D::Error> {
    struct SpecsVisitor;
    impl<'de> Visitor<'de> for SpecsVisitor {
        type Value = Vec<OptimizerSpec>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("an optimizer name, an optimizer table or a list of optimizer tables")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
            Ok(vec![OptimizerSpec::named(v.parse().map_err(E::custom)?)])
        }

        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some(spec) = seq.next_element::<OptimizerSpec>()? {
                out.push(spec);
            }
            Ok(out)
        }

        fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
            Ok(vec![OptimizerSpec::deserialize(de::value::MapAccessDeserializer::new(map))?])
        }
    }
    d.deserialize_any(SpecsVisitor)
}

/// The bias-correction sweep: every (beta1, beta2, alpha) cell is trained with and without
/// the `1 - beta^t` corrections.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    #[serde(default = "ablation_beta1")]
    pub beta1: Vec<f64>,
    #[serde(default = "ablation_beta2")]
    pub beta2: Vec<f64>,
    #[serde(default = "ablation_log10_alpha")]
    pub log10_alpha: Vec<f64>,
}

fn ablation_beta1() -> Vec<f64> {
    vec![0.0, 0.9]
}
fn ablation_beta2() -> Vec<f64> {
    vec![0.99, 0.999, 0.9999]
}
fn ablation_log10_alpha() -> Vec<f64> {
    vec![-5.0, -4.0, -3.0, -2.0, -1.0]
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self { beta1: ablation_beta1(), beta2: ablation_beta2(), log10_alpha: ablation_log10_alpha() }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegretSpec {
    /// Reporting horizons are `2^min_log2 ..= 2^max_log2`; the horizon is the last one.
    #[serde(default = "five")]
    pub min_log2: u32,
    #[serde(default = "twelve")]
    pub max_log2: u32,
    #[serde(default = "eight")]
    pub convexity_probes: usize,
}

fn five() -> u32 {
    5
}
fn twelve() -> u32 {
    12
}
fn eight() -> usize {
    8
}

impl Default for RegretSpec {
    fn default() -> Self {
        Self { min_log2: five(), max_log2: twelve(), convexity_probes: eight() }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckGradSpec {
    #[serde(default = "twenty")]
    pub probes: usize,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
}

fn twenty() -> usize {
    20
}
fn default_h() -> f64 {
    1e-5
}
fn default_tol() -> f64 {
    1e-5
}

impl Default for CheckGradSpec {
    fn default() -> Self {
        Self { probes: twenty(), h: default_h(), tolerance: default_tol() }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub objective: ObjectiveSpec,
    #[serde(default, deserialize_with = "one_or_many")]
    pub optimizer: Vec<OptimizerSpec>,
    /// Number of optimizer steps.
    #[serde(alias = "T")]
    pub steps: Option<u64>,
    /// Passes over the data; used when `steps` is absent.
    pub epochs: Option<u64>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub sampling: Sampling,
    /// Inverted input dropout on dataset features.
    #[serde(default)]
    pub dropout: f64,
    #[serde(default)]
    pub seed: u64,
    /// Independent runs per grid point, seeded `seed, seed + 1, ...`.
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit: Emit,
    pub ablation: Option<AblationSpec>,
    pub regret: Option<RegretSpec>,
    pub checkgrad: Option<CheckGradSpec>,
    /// Directory relative dataset paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn offending_key(message: &str) -> Option<String> {
    let rest = message.split("unknown field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

/// Parses and validates a config from TOML text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let line = e.span().map_or(0, |s| line_of(text, s.start));
        ConfigError::Parse { line, key: offending_key(&message), message }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

impl RunConfig {
    pub fn regret_mode(&self) -> bool {
        self.experiment == ExperimentKind::Regret
    }

    pub fn ablation_spec(&self) -> AblationSpec {
        self.ablation.clone().unwrap_or_default()
    }

    pub fn regret_spec(&self) -> RegretSpec {
        self.regret.clone().unwrap_or_default()
    }

    pub fn checkgrad_spec(&self) -> CheckGradSpec {
        self.checkgrad.clone().unwrap_or_default()
    }

    /// Replicate seeds.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replicates).map(|r| self.seed.wrapping_add(r)).collect()
    }

    /// Optimizers to run; a train run without any defaults to Adam.
    pub fn optimizers(&self) -> Vec<OptimizerSpec> {
        if self.optimizer.is_empty() {
            vec![OptimizerSpec::named(OptimizerKind::Adam)]
        } else {
            self.optimizer.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.batch_size == 0 {
            return invalid("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return invalid("dropout must lie in [0, 1)");
        }
        if self.replicates == 0 {
            return invalid("replicates must be positive");
        }
        match self.experiment {
            ExperimentKind::Train | ExperimentKind::Compare | ExperimentKind::Ablation => {
                if self.steps.is_none() && self.epochs.is_none() {
                    return invalid("one of `steps` or `epochs` is required");
                }
            }
            ExperimentKind::Regret => {
                let r = self.regret_spec();
                if r.min_log2 > r.max_log2 || r.max_log2 > 24 {
                    return invalid("regret needs min_log2 <= max_log2 <= 24");
                }
                if let Some(o) = self.optimizers().iter().find(|o| o.name.baseline_variant().is_some()) {
                    return Err(ConfigError::Invalid(format!("regret runs need an Adam-family learner, got {}", o.name)));
                }
            }
            ExperimentKind::Checkgrad => {}
        }
        if self.experiment == ExperimentKind::Compare && self.optimizers().len() < 2 {
            return invalid("compare needs at least two optimizers");
        }
        if self.experiment == ExperimentKind::Ablation {
            if self.optimizer.len() > 1 {
                return invalid("ablation takes at most one base optimizer");
            }
            let a = self.ablation_spec();
            if a.beta1.is_empty() || a.beta2.is_empty() || a.log10_alpha.is_empty() {
                return invalid("ablation axes must be non-empty");
            }
        }
        for spec in self.optimizers() {
            for h in spec.expand(self.regret_mode()) {
                h.validate(self.regret_mode())?;
            }
        }
        if let ObjectiveSpec::Logreg { data: DataKind::File, path: None, .. } = &self.objective {
            return invalid("objective data = \"file\" needs a path");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "train"
optimizer = "adam"
T = 1000
seed = 7

[objective]
kind = "quadratic"
dim = 10
"#;

    #[test]
    fn minimal_config_is_accepted() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Train);
        assert_eq!(cfg.steps, Some(1000));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.optimizers()[0].expand(false), vec![HyperParams::default()]);
        assert!(matches!(cfg.objective, ObjectiveSpec::Quadratic { dim: 10, .. }));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = "experiment = \"train\"\nT = 10\n\n[objective]\nkind = \"quadratic\"\ndim = 2\n\n[[optimizer]]\nname = \"adam\"\nbeta3 = 0.5\n";
        match parse_config(text) {
            Err(ConfigError::Parse { key, line, .. }) => {
                assert_eq!(key.as_deref(), Some("beta3"));
                assert_eq!(line, 10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_top_level_key() {
        let err = parse_config(&format!("beta3 = 1\n{MINIMAL}")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { key: Some(ref k), line: 1, .. } if k == "beta3"), "{err:?}");
    }

    #[test]
    fn log_grid_expands() {
        let text = MINIMAL.replace(
            "optimizer = \"adam\"",
            "optimizer = { name = \"adam\", alpha = { min = 1e-4, max = 1e-1, points = 4 } }",
        );
        let cfg = parse_config(&text).unwrap();
        let runs = cfg.optimizers()[0].expand(false);
        assert_eq!(runs.len(), 4);
        let alphas: Vec<f64> = runs.iter().map(|h| h.alpha).collect();
        assert_eq!(alphas, vec![1e-4, 1e-3, 1e-2, 1e-1]);
    }

    #[test]
    fn grid_axes_multiply() {
        let text = MINIMAL.replace(
            "optimizer = \"adam\"",
            "optimizer = { name = \"adam\", alpha = [0.1, 0.01], beta2 = [0.99, 0.999, 0.9999] }",
        );
        assert_eq!(parse_config(&text).unwrap().optimizers()[0].expand(false).len(), 6);
    }

    #[test]
    fn validation_delegates_to_hyperparams() {
        let text = MINIMAL.replace("optimizer = \"adam\"", "optimizer = { name = \"adam\", beta1 = 1.5 }");
        assert!(matches!(parse_config(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn regret_defaults_apply_in_regret_mode() {
        let text = MINIMAL.replace("\"train\"", "\"regret\"");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.optimizers()[0].expand(true)[0], HyperParams::regret_defaults());
    }

    #[test]
    fn unknown_optimizer_is_a_parse_error() {
        let text = MINIMAL.replace("\"adam\"", "\"adamw\"");
        assert!(matches!(parse_config(&text), Err(ConfigError::Parse { .. })));
    }
}
