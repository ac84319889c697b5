//! Run configuration: flat `section.key = value` lines, `#` comments.
//!
//! ```text
//! run.seed = 7
//! lake.input = data/lake
//! vectorizer.k = 16
//! selection.method = cosine
//! operator.kind = linear-regression
//! experiment.arms = cosine, euclidean, sr
//! ```
//!
//! Unknown and repeated keys are errors. `--set key=value` overrides go
//! through [`RunConfig::set`] after the file is parsed.

use std::collections::BTreeSet;
use std::path::PathBuf;

use crate::error::{Result, VenomError};
use crate::evalbench::{Generator, NoiseScope};
use crate::lake::IngestOptions;
use crate::modelling::{OperatorKind, OperatorSpec, Selector, SurrogateKind, SurrogateSpec};
use crate::selection::{Method, SelectionParams};
use crate::timing::Clock;
use crate::vectorizer::VectorizerConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSection {
    pub id: String,
    pub repetitions: usize,
    /// Arm names: a similarity method or `sr`.
    pub arms: Vec<String>,
    pub sr_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSection {
    pub cols: Vec<usize>,
    pub rows: Vec<usize>,
    pub generator: String,
    /// Noise of the linear generator.
    pub noise: f64,
    /// Datasets per grid cell.
    pub replicas: usize,
    /// Tuple fractions for noisy variants; empty for none.
    pub noise_levels: Vec<f64>,
    pub noise_sigma: f64,
    pub noise_scope: NoiseScope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker cap; 0 lets the thread pool decide.
    pub jobs: usize,
    pub clock: Clock,
    pub lake_input: Option<PathBuf>,
    pub ingest: IngestOptions,
    pub vectorizer: VectorizerConfig,
    pub selection: SelectionParams,
    pub operator: OperatorSpec,
    pub surrogate: SurrogateSpec,
    pub experiment: ExperimentSection,
    pub synth: SynthSection,
    pub report_dims: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: 0,
            clock: Clock::Wall,
            lake_input: None,
            ingest: IngestOptions::default(),
            vectorizer: VectorizerConfig::default(),
            selection: SelectionParams::default(),
            operator: OperatorSpec::default(),
            surrogate: SurrogateSpec::default(),
            experiment: ExperimentSection {
                id: "exp".into(),
                repetitions: 10,
                arms: vec!["cosine".into(), "sr".into()],
                sr_fraction: 0.2,
            },
            synth: SynthSection {
                cols: vec![3, 10, 20, 30],
                rows: vec![10, 100, 500, 1000],
                generator: "linear".into(),
                noise: 0.1,
                replicas: 1,
                noise_levels: Vec::new(),
                noise_sigma: 1.0,
                noise_scope: NoiseScope::All,
            },
            report_dims: 2,
        }
    }
}

fn bad(key: &str, value: &str, want: &str) -> VenomError {
    VenomError::Config(format!("{key} = {value:?}: expected {want}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, "a number"))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| VenomError::Config(format!("line {}: expected `section.key = value`", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(VenomError::Config(format!("line {}: duplicate key {key}", n + 1)));
            }
            c.set(key, value.trim()).map_err(|e| match e {
                VenomError::Config(m) => VenomError::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(c)
    }

    /// Parse a file; a relative `lake.input` is taken relative to the file's directory.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VenomError::Config(format!("{}: {e}", path.display())))?;
        let mut c = Self::parse(&text)?;
        if let (Some(input), Some(dir)) = (&c.lake_input, path.parent()) {
            if input.is_relative() {
                c.lake_input = Some(dir.join(input));
            }
        }
        Ok(c)
    }

    /// Set one `section.key` from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| VenomError::Config(format!("key {key:?} is not of the form section.key")))?;
        match (section, field) {
            ("run", "seed") => self.seed = num(key, value)?,
            ("run", "jobs") => self.jobs = num(key, value)?,
            ("run", "clock") => self.clock = Clock::parse(value).ok_or_else(|| bad(key, value, "wall or work"))?,
            ("lake", "input") => self.lake_input = Some(PathBuf::from(value)),
            ("lake", "header") => self.ingest.header = boolean(key, value)?,
            ("lake", "delimiter") => {
                let b = value.as_bytes();
                self.ingest.delimiter = match value {
                    "tab" => b'\t',
                    _ if b.len() == 1 => b[0],
                    _ => return Err(bad(key, value, "one ASCII character or `tab`")),
                };
            }
            ("lake", "target") => self.ingest.target = (!value.is_empty()).then(|| value.to_string()),
            ("vectorizer", "seed") => {
                return Err(VenomError::Config("vectorizer.seed is derived from run.seed; set that instead".into()))
            }
            ("vectorizer", f) => self.vectorizer.set(f, value)?,
            ("selection", "method") => {
                self.selection.method = Method::parse(value).ok_or_else(|| bad(key, value, "cosine, euclidean or kmeans"))?
            }
            ("selection", "lambda") => self.selection.lambda = num(key, value)?,
            ("selection", "s_low") => self.selection.s_low = num(key, value)?,
            ("selection", "s_high") => self.selection.s_high = num(key, value)?,
            ("selection", "min_s") => self.selection.min_s = num(key, value)?,
            ("selection", "max_s") => self.selection.max_s = num(key, value)?,
            ("selection", "restarts") => self.selection.restarts = num(key, value)?,
            ("operator", "kind") => {
                self.operator.kind = OperatorKind::parse(value).ok_or_else(|| {
                    bad(key, value, "linear-regression, mlp-regressor, svm-sgd-classifier or mlp-classifier")
                })?
            }
            ("operator", "target") => self.operator.target = value.to_string(),
            ("operator", "split") => self.operator.split = num(key, value)?,
            ("operator", "hidden") => self.operator.hidden = list(key, value)?,
            ("operator", "epochs") => self.operator.epochs = num(key, value)?,
            ("operator", "lr") => self.operator.lr = num(key, value)?,
            ("operator", "reg") => self.operator.reg = num(key, value)?,
            ("surrogate", "kind") => {
                self.surrogate.kind = SurrogateKind::parse(value).ok_or_else(|| bad(key, value, "linear, mlp or auto"))?
            }
            ("surrogate", "threshold") => self.surrogate.auto_threshold = num(key, value)?,
            ("surrogate", "hidden") => self.surrogate.mlp.hidden = list(key, value)?,
            ("surrogate", "epochs") => self.surrogate.mlp.epochs = num(key, value)?,
            ("surrogate", "lr") => self.surrogate.mlp.lr = num(key, value)?,
            ("experiment", "id") => self.experiment.id = value.to_string(),
            ("experiment", "repetitions") => self.experiment.repetitions = num(key, value)?,
            ("experiment", "arms") => {
                self.experiment.arms = value.split(',').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect()
            }
            ("experiment", "sr_fraction") => self.experiment.sr_fraction = num(key, value)?,
            ("synth", "cols") => self.synth.cols = list(key, value)?,
            ("synth", "rows") => self.synth.rows = list(key, value)?,
            ("synth", "generator") => self.synth.generator = value.to_string(),
            ("synth", "noise") => self.synth.noise = num(key, value)?,
            ("synth", "replicas") => self.synth.replicas = num(key, value)?,
            ("synth", "noise_levels") => self.synth.noise_levels = list(key, value)?,
            ("synth", "noise_sigma") => self.synth.noise_sigma = num(key, value)?,
            ("synth", "noise_scope") => {
                self.synth.noise_scope = NoiseScope::parse(value).ok_or_else(|| bad(key, value, "all or first"))?
            }
            ("report", "dims") => self.report_dims = num(key, value)?,
            _ => return Err(VenomError::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Vectorizer settings with the run seed applied.
    pub fn vectorizer_config(&self) -> VectorizerConfig {
        VectorizerConfig { seed: self.seed, ..self.vectorizer.clone() }
    }

    pub fn selection_params(&self) -> SelectionParams {
        SelectionParams { seed: self.seed, ..self.selection.clone() }
    }

    pub fn operator_spec(&self) -> OperatorSpec {
        self.operator.with_seed(self.seed)
    }

    /// Selector for an arm name: a similarity method, `sr`, or `sr-<fraction>`.
    pub fn arm(&self, name: &str) -> Result<Selector> {
        if let Some(m) = Method::parse(name) {
            return Ok(Selector::Similarity(SelectionParams { method: m, ..self.selection_params() }));
        }
        let lower = name.to_ascii_lowercase();
        let fraction = match lower.as_str() {
            "sr" => self.experiment.sr_fraction,
            _ => lower
                .strip_prefix("sr-")
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| VenomError::Config(format!("unknown arm {name:?}")))?,
        };
        Ok(Selector::Random { fraction, seed: self.seed })
    }

    pub fn synth_generator(&self) -> Result<Generator> {
        Generator::parse(&self.synth.generator, self.synth.noise)
            .ok_or_else(|| bad("synth.generator", &self.synth.generator, "normal, linear or two-cluster"))
    }

    /// Check every section; paths are checked by the commands that use them.
    pub fn validate(&self) -> Result<()> {
        self.vectorizer_config().validate()?;
        self.selection.validate()?;
        self.operator.validate()?;
        if self.surrogate.mlp.hidden.contains(&0) || self.surrogate.mlp.epochs == 0 || !(self.surrogate.mlp.lr > 0.0) {
            return Err(VenomError::Config("surrogate mlp needs widths >= 1, epochs >= 1, lr > 0".into()));
        }
        if self.experiment.repetitions == 0 || self.experiment.arms.is_empty() {
            return Err(VenomError::Config("experiment needs repetitions >= 1 and at least one arm".into()));
        }
        if !(self.experiment.sr_fraction > 0.0 && self.experiment.sr_fraction <= 1.0) {
            return Err(VenomError::Config("experiment.sr_fraction must be in (0, 1]".into()));
        }
        for a in &self.experiment.arms {
            self.arm(a)?;
        }
        if !(2..=3).contains(&self.report_dims) {
            return Err(VenomError::Config("report.dims must be 2 or 3".into()));
        }
        Ok(())
    }

    /// Grid checks for `synth`.
    pub fn validate_synth(&self) -> Result<()> {
        let s = &self.synth;
        if s.cols.is_empty() || s.rows.is_empty() || s.cols.iter().any(|c| *c < 2) || s.rows.contains(&0) {
            return Err(VenomError::Config("synth grid needs cols >= 2 and rows >= 1".into()));
        }
        if s.replicas == 0 {
            return Err(VenomError::Config("synth.replicas must be at least 1".into()));
        }
        if s.noise_levels.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) || !(s.noise_sigma > 0.0) {
            return Err(VenomError::Config("noise levels must be in (0, 1] and sigma > 0".into()));
        }
        self.synth_generator().map(|_| ())
    }
}
