//! Analytics operators: a model trained on one dataset, scored on its held-out rows.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use rand::seq::SliceRandom;

use super::mlp::{mlp_fit, MlpConfig, MlpTask};
use super::ols::{min_norm_fit, ols_fit};
use super::svm::{svm_sgd_fit, SvmConfig};
use crate::error::{Result, VenomError};
use crate::lake::DatasetRecord;
use crate::seed::{content_hash, derive_seed, fraction_count, rng};
use crate::timing::Clock;

pub const MIN_SIDE_ROWS: usize = 5;
pub const RESULTS_HEADER: &str = "dataset_id,operator_hash,output,elapsed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    LinearRegression,
    MlpRegressor,
    SvmSgdClassifier,
    MlpClassifier,
}

impl OperatorKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear-regression" => Some(OperatorKind::LinearRegression),
            "mlp-regressor" => Some(OperatorKind::MlpRegressor),
            "svm-sgd-classifier" => Some(OperatorKind::SvmSgdClassifier),
            "mlp-classifier" => Some(OperatorKind::MlpClassifier),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            OperatorKind::LinearRegression => "linear-regression",
            OperatorKind::MlpRegressor => "mlp-regressor",
            OperatorKind::SvmSgdClassifier => "svm-sgd-classifier",
            OperatorKind::MlpClassifier => "mlp-classifier",
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self, OperatorKind::SvmSgdClassifier | OperatorKind::MlpClassifier)
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub target: String,
    /// Fraction of rows used for training.
    pub split: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub reg: f64,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec {
            kind: OperatorKind::LinearRegression,
            target: "y".into(),
            split: 0.7,
            seed: 0,
            hidden: vec![16],
            epochs: 200,
            lr: 0.01,
            reg: 1e-4,
        }
    }
}

impl OperatorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(VenomError::Config(format!("operator split must be in (0, 1), got {}", self.split)));
        }
        if self.target.is_empty() {
            return Err(VenomError::Config("operator target column is empty".into()));
        }
        if self.epochs == 0 || !(self.lr > 0.0) || self.reg < 0.0 || self.hidden.contains(&0) {
            return Err(VenomError::Config("operator needs epochs >= 1, lr > 0, reg >= 0, widths >= 1".into()));
        }
        Ok(())
    }

    /// Canonical one-line form; the hash covers exactly this text.
    pub fn to_text(&self) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        format!(
            "kind={};target={};split={:?};seed={};hidden={};epochs={};lr={:?};reg={:?}",
            self.kind,
            self.target,
            self.split,
            self.seed,
            hidden.join(","),
            self.epochs,
            self.lr,
            self.reg
        )
    }

    pub fn hash(&self) -> String {
        content_hash([self.to_text().as_bytes()])
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        OperatorSpec { seed, ..self.clone() }
    }

    fn mlp(&self) -> MlpConfig {
        MlpConfig { hidden: self.hidden.clone(), epochs: self.epochs, lr: self.lr, seed: derive_seed(self.seed, "operator.mlp", 0) }
    }

    fn svm(&self, class: usize) -> SvmConfig {
        SvmConfig { epochs: self.epochs, lr: self.lr, reg: self.reg, seed: derive_seed(self.seed, "operator.svm", class as u64) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorResult {
    pub dataset_id: String,
    /// Held-out RMSE for regressors, accuracy for classifiers.
    pub output: f64,
    pub elapsed: f64,
}

impl OperatorResult {
    pub fn csv_row(&self, operator_hash: &str) -> String {
        format!("{},{},{:?},{:?}\n", self.dataset_id, operator_hash, self.output, self.elapsed)
    }
}

struct Split {
    train_x: Vec<Vec<f64>>,
    train_y: Vec<f64>,
    test_x: Vec<Vec<f64>>,
    test_y: Vec<f64>,
}

fn split(dataset: &DatasetRecord, spec: &OperatorSpec) -> Result<Split> {
    let unusable = |reason: String| VenomError::Unusable { dataset: dataset.name.clone(), reason };
    let t = dataset
        .column_index(&spec.target)
        .ok_or_else(|| VenomError::Schema(format!("{} has no target column {:?}", dataset.name, spec.target)))?;
    let m = dataset.rows();
    let n_train = fraction_count(spec.split, m);
    if n_train < MIN_SIDE_ROWS || m - n_train < MIN_SIDE_ROWS {
        return Err(unusable(format!("{m} rows leave fewer than {MIN_SIDE_ROWS} on a side of the split")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng(derive_seed(spec.seed, "operator.split", 0)));
    let values = dataset.values();
    let features = |i: usize| -> Vec<f64> {
        values.row(i).iter().enumerate().filter(|(j, _)| *j != t).map(|(_, v)| *v).collect()
    };
    let (train, test) = order.split_at(n_train);
    Ok(Split {
        train_x: train.iter().map(|&i| features(i)).collect(),
        train_y: train.iter().map(|&i| values.get(i, t)).collect(),
        test_x: test.iter().map(|&i| features(i)).collect(),
        test_y: test.iter().map(|&i| values.get(i, t)).collect(),
    })
}

fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    (pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / truth.len() as f64).sqrt()
}

fn accuracy(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

fn regress(dataset: &DatasetRecord, spec: &OperatorSpec, s: &Split) -> Result<f64> {
    let mean = s.train_y.iter().chain(&s.test_y).sum::<f64>() / (s.train_y.len() + s.test_y.len()) as f64;
    if s.train_y.iter().chain(&s.test_y).all(|v| *v == mean) {
        return Err(VenomError::Unusable { dataset: dataset.name.clone(), reason: "target has zero variance".into() });
    }
    let pred = match spec.kind {
        OperatorKind::LinearRegression => {
            let fit = match ols_fit(&s.train_x, &s.train_y) {
                Err(VenomError::Singular | VenomError::Contract(_)) => min_norm_fit(&s.train_x, &s.train_y)?,
                other => other?,
            };
            fit.predict(&s.test_x)
        }
        _ => mlp_fit(&s.train_x, &s.train_y, MlpTask::Regression, &spec.mlp())?.predict(&s.test_x)?,
    };
    Ok(rmse(&pred, &s.test_y))
}

fn classify(dataset: &DatasetRecord, spec: &OperatorSpec, s: &Split) -> Result<f64> {
    let unusable = |reason: &str| VenomError::Unusable { dataset: dataset.name.clone(), reason: reason.into() };
    if s.train_y.iter().chain(&s.test_y).any(|v| v.fract() != 0.0) {
        return Err(unusable("classifier target is not integer-labelled"));
    }
    let mut classes: Vec<f64> = s.train_y.iter().chain(&s.test_y).copied().collect();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    if classes.len() < 2 {
        return Err(unusable("target has a single class"));
    }
    let index = |v: f64| classes.iter().position(|c| *c == v).expect("label drawn from classes") as f64;
    let train_idx: Vec<f64> = s.train_y.iter().map(|v| index(*v)).collect();
    let test_idx: Vec<f64> = s.test_y.iter().map(|v| index(*v)).collect();
    let present: Vec<usize> = (0..classes.len()).filter(|c| train_idx.contains(&(*c as f64))).collect();
    if present.len() < 2 {
        return Err(unusable("training side has a single class"));
    }
    let pred = match spec.kind {
        OperatorKind::SvmSgdClassifier if classes.len() == 2 => {
            let y: Vec<f64> = train_idx.iter().map(|c| if *c == 1.0 { 1.0 } else { -1.0 }).collect();
            let m = svm_sgd_fit(&s.train_x, &y, &spec.svm(0))?;
            s.test_x.iter().map(|x| if m.classify(x) > 0.0 { 1.0 } else { 0.0 }).collect()
        }
        OperatorKind::SvmSgdClassifier => {
            let models = present
                .iter()
                .map(|&c| {
                    let y: Vec<f64> = train_idx.iter().map(|v| if *v == c as f64 { 1.0 } else { -1.0 }).collect();
                    Ok((c, svm_sgd_fit(&s.train_x, &y, &spec.svm(c))?))
                })
                .collect::<Result<Vec<_>>>()?;
            s.test_x
                .iter()
                .map(|x| {
                    let mut best = (models[0].0, f64::NEG_INFINITY);
                    for (c, m) in &models {
                        let d = m.decision(x);
                        if d > best.1 {
                            best = (*c, d);
                        }
                    }
                    best.0 as f64
                })
                .collect()
        }
        _ => {
            let task = MlpTask::Classification { classes: classes.len() };
            mlp_fit(&s.train_x, &train_idx, task, &spec.mlp())?.predict_class(&s.test_x)?
        }
    };
    Ok(accuracy(&pred, &test_idx))
}

/// Multiply-add estimate of one operator run, used by the work clock.
pub fn operator_work(spec: &OperatorSpec, rows: usize, cols: usize) -> f64 {
    let n = rows as f64;
    let p = cols as f64;
    match spec.kind {
        OperatorKind::LinearRegression => n * (p + 1.0) * (p + 1.0) + (p + 1.0).powi(3),
        OperatorKind::SvmSgdClassifier => spec.epochs as f64 * n * p * 2.0,
        OperatorKind::MlpRegressor | OperatorKind::MlpClassifier => {
            let mut widths = vec![p];
            widths.extend(spec.hidden.iter().map(|h| *h as f64));
            widths.push(1.0);
            let per_row: f64 = widths.windows(2).map(|w| w[0] * w[1]).sum();
            3.0 * spec.epochs as f64 * n * per_row
        }
    }
}

/// Train the operator on the seeded training split and score it on the rest.
pub fn execute_operator(dataset: &DatasetRecord, spec: &OperatorSpec, clock: Clock) -> Result<OperatorResult> {
    spec.validate()?;
    let work = operator_work(spec, dataset.rows(), dataset.cols());
    let (output, elapsed) = clock.measure(work, || {
        let s = split(dataset, spec)?;
        if spec.kind.is_classifier() {
            classify(dataset, spec, &s)
        } else {
            regress(dataset, spec, &s)
        }
    });
    let output = output?;
    if !output.is_finite() {
        return Err(VenomError::NonFinite(format!("operator output on {}", dataset.name)));
    }
    Ok(OperatorResult { dataset_id: dataset.id.clone(), output, elapsed })
}

/// Memo of operator results keyed by dataset id and operator hash.
#[derive(Debug, Default)]
pub struct OperatorCache {
    results: Mutex<HashMap<(String, String), OperatorResult>>,
}

impl OperatorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_run(&self, dataset: &DatasetRecord, spec: &OperatorSpec, clock: Clock) -> Result<OperatorResult> {
        let key = (dataset.id.clone(), spec.hash());
        if let Some(r) = self.results.lock().expect("cache lock").get(&key) {
            return Ok(r.clone());
        }
        let r = execute_operator(dataset, spec, clock)?;
        self.results.lock().expect("cache lock").insert(key, r.clone());
        Ok(r)
    }

    pub fn insert(&self, spec: &OperatorSpec, result: OperatorResult) {
        self.results.lock().expect("cache lock").insert((result.dataset_id.clone(), spec.hash()), result);
    }

    pub fn len(&self) -> usize {
        self.results.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
