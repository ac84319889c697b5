//! Leave-one-out experiments over a vectorized lake.

use rayon::prelude::*;

use super::metrics::{amortized_speedup, mae, rmse, speedup};
use super::synth::{add_gaussian_noise, NoiseScope};
use crate::error::{Result, VenomError};
use crate::lake::{DatasetRecord, EmbeddingStore};
use crate::modelling::{model_and_predict, MlpConfig, OperatorCache, OperatorSpec, Plan, Selector, SurrogateSpec};
use crate::seed::derive_seed;
use crate::selection::euclidean_distance;
use crate::timing::{Clock, TimingLedger};
use crate::vectorizer::VectorizerModel;

pub const REPORT_HEADER: &str = "experiment,arm,k,rmse,mae,speedup,amortized_speedup,reps";

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub id: String,
    pub arms: Vec<Selector>,
    pub operator: OperatorSpec,
    pub surrogate: SurrogateSpec,
    pub repetitions: usize,
    pub seed: u64,
    pub clock: Clock,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(VenomError::Config("experiment repetitions must be at least 1".into()));
        }
        if self.arms.is_empty() {
            return Err(VenomError::Config("experiment has no arms".into()));
        }
        if self.id.is_empty() || self.id.contains([',', '\n']) {
            return Err(VenomError::Config(format!("invalid experiment id {:?}", self.id)));
        }
        self.operator.validate()
    }

    fn rep_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, "experiment.rep", rep as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub arm: String,
    pub k: usize,
    pub rmse: f64,
    pub mae: f64,
    pub speedup: f64,
    pub amortized_speedup: f64,
    pub reps: usize,
}

impl ReportRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:?},{:?},{:?},{:?},{}\n",
            self.experiment, self.arm, self.k, self.rmse, self.mae, self.speedup, self.amortized_speedup, self.reps
        )
    }
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    rows.iter().for_each(|r| out.push_str(&r.csv_line()));
    out
}

/// One leave-one-out prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub arm: String,
    pub repetition: usize,
    pub query_id: String,
    pub truth: f64,
    pub y_hat: f64,
    pub ledger: TimingLedger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryFailure {
    pub arm: String,
    pub repetition: usize,
    pub query_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    pub rows: Vec<ReportRow>,
    pub outcomes: Vec<QueryOutcome>,
    pub failures: Vec<QueryFailure>,
    /// `(arm, query_id)` pairs that failed in every repetition.
    pub unresolved: Vec<(String, String)>,
}

/// Every lake dataset takes a turn as the query. Ground truth always comes
/// from executing the operator on the query itself; its cost goes into
/// `t_op` of the other queries, never into the prediction arm.
pub fn run_experiment(
    config: &ExperimentConfig,
    lake: &[DatasetRecord],
    model: &VectorizerModel,
    store: &EmbeddingStore,
    t_vec: f64,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    if store.model_version() != model.version() {
        return Err(VenomError::StaleStore {
            store: store.model_version().to_string(),
            model: model.version().to_string(),
        });
    }
    let mut out = ExperimentOutcome::default();
    for rep in 0..config.repetitions {
        let seed = config.rep_seed(rep);
        let operator = config.operator.with_seed(derive_seed(seed, "experiment.operator", 0));
        let cache = OperatorCache::new();
        let ground: Vec<std::result::Result<(f64, f64), String>> = lake
            .par_iter()
            .map(|d| {
                cache
                    .get_or_run(d, &operator, config.clock)
                    .map(|r| (r.output, r.elapsed))
                    .map_err(|e| format!("{}: {}", e.kind(), e.in_stage("truth")))
            })
            .collect();
        let elapsed: Vec<f64> = ground.iter().map(|g| g.as_ref().map_or(0.0, |(_, t)| *t)).collect();
        let total_op: f64 = elapsed.iter().sum();

        for (a, arm) in config.arms.iter().enumerate() {
            let plan = Plan {
                selector: arm.with_seed(derive_seed(seed, "experiment.selector", a as u64)),
                operator: operator.clone(),
                surrogate: SurrogateSpec { mlp: MlpConfig { seed, ..config.surrogate.mlp.clone() }, ..config.surrogate.clone() },
                clock: config.clock,
            };
            let label = arm.label();
            let results: Vec<std::result::Result<QueryOutcome, String>> = lake
                .par_iter()
                .enumerate()
                .map(|(i, q)| {
                    let truth = ground[i].clone()?.0;
                    let p = model_and_predict(q, lake, model, store, &plan, &cache)
                        .map_err(|e| format!("{}: {e}", e.kind()))?;
                    let mut ledger = p.ledger;
                    ledger.t_op = total_op - elapsed[i];
                    ledger.t_vec = t_vec;
                    Ok(QueryOutcome { arm: label.clone(), repetition: rep, query_id: q.id.clone(), truth, y_hat: p.y_hat, ledger })
                })
                .collect();
            for (q, r) in lake.iter().zip(results) {
                match r {
                    Ok(o) => out.outcomes.push(o),
                    Err(error) => out.failures.push(QueryFailure {
                        arm: label.clone(),
                        repetition: rep,
                        query_id: q.id.clone(),
                        error,
                    }),
                }
            }
        }
    }

    for arm in &config.arms {
        let label = arm.label();
        let done: Vec<&QueryOutcome> = out.outcomes.iter().filter(|o| o.arm == label).collect();
        for q in lake {
            if !done.iter().any(|o| o.query_id == q.id) {
                out.unresolved.push((label.clone(), q.id.clone()));
            }
        }
        if done.is_empty() {
            continue;
        }
        let pred: Vec<f64> = done.iter().map(|o| o.y_hat).collect();
        let truth: Vec<f64> = done.iter().map(|o| o.truth).collect();
        let ledgers: Vec<TimingLedger> = done.iter().map(|o| o.ledger).collect();
        let mut amortized = Vec::new();
        for rep in 0..config.repetitions {
            let per_rep: Vec<TimingLedger> = done.iter().filter(|o| o.repetition == rep).map(|o| o.ledger).collect();
            if !per_rep.is_empty() {
                amortized.push(amortized_speedup(&per_rep)?);
            }
        }
        out.rows.push(ReportRow {
            experiment: config.id.clone(),
            arm: label,
            k: store.k(),
            rmse: rmse(&pred, &truth)?,
            mae: mae(&pred, &truth)?,
            speedup: speedup(&TimingLedger::mean(&ledgers))?,
            amortized_speedup: amortized.iter().sum::<f64>() / amortized.len() as f64,
            reps: config.repetitions,
        });
    }
    Ok(out)
}

/// Embedding displacement of `base` under increasing noise fractions, as
/// `(fraction, euclidean distance)` pairs in the order of `fractions`.
pub fn noise_shift(
    model: &VectorizerModel,
    base: &DatasetRecord,
    fractions: &[f64],
    sigma: f64,
    scope: NoiseScope,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let z0 = model.vectorize(base)?.z;
    fractions
        .iter()
        .map(|&l| {
            let noisy = add_gaussian_noise(base, l, sigma, scope, seed)?;
            Ok((l, euclidean_distance(&z0, &model.vectorize(&noisy)?.z)?))
        })
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(VenomError::Dimension { op: "spearman", left: vec![x.len()], right: vec![y.len()] });
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for t in i..=j {
                r[idx[t]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(VenomError::DegenerateVector("constant input to spearman".into()));
    }
    Ok(cov / (vx * vy).sqrt())
}
