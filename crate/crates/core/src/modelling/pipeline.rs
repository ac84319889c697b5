//! Query to prediction: embed, select, execute on the subset, fit, predict.

use std::collections::BTreeMap;

use super::operator::{OperatorCache, OperatorResult, OperatorSpec};
use super::surrogate::{build_surrogate, SurrogateModel, SurrogateSpec};
use crate::error::{Result, VenomError};
use crate::evalbench::sr_select;
use crate::lake::{DatasetRecord, EmbeddingStore};
use crate::selection::{select, SelectionParams, SelectionResult};
use crate::timing::{Clock, TimingLedger};
use crate::vectorizer::{Embedding, VectorizerModel};

/// How the relevant subset is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    Similarity(SelectionParams),
    /// Uniform random sample of a fraction of the candidates.
    Random { fraction: f64, seed: u64 },
}

impl Selector {
    /// Report label: the similarity method, or `SR-<fraction>`.
    pub fn label(&self) -> String {
        match self {
            Selector::Similarity(p) => p.method.to_string(),
            Selector::Random { fraction, .. } => format!("SR-{fraction}"),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            Selector::Similarity(p) => Selector::Similarity(SelectionParams { seed, ..p.clone() }),
            Selector::Random { fraction, .. } => Selector::Random { fraction: *fraction, seed },
        }
    }

    pub fn run(&self, query_id: &str, z_o: &[f64], store: &EmbeddingStore) -> Result<SelectionResult> {
        match self {
            Selector::Similarity(p) => select(query_id, z_o, store, p),
            Selector::Random { fraction, seed } => {
                let mut r = sr_select(&store.without(query_id), *fraction, *seed)?;
                r.query_id = query_id.to_string();
                Ok(r)
            }
        }
    }
}

/// Everything one prediction needs besides the data.
#[derive(Debug, Clone)]
pub struct Plan {
    pub selector: Selector,
    pub operator: OperatorSpec,
    pub surrogate: SurrogateSpec,
    pub clock: Clock,
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub query_id: String,
    pub y_hat: f64,
    pub selection: SelectionResult,
    /// Operator results on the selected datasets that entered the surrogate.
    pub train: Vec<OperatorResult>,
    /// Selected datasets the operator could not use, with the reason.
    pub skipped: Vec<(String, String)>,
    pub surrogate: SurrogateModel,
    /// `t_op` and `t_vec` are left at zero; they belong to the caller.
    pub ledger: TimingLedger,
}

/// Predict the operator output on `query` from the datasets of `lake` that the
/// selector picks, without running the operator on `query`.
pub fn model_and_predict(
    query: &DatasetRecord,
    lake: &[DatasetRecord],
    model: &VectorizerModel,
    store: &EmbeddingStore,
    plan: &Plan,
    cache: &OperatorCache,
) -> Result<Prediction> {
    if store.model_version() != model.version() {
        return Err(VenomError::StaleStore {
            store: store.model_version().to_string(),
            model: model.version().to_string(),
        }
        .in_stage("vectorize"));
    }
    let (z_o, t_embed) = plan.clock.measure(model.encode_work(query.rows()), || model.vectorize(query));
    let z_o = z_o.map_err(|e| e.in_stage("vectorize"))?;

    let select_work = (store.len() * store.k()) as f64;
    let (selection, t_select) = plan.clock.measure(select_work, || plan.selector.run(&query.id, &z_o.z, store));
    let selection = selection.map_err(|e| e.in_stage("select"))?;

    let by_id: BTreeMap<&str, &DatasetRecord> = lake.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut train = Vec::new();
    let mut skipped = Vec::new();
    let mut pairs = Vec::new();
    for id in selection.ids() {
        let record = by_id
            .get(id)
            .ok_or_else(|| VenomError::Contract(format!("selected dataset {id} is not in the lake")).in_stage("operator"))?;
        match cache.get_or_run(record, &plan.operator, plan.clock) {
            Ok(r) => {
                let z = store.get(id).expect("selected ids come from the store").to_vec();
                pairs.push((Embedding { dataset_id: id.to_string(), z, model_version: store.model_version().to_string() }, r.output));
                train.push(r);
            }
            Err(e @ VenomError::Unusable { .. }) => skipped.push((id.to_string(), e.to_string())),
            Err(e) => return Err(e.in_stage("operator")),
        }
    }
    let t_sim_op = train.iter().map(|r| r.elapsed).sum();

    let work = SurrogateModel::work(&plan.surrogate, pairs.len(), store.k());
    let (fitted, t_pred) = plan.clock.measure(work, || -> Result<(SurrogateModel, f64)> {
        let s = build_surrogate(&pairs, &plan.surrogate, &plan.operator.hash()).map_err(|e| e.in_stage("surrogate"))?;
        let y = s.predict(&z_o.z).map_err(|e| e.in_stage("predict"))?;
        Ok((s, y))
    });
    let (surrogate, y_hat) = fitted?;
    Ok(Prediction {
        query_id: query.id.clone(),
        y_hat,
        selection,
        train,
        skipped,
        surrogate,
        ledger: TimingLedger {
            t_op: 0.0,
            t_sim_op,
            t_vec: 0.0,
            t_sim: t_embed + t_select,
            t_pred,
            n_operators_amortized: 1,
        },
    })
}
