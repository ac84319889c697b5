//! Choosing the relevant subset of a lake for a query embedding.

pub mod kmeans;
pub mod similarity;

use std::collections::BTreeMap;
use std::fmt;

pub use kmeans::{choose_s, kmeans_fit, silhouette, ChosenS, KMeansModel, DEFAULT_MAX_ITERS, DEFAULT_RESTARTS, DEFAULT_TOL};
pub use similarity::{cosine_similarity, euclidean_distance};

use crate::error::{Result, VenomError};
use crate::lake::EmbeddingStore;
use similarity::squared_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cosine,
    Euclidean,
    KMeans,
}

impl Method {
    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "cosine" => Some(Method::Cosine),
            "euclidean" => Some(Method::Euclidean),
            "kmeans" => Some(Method::KMeans),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cosine => "cosine",
            Method::Euclidean => "euclidean",
            Method::KMeans => "kmeans",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionParams {
    pub method: Method,
    /// Fraction of candidates kept by the ranking methods.
    pub lambda: f64,
    pub s_low: usize,
    pub s_high: usize,
    pub min_s: usize,
    pub max_s: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            method: Method::Cosine,
            lambda: 0.2,
            s_low: 2,
            s_high: 6,
            min_s: 2,
            max_s: 20,
            restarts: kmeans::DEFAULT_RESTARTS,
            seed: 0,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(VenomError::Config(format!("lambda must be in (0, 1], got {}", self.lambda)));
        }
        if self.s_low < 2 || self.s_low > self.s_high {
            return Err(VenomError::Config(format!(
                "cluster range {}..={} must start at 2 or more and be non-empty",
                self.s_low, self.s_high
            )));
        }
        if self.min_s < 1 || self.min_s > self.max_s {
            return Err(VenomError::Config(format!(
                "cluster size bounds must satisfy 1 <= min_s <= max_s, got {}..={}",
                self.min_s, self.max_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub query_id: String,
    pub method: String,
    /// Best first.
    pub selected: Vec<Scored>,
    pub diagnostics: BTreeMap<String, String>,
}

impl SelectionResult {
    pub fn ids(&self) -> Vec<&str> {
        self.selected.iter().map(|s| s.id.as_str()).collect()
    }

    /// Rows of `query_id,method,rank,dataset_id,score` (header included).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query_id,method,rank,dataset_id,score\n");
        self.append_csv_rows(&mut out);
        out
    }

    pub fn append_csv_rows(&self, out: &mut String) {
        for (rank, s) in self.selected.iter().enumerate() {
            out.push_str(&format!("{},{},{},{},{:?}\n", self.query_id, self.method, rank + 1, s.id, s.score));
        }
    }

    pub fn diagnostics_text(&self) -> String {
        self.diagnostics.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn candidates<'a>(store: &'a EmbeddingStore, query_id: &str, z_o: &[f64]) -> Result<Vec<(&'a str, &'a [f64])>> {
    if z_o.len() != store.k() {
        return Err(VenomError::Dimension {
            op: "selection query",
            left: vec![z_o.len()],
            right: vec![store.k()],
        });
    }
    let c: Vec<_> = store.iter().filter(|(id, _)| *id != query_id).collect();
    if c.is_empty() {
        return Err(VenomError::InsufficientData("no candidate datasets besides the query".into()));
    }
    Ok(c)
}

/// Rank every stored embedding except the query's own and keep `ceil(lambda * N)`.
pub fn select_top_fraction(
    query_id: &str,
    z_o: &[f64],
    store: &EmbeddingStore,
    params: &SelectionParams,
) -> Result<SelectionResult> {
    params.validate()?;
    let cands = candidates(store, query_id, z_o)?;
    let mut scored: Vec<Scored> = cands
        .iter()
        .map(|(id, z)| {
            let score = match params.method {
                Method::Cosine => cosine_similarity(z_o, z)?,
                Method::Euclidean => euclidean_distance(z_o, z)?,
                Method::KMeans => {
                    return Err(VenomError::Config("kmeans is not a ranking method".into()))
                }
            };
            Ok(Scored { id: id.to_string(), score })
        })
        .collect::<Result<_>>()?;
    let descending = params.method == Method::Cosine;
    scored.sort_by(|a, b| {
        let ord = if descending { b.score.total_cmp(&a.score) } else { a.score.total_cmp(&b.score) };
        ord.then_with(|| a.id.cmp(&b.id))
    });
    let n = scored.len();
    let take = crate::seed::fraction_count(params.lambda, n).max(1);
    scored.truncate(take);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("candidates".into(), n.to_string());
    diagnostics.insert("lambda".into(), params.lambda.to_string());
    diagnostics.insert("selected".into(), take.to_string());
    Ok(SelectionResult {
        query_id: query_id.to_string(),
        method: params.method.to_string(),
        selected: scored,
        diagnostics,
    })
}

/// Cluster the candidates, take the query's cluster and bring its size into
/// `min_s..=max_s` by distance to the cluster centroid.
pub fn select_by_cluster(
    query_id: &str,
    z_o: &[f64],
    store: &EmbeddingStore,
    params: &SelectionParams,
) -> Result<SelectionResult> {
    params.validate()?;
    let cands = candidates(store, query_id, z_o)?;
    let n = cands.len();
    if n < params.min_s || n < 3 {
        return Err(VenomError::InsufficientData(format!(
            "{n} candidates cannot be clustered with min_s {}",
            params.min_s
        )));
    }
    let mut diagnostics = BTreeMap::new();
    let high = params.s_high.min(n - 1);
    if high < params.s_high {
        diagnostics.insert("s_high_clamped".into(), high.to_string());
    }
    if params.s_low > high {
        return Err(VenomError::InsufficientData(format!(
            "{n} candidates leave no room for {} clusters",
            params.s_low
        )));
    }
    let points: Vec<Vec<f64>> = cands.iter().map(|(_, z)| z.to_vec()).collect();
    let chosen = choose_s(&points, params.s_low, high, params.seed, params.restarts)?;
    let model = &chosen.model;
    let cluster = model.nearest(z_o);
    let centroid = &model.centroids[cluster];

    let mut by_distance: Vec<(usize, f64)> = (0..n)
        .map(|i| (i, squared_distance(&points[i], centroid).sqrt()))
        .collect();
    by_distance.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| cands[a.0].0.cmp(cands[b.0].0)));
    let mut selected: Vec<(usize, f64)> =
        by_distance.iter().copied().filter(|(i, _)| model.labels[*i] == cluster).collect();
    let cluster_size = selected.len();
    if selected.len() > params.max_s {
        diagnostics.insert("dropped".into(), (selected.len() - params.max_s).to_string());
        selected.truncate(params.max_s);
    } else if selected.len() < params.min_s {
        let need = params.min_s - selected.len();
        let extra: Vec<(usize, f64)> = by_distance
            .iter()
            .copied()
            .filter(|(i, _)| model.labels[*i] != cluster)
            .take(need)
            .collect();
        diagnostics.insert("added".into(), extra.len().to_string());
        selected.extend(extra);
    }

    diagnostics.insert("s".into(), chosen.s.to_string());
    diagnostics.insert("silhouette".into(), format!("{:?}", chosen.silhouette));
    diagnostics.insert("cluster".into(), cluster.to_string());
    diagnostics.insert("cluster_size".into(), cluster_size.to_string());
    diagnostics.insert("candidates".into(), n.to_string());
    if chosen.degenerate {
        diagnostics.insert("degenerate".into(), "all embeddings identical".into());
    }
    Ok(SelectionResult {
        query_id: query_id.to_string(),
        method: Method::KMeans.to_string(),
        selected: selected
            .into_iter()
            .map(|(i, d)| Scored { id: cands[i].0.to_string(), score: d })
            .collect(),
        diagnostics,
    })
}

pub fn select(query_id: &str, z_o: &[f64], store: &EmbeddingStore, params: &SelectionParams) -> Result<SelectionResult> {
    match params.method {
        Method::Cosine | Method::Euclidean => select_top_fraction(query_id, z_o, store, params),
        Method::KMeans => select_by_cluster(query_id, z_o, store, params),
    }
}
