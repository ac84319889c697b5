//! Synthetic datasets, noise injection and the random-selection baseline.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Result, VenomError};
use crate::lake::DatasetRecord;
use crate::lake::EmbeddingStore;
use crate::nn::Tensor;
use crate::seed::{derive_seed, fraction_count, rng};
use crate::selection::{Scored, SelectionResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// Every column, target included, iid standard normal.
    Normal,
    /// `y = w . x + noise * e` with a seeded unit-norm `w`.
    Linear { noise: f64 },
    /// Two Gaussian blobs; `y` is the 0/1 blob label.
    TwoCluster,
}

impl Generator {
    pub fn parse(s: &str, noise: f64) -> Option<Self> {
        match s {
            "normal" => Some(Generator::Normal),
            "linear" => Some(Generator::Linear { noise }),
            "two-cluster" => Some(Generator::TwoCluster),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Generator::Normal => "normal",
            Generator::Linear { .. } => "linear",
            Generator::TwoCluster => "two-cluster",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Column names of a synthetic dataset: `x1..x{cols-1}` then `y`.
pub fn synth_columns(cols: usize) -> Vec<String> {
    (1..cols).map(|j| format!("x{j}")).chain(["y".to_string()]).collect()
}

/// `rows × cols` values; the last column is the target.
pub fn gen_synth_dataset(rows: usize, cols: usize, generator: Generator, seed: u64) -> Result<DatasetRecord> {
    if rows == 0 || cols < 2 {
        return Err(VenomError::Config(format!("synthetic dataset needs rows >= 1 and cols >= 2, got {rows}x{cols}")));
    }
    let p = cols - 1;
    let mut r = rng(derive_seed(seed, "synth.values", 0));
    let mut draw = || -> f64 { StandardNormal.sample(&mut r) };
    let mut data = Vec::with_capacity(rows * cols);
    match generator {
        Generator::Normal => data.extend((0..rows * cols).map(|_| draw())),
        Generator::Linear { noise } => {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(VenomError::Config(format!("linear noise must be finite and >= 0, got {noise}")));
            }
            let mut wr = rng(derive_seed(seed, "synth.weights", 0));
            let mut w: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut wr)).collect();
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            w.iter_mut().for_each(|v| *v /= norm);
            for _ in 0..rows {
                let x: Vec<f64> = (0..p).map(|_| draw()).collect();
                let e = draw();
                let y = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + noise * e;
                data.extend(x);
                data.push(y);
            }
        }
        Generator::TwoCluster => {
            for i in 0..rows {
                let label = (i % 2) as f64;
                let centre = if label == 1.0 { 1.5 } else { -1.5 };
                data.extend((0..p).map(|_| centre + draw()));
                data.push(label);
            }
        }
    }
    let names = synth_columns(cols);
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let values = Tensor::matrix(rows, cols, data)?;
    DatasetRecord::from_rows(format!("synth-{generator}-{rows}x{cols}-s{seed}"), &names, &values.to_rows())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScope {
    All,
    First,
}

impl NoiseScope {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(NoiseScope::All),
            "first" => Some(NoiseScope::First),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseScope::All => "all",
            NoiseScope::First => "first",
        }
    }
}

/// Add `N(0, sigma^2)` to the scoped cells of `ceil(fraction * rows)` seeded
/// rows. Every other cell is left bit-identical. The result gets a fresh id.
pub fn add_gaussian_noise(
    dataset: &DatasetRecord,
    fraction: f64,
    sigma: f64,
    scope: NoiseScope,
    seed: u64,
) -> Result<DatasetRecord> {
    if !(0.0..=1.0).contains(&fraction) || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(VenomError::Config(format!("noise needs fraction in [0, 1] and sigma > 0, got {fraction}, {sigma}")));
    }
    let (m, n) = dataset.values().dims();
    let count = fraction_count(fraction, m);
    let mut r = rng(derive_seed(seed, "noise.rows", 0));
    let mut rows = sample(&mut r, m, count).into_vec();
    rows.sort_unstable();
    let normal = Normal::new(0.0, sigma).map_err(|e| VenomError::Config(e.to_string()))?;
    let mut nr = rng(derive_seed(seed, "noise.values", 0));
    let mut data = dataset.values().data().to_vec();
    let width = match scope {
        NoiseScope::All => n,
        NoiseScope::First => 1,
    };
    for i in rows {
        for j in 0..width {
            data[i * n + j] += normal.sample(&mut nr);
        }
    }
    let mut out = dataset.with_values(Tensor::matrix(m, n, data)?)?;
    out.name = format!("{}+noise-{}-{fraction}-s{seed}", dataset.name, scope.as_str());
    out.id = DatasetRecord::hash_values(&out.name, out.values());
    Ok(out)
}

/// Uniform sample without replacement of `ceil(fraction * N)` stored ids,
/// reported in ascending id order.
pub fn sr_select(store: &EmbeddingStore, fraction: f64, seed: u64) -> Result<SelectionResult> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(VenomError::Config(format!("SR fraction must be in (0, 1], got {fraction}")));
    }
    let ids = store.ids();
    let count = fraction_count(fraction, ids.len());
    let mut r = rng(derive_seed(seed, "sr.sample", 0));
    let mut picked = sample(&mut r, ids.len(), count).into_vec();
    picked.sort_unstable();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("candidates".into(), ids.len().to_string());
    diagnostics.insert("selected".into(), count.to_string());
    Ok(SelectionResult {
        query_id: String::new(),
        method: format!("SR-{fraction}"),
        selected: picked.into_iter().map(|i| Scored { id: ids[i].to_string(), score: 0.0 }).collect(),
        diagnostics,
    })
}
