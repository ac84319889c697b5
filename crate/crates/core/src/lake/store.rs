//! Embedding store: one tab-separated line per dataset under a header line.
//!
//! ```text
//! venom-store <version> <k> <count>
//! <dataset_id> <version> <k> <z_1> ... <z_k>
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Result, VenomError};
use crate::vectorizer::Embedding;

const HEADER_TAG: &str = "venom-store";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    model_version: String,
    k: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(model_version: impl Into<String>, k: usize) -> Self {
        EmbeddingStore {
            model_version: model_version.into(),
            k,
            entries: BTreeMap::new(),
        }
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn insert(&mut self, embedding: Embedding) -> Result<()> {
        if embedding.model_version != self.model_version {
            return Err(VenomError::StaleStore {
                store: self.model_version.clone(),
                model: embedding.model_version,
            });
        }
        if embedding.z.len() != self.k {
            return Err(VenomError::Dimension {
                op: "store insert",
                left: vec![self.k],
                right: vec![embedding.z.len()],
            });
        }
        if embedding.z.iter().any(|v| !v.is_finite()) {
            return Err(VenomError::NonFinite(format!("embedding of {}", embedding.dataset_id)));
        }
        if embedding.dataset_id.is_empty() || embedding.dataset_id.contains(['\t', '\n', '\r']) {
            return Err(VenomError::Contract(format!("invalid dataset id {:?}", embedding.dataset_id)));
        }
        self.entries.insert(embedding.dataset_id, embedding.z);
        Ok(())
    }

    /// Copy of the store without `id`.
    pub fn without(&self, id: &str) -> Self {
        let mut s = self.clone();
        s.entries.remove(id);
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER_TAG}\t{}\t{}\t{}\n", self.model_version, self.k, self.entries.len());
        for (id, z) in &self.entries {
            out.push_str(id);
            out.push('\t');
            out.push_str(&self.model_version);
            out.push('\t');
            out.push_str(&self.k.to_string());
            for v in z {
                out.push('\t');
                out.push_str(&format!("{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| VenomError::parse("embedding store", m);
        if !text.ends_with('\n') {
            return Err(bad("missing final newline (truncated file?)".into()));
        }
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split('\t').collect();
        if header.len() != 4 || header[0] != HEADER_TAG {
            return Err(bad("bad header line".into()));
        }
        let version = header[1].to_string();
        let k: usize = header[2].parse().map_err(|_| bad("bad k in header".into()))?;
        let count: usize = header[3].parse().map_err(|_| bad("bad count in header".into()))?;
        if version.is_empty() || k == 0 {
            return Err(bad("empty version or zero k".into()));
        }
        let mut store = EmbeddingStore::new(version.clone(), k);
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 + k {
                return Err(bad(format!("line {}: expected {} fields, found {}", n + 2, 3 + k, fields.len())));
            }
            if fields[1] != version || fields[2] != header[2] {
                return Err(bad(format!("line {}: version or k differs from header", n + 2)));
            }
            let z = fields[3..]
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad(format!("line {}: bad number", n + 2)))?;
            if store.contains(fields[0]) {
                return Err(bad(format!("line {}: duplicate id {}", n + 2, fields[0])));
            }
            store
                .insert(Embedding {
                    dataset_id: fields[0].to_string(),
                    z,
                    model_version: version.clone(),
                })
                .map_err(|e| bad(e.to_string()))?;
        }
        if store.len() != count {
            return Err(bad(format!("header declares {count} entries, found {}", store.len())));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| VenomError::io(path, e))
    }
}

/// Load a store, failing with a stale-store error when `expected_version` differs.
pub fn load_store(path: &Path, expected_version: Option<&str>) -> Result<EmbeddingStore> {
    let text = std::fs::read_to_string(path).map_err(|e| VenomError::io(path, e))?;
    let store = EmbeddingStore::from_text(&text)?;
    if let Some(v) = expected_version {
        if v != store.model_version {
            return Err(VenomError::StaleStore {
                store: store.model_version,
                model: v.to_string(),
            });
        }
    }
    Ok(store)
}
