use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::ingest::{parse_table, record_from_table, IngestOptions, RawTable, Vocabulary};
use super::record::DatasetRecord;
use super::stats::LakeStats;
use super::store::EmbeddingStore;
use crate::error::{Result, VenomError};
use crate::seed::content_hash;
use crate::timing::Clock;
use crate::vectorizer::VectorizerModel;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const VOCAB_FILE: &str = "vocab.csv";
pub const STATS_FILE: &str = "stats.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub id: String,
    pub name: String,
    pub path: String,
    pub rows: usize,
    pub cols: usize,
}

impl RegistryEntry {
    pub fn of(record: &DatasetRecord) -> Self {
        RegistryEntry {
            id: record.id.clone(),
            name: record.name.clone(),
            path: record.provenance.path.clone(),
            rows: record.rows(),
            cols: record.cols(),
        }
    }
}

/// The datasets of one lake plus the statistics shared by all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct LakeRegistry {
    entries: Vec<RegistryEntry>,
    pub vocab: Vocabulary,
    pub stats: LakeStats,
}

impl LakeRegistry {
    /// Register in-memory records; ids must be unique.
    pub fn from_records(records: &[DatasetRecord], vocab: Vocabulary) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in records {
            if !seen.insert(r.id.as_str()) {
                return Err(VenomError::Schema(format!("duplicate dataset id {}", r.id)));
            }
        }
        Ok(LakeRegistry {
            entries: records.iter().map(RegistryEntry::of).collect(),
            vocab,
            stats: LakeStats::compute(records),
        })
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn manifest_csv(&self) -> String {
        manifest_csv(&self.entries)
    }

    /// Write the manifest, vocabulary and statistics into `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| VenomError::io(dir, e))?;
        let write = |name: &str, text: String| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| VenomError::io(p, e))
        };
        write(VOCAB_FILE, self.vocab.to_csv())?;
        write(STATS_FILE, self.stats.to_csv())?;
        write(MANIFEST_FILE, self.manifest_csv())?;
        Ok(dir.join(MANIFEST_FILE))
    }

    /// Load a manifest with its sibling vocabulary and statistics files.
    pub fn load(manifest: &Path) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| VenomError::io(p, e));
        let dir = manifest.parent().unwrap_or(Path::new("."));
        Ok(LakeRegistry {
            entries: parse_manifest(&read(manifest)?)?,
            vocab: Vocabulary::from_csv(&read(&dir.join(VOCAB_FILE))?)?,
            stats: LakeStats::from_csv(&read(&dir.join(STATS_FILE))?)?,
        })
    }

    /// Re-ingest every registered file, checking each still hashes to its id.
    pub fn load_records(&self, opts: &IngestOptions) -> Result<Vec<DatasetRecord>> {
        self.entries
            .iter()
            .map(|e| {
                let path = Path::new(&e.path);
                let bytes = std::fs::read(path).map_err(|err| VenomError::io(path, err))?;
                let table = parse_table(&bytes, &e.path, opts)?;
                let options_hash = opts.hash();
                let id = content_hash([bytes.as_slice(), options_hash.as_bytes()]);
                if id != e.id {
                    return Err(VenomError::Schema(format!(
                        "{} changed since ingestion (id {} now hashes to {id})",
                        e.path, e.id
                    )));
                }
                record_from_table(&table, id, &e.name, options_hash, opts, &self.vocab)
            })
            .collect()
    }
}

pub fn manifest_csv(entries: &[RegistryEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "name", "path", "rows", "cols"]).expect("in-memory write");
    for e in entries {
        w.write_record([&e.id, &e.name, &e.path, &e.rows.to_string(), &e.cols.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn parse_manifest(text: &str) -> Result<Vec<RegistryEntry>> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| VenomError::parse("manifest", e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["id", "name", "path", "rows", "cols"] {
        return Err(VenomError::parse("manifest", "header must be id,name,path,rows,cols"));
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| VenomError::parse("manifest", e.to_string()))?;
        if rec.len() != 5 {
            return Err(VenomError::parse("manifest", "expected 5 fields"));
        }
        let num = |i: usize| {
            rec[i]
                .parse::<usize>()
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| VenomError::parse("manifest", format!("bad count {:?}", &rec[i])))
        };
        if rec[0].is_empty() || !seen.insert(rec[0].to_string()) {
            return Err(VenomError::parse("manifest", format!("empty or duplicate id {:?}", &rec[0])));
        }
        out.push(RegistryEntry {
            id: rec[0].to_string(),
            name: rec[1].to_string(),
            path: rec[2].to_string(),
            rows: num(3)?,
            cols: num(4)?,
        });
    }
    Ok(out)
}

#[derive(Debug)]
pub struct IngestReport {
    pub registry: LakeRegistry,
    pub records: Vec<DatasetRecord>,
    pub failures: Vec<(String, VenomError)>,
}

/// Ingest files into one lake. The vocabulary spans every readable file;
/// files that fail are reported and left out of the registry.
pub fn ingest_files(paths: &[PathBuf], opts: &IngestOptions) -> IngestReport {
    let mut failures = Vec::new();
    let mut tables: Vec<(RawTable, Vec<u8>, String)> = Vec::new();
    for p in paths {
        let label = p.display().to_string();
        let parsed = std::fs::read(p)
            .map_err(|e| VenomError::io(p, e))
            .and_then(|bytes| parse_table(&bytes, &label, opts).map(|t| (t, bytes)));
        match parsed {
            Ok((t, bytes)) => {
                let name = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| label.clone());
                tables.push((t, bytes, name));
            }
            Err(e) => failures.push((label, e)),
        }
    }
    let vocab = Vocabulary::from_tables(tables.iter().map(|t| &t.0));
    let options_hash = opts.hash();
    let mut records: Vec<DatasetRecord> = Vec::new();
    let mut seen = BTreeSet::new();
    for (table, bytes, name) in &tables {
        let id = content_hash([bytes.as_slice(), options_hash.as_bytes()]);
        if !seen.insert(id.clone()) {
            failures.push((
                table.path.clone(),
                VenomError::Schema(format!("duplicate of an earlier file (id {id})")),
            ));
            continue;
        }
        match record_from_table(table, id, name, options_hash.clone(), opts, &vocab) {
            Ok(r) => records.push(r),
            Err(e) => failures.push((table.path.clone(), e)),
        }
    }
    let registry = LakeRegistry::from_records(&records, vocab).expect("ids deduplicated above");
    IngestReport {
        registry,
        records,
        failures,
    }
}

/// All `*.csv` files directly inside `dir`, in name order.
pub fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| VenomError::io(dir, e))? {
        let p = entry.map_err(|e| VenomError::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug)]
pub struct VectorizeOutcome {
    pub store: EmbeddingStore,
    /// Sum of the per-dataset encode times of this run.
    pub t_vec: f64,
    pub per_dataset: Vec<(String, f64)>,
    pub failures: Vec<(String, VenomError)>,
}

impl VectorizeOutcome {
    pub fn vectorized(&self) -> usize {
        self.per_dataset.len()
    }
}

/// Embed every record not already in `existing`. Records should already be
/// in the vectorizer's (normalized) view.
pub fn vectorize_lake(
    records: &[DatasetRecord],
    model: &VectorizerModel,
    existing: Option<EmbeddingStore>,
    clock: Clock,
) -> Result<VectorizeOutcome> {
    let mut store = match existing {
        Some(s) if s.model_version() != model.version() => {
            return Err(VenomError::StaleStore {
                store: s.model_version().to_string(),
                model: model.version().to_string(),
            })
        }
        Some(s) => s,
        None => EmbeddingStore::new(model.version(), model.k()),
    };
    let todo: Vec<&DatasetRecord> = records.iter().filter(|r| !store.contains(&r.id)).collect();
    let results: Vec<(String, Result<(crate::vectorizer::Embedding, f64)>)> = todo
        .par_iter()
        .map(|r| {
            let (emb, secs) = clock.measure(model.encode_work(r.rows()), || model.vectorize(r));
            (r.id.clone(), emb.map(|e| (e, secs)))
        })
        .collect();
    let mut per_dataset = Vec::new();
    let mut failures = Vec::new();
    let mut t_vec = 0.0;
    for (id, res) in results {
        match res.and_then(|(e, secs)| store.insert(e).map(|_| secs)) {
            Ok(secs) => {
                t_vec += secs;
                per_dataset.push((id, secs));
            }
            Err(e) => failures.push((id, e)),
        }
    }
    Ok(VectorizeOutcome {
        store,
        t_vec,
        per_dataset,
        failures,
    })
}
