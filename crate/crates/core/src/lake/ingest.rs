//! CSV ingestion with lake-wide one-hot vocabularies.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::record::{ColumnDescriptor, ColumnKind, DatasetRecord, Provenance};
use crate::error::{Result, VenomError};
use crate::nn::Tensor;
use crate::seed::content_hash;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    pub header: bool,
    pub delimiter: u8,
    /// Target column; categorical targets are label-encoded instead of one-hot.
    pub target: Option<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            header: true,
            delimiter: b',',
            target: None,
        }
    }
}

impl IngestOptions {
    pub fn hash(&self) -> String {
        let text = format!(
            "header={}\ndelimiter={}\ntarget={}\n",
            self.header,
            self.delimiter,
            self.target.as_deref().unwrap_or("")
        );
        content_hash([text.as_bytes()])
    }
}

/// A parsed but untyped CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub path: String,
    pub columns: Vec<String>,
    /// `(line number, cells)` per data row.
    pub rows: Vec<(usize, Vec<String>)>,
}

pub fn parse_table(bytes: &[u8], path: &str, opts: &IngestOptions) -> Result<RawTable> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| VenomError::parse("csv", format!("{path}: not UTF-8")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(opts.delimiter)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| VenomError::parse("csv", format!("{path}: {e}")))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        records.push((line, rec.iter().map(|c| c.trim().to_string()).collect::<Vec<_>>()));
    }
    let columns = if opts.header {
        if records.is_empty() {
            return Err(VenomError::EmptyFile { path: path.into() });
        }
        let (_, names) = records.remove(0);
        let mut seen = BTreeSet::new();
        for n in &names {
            if n.is_empty() || !seen.insert(n.clone()) {
                return Err(VenomError::Schema(format!("{path}: empty or duplicate column name {n:?}")));
            }
        }
        names
    } else {
        let n = records.first().map(|r| r.1.len()).unwrap_or(0);
        (0..n).map(|j| format!("c{j}")).collect()
    };
    if records.is_empty() {
        return Err(VenomError::EmptyFile { path: path.into() });
    }
    for (line, cells) in &records {
        if cells.len() != columns.len() {
            return Err(VenomError::RaggedRow {
                path: path.into(),
                line: *line,
                expected: columns.len(),
                found: cells.len(),
            });
        }
    }
    Ok(RawTable {
        path: path.into(),
        columns,
        rows: records,
    })
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Sorted category list per categorical column name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    columns: BTreeMap<String, Vec<String>>,
}

impl Vocabulary {
    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn categories(&self, column: &str) -> Option<&[String]> {
        self.columns.get(column).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Union over tables: a column is categorical if any cell anywhere is non-numeric.
    pub fn from_tables<'a>(tables: impl IntoIterator<Item = &'a RawTable>) -> Self {
        let mut cells: BTreeMap<String, (bool, BTreeSet<String>)> = BTreeMap::new();
        for t in tables {
            for (j, name) in t.columns.iter().enumerate() {
                let entry = cells.entry(name.clone()).or_default();
                for (_, row) in &t.rows {
                    let c = &row[j];
                    if c.is_empty() {
                        continue;
                    }
                    entry.1.insert(c.clone());
                    if parse_number(c).is_none() {
                        entry.0 = true;
                    }
                }
            }
        }
        Vocabulary {
            columns: cells
                .into_iter()
                .filter(|(_, (categorical, _))| *categorical)
                .map(|(k, (_, set))| (k, set.into_iter().collect()))
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["column", "category"]).expect("in-memory write");
        for (col, cats) in &self.columns {
            for c in cats {
                w.write_record([col, c]).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let mut columns: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| VenomError::parse("vocabulary", e.to_string()))?;
            if rec.len() != 2 {
                return Err(VenomError::parse("vocabulary", "expected column,category"));
            }
            columns.entry(rec[0].to_string()).or_default().push(rec[1].to_string());
        }
        for cats in columns.values_mut() {
            let sorted: BTreeSet<String> = cats.iter().cloned().collect();
            if sorted.len() != cats.len() || sorted.iter().ne(cats.iter()) {
                return Err(VenomError::parse("vocabulary", "categories must be sorted and unique"));
            }
        }
        Ok(Vocabulary { columns })
    }
}

/// Vocabulary over files that must share one column layout.
pub fn build_vocabulary(paths: &[&Path], opts: &IngestOptions) -> Result<Vocabulary> {
    let mut tables = Vec::with_capacity(paths.len());
    for p in paths {
        let bytes = std::fs::read(p).map_err(|e| VenomError::io(*p, e))?;
        tables.push(parse_table(&bytes, &p.display().to_string(), opts)?);
    }
    if let Some(first) = tables.first() {
        for t in &tables[1..] {
            if t.columns.len() != first.columns.len() {
                return Err(VenomError::Schema(format!(
                    "{} has {} columns but {} has {}",
                    t.path,
                    t.columns.len(),
                    first.path,
                    first.columns.len()
                )));
            }
        }
    }
    Ok(Vocabulary::from_tables(&tables))
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions, vocab: &Vocabulary) -> Result<DatasetRecord> {
    let bytes = std::fs::read(path).map_err(|e| VenomError::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    ingest_bytes(&bytes, &path.display().to_string(), &name, opts, vocab)
}

pub fn ingest_bytes(
    bytes: &[u8],
    path: &str,
    name: &str,
    opts: &IngestOptions,
    vocab: &Vocabulary,
) -> Result<DatasetRecord> {
    let table = parse_table(bytes, path, opts)?;
    let options_hash = opts.hash();
    let id = content_hash([bytes, options_hash.as_bytes()]);
    record_from_table(&table, id, name, options_hash, opts, vocab)
}

pub(crate) fn record_from_table(
    table: &RawTable,
    id: String,
    name: &str,
    options_hash: String,
    opts: &IngestOptions,
    vocab: &Vocabulary,
) -> Result<DatasetRecord> {
    let path = table.path.as_str();
    let target = opts.target.as_deref();
    let mut schema = Vec::new();
    for c in &table.columns {
        match vocab.categories(c) {
            Some(_) if Some(c.as_str()) == target => schema.push(ColumnDescriptor {
                source: c.clone(),
                kind: ColumnKind::Label,
            }),
            Some(cats) => schema.extend(cats.iter().map(|cat| ColumnDescriptor {
                source: c.clone(),
                kind: ColumnKind::OneHot { category: cat.clone() },
            })),
            None => schema.push(ColumnDescriptor::numeric(c)),
        }
    }
    if let Some(t) = target {
        if !table.columns.iter().any(|c| c == t) {
            return Err(VenomError::Schema(format!("{path}: target column {t:?} not found")));
        }
    }

    let width = schema.len();
    let mut data = Vec::with_capacity(table.rows.len() * width);
    for (line, cells) in &table.rows {
        for (j, cell) in cells.iter().enumerate() {
            let column = &table.columns[j];
            if cell.is_empty() {
                return Err(VenomError::MissingValue {
                    path: path.into(),
                    line: *line,
                    column: column.clone(),
                });
            }
            match vocab.categories(column) {
                Some(cats) => {
                    let idx = cats.binary_search(cell).map_err(|_| VenomError::UnknownCategory {
                        path: path.into(),
                        column: column.clone(),
                        value: cell.clone(),
                    })?;
                    if Some(column.as_str()) == target {
                        data.push(idx as f64);
                    } else {
                        data.extend((0..cats.len()).map(|i| if i == idx { 1.0 } else { 0.0 }));
                    }
                }
                None => data.push(parse_number(cell).ok_or_else(|| VenomError::UnparseableNumber {
                    path: path.into(),
                    line: *line,
                    column: column.clone(),
                    value: cell.clone(),
                })?),
            }
        }
    }
    let values = Tensor::matrix(table.rows.len(), width, data)?;
    DatasetRecord::new(
        id,
        name,
        values,
        schema,
        Provenance {
            path: path.into(),
            options_hash,
        },
    )
}
