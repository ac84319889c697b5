use std::collections::BTreeMap;

use super::record::DatasetRecord;
use crate::error::{Result, VenomError};
use crate::nn::Tensor;

/// Per-column mean and population standard deviation over the union of a
/// lake's datasets, keyed by derived column name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LakeStats {
    columns: BTreeMap<String, (f64, f64)>,
}

impl LakeStats {
    pub fn compute(records: &[DatasetRecord]) -> Self {
        // (count, mean, m2) with Welford updates, visiting datasets in order.
        let mut acc: BTreeMap<String, (f64, f64, f64)> = BTreeMap::new();
        for r in records {
            for (j, col) in r.schema().iter().enumerate() {
                let e = acc.entry(col.name()).or_insert((0.0, 0.0, 0.0));
                for i in 0..r.rows() {
                    let x = r.values().get(i, j);
                    e.0 += 1.0;
                    let delta = x - e.1;
                    e.1 += delta / e.0;
                    e.2 += delta * (x - e.1);
                }
            }
        }
        LakeStats {
            columns: acc
                .into_iter()
                .map(|(k, (n, mean, m2))| (k, (mean, (m2 / n).max(0.0).sqrt())))
                .collect(),
        }
    }

    pub fn get(&self, column: &str) -> Option<(f64, f64)> {
        self.columns.get(column).copied()
    }

    pub fn insert(&mut self, column: impl Into<String>, mean: f64, std: f64) {
        self.columns.insert(column.into(), (mean, std));
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    fn lookup(&self, record: &DatasetRecord) -> Result<Vec<(f64, f64)>> {
        record
            .schema()
            .iter()
            .map(|c| {
                let name = c.name();
                self.get(&name).ok_or_else(|| {
                    VenomError::Schema(format!("no lake statistics for column {name:?} of {}", record.name))
                })
            })
            .collect()
    }

    fn map(&self, record: &DatasetRecord, skip: Option<usize>, f: impl Fn(f64, f64, f64) -> f64) -> Result<DatasetRecord> {
        let stats = self.lookup(record)?;
        let (m, n) = record.values().dims();
        let mut data = record.values().data().to_vec();
        for i in 0..m {
            for (j, &(mean, std)) in stats.iter().enumerate() {
                if Some(j) != skip {
                    data[i * n + j] = f(data[i * n + j], mean, std);
                }
            }
        }
        record.with_values(Tensor::matrix(m, n, data)?)
    }

    /// Z-score every column; zero-variance columns map to 0.
    pub fn normalize(&self, record: &DatasetRecord) -> Result<DatasetRecord> {
        self.map(record, None, normalize_value)
    }

    /// Z-score every column except `keep` (left in raw units).
    pub fn normalize_except(&self, record: &DatasetRecord, keep: Option<usize>) -> Result<DatasetRecord> {
        self.map(record, keep, normalize_value)
    }

    /// Inverse of [`normalize`](Self::normalize) for columns with non-zero spread.
    pub fn denormalize(&self, record: &DatasetRecord) -> Result<DatasetRecord> {
        self.map(record, None, |x, mean, std| if std > 0.0 { x * std + mean } else { mean })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["column", "mean", "std"]).expect("in-memory write");
        for (k, (mean, std)) in &self.columns {
            w.write_record([k.clone(), format!("{mean}"), format!("{std}")]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let mut columns = BTreeMap::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| VenomError::parse("lake statistics", e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| VenomError::parse("lake statistics", format!("bad number in {rec:?}")))
            };
            if rec.len() != 3 {
                return Err(VenomError::parse("lake statistics", "expected column,mean,std"));
            }
            let std = num(2)?;
            if std < 0.0 {
                return Err(VenomError::parse("lake statistics", "negative std"));
            }
            if columns.insert(rec[0].to_string(), (num(1)?, std)).is_some() {
                return Err(VenomError::parse("lake statistics", format!("duplicate column {}", &rec[0])));
            }
        }
        Ok(LakeStats { columns })
    }
}

fn normalize_value(x: f64, mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        (x - mean) / std
    } else {
        0.0
    }
}
