use crate::error::{Result, VenomError};
use crate::nn::Tensor;
use crate::seed::content_hash;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    /// One indicator column of a one-hot group expanded from a categorical source.
    OneHot { category: String },
    /// Categorical target column stored as its vocabulary index.
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDescriptor {
    pub source: String,
    pub kind: ColumnKind,
}

impl ColumnDescriptor {
    pub fn numeric(source: impl Into<String>) -> Self {
        ColumnDescriptor {
            source: source.into(),
            kind: ColumnKind::Numeric,
        }
    }

    /// Name of this derived column, e.g. `color=red` for one-hot columns.
    pub fn name(&self) -> String {
        match &self.kind {
            ColumnKind::OneHot { category } => format!("{}={}", self.source, category),
            _ => self.source.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub path: String,
    pub options_hash: String,
}

/// One numerical tabular dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub name: String,
    values: Tensor,
    schema: Vec<ColumnDescriptor>,
    pub provenance: Provenance,
}

impl DatasetRecord {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        values: Tensor,
        schema: Vec<ColumnDescriptor>,
        provenance: Provenance,
    ) -> Result<Self> {
        if values.shape().len() != 2 {
            return Err(VenomError::Contract(format!(
                "dataset values must be a matrix, got shape {:?}",
                values.shape()
            )));
        }
        if schema.len() != values.cols() {
            return Err(VenomError::Schema(format!(
                "{} schema entries for {} columns",
                schema.len(),
                values.cols()
            )));
        }
        if !values.is_finite() {
            return Err(VenomError::NonFinite("dataset values".into()));
        }
        Ok(DatasetRecord {
            id: id.into(),
            name: name.into(),
            values,
            schema,
            provenance,
        })
    }

    /// Build an all-numeric record from rows; the id hashes the name and values.
    pub fn from_rows(name: impl Into<String>, columns: &[&str], rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || columns.is_empty() {
            return Err(VenomError::EmptyInput("dataset has no rows or columns".into()));
        }
        let values = Tensor::from_rows(rows)?;
        let schema = columns.iter().map(|c| ColumnDescriptor::numeric(*c)).collect();
        let name = name.into();
        let id = Self::hash_values(&name, &values);
        Self::new(id, name, values, schema, Provenance::default())
    }

    pub(crate) fn hash_values(name: &str, values: &Tensor) -> String {
        let bytes: Vec<u8> = values.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        let shape = format!("{:?}", values.shape());
        content_hash([name.as_bytes(), shape.as_bytes(), bytes.as_slice()])
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn schema(&self) -> &[ColumnDescriptor] {
        &self.schema
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    /// Index of a numeric or label column; one-hot groups have no single index.
    pub fn column_index(&self, source: &str) -> Option<usize> {
        self.schema
            .iter()
            .position(|c| c.source == source && !matches!(c.kind, ColumnKind::OneHot { .. }))
    }

    /// Replace the values, keeping id, schema and provenance.
    pub fn with_values(&self, values: Tensor) -> Result<Self> {
        Self::new(self.id.clone(), self.name.clone(), values, self.schema.clone(), self.provenance.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_schema_mismatch_and_nan() {
        let v = Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            DatasetRecord::new("a", "a", v, vec![ColumnDescriptor::numeric("x")], Provenance::default()),
            Err(VenomError::Schema(_))
        ));
        let v = Tensor::matrix(1, 1, vec![f64::NAN]).unwrap();
        assert!(DatasetRecord::new("a", "a", v, vec![ColumnDescriptor::numeric("x")], Provenance::default()).is_err());
    }

    #[test]
    fn from_rows_id_depends_on_values() {
        let a = DatasetRecord::from_rows("d", &["x"], &[vec![1.0], vec![2.0]]).unwrap();
        let b = DatasetRecord::from_rows("d", &["x"], &[vec![1.0], vec![2.5]]).unwrap();
        let a2 = DatasetRecord::from_rows("d", &["x"], &[vec![1.0], vec![2.0]]).unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(a, a2);
    }
}
