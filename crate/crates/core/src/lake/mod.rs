//! Data-lake management: CSV ingestion, one-hot vocabularies, lake-level
//! normalization, the dataset registry and the embedding store.

pub mod ingest;
pub mod record;
pub mod registry;
pub mod stats;
pub mod store;

pub use ingest::{build_vocabulary, ingest_bytes, ingest_csv, IngestOptions, Vocabulary};
pub use record::{ColumnDescriptor, ColumnKind, DatasetRecord, Provenance};
pub use registry::{
    csv_files, ingest_files, vectorize_lake, IngestReport, LakeRegistry, RegistryEntry, VectorizeOutcome,
};
pub use stats::LakeStats;
pub use store::{load_store, EmbeddingStore};
