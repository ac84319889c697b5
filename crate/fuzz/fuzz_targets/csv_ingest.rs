#![no_main]
use libfuzzer_sys::fuzz_target;
use venom::lake::ingest::parse_table;
use venom::lake::{ingest_bytes, IngestOptions, Vocabulary};

fuzz_target!(|data: &[u8]| {
    let opts = IngestOptions::default();
    // Vocabulary built from the input itself, so categorical paths are reached.
    let vocab = match parse_table(data, "fuzz.csv", &opts) {
        Ok(table) => Vocabulary::from_tables([&table]),
        Err(_) => Vocabulary::default(),
    };
    if let Ok(record) = ingest_bytes(data, "fuzz.csv", "fuzz", &opts, &vocab) {
        assert_eq!(record.values().shape(), &[record.rows(), record.cols()]);
        assert!(record.values().is_finite());
    }
});
