#![no_main]
use libfuzzer_sys::fuzz_target;
use venom::lake::EmbeddingStore;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(store) = EmbeddingStore::from_text(text) {
            assert!(store.iter().all(|(_, z)| z.len() == store.k()));
        }
    }
});
