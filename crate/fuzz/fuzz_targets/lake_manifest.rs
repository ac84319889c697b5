#![no_main]
use libfuzzer_sys::fuzz_target;
use venom::lake::registry::parse_manifest;
use venom::lake::{LakeStats, Vocabulary};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_manifest(text);
        let _ = Vocabulary::from_csv(text);
        let _ = LakeStats::from_csv(text);
    }
});
