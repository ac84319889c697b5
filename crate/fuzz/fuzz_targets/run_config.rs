#![no_main]
use libfuzzer_sys::fuzz_target;
use venom::config::RunConfig;
use venom::vectorizer::VectorizerConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(c) = RunConfig::parse(text) {
            let _ = c.validate();
        }
        let _ = VectorizerConfig::from_text(text);
    }
});
