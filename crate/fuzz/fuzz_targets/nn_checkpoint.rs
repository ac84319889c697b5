#![no_main]
use libfuzzer_sys::fuzz_target;
use venom::nn::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok((header, params)) = decode_checkpoint(data) {
        let again = encode_checkpoint(&header, &params);
        let (h2, _) = decode_checkpoint(&again).expect("re-encoded checkpoint decodes");
        assert_eq!(header, h2);
    }
});
