#![no_main]

use libfuzzer_sys::fuzz_target;
use smartfilter_core::model::io;

// First byte picks the manifest length; the rest is the payload.
fuzz_target!(|data: &[u8]| {
    let Some((&n, payload)) = data.split_first() else {
        return;
    };
    let manifest: String = (0..n % 8).map(|i| format!("id{i}\n")).collect();
    if let Ok(set) = io::parse_embeddings(payload, &manifest) {
        let (bytes, ids) = io::encode_embeddings(&set);
        assert_eq!(io::parse_embeddings(&bytes, &ids).unwrap(), set);
    }
});
