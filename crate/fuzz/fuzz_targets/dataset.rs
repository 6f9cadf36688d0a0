#![no_main]

use libfuzzer_sys::fuzz_target;
use smartfilter_core::model::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(dataset) = io::parse_dataset(data) {
        // Whatever parses must survive a write and re-read unchanged.
        let mut buf = Vec::new();
        io::write_dataset(&mut buf, &dataset).unwrap();
        let back = io::parse_dataset(buf.as_slice()).unwrap();
        assert_eq!(back.examples(), dataset.examples());
    }
});
