#![no_main]

use libfuzzer_sys::fuzz_target;
use smartfilter_core::model::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = io::parse_predictions(data) {
        let mut buf = Vec::new();
        io::write_predictions(&mut buf, &set).unwrap();
        assert_eq!(io::parse_predictions(buf.as_slice()).unwrap(), set);
    }
});
