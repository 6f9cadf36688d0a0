#![no_main]

use libfuzzer_sys::fuzz_target;
use smartfilter_core::model::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(ledger) = io::parse_ledger(data) {
        let mut buf = Vec::new();
        io::write_ledger(&mut buf, &ledger).unwrap();
        assert_eq!(io::parse_ledger(buf.as_slice()).unwrap(), ledger);
    }
});
