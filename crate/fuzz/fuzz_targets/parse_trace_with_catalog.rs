#![no_main]

use libfuzzer_sys::fuzz_target;
use viewmarkov::trace::{parse_catalog, parse_trace_with_catalog};

// Input is `<catalog>\0<trace>`.
fuzz_target!(|data: &[u8]| {
    let Some(split) = data.iter().position(|&b| b == 0) else {
        return;
    };
    let Ok(catalog) = parse_catalog(&data[..split]) else {
        return;
    };
    if let Ok(trace) = parse_trace_with_catalog(&data[split + 1..], &catalog) {
        assert_eq!(trace.catalog(), &catalog);
        assert!(trace.views().all(|v| v < catalog.len()));
    }
});
