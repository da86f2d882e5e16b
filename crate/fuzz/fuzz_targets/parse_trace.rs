#![no_main]

use libfuzzer_sys::fuzz_target;
use viewmarkov::estimator::{estimate, EstimatorConfig};
use viewmarkov::trace::parse_trace;

fuzz_target!(|data: &[u8]| {
    let Ok(trace) = parse_trace(data) else { return };

    let reparsed = parse_trace(trace.to_csv().as_bytes()).expect("serialized trace parses");
    assert_eq!(reparsed, trace);

    if trace.catalog().len() <= 64 {
        let m =
            estimate(&trace, EstimatorConfig::default()).expect("trace views are in its catalog");
        for row in m.to_f64_rows() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
});
