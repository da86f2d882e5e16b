#![no_main]

use libfuzzer_sys::fuzz_target;
use viewmarkov::cli::parse_workload;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = parse_workload(data, 0) {
        assert_eq!(spec.n_views(), spec.ground_truth.dim());
        assert!(spec.start_view < spec.n_views());
    }
});
