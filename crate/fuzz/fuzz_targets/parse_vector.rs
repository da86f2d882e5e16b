#![no_main]

use libfuzzer_sys::fuzz_target;
use viewmarkov::format::{parse_vector, write_vector};

fuzz_target!(|data: &[u8]| {
    if let Ok((catalog, v)) = parse_vector(data) {
        assert_eq!(catalog.len(), v.len());
        // 12 significant digits keep the sum within tolerance up to ~1000 entries.
        if v.len() <= 1000 {
            let (c2, v2) =
                parse_vector(write_vector(&catalog, &v).as_bytes()).expect("written vector parses");
            assert_eq!(c2, catalog);
            assert!(v2.max_abs_diff(&v) < 1e-9);
        }
    }
});
