#![no_main]

use libfuzzer_sys::fuzz_target;
use viewmarkov::trace::parse_catalog;

fuzz_target!(|data: &[u8]| {
    if let Ok(catalog) = parse_catalog(data) {
        for (i, name) in catalog.names().iter().enumerate() {
            assert_eq!(catalog.index_of(name), Some(i));
        }
    }
});
