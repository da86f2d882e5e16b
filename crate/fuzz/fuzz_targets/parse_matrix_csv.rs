#![no_main]

use libfuzzer_sys::fuzz_target;
use viewmarkov::format::{parse_matrix_csv, write_matrix_csv};
use viewmarkov::markov::{solve, Damping, SteadyConfig};

fuzz_target!(|data: &[u8]| {
    let Ok((catalog, matrix)) = parse_matrix_csv(data) else {
        return;
    };
    let rows: Vec<Vec<f64>> = matrix.rows().map(<[f64]>::to_vec).collect();
    let text = write_matrix_csv(&catalog, &rows);
    let (again, _) = parse_matrix_csv(text.as_bytes()).expect("written matrix parses");
    assert_eq!(again, catalog);

    if (1..=16).contains(&matrix.dim()) {
        let config = SteadyConfig {
            damping: Damping::Fixed(0.85),
            max_iter: 500,
            ..SteadyConfig::default()
        };
        let solved = solve(&matrix, &config).expect("damped chains are irreducible");
        let sum: f64 = solved.result.vector.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }
});
