//! Steady-state computation for view-transition chains.
//!
//! The primary route is power iteration: a row state vector is multiplied by
//! the transition matrix until consecutive iterates agree in max norm. A
//! direct linear solve of `πP = π, Σπ = 1` is provided as an independent
//! check, together with the irreducibility test and uniform damping used to
//! repair chains without a unique stationary distribution.

use std::collections::VecDeque;

use thiserror::Error;

/// Row-sum tolerance accepted when constructing a [`TransitionMatrix`].
pub const STOCHASTIC_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not row-stochastic: row {row} sums to {sum}")]
    NonStochasticMatrix { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("chain is reducible: no unique stationary distribution")]
    ReducibleChain,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("damping must lie in (0, 1], got {0}")]
    InvalidDamping(f64),
    #[error("state vector is not a probability distribution")]
    InvalidState,
}

/// Dense n×n row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Accepts rows summing to 1 within [`STOCHASTIC_TOLERANCE`]; each row is
    /// then rescaled so its sum is 1 to floating precision.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self, MarkovError> {
        if entries.len() != n * n {
            return Err(MarkovError::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        let mut entries = entries;
        for row in 0..n {
            let slice = &mut entries[row * n..(row + 1) * n];
            for (col, &value) in slice.iter().enumerate() {
                if !(0.0..=1.0 + STOCHASTIC_TOLERANCE).contains(&value) {
                    return Err(MarkovError::EntryOutOfRange { row, col, value });
                }
            }
            let sum: f64 = slice.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(MarkovError::NonStochasticMatrix { row, sum });
            }
            slice.iter_mut().for_each(|x| *x /= sum);
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MarkovError> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(MarkovError::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(n, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.n.max(1)).take(self.n)
    }
}

/// A probability distribution over views at future period `iteration`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    probs: Vec<f64>,
    iteration: usize,
}

impl StateVector {
    /// Accepts non-negative entries summing to 1 within 1e-9, rescaled to
    /// sum to 1 to floating precision.
    pub fn new(mut probs: Vec<f64>) -> Result<Self, MarkovError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(MarkovError::InvalidState);
        }
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(Self {
            probs,
            iteration: 0,
        })
    }

    /// All mass on `view`.
    pub fn unit(n: usize, view: usize) -> Self {
        assert!(view < n, "unit vector index {view} out of range for {n}");
        let mut probs = vec![0.0; n];
        probs[view] = 1.0;
        Self {
            probs,
            iteration: 0,
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
            iteration: 0,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult {
    pub vector: StateVector,
    pub iterations: usize,
    pub converged: bool,
    /// Max absolute change over the last step.
    pub residual: f64,
}

/// One period forward: `result[j] = Σᵢ v[i]·P[i][j]`.
pub fn step(v: &StateVector, p: &TransitionMatrix) -> Result<StateVector, MarkovError> {
    if v.len() != p.n {
        return Err(MarkovError::DimensionMismatch {
            expected: p.n,
            found: v.len(),
        });
    }
    let mut out = vec![0.0; p.n];
    for (i, &weight) in v.probs.iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        for (acc, &pij) in out.iter_mut().zip(p.row(i)) {
            *acc += weight * pij;
        }
    }
    for x in &mut out {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    Ok(StateVector {
        probs: out,
        iteration: v.iteration + 1,
    })
}

/// Repeats [`step`] until the max-norm change is at most `tol` or `max_iter`
/// multiplications have been performed.
pub fn iterate_to_steady(
    v0: &StateVector,
    p: &TransitionMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<SteadyStateResult, MarkovError> {
    if !(tol > 0.0) {
        return Err(MarkovError::InvalidTolerance(tol));
    }
    if v0.len() != p.n {
        return Err(MarkovError::DimensionMismatch {
            expected: p.n,
            found: v0.len(),
        });
    }
    check_stochastic(p)?;

    let mut current = v0.clone();
    let mut residual = f64::INFINITY;
    for k in 1..=max_iter {
        let next = step(&current, p)?;
        residual = next.max_abs_diff(&current);
        current = next;
        if residual <= tol {
            return Ok(SteadyStateResult {
                vector: current,
                iterations: k,
                converged: true,
                residual,
            });
        }
    }
    Ok(SteadyStateResult {
        vector: current,
        iterations: max_iter,
        converged: false,
        residual,
    })
}

fn check_stochastic(p: &TransitionMatrix) -> Result<(), MarkovError> {
    for (row, r) in p.rows().enumerate() {
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(MarkovError::NonStochasticMatrix { row, sum });
        }
    }
    Ok(())
}

/// Solves `πP = π, Σπ = 1` directly by Gaussian elimination with partial
/// pivoting. Requires an irreducible chain.
pub fn stationary_exact(p: &TransitionMatrix) -> Result<StateVector, MarkovError> {
    check_stochastic(p)?;
    if !check_irreducible(p) {
        return Err(MarkovError::ReducibleChain);
    }
    let n = p.n;
    // Augmented system (Pᵀ − I)π = 0 with the last equation replaced by Σπ = 1.
    let w = n + 1;
    let mut a = vec![0.0; n * w];
    for r in 0..n {
        for c in 0..n {
            a[r * w + c] = p.get(c, r) - if r == c { 1.0 } else { 0.0 };
        }
    }
    for c in 0..n {
        a[(n - 1) * w + c] = 1.0;
    }
    a[(n - 1) * w + n] = 1.0;

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * w + col].abs().total_cmp(&a[y * w + col].abs()))
            .expect("non-empty pivot range");
        if a[pivot * w + col].abs() < 1e-300 {
            return Err(MarkovError::ReducibleChain);
        }
        if pivot != col {
            for c in 0..w {
                a.swap(pivot * w + c, col * w + c);
            }
        }
        let d = a[col * w + col];
        for r in col + 1..n {
            let f = a[r * w + col] / d;
            if f != 0.0 {
                for c in col..w {
                    a[r * w + c] -= f * a[col * w + c];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r * w + c] * pi[c]).sum();
        pi[r] = (a[r * w + n] - s) / a[r * w + r];
    }
    for x in &mut pi {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    Ok(StateVector {
        probs: pi,
        iteration: 0,
    })
}

/// `d·P + (1−d)·U` with `U` the uniform matrix.
pub fn apply_damping(p: &TransitionMatrix, d: f64) -> Result<TransitionMatrix, MarkovError> {
    if !(d > 0.0 && d <= 1.0) {
        return Err(MarkovError::InvalidDamping(d));
    }
    if d == 1.0 {
        return Ok(p.clone());
    }
    let teleport = (1.0 - d) / p.n as f64;
    Ok(TransitionMatrix {
        n: p.n,
        entries: p.entries.iter().map(|&x| d * x + teleport).collect(),
    })
}

/// True iff the graph of positive entries is strongly connected.
pub fn check_irreducible(p: &TransitionMatrix) -> bool {
    let n = p.n;
    if n == 0 {
        return false;
    }
    let reaches_all = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let edge = if forward { p.get(u, v) } else { p.get(v, u) };
                if edge > 0.0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reaches_all(true) && reaches_all(false)
}

/// How damping is applied before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    Off,
    Fixed(f64),
    /// Damp with this factor only when the chain is reducible.
    Auto(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Unit(usize),
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: Damping,
    pub start: Start,
    /// Use the direct solve instead of power iteration.
    pub exact: bool,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            damping: Damping::Off,
            start: Start::Unit(0),
            exact: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub result: SteadyStateResult,
    /// Damping factor actually applied, if any.
    pub damping: Option<f64>,
}

/// Damps as configured, then requires an irreducible chain and computes its
/// steady state. A run that hits `max_iter` is returned with
/// `converged == false`.
pub fn solve(p: &TransitionMatrix, config: &SteadyConfig) -> Result<Solved, MarkovError> {
    check_stochastic(p)?;
    let factor = match config.damping {
        Damping::Off => None,
        Damping::Fixed(d) => Some(d),
        Damping::Auto(d) if !check_irreducible(p) => Some(d),
        Damping::Auto(_) => None,
    };
    let chain = match factor {
        Some(d) => apply_damping(p, d)?,
        None => p.clone(),
    };
    if !check_irreducible(&chain) {
        return Err(MarkovError::ReducibleChain);
    }
    let result = if config.exact {
        SteadyStateResult {
            vector: stationary_exact(&chain)?,
            iterations: 0,
            converged: true,
            residual: 0.0,
        }
    } else {
        let v0 = match config.start {
            Start::Unit(i) if i < chain.n => StateVector::unit(chain.n, i),
            Start::Unit(i) => {
                return Err(MarkovError::DimensionMismatch {
                    expected: chain.n,
                    found: i + 1,
                })
            }
            Start::Uniform => StateVector::uniform(chain.n),
        };
        iterate_to_steady(&v0, &chain, config.tol, config.max_iter)?
    };
    Ok(Solved {
        result,
        damping: factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn worked_example() -> TransitionMatrix {
        TransitionMatrix::from_rows(&[
            vec![17.0 / 24.0, 1.0 / 8.0, 1.0 / 6.0],
            vec![0.2, 0.7, 0.1],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap()
    }

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "{got:?} vs {want:?} (tol {tol})");
        }
    }

    #[test]
    fn step_from_unit_vector() {
        let p = worked_example();
        let v = step(&StateVector::unit(3, 0), &p).unwrap();
        assert_close(v.probs(), &[0.708, 0.125, 0.167], 5e-4);
        assert_eq!(v.iteration(), 1);
    }

    #[test]
    fn step_from_rounded_iterate() {
        let p = worked_example();
        let v0 = StateVector::new(vec![0.708, 0.125, 0.167]).unwrap();
        let v = step(&v0, &p).unwrap();
        assert_close(v.probs(), &[0.543, 0.193, 0.264], 5e-4);
    }

    #[test]
    fn step_identity_and_mismatch() {
        let v = StateVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let out = step(&v, &TransitionMatrix::identity(3)).unwrap();
        assert_eq!(out.probs(), v.probs());
        assert_eq!(
            step(&v, &TransitionMatrix::identity(2)),
            Err(MarkovError::DimensionMismatch {
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn coarse_tolerance_reaches_two_decimal_answer() {
        let r = iterate_to_steady(&StateVector::unit(3, 0), &worked_example(), 5e-3, 100).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 12);
        assert_close(r.vector.probs(), &[0.33, 0.27, 0.40], 5e-3);
    }

    #[test]
    fn tight_tolerance_matches_rational_stationary() {
        let r =
            iterate_to_steady(&StateVector::unit(3, 0), &worked_example(), 1e-10, 10_000).unwrap();
        assert!(r.converged);
        assert!(r.residual <= 1e-10);
        assert_close(
            r.vector.probs(),
            &[12.0 / 37.0, 10.0 / 37.0, 15.0 / 37.0],
            1e-8,
        );
    }

    #[test]
    fn identity_converges_in_one_step() {
        let v0 = StateVector::new(vec![0.1, 0.6, 0.3]).unwrap();
        let r = iterate_to_steady(&v0, &TransitionMatrix::identity(3), 1e-9, 50).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.vector.probs(), v0.probs());
    }

    #[test]
    fn periodic_chain_does_not_converge() {
        let swap = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = iterate_to_steady(&StateVector::unit(2, 0), &swap, 1e-9, 100).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 100);
        assert_eq!(r.residual, 1.0);
    }

    #[test]
    fn iterate_rejects_bad_arguments() {
        let p = worked_example();
        assert_eq!(
            iterate_to_steady(&StateVector::unit(3, 0), &p, 0.0, 10),
            Err(MarkovError::InvalidTolerance(0.0))
        );
        assert!(matches!(
            iterate_to_steady(&StateVector::unit(2, 0), &p, 1e-3, 10),
            Err(MarkovError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_checks_row_sums() {
        assert!(matches!(
            TransitionMatrix::from_rows(&[vec![0.5, 0.4], vec![0.5, 0.5]]),
            Err(MarkovError::NonStochasticMatrix { row: 0, .. })
        ));
        assert!(matches!(
            TransitionMatrix::from_rows(&[vec![1.5, -0.5], vec![0.5, 0.5]]),
            Err(MarkovError::EntryOutOfRange { .. })
        ));
        assert!(matches!(
            TransitionMatrix::from_rows(&[vec![1.0], vec![0.5, 0.5]]),
            Err(MarkovError::DimensionMismatch { .. })
        ));
        // printed to 12 significant digits the rows drift by ~1e-12
        let p = TransitionMatrix::from_rows(&[
            vec![0.708333333333, 0.125000000000, 0.166666666667],
            vec![0.2, 0.7, 0.1],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap();
        assert!((p.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_solve() {
        let pi = stationary_exact(&worked_example()).unwrap();
        assert_close(pi.probs(), &[12.0 / 37.0, 10.0 / 37.0, 15.0 / 37.0], 1e-14);

        let one = TransitionMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(stationary_exact(&one).unwrap().probs(), [1.0]);

        let doubly = TransitionMatrix::from_rows(&[
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        assert_close(
            stationary_exact(&doubly).unwrap().probs(),
            &[1.0 / 3.0; 3],
            1e-14,
        );

        assert_eq!(
            stationary_exact(&TransitionMatrix::identity(2)),
            Err(MarkovError::ReducibleChain)
        );
    }

    #[test]
    fn damping_blend() {
        let p = worked_example();
        assert_eq!(apply_damping(&p, 1.0).unwrap(), p);
        let d = apply_damping(&TransitionMatrix::identity(2), 0.85).unwrap();
        assert_close(d.row(0), &[0.925, 0.075], 1e-15);
        assert_close(d.row(1), &[0.075, 0.925], 1e-15);
        assert_eq!(
            apply_damping(&p, 0.0),
            Err(MarkovError::InvalidDamping(0.0))
        );
        assert!(apply_damping(&p, 1.2).is_err());
    }

    #[test]
    fn damping_restores_connectivity() {
        let block = TransitionMatrix::from_rows(&[
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.3, 0.7],
            vec![0.0, 0.0, 0.6, 0.4],
        ])
        .unwrap();
        assert!(!check_irreducible(&block));
        assert_eq!(stationary_exact(&block), Err(MarkovError::ReducibleChain));
        let damped = apply_damping(&block, 0.85).unwrap();
        assert!(damped.rows().flatten().all(|&x| x > 0.0));
        assert!(check_irreducible(&damped));
        assert!(stationary_exact(&damped).is_ok());
    }

    #[test]
    fn solve_modes() {
        let p = worked_example();
        let exact = solve(
            &p,
            &SteadyConfig {
                exact: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_close(
            exact.result.vector.probs(),
            &[12.0 / 37.0, 10.0 / 37.0, 15.0 / 37.0],
            1e-14,
        );
        let iter = solve(
            &p,
            &SteadyConfig {
                start: Start::Uniform,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(iter.result.converged);
        assert_eq!(iter.damping, None);
        assert_close(
            iter.result.vector.probs(),
            exact.result.vector.probs(),
            1e-7,
        );

        let id = TransitionMatrix::identity(3);
        assert_eq!(
            solve(&id, &SteadyConfig::default()),
            Err(MarkovError::ReducibleChain)
        );
        let auto = solve(
            &id,
            &SteadyConfig {
                damping: Damping::Auto(0.85),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(auto.damping, Some(0.85));
        assert_close(auto.result.vector.probs(), &[1.0 / 3.0; 3], 1e-7);
        let untouched = solve(
            &p,
            &SteadyConfig {
                damping: Damping::Auto(0.85),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(untouched.damping, None);

        assert!(matches!(
            solve(
                &p,
                &SteadyConfig {
                    start: Start::Unit(3),
                    ..Default::default()
                }
            ),
            Err(MarkovError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn irreducibility() {
        assert!(check_irreducible(&worked_example()));
        assert!(!check_irreducible(&TransitionMatrix::identity(2)));
        assert!(!check_irreducible(&TransitionMatrix::identity(3)));
        let swap = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(check_irreducible(&swap));
        // reachable from 0 but 0 not reachable back
        let leak = TransitionMatrix::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(!check_irreducible(&leak));
    }

    fn stochastic(n: usize) -> impl Strategy<Value = TransitionMatrix> {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n).prop_map(move |rows| {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum::<f64>() + 1e-3;
                    let mut r: Vec<f64> = r.iter().map(|x| x / s).collect();
                    let rest = 1.0 - r.iter().sum::<f64>();
                    r[0] += rest;
                    r
                })
                .collect();
            TransitionMatrix::from_rows(&rows).unwrap()
        })
    }

    fn distribution(n: usize) -> impl Strategy<Value = StateVector> {
        prop::collection::vec(0.001f64..1.0, n).prop_map(|w| {
            let s: f64 = w.iter().sum();
            let mut probs: Vec<f64> = w.iter().map(|x| x / s).collect();
            let rest = 1.0 - probs.iter().sum::<f64>();
            probs[0] += rest;
            StateVector::new(probs).unwrap()
        })
    }

    fn chain_and_two_starts() -> impl Strategy<Value = (TransitionMatrix, StateVector, StateVector)>
    {
        (1usize..12).prop_flat_map(|n| (stochastic(n), distribution(n), distribution(n)))
    }

    proptest! {
        #[test]
        fn step_stays_on_simplex((p, v, _) in chain_and_two_starts()) {
            let out = step(&v, &p).unwrap();
            prop_assert!(out.probs().iter().all(|&x| x >= 0.0));
            prop_assert!((out.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn start_vector_independence((p, a, b) in chain_and_two_starts()) {
            let (tol, d) = (1e-10, 0.85);
            let p = apply_damping(&p, d).unwrap();
            let ra = iterate_to_steady(&a, &p, tol, 10_000).unwrap();
            let rb = iterate_to_steady(&b, &p, tol, 10_000).unwrap();
            prop_assert!(ra.converged && rb.converged);
            prop_assert!(ra.residual <= tol && rb.residual <= tol);
            // Each stop lies within n·tol·d/(1-d) of the fixed point.
            let bound = 2.0 * p.dim() as f64 * tol * d / (1.0 - d);
            prop_assert!(ra.vector.max_abs_diff(&rb.vector) <= bound);
        }

        #[test]
        fn damping_keeps_rows_stochastic((p, _, _) in chain_and_two_starts(), d in 0.01f64..=1.0) {
            let q = apply_damping(&p, d).unwrap();
            for r in q.rows() {
                prop_assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
