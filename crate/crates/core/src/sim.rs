//! Synthetic workloads and trace replay against a two-tier view store.
//!
//! Queries are replayed in order. A query is a primary hit when its view sits
//! in primary memory at that moment; misses are served from secondary memory
//! without moving anything. Every `retrain_interval` queries the configured
//! policy proposes at most one promotion (and one eviction when primary is
//! full), which is applied before the next query.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::estimator::{build_initial_matrix, extract_from_views, EstimatorConfig};
use crate::format::fmt_sig12;
use crate::markov::{self, Damping, MarkovError, StateVector, SteadyConfig, TransitionMatrix};
use crate::policy::{self, PolicyError, Reason, Recommendation, TierState};
use crate::trace::{HitEvent, QueryTrace, ViewCatalog};

pub const REPORT_HEADER: &str = "policy,total,hits,hit_rate,promotions,evictions";
pub const INTERVAL_HEADER: &str = "interval,hit_rate";

const WORKLOAD_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: expected {expected} views, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("start view {0} is outside the catalog")]
    BadStartView(usize),
    #[error("retrain interval must be at least 1")]
    ZeroInterval,
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub catalog: ViewCatalog,
    /// Per-query view-to-view transition law.
    pub ground_truth: TransitionMatrix,
    pub n_queries: usize,
    pub seed: u64,
    pub start_view: usize,
}

impl WorkloadSpec {
    pub fn new(
        catalog: ViewCatalog,
        ground_truth: TransitionMatrix,
        n_queries: usize,
        seed: u64,
        start_view: usize,
    ) -> Result<Self, SimError> {
        if catalog.len() != ground_truth.dim() || catalog.is_empty() {
            return Err(SimError::DimensionMismatch {
                expected: catalog.len(),
                found: ground_truth.dim(),
            });
        }
        if start_view >= catalog.len() {
            return Err(SimError::BadStartView(start_view));
        }
        Ok(Self {
            catalog,
            ground_truth,
            n_queries,
            seed,
            start_view,
        })
    }

    pub fn n_views(&self) -> usize {
        self.catalog.len()
    }
}

/// Draws the next view from `row` by inverse CDF.
fn sample_row(row: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // rounding left u above the final cumulative sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

pub fn generate_workload(spec: &WorkloadSpec) -> QueryTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(WORKLOAD_STREAM);
    let mut events = Vec::with_capacity(spec.n_queries);
    let mut view = spec.start_view;
    for t in 0..spec.n_queries {
        if t > 0 {
            view = sample_row(spec.ground_truth.row(view), &mut rng);
        }
        events.push(HitEvent {
            seq: t as u64,
            query_id: format!("Q{}", t + 1),
            view,
        });
    }
    QueryTrace::new(spec.catalog.clone(), events).expect("generated views are in the catalog")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Markov,
    Lru,
    Lfu,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Markov, Policy::Lru, Policy::Lfu, Policy::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Markov => "markov",
            Policy::Lru => "lru",
            Policy::Lfu => "lfu",
            Policy::Random => "random",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| SimError::UnknownPolicy(s.to_owned()))
    }
}

/// Which events feed the Markov estimate at a retrain point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Window {
    /// Events since the previous retrain.
    #[default]
    Recent,
    /// Every event so far.
    Cumulative,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TierEstimation {
    /// One chain from primary-hit events, one from primary-miss events.
    #[default]
    Separate,
    /// One chain from all events, used for both tiers.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovParams {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: Damping,
    pub estimator: EstimatorConfig,
    pub window: Window,
    pub tiers: TierEstimation,
}

impl Default for MarkovParams {
    fn default() -> Self {
        Self {
            tol: markov::DEFAULT_TOLERANCE,
            max_iter: markov::DEFAULT_MAX_ITER,
            damping: Damping::Auto(0.85),
            estimator: EstimatorConfig::default(),
            window: Window::Recent,
            tiers: TierEstimation::Separate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub tier: TierState,
    pub policy: Policy,
    pub retrain_interval: usize,
    pub markov: MarkovParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub policy: Policy,
    pub total_queries: usize,
    pub primary_hits: usize,
    pub hit_rate: f64,
    pub promotions: usize,
    pub evictions: usize,
    pub per_interval_hit_rates: Vec<f64>,
}

impl SimReport {
    /// True for a run over zero queries.
    pub fn is_empty(&self) -> bool {
        self.total_queries == 0
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.policy,
            self.total_queries,
            self.primary_hits,
            fmt_sig12(self.hit_rate),
            self.promotions,
            self.evictions
        )
    }
}

pub fn report_csv<'a>(reports: impl IntoIterator<Item = &'a SimReport>) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn interval_csv(report: &SimReport) -> String {
    let mut out = format!("{INTERVAL_HEADER}\n");
    for (i, rate) in report.per_interval_hit_rates.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i, fmt_sig12(*rate)));
    }
    out
}

/// What a policy may consult at a retrain point.
struct History<'a> {
    events: &'a [HitEvent],
    /// Whether each replayed event was a primary hit.
    hits: &'a [bool],
    /// Index of the most recent hit on each view.
    last_hit: &'a [Option<usize>],
    /// Hits per view since the previous retrain.
    window_counts: &'a [usize],
    window_start: usize,
}

pub fn run_simulation(trace: &QueryTrace, config: &SimConfig) -> Result<SimReport, SimError> {
    run_simulation_observed(trace, config, |_, _| {})
}

/// [`run_simulation`], calling `observe(t, tier)` with the tier state in
/// force when event `t` is served.
pub fn run_simulation_observed(
    trace: &QueryTrace,
    config: &SimConfig,
    mut observe: impl FnMut(usize, &TierState),
) -> Result<SimReport, SimError> {
    let n = config.tier.catalog().len();
    if trace.catalog().len() != n {
        return Err(SimError::DimensionMismatch {
            expected: n,
            found: trace.catalog().len(),
        });
    }
    if config.retrain_interval == 0 {
        return Err(SimError::ZeroInterval);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(POLICY_STREAM);

    let events = trace.events();
    let mut tier = config.tier.clone();
    let mut hits = Vec::with_capacity(events.len());
    let mut last_hit = vec![None; n];
    let mut window_counts = vec![0usize; n];
    let mut window_start = 0;
    let mut interval_hits = 0usize;
    let mut per_interval = Vec::new();
    let (mut promotions, mut evictions) = (0, 0);

    for (t, e) in events.iter().enumerate() {
        observe(t, &tier);
        let hit = tier.in_primary(e.view);
        hits.push(hit);
        interval_hits += usize::from(hit);
        last_hit[e.view] = Some(t);
        window_counts[e.view] += 1;

        let boundary = (t + 1) % config.retrain_interval == 0;
        if boundary {
            per_interval.push(interval_hits as f64 / config.retrain_interval as f64);
            interval_hits = 0;
        }
        if boundary && t + 1 < events.len() {
            let history = History {
                events,
                hits: &hits,
                last_hit: &last_hit,
                window_counts: &window_counts,
                window_start,
            };
            let rec = decide(config, &tier, &history, &mut rng)?;
            tier = policy::apply(&tier, &rec)?;
            debug_assert!(tier.check_invariants());
            promotions += usize::from(rec.promote.is_some());
            evictions += usize::from(rec.evict.is_some());
            window_start = t + 1;
            window_counts.iter_mut().for_each(|c| *c = 0);
        }
    }
    let tail = events.len() % config.retrain_interval;
    if tail != 0 {
        per_interval.push(interval_hits as f64 / tail as f64);
    }

    let primary_hits = hits.iter().filter(|&&h| h).count();
    let hit_rate = if events.is_empty() {
        0.0
    } else {
        primary_hits as f64 / events.len() as f64
    };
    Ok(SimReport {
        policy: config.policy,
        total_queries: events.len(),
        primary_hits,
        hit_rate,
        promotions,
        evictions,
        per_interval_hit_rates: per_interval,
    })
}

/// Runs every policy on the same trace with the same seed.
pub fn compare_policies(
    trace: &QueryTrace,
    base: &SimConfig,
    policies: &[Policy],
) -> Result<Vec<(Policy, SimReport)>, SimError> {
    policies
        .iter()
        .map(|&policy| {
            let config = SimConfig {
                policy,
                ..base.clone()
            };
            run_simulation(trace, &config).map(|r| (policy, r))
        })
        .collect()
}

fn decide(
    config: &SimConfig,
    tier: &TierState,
    history: &History<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Recommendation, SimError> {
    if tier.secondary().is_empty() || tier.primary_capacity() == 0 {
        return Ok(Recommendation::NO_ACTION);
    }
    match config.policy {
        Policy::Markov => decide_markov(&config.markov, tier, history),
        Policy::Random => Ok(decide_random(tier, rng)),
        Policy::Lru => {
            // 0 = never hit, otherwise 1 + index of the latest hit
            let recency: Vec<f64> = history
                .last_hit
                .iter()
                .map(|h| h.map_or(0.0, |t| (t + 1) as f64))
                .collect();
            decide_by_score(tier, &recency)
        }
        Policy::Lfu => {
            let counts: Vec<f64> = history.window_counts.iter().map(|&c| c as f64).collect();
            decide_by_score(tier, &counts)
        }
    }
}

/// Promotes the highest-scoring secondary view if its score is positive,
/// swapping only when it outscores the weakest primary view.
fn decide_by_score(tier: &TierState, scores: &[f64]) -> Result<Recommendation, SimError> {
    let promote = policy::best_secondary_by_score(scores, tier)?;
    if scores[promote] <= 0.0 {
        return Ok(Recommendation::NO_ACTION);
    }
    if !tier.is_full() {
        return Ok(Recommendation {
            promote: Some(promote),
            promote_score: Some(scores[promote]),
            reason: Reason::CapacityFree,
            ..Recommendation::NO_ACTION
        });
    }
    let evict = policy::worst_primary_by_score(scores, tier)?;
    if scores[promote] <= scores[evict] {
        return Ok(Recommendation::NO_ACTION);
    }
    Ok(Recommendation {
        promote: Some(promote),
        evict: Some(evict),
        promote_score: Some(scores[promote]),
        evict_score: Some(scores[evict]),
        reason: Reason::Swap,
    })
}

fn decide_random(tier: &TierState, rng: &mut ChaCha8Rng) -> Recommendation {
    let secondary: Vec<usize> = tier.secondary().iter().copied().collect();
    let promote = secondary[rng.gen_range(0..secondary.len())];
    if !tier.is_full() {
        return Recommendation {
            promote: Some(promote),
            reason: Reason::CapacityFree,
            ..Recommendation::NO_ACTION
        };
    }
    let primary: Vec<usize> = tier.primary().iter().copied().collect();
    let evict = primary[rng.gen_range(0..primary.len())];
    Recommendation {
        promote: Some(promote),
        evict: Some(evict),
        reason: Reason::Swap,
        ..Recommendation::NO_ACTION
    }
}

/// Steady state of the chain estimated from `views`, restricted to the views
/// that occur there and lifted back to a catalog-sized vector.
fn subsequence_steady_state(
    views: &[usize],
    n: usize,
    params: &MarkovParams,
) -> Result<Option<StateVector>, SimError> {
    let Some(&first) = views.first() else {
        return Ok(None);
    };
    let mut local = vec![usize::MAX; n];
    let mut observed = Vec::new();
    for v in 0..n {
        if views.contains(&v) {
            local[v] = observed.len();
            observed.push(v);
        }
    }
    let extraction = extract_from_views(views.iter().map(|&v| local[v]));
    let matrix = build_initial_matrix(&extraction.episodes, observed.len(), params.estimator)
        .expect("local indices are within the restricted catalog")
        .to_transition_matrix();
    let steady = SteadyConfig {
        tol: params.tol,
        max_iter: params.max_iter,
        damping: params.damping,
        start: markov::Start::Unit(local[first]),
        exact: false,
    };
    let solved = markov::solve(&matrix, &steady)?;
    let mut lifted = vec![0.0; n];
    for (k, &v) in observed.iter().enumerate() {
        lifted[v] = solved.result.vector.probs()[k];
    }
    Ok(Some(StateVector::new(lifted)?))
}

fn decide_markov(
    params: &MarkovParams,
    tier: &TierState,
    history: &History<'_>,
) -> Result<Recommendation, SimError> {
    let n = tier.catalog().len();
    let from = match params.window {
        Window::Recent => history.window_start,
        Window::Cumulative => 0,
    };
    let window = &history.events[from..history.hits.len()];
    let flags = &history.hits[from..];

    match params.tiers {
        TierEstimation::Global => {
            let views: Vec<usize> = window.iter().map(|e| e.view).collect();
            let Some(pi) = subsequence_steady_state(&views, n, params)? else {
                return Ok(Recommendation::NO_ACTION);
            };
            let rec = policy::recommend_global(&pi, tier)?;
            if rec.reason == Reason::Swap && rec.promote_score <= rec.evict_score {
                return Ok(Recommendation::NO_ACTION);
            }
            Ok(rec)
        }
        TierEstimation::Separate => {
            let (hit_views, miss_views): (Vec<_>, Vec<_>) =
                window.iter().zip(flags).partition(|(_, &hit)| hit);
            let hit_views: Vec<usize> = hit_views.into_iter().map(|(e, _)| e.view).collect();
            let miss_views: Vec<usize> = miss_views.into_iter().map(|(e, _)| e.view).collect();

            let Some(pi_secondary) = subsequence_steady_state(&miss_views, n, params)? else {
                return Ok(Recommendation::NO_ACTION);
            };
            let pi_primary = subsequence_steady_state(&hit_views, n, params)?;
            let rec = policy::recommend(
                &pi_secondary,
                pi_primary.as_ref().unwrap_or(&StateVector::uniform(n)),
                tier,
            )?;
            if rec.reason == Reason::Swap {
                // Conditional tier probabilities weighted by the tier's share of the window.
                let total = window.len() as f64;
                let promote_mass =
                    rec.promote_score.unwrap_or(0.0) * miss_views.len() as f64 / total;
                let evict_mass = match pi_primary {
                    Some(_) => rec.evict_score.unwrap_or(0.0) * hit_views.len() as f64 / total,
                    None => 0.0,
                };
                if promote_mass <= evict_mass {
                    return Ok(Recommendation::NO_ACTION);
                }
            }
            Ok(rec)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> TransitionMatrix {
        TransitionMatrix::from_rows(&[
            vec![17.0 / 24.0, 1.0 / 8.0, 1.0 / 6.0],
            vec![0.2, 0.7, 0.1],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap()
    }

    fn workload(p: TransitionMatrix, n_queries: usize, seed: u64) -> QueryTrace {
        let catalog = ViewCatalog::numbered(p.dim());
        generate_workload(&WorkloadSpec::new(catalog, p, n_queries, seed, 0).unwrap())
    }

    fn config(
        n: usize,
        primary: &[usize],
        cap: usize,
        policy: Policy,
        interval: usize,
    ) -> SimConfig {
        SimConfig {
            tier: TierState::new(ViewCatalog::numbered(n), primary.iter().copied(), cap).unwrap(),
            policy,
            retrain_interval: interval,
            markov: MarkovParams::default(),
            seed: 0,
        }
    }

    #[test]
    fn identity_workload_stays_put() {
        let t = workload(TransitionMatrix::identity(3), 100, 1);
        assert_eq!(t.len(), 100);
        assert!(t.views().all(|v| v == 0));
        let r = run_simulation(&t, &config(3, &[0], 1, Policy::Markov, 10)).unwrap();
        assert_eq!(r.hit_rate, 1.0);
        assert_eq!((r.promotions, r.evictions), (0, 0));
    }

    #[test]
    fn single_view_workload() {
        let t = workload(TransitionMatrix::identity(1), 50, 9);
        assert!(t.views().all(|v| v == 0));
    }

    #[test]
    fn workload_is_seeded() {
        let a = workload(worked_example(), 500, 3);
        assert_eq!(a, workload(worked_example(), 500, 3));
        assert_ne!(a, workload(worked_example(), 500, 4));
        assert_eq!(a.events()[0].view, 0);
    }

    #[test]
    fn workload_spec_validation() {
        assert!(matches!(
            WorkloadSpec::new(ViewCatalog::numbered(2), worked_example(), 1, 0, 0),
            Err(SimError::DimensionMismatch { .. })
        ));
        assert_eq!(
            WorkloadSpec::new(ViewCatalog::numbered(3), worked_example(), 1, 0, 3),
            Err(SimError::BadStartView(3))
        );
    }

    #[test]
    fn empty_run() {
        let t = workload(worked_example(), 0, 0);
        let r = run_simulation(&t, &config(3, &[], 1, Policy::Markov, 10)).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.hit_rate, 0.0);
        assert!(r.per_interval_hit_rates.is_empty());
    }

    #[test]
    fn run_rejects_bad_config() {
        let t = workload(worked_example(), 10, 0);
        assert!(matches!(
            run_simulation(&t, &config(2, &[], 1, Policy::Lru, 5)),
            Err(SimError::DimensionMismatch { .. })
        ));
        assert_eq!(
            run_simulation(&t, &config(3, &[], 1, Policy::Lru, 0)),
            Err(SimError::ZeroInterval)
        );
    }

    #[test]
    fn interval_series_covers_tail() {
        let t = workload(worked_example(), 25, 2);
        let r = run_simulation(&t, &config(3, &[2], 1, Policy::Markov, 10)).unwrap();
        assert_eq!(r.per_interval_hit_rates.len(), 3);
        let weighted: f64 = r.per_interval_hit_rates[0] * 10.0
            + r.per_interval_hit_rates[1] * 10.0
            + r.per_interval_hit_rates[2] * 5.0;
        assert_eq!(weighted.round() as usize, r.primary_hits);
        let csv = interval_csv(&r);
        assert!(csv.starts_with("interval,hit_rate\n0,"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn report_csv_layout() {
        let r = SimReport {
            policy: Policy::Lfu,
            total_queries: 4,
            primary_hits: 1,
            hit_rate: 0.25,
            promotions: 2,
            evictions: 1,
            per_interval_hit_rates: vec![],
        };
        assert_eq!(
            report_csv([&r]),
            "policy,total,hits,hit_rate,promotions,evictions\nlfu,4,1,0.250000000000,2,1\n"
        );
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
        }
        assert!("arc".parse::<Policy>().is_err());
    }

    #[test]
    fn compare_degenerate_lists() {
        let t = workload(worked_example(), 300, 5);
        let base = config(3, &[], 1, Policy::Markov, 50);
        assert!(compare_policies(&t, &base, &[]).unwrap().is_empty());
        let one = compare_policies(&t, &base, &[Policy::Lru]).unwrap();
        let direct = run_simulation(
            &t,
            &SimConfig {
                policy: Policy::Lru,
                ..base
            },
        )
        .unwrap();
        assert_eq!(one, vec![(Policy::Lru, direct)]);
    }

    #[test]
    fn markov_promotes_into_empty_primary() {
        let t = workload(worked_example(), 2_000, 11);
        let r = run_simulation(&t, &config(3, &[], 1, Policy::Markov, 500)).unwrap();
        assert!(r.promotions >= 1);
        assert!(r.promotions >= r.evictions);
        assert!(r.hit_rate > 0.0);
    }

    #[test]
    fn global_and_cumulative_modes_run() {
        let t = workload(worked_example(), 5_000, 13);
        for (window, tiers) in [
            (Window::Cumulative, TierEstimation::Separate),
            (Window::Recent, TierEstimation::Global),
            (Window::Cumulative, TierEstimation::Global),
        ] {
            let mut c = config(3, &[], 1, Policy::Markov, 250);
            c.markov.window = window;
            c.markov.tiers = tiers;
            let r = run_simulation(&t, &c).unwrap();
            assert!(
                (0.25..=0.5).contains(&r.hit_rate),
                "{window:?} {tiers:?}: {}",
                r.hit_rate
            );
        }
    }
}
