//! Episode extraction and the initial probability matrix.
//!
//! An episode is a run of `Total` consecutive hits on view `i` closed by the
//! first hit on some other view `j`. It contributes the row
//! `{i: Total/(Total+1), j: 1/(Total+1)}`; the rows of all episodes starting
//! at `i` are averaged to give row `i` of the matrix. All arithmetic is exact
//! until [`InitialProbabilityMatrix::to_transition_matrix`].

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::markov::TransitionMatrix;
use crate::trace::QueryTrace;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EstimateError {
    #[error("episode references view {view} outside a catalog of {n}")]
    IndexOutOfCatalog { view: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Episode {
    pub start_view: usize,
    /// Consecutive hits on `start_view` before the miss.
    pub run_length: u64,
    pub next_view: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub episodes: Vec<Episode>,
    /// Length of the trailing run that never saw a transition.
    pub discarded: usize,
}

/// Splits the view sequence into closed runs. The closing hit on the new view
/// belongs to the episode it closes; the next run starts after it.
pub fn extract_episodes(trace: &QueryTrace) -> Extraction {
    extract_from_views(trace.views())
}

pub(crate) fn extract_from_views(views: impl IntoIterator<Item = usize>) -> Extraction {
    let mut episodes = Vec::new();
    let mut open: Option<(usize, u64)> = None;
    for v in views {
        open = match open {
            None => Some((v, 1)),
            Some((start, run)) if start == v => Some((start, run + 1)),
            Some((start, run)) => {
                episodes.push(Episode {
                    start_view: start,
                    run_length: run,
                    next_view: v,
                });
                None
            }
        };
    }
    Extraction {
        episodes,
        discarded: open.map_or(0, |(_, run)| run as usize),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeRow {
    pub start_view: usize,
    pub probs: BTreeMap<usize, BigRational>,
}

pub fn episode_probabilities(e: &Episode) -> EpisodeRow {
    let total = BigInt::from(e.run_length);
    let denom: BigInt = &total + 1u32;
    let mut probs = BTreeMap::new();
    probs.insert(e.start_view, BigRational::new(total, denom.clone()));
    probs.insert(e.next_view, BigRational::new(BigInt::one(), denom));
    EpisodeRow {
        start_view: e.start_view,
        probs,
    }
}

/// Row used for views that were never the start of an episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DefaultRow {
    #[default]
    Uniform,
    SelfLoop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Weighting {
    /// Each episode's row weighs equally.
    #[default]
    EpisodeMean,
    /// Pooled counts: row `i` is `(Σ runs to i, one count per exit to j)`
    /// normalised by `Σ (run + 1)`.
    TransitionCounts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EstimatorConfig {
    pub default_row: DefaultRow,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowProvenance {
    Observed(usize),
    Defaulted,
}

/// n×n row-stochastic matrix of exact transition estimates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialProbabilityMatrix {
    n: usize,
    rows: Vec<Vec<BigRational>>,
    provenance: Vec<RowProvenance>,
}

impl InitialProbabilityMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn exact(&self, row: usize, col: usize) -> &BigRational {
        &self.rows[row][col]
    }

    pub fn exact_row(&self, row: usize) -> &[BigRational] {
        &self.rows[row]
    }

    pub fn provenance(&self, row: usize) -> RowProvenance {
        self.provenance[row]
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    pub fn to_transition_matrix(&self) -> TransitionMatrix {
        TransitionMatrix::from_rows(&self.to_f64_rows())
            .expect("exact rows sum to one and convert to a valid matrix")
    }
}

pub fn build_initial_matrix(
    episodes: &[Episode],
    n: usize,
    config: EstimatorConfig,
) -> Result<InitialProbabilityMatrix, EstimateError> {
    if let Some(bad) = episodes
        .iter()
        .flat_map(|e| [e.start_view, e.next_view])
        .find(|&v| v >= n)
    {
        return Err(EstimateError::IndexOutOfCatalog { view: bad, n });
    }

    let mut by_start: Vec<Vec<&Episode>> = vec![Vec::new(); n];
    for e in episodes {
        by_start[e.start_view].push(e);
    }

    let mut rows = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for (i, group) in by_start.iter().enumerate() {
        if group.is_empty() {
            rows.push(default_row(i, n, config.default_row));
            provenance.push(RowProvenance::Defaulted);
            continue;
        }
        let row = match config.weighting {
            Weighting::EpisodeMean => mean_row(group, n),
            Weighting::TransitionCounts => pooled_row(i, group, n),
        };
        rows.push(row);
        provenance.push(RowProvenance::Observed(group.len()));
    }
    Ok(InitialProbabilityMatrix {
        n,
        rows,
        provenance,
    })
}

/// Episode extraction and matrix construction in one call.
pub fn estimate(
    trace: &QueryTrace,
    config: EstimatorConfig,
) -> Result<InitialProbabilityMatrix, EstimateError> {
    let extraction = extract_episodes(trace);
    build_initial_matrix(&extraction.episodes, trace.catalog().len(), config)
}

fn default_row(i: usize, n: usize, mode: DefaultRow) -> Vec<BigRational> {
    match mode {
        DefaultRow::Uniform => vec![BigRational::new(BigInt::one(), BigInt::from(n)); n],
        DefaultRow::SelfLoop => {
            let mut row = vec![BigRational::zero(); n];
            row[i] = BigRational::one();
            row
        }
    }
}

fn mean_row(group: &[&Episode], n: usize) -> Vec<BigRational> {
    let mut row = vec![BigRational::zero(); n];
    for e in group {
        for (col, p) in episode_probabilities(e).probs {
            row[col] += p;
        }
    }
    let k = BigRational::from_integer(BigInt::from(group.len()));
    row.iter_mut().for_each(|x| *x /= &k);
    row
}

fn pooled_row(i: usize, group: &[&Episode], n: usize) -> Vec<BigRational> {
    let mut counts = vec![BigInt::zero(); n];
    for e in group {
        counts[i] += e.run_length;
        counts[e.next_view] += 1u32;
    }
    let total: BigInt = counts.iter().sum();
    counts
        .into_iter()
        .map(|c| BigRational::new(c, total.clone()))
        .collect()
}
