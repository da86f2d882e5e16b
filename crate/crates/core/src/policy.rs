//! Promotion from secondary memory and eviction from primary memory.
//!
//! The best secondary view is the one with the highest steady-state
//! probability; the worst primary view the one with the lowest. Ties go to
//! the lowest catalog index. [`recommend`] only proposes a move, and
//! [`apply`] carries it out on a copy of the tier state.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::format::fmt_sig12;
use crate::markov::StateVector;
use crate::trace::ViewCatalog;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("the {0} tier is empty")]
    EmptyTier(Tier),
    #[error("primary tier would hold {held} views, capacity is {capacity}")]
    CapacityViolation { held: usize, capacity: usize },
    #[error("vector has {found} entries, catalog has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("view {0} is not in the catalog")]
    UnknownView(usize),
    #[error("recommendation does not fit this tier state")]
    InvalidRecommendation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Primary,
    Secondary,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Primary => "primary",
            Tier::Secondary => "secondary",
        })
    }
}

/// Partition of the catalog into primary and secondary memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierState {
    catalog: ViewCatalog,
    primary: BTreeSet<usize>,
    secondary: BTreeSet<usize>,
    primary_capacity: usize,
}

impl TierState {
    /// Every catalog view not listed in `primary` goes to secondary.
    pub fn new(
        catalog: ViewCatalog,
        primary: impl IntoIterator<Item = usize>,
        primary_capacity: usize,
    ) -> Result<Self, PolicyError> {
        let primary: BTreeSet<usize> = primary.into_iter().collect();
        if let Some(&v) = primary.iter().find(|&&v| v >= catalog.len()) {
            return Err(PolicyError::UnknownView(v));
        }
        if primary.len() > primary_capacity {
            return Err(PolicyError::CapacityViolation {
                held: primary.len(),
                capacity: primary_capacity,
            });
        }
        let secondary = (0..catalog.len())
            .filter(|v| !primary.contains(v))
            .collect();
        Ok(Self {
            catalog,
            primary,
            secondary,
            primary_capacity,
        })
    }

    pub fn catalog(&self) -> &ViewCatalog {
        &self.catalog
    }

    pub fn primary(&self) -> &BTreeSet<usize> {
        &self.primary
    }

    pub fn secondary(&self) -> &BTreeSet<usize> {
        &self.secondary
    }

    pub fn primary_capacity(&self) -> usize {
        self.primary_capacity
    }

    pub fn in_primary(&self, view: usize) -> bool {
        self.primary.contains(&view)
    }

    pub fn is_full(&self) -> bool {
        self.primary.len() >= self.primary_capacity
    }

    /// Disjoint, covering, and within capacity.
    pub fn check_invariants(&self) -> bool {
        self.primary.is_disjoint(&self.secondary)
            && self.primary.len() + self.secondary.len() == self.catalog.len()
            && self
                .primary
                .iter()
                .chain(&self.secondary)
                .all(|&v| v < self.catalog.len())
            && self.primary.len() <= self.primary_capacity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    CapacityFree,
    Swap,
    NoAction,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::CapacityFree => "capacity_free",
            Reason::Swap => "swap",
            Reason::NoAction => "no_action",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub promote: Option<usize>,
    pub evict: Option<usize>,
    pub promote_score: Option<f64>,
    pub evict_score: Option<f64>,
    pub reason: Reason,
}

impl Recommendation {
    pub const NO_ACTION: Recommendation = Recommendation {
        promote: None,
        evict: None,
        promote_score: None,
        evict_score: None,
        reason: Reason::NoAction,
    };

    /// `promote=<name|->, evict=<name|->, reason=..., promote_score=<val|->, evict_score=<val|->`
    pub fn to_line(&self, catalog: &ViewCatalog) -> String {
        let name = |v: Option<usize>| v.and_then(|i| catalog.name(i)).unwrap_or("-").to_owned();
        let score = |s: Option<f64>| s.map_or_else(|| "-".to_owned(), fmt_sig12);
        format!(
            "promote={}, evict={}, reason={}, promote_score={}, evict_score={}",
            name(self.promote),
            name(self.evict),
            self.reason.as_str(),
            score(self.promote_score),
            score(self.evict_score),
        )
    }
}

fn check_dim(pi: &StateVector, tier: &TierState) -> Result<(), PolicyError> {
    check_len(pi.probs(), tier)
}

fn check_len(scores: &[f64], tier: &TierState) -> Result<(), PolicyError> {
    if scores.len() != tier.catalog.len() {
        return Err(PolicyError::DimensionMismatch {
            expected: tier.catalog.len(),
            found: scores.len(),
        });
    }
    Ok(())
}

/// Highest-probability secondary view.
pub fn best_secondary(pi: &StateVector, tier: &TierState) -> Result<usize, PolicyError> {
    check_dim(pi, tier)?;
    best_secondary_by_score(pi.probs(), tier)
}

/// Lowest-probability primary view.
pub fn worst_primary(pi: &StateVector, tier: &TierState) -> Result<usize, PolicyError> {
    check_dim(pi, tier)?;
    worst_primary_by_score(pi.probs(), tier)
}

/// Argmax over the secondary tier of arbitrary non-negative scores.
pub fn best_secondary_by_score(scores: &[f64], tier: &TierState) -> Result<usize, PolicyError> {
    check_len(scores, tier)?;
    // BTreeSet iterates in index order, so strict comparison keeps the lowest index.
    tier.secondary
        .iter()
        .copied()
        .reduce(|best, v| if scores[v] > scores[best] { v } else { best })
        .ok_or(PolicyError::EmptyTier(Tier::Secondary))
}

pub fn worst_primary_by_score(scores: &[f64], tier: &TierState) -> Result<usize, PolicyError> {
    check_len(scores, tier)?;
    tier.primary
        .iter()
        .copied()
        .reduce(|worst, v| if scores[v] < scores[worst] { v } else { worst })
        .ok_or(PolicyError::EmptyTier(Tier::Primary))
}

/// Promotion uses `pi_secondary`, eviction `pi_primary`. Fails only on a
/// vector whose length differs from the catalog.
pub fn recommend(
    pi_secondary: &StateVector,
    pi_primary: &StateVector,
    tier: &TierState,
) -> Result<Recommendation, PolicyError> {
    check_dim(pi_secondary, tier)?;
    check_dim(pi_primary, tier)?;
    if tier.secondary.is_empty() || tier.primary_capacity == 0 {
        return Ok(Recommendation::NO_ACTION);
    }
    let promote = best_secondary(pi_secondary, tier)?;
    let promote_score = Some(pi_secondary.probs()[promote]);
    if !tier.is_full() {
        return Ok(Recommendation {
            promote: Some(promote),
            evict: None,
            promote_score,
            evict_score: None,
            reason: Reason::CapacityFree,
        });
    }
    let evict = worst_primary(pi_primary, tier)?;
    Ok(Recommendation {
        promote: Some(promote),
        evict: Some(evict),
        promote_score,
        evict_score: Some(pi_primary.probs()[evict]),
        reason: Reason::Swap,
    })
}

/// [`recommend`] with one vector for both tiers.
pub fn recommend_global(pi: &StateVector, tier: &TierState) -> Result<Recommendation, PolicyError> {
    recommend(pi, pi, tier)
}

/// Moves `evict` to secondary, then `promote` to primary.
pub fn apply(tier: &TierState, rec: &Recommendation) -> Result<TierState, PolicyError> {
    let mut next = tier.clone();
    if let Some(v) = rec.evict {
        if !next.primary.remove(&v) {
            return Err(PolicyError::InvalidRecommendation);
        }
        next.secondary.insert(v);
    }
    if let Some(v) = rec.promote {
        if !next.secondary.contains(&v) || rec.evict == Some(v) {
            return Err(PolicyError::InvalidRecommendation);
        }
        if next.primary.len() + 1 > next.primary_capacity {
            return Err(PolicyError::CapacityViolation {
                held: next.primary.len() + 1,
                capacity: next.primary_capacity,
            });
        }
        next.secondary.remove(&v);
        next.primary.insert(v);
    }
    debug_assert!(next.check_invariants());
    Ok(next)
}
