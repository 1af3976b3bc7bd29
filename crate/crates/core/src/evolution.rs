// SPDX-License-Identifier: Apache-2.0

//! Evolution of epistemic states, future alternatives and their probabilities.
//!
//! An [`EvolutionRule`] maps each exact state to a nonempty image set and acts
//! on sets by union, so `u(A ∪ B) = u(A) ∪ u(B)` holds by construction. The
//! contract checks (non-return, overlap preservation) run when a state is
//! evolved.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::statespace::{relative_volume, EpistemicState, ExactState, PropertySpec, Registry, StateSpaceError};

/// Samples drawn per generator stream in [`borel_trial`].
pub const BATCH_SIZE: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("state overlaps its own future")]
    NonReturn,
    #[error("evolution not subjectively invertible")]
    NotInvertible,
    #[error("no image given for an exact state of the evolved set")]
    MissingImage,
    #[error("exact state has an empty image")]
    EmptyImage,
    #[error("alternatives not mutually exclusive")]
    NotMutuallyExclusive,
    #[error("alternative set incomplete")]
    Incomplete,
    #[error("no genuine alternatives")]
    NoGenuineAlternatives,
    #[error("alternative for value {0} is empty")]
    EmptyAlternative(usize),
    #[error("value index {0} is not a value of the property")]
    UnknownValue(usize),
    #[error("no knowability level given for value {0}")]
    MissingLevel(usize),
    #[error("probability undefined at this knowability level")]
    UndefinedProbability,
    #[error("evolution rule breaks volume invariance (deviation {0})")]
    BrokenInvariance(BigRational),
    #[error("probabilities must be finite, nonnegative and sum to 1 within 1e-12")]
    NotNormalized,
    #[error("sample count must be positive")]
    NoSamples,
    #[error("knowability level must be 1, 2 or 3, got {0}")]
    InvalidLevel(u8),
    #[error(transparent)]
    StateSpace(#[from] StateSpaceError),
}

/// How knowable the true alternative is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum KnowabilityLevel {
    /// Never becomes known.
    Unknowable,
    /// May become known.
    Contingent,
    /// Will become known.
    Decided,
}

impl TryFrom<u8> for KnowabilityLevel {
    type Error = EvolutionError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(KnowabilityLevel::Unknowable),
            2 => Ok(KnowabilityLevel::Contingent),
            3 => Ok(KnowabilityLevel::Decided),
            other => Err(EvolutionError::InvalidLevel(other)),
        }
    }
}

impl From<KnowabilityLevel> for u8 {
    fn from(l: KnowabilityLevel) -> u8 {
        match l {
            KnowabilityLevel::Unknowable => 1,
            KnowabilityLevel::Contingent => 2,
            KnowabilityLevel::Decided => 3,
        }
    }
}

impl fmt::Display for KnowabilityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Per-exact-state image relation.
#[derive(Debug, Clone)]
pub struct EvolutionRule {
    registry: Arc<Registry>,
    images: BTreeMap<ExactState, BTreeSet<ExactState>>,
    tracked: Vec<(EpistemicState, EpistemicState)>,
}

impl EvolutionRule {
    pub fn new(
        registry: Arc<Registry>,
        images: BTreeMap<ExactState, BTreeSet<ExactState>>,
    ) -> Result<Self, EvolutionError> {
        for (z, img) in &images {
            registry.check(z)?;
            if img.is_empty() {
                return Err(EvolutionError::EmptyImage);
            }
            for w in img {
                registry.check(w)?;
            }
        }
        Ok(EvolutionRule {
            registry,
            images,
            tracked: Vec::new(),
        })
    }

    /// Builds the table by applying `f` to every exact state of the registry.
    pub fn from_fn(
        registry: Arc<Registry>,
        f: impl Fn(&ExactState) -> Vec<ExactState>,
    ) -> Result<Self, EvolutionError> {
        let images = registry
            .enumerate()?
            .into_iter()
            .map(|z| {
                let img = f(&z).into_iter().collect();
                (z, img)
            })
            .collect();
        Self::new(registry, images)
    }

    /// Advances one slot by `step` modulo its value count, for every state.
    pub fn shift(registry: Arc<Registry>, slot: usize, step: usize) -> Result<Self, EvolutionError> {
        let n = registry.slot_attribute(slot).len();
        Self::from_fn(registry, |z| vec![z.with_value(slot, (z.value(slot) + step) % n)])
    }

    /// Registers a pair of states whose overlap relation must survive evolution.
    pub fn track(&mut self, a: EpistemicState, b: EpistemicState) {
        self.tracked.push((a, b));
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    /// Set action `u(S) = ⋃ image(Z)`, without contract checks.
    pub fn image(&self, s: &EpistemicState) -> Result<EpistemicState, EvolutionError> {
        let mut out = BTreeSet::new();
        for z in s.members() {
            let img = self.images.get(z).ok_or(EvolutionError::MissingImage)?;
            out.extend(img.iter().cloned());
        }
        Ok(EpistemicState::new(s.registry().clone(), out)?)
    }

    /// Checks that overlapping pairs stay overlapping and disjoint pairs stay disjoint.
    pub fn check_overlap_preservation(&self, pairs: &[(EpistemicState, EpistemicState)]) -> Result<(), EvolutionError> {
        for (a, b) in pairs {
            let before = !a.is_disjoint(b);
            let after = !self.image(a)?.is_disjoint(&self.image(b)?);
            if before != after {
                return Err(EvolutionError::NotInvertible);
            }
        }
        Ok(())
    }
}

/// `u(s)` with the non-return and tracked-overlap checks.
pub fn evolve(s: &EpistemicState, rule: &EvolutionRule) -> Result<EpistemicState, EvolutionError> {
    if s.is_empty() {
        return Err(StateSpaceError::VoidState.into());
    }
    let next = rule.image(s)?;
    if !s.is_disjoint(&next) {
        return Err(EvolutionError::NonReturn);
    }
    rule.check_overlap_preservation(&rule.tracked)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FutureAlternative {
    pub region: EpistemicState,
    pub property_id: String,
    pub value_index: usize,
    pub level: KnowabilityLevel,
}

/// Disjoint, exhaustive family of at least two future alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteAlternativeSet {
    parent: EpistemicState,
    alternatives: Vec<FutureAlternative>,
}

impl CompleteAlternativeSet {
    pub fn parent(&self) -> &EpistemicState {
        &self.parent
    }

    pub fn alternatives(&self) -> &[FutureAlternative] {
        &self.alternatives
    }

    pub fn len(&self) -> usize {
        self.alternatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alternatives.is_empty()
    }

    /// Probabilities of all alternatives; every level must be 3.
    pub fn probabilities(&self) -> Result<Vec<BigRational>, EvolutionError> {
        self.alternatives.iter().map(|a| probability(a, &self.parent)).collect()
    }
}

/// Intersects `parent` with each caller-supplied future preimage and checks
/// the result is a complete set.
pub fn make_alternatives(
    parent: &EpistemicState,
    property: &PropertySpec,
    future_preimages: &BTreeMap<usize, EpistemicState>,
    levels: &BTreeMap<usize, KnowabilityLevel>,
) -> Result<CompleteAlternativeSet, EvolutionError> {
    let mut alternatives = Vec::with_capacity(future_preimages.len());
    for (&j, pre) in future_preimages {
        if j >= property.value_count() {
            return Err(EvolutionError::UnknownValue(j));
        }
        let level = *levels.get(&j).ok_or(EvolutionError::MissingLevel(j))?;
        let region = parent.intersection(pre)?;
        if region.is_empty() {
            return Err(EvolutionError::EmptyAlternative(j));
        }
        alternatives.push(FutureAlternative {
            region,
            property_id: property.id().to_string(),
            value_index: j,
            level,
        });
    }
    for (i, a) in alternatives.iter().enumerate() {
        if alternatives[..i].iter().any(|b| !a.region.is_disjoint(&b.region)) {
            return Err(EvolutionError::NotMutuallyExclusive);
        }
    }
    let covered: usize = alternatives.iter().map(|a| a.region.len()).sum();
    if covered != parent.len() {
        return Err(EvolutionError::Incomplete);
    }
    if alternatives.len() < 2 {
        return Err(EvolutionError::NoGenuineAlternatives);
    }
    Ok(CompleteAlternativeSet {
        parent: parent.clone(),
        alternatives,
    })
}

/// Uses the property's present value spaces as the future preimages, all at
/// one knowability level.
pub fn alternatives_from_property(
    parent: &EpistemicState,
    property: &PropertySpec,
    level: KnowabilityLevel,
) -> Result<CompleteAlternativeSet, EvolutionError> {
    let pre: BTreeMap<usize, EpistemicState> = (0..property.value_count())
        .map(|j| (j, property.preimage(j, parent)))
        .collect();
    let levels = pre.keys().map(|&j| (j, level)).collect();
    make_alternatives(parent, property, &pre, &levels)
}

/// Relative volume of a decided alternative within its parent.
pub fn probability(alt: &FutureAlternative, parent: &EpistemicState) -> Result<BigRational, EvolutionError> {
    if alt.level != KnowabilityLevel::Decided {
        return Err(EvolutionError::UndefinedProbability);
    }
    Ok(relative_volume(&alt.region, parent)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub steps: usize,
    /// Relative volumes of the alternatives after each step (index 0 = before).
    pub ratios: Vec<Vec<BigRational>>,
    pub max_deviation: BigRational,
}

/// Evolves parent and alternatives `steps` times and compares relative volumes.
pub fn check_invariance(
    set: &CompleteAlternativeSet,
    rule: &EvolutionRule,
    steps: usize,
) -> Result<InvarianceReport, EvolutionError> {
    let mut parent = set.parent.clone();
    let mut regions: Vec<EpistemicState> = set.alternatives.iter().map(|a| a.region.clone()).collect();
    let initial: Vec<BigRational> = regions
        .iter()
        .map(|r| relative_volume(r, &parent))
        .collect::<Result<_, _>>()?;
    let mut ratios = vec![initial.clone()];
    let mut max_deviation = BigRational::zero();
    for _ in 0..steps {
        parent = evolve(&parent, rule)?;
        regions = regions.iter().map(|r| evolve(r, rule)).collect::<Result<_, _>>()?;
        let now: Vec<BigRational> = regions
            .iter()
            .map(|r| relative_volume(r, &parent))
            .collect::<Result<_, _>>()?;
        for (a, b) in now.iter().zip(&initial) {
            let d = (a - b).abs();
            if d > max_deviation {
                max_deviation = d;
            }
        }
        ratios.push(now);
    }
    if !max_deviation.is_zero() {
        return Err(EvolutionError::BrokenInvariance(max_deviation));
    }
    Ok(InvarianceReport {
        steps,
        ratios,
        max_deviation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BorelOutcome {
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub n: u64,
    pub seed: u64,
}

/// Three binomial standard errors for probability `q` and `n` samples.
pub fn binomial_band(q: f64, n: u64) -> f64 {
    3.0 * (q * (1.0 - q) / n as f64).sqrt()
}

/// Draws `n` outcomes from `probabilities` and returns empirical frequencies.
///
/// Samples are split into batches of [`BATCH_SIZE`]; batch `k` uses a ChaCha8
/// generator seeded with `seed` on stream `k`. Counts are summed, so the
/// result does not depend on thread scheduling.
pub fn borel_trial(probabilities: &[f64], n: u64, seed: u64) -> Result<BorelOutcome, EvolutionError> {
    if n == 0 {
        return Err(EvolutionError::NoSamples);
    }
    if probabilities.is_empty()
        || probabilities.iter().any(|p| !p.is_finite() || *p < 0.0)
        || (probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-12
    {
        return Err(EvolutionError::NotNormalized);
    }
    let mut cumulative = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for p in probabilities {
        acc += p;
        cumulative.push(acc);
    }
    // Rounding can leave the last cumulative value just below 1.
    let fallback = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let batches = n.div_ceil(BATCH_SIZE);
    let counts = (0..batches)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let len = BATCH_SIZE.min(n - k * BATCH_SIZE);
            let mut local = vec![0u64; probabilities.len()];
            for _ in 0..len {
                let u: f64 = rng.random();
                let idx = cumulative.iter().position(|&c| u < c).unwrap_or(fallback);
                local[idx] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; probabilities.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let frequencies = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(BorelOutcome {
        counts,
        frequencies,
        n,
        seed,
    })
}
