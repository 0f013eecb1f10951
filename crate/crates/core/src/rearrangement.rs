//! Injective maps of dyadic intervals and the induced operator
//! `T h_I = h_{τ(I)}` on Haar expansions.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bmo::HaarExpansion;
use crate::dyadic::{DyadicInterval, IntervalSet, Universe};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RearrangementError {
    #[error("not injective at ({0}, {1}): both map to {2}")]
    NotInjective(DyadicInterval, DyadicInterval, DyadicInterval),
    #[error("interval exceeds max depth: {0} is deeper than {1}")]
    OutsideUniverse(DyadicInterval, u8),
    #[error("duplicate \"from\" entry {0}")]
    DuplicateSource(DyadicInterval),
    #[error("interval not in domain of τ: {0}")]
    NotInDomain(DyadicInterval),
    #[error("map declared total but its domain misses {0}")]
    NotTotal(DyadicInterval),
    #[error("rearrangements live in different universes (depth {0} vs {1})")]
    UniverseMismatch(u8, u8),
}

/// A validated injective map from a domain `Dom ⊆ U_D` into `U_D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rearrangement {
    universe: Universe,
    forward: BTreeMap<DyadicInterval, DyadicInterval>,
    backward: BTreeMap<DyadicInterval, DyadicInterval>,
}

impl Rearrangement {
    /// Validates a candidate map given as `(from, to)` pairs, reporting the
    /// first violation in input order.
    pub fn validate(
        universe: Universe,
        pairs: impl IntoIterator<Item = (DyadicInterval, DyadicInterval)>,
    ) -> Result<Self, RearrangementError> {
        let mut forward = BTreeMap::new();
        let mut backward = BTreeMap::new();
        let depth = universe.max_depth();
        for (from, to) in pairs {
            for i in [from, to] {
                if !universe.contains(i) {
                    return Err(RearrangementError::OutsideUniverse(i, depth));
                }
            }
            if forward.insert(from, to).is_some() {
                return Err(RearrangementError::DuplicateSource(from));
            }
            if let Some(prev) = backward.insert(to, from) {
                return Err(RearrangementError::NotInjective(prev, from, to));
            }
        }
        Ok(Self { universe, forward, backward })
    }

    pub fn identity(universe: Universe) -> Self {
        Self::validate(universe, universe.iter().map(|i| (i, i))).expect("identity is injective")
    }

    /// Identity on the universe except that `a` and `b` trade places.
    pub fn swap(universe: Universe, a: DyadicInterval, b: DyadicInterval) -> Result<Self, RearrangementError> {
        Self::validate(
            universe,
            universe.iter().map(|i| {
                let to = if i == a {
                    b
                } else if i == b {
                    a
                } else {
                    i
                };
                (i, to)
            }),
        )
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn is_total(&self) -> bool {
        self.forward.len() as u128 == self.universe.len()
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn apply(&self, interval: DyadicInterval) -> Option<DyadicInterval> {
        self.forward.get(&interval).copied()
    }

    /// `τ(I)`, or a domain error.
    pub fn image_of(&self, interval: DyadicInterval) -> Result<DyadicInterval, RearrangementError> {
        self.apply(interval).ok_or(RearrangementError::NotInDomain(interval))
    }

    pub fn preimage_of(&self, interval: DyadicInterval) -> Option<DyadicInterval> {
        self.backward.get(&interval).copied()
    }

    pub fn in_domain(&self, interval: DyadicInterval) -> bool {
        self.forward.contains_key(&interval)
    }

    pub fn domain(&self) -> IntervalSet {
        self.forward.keys().copied().collect()
    }

    pub fn image(&self) -> IntervalSet {
        self.backward.keys().copied().collect()
    }

    /// `(from, to)` pairs in canonical domain order.
    pub fn pairs(&self) -> impl Iterator<Item = (DyadicInterval, DyadicInterval)> + '_ {
        self.forward.iter().map(|(a, b)| (*a, *b))
    }

    /// `τ(S)`.
    pub fn map_collection(&self, set: &IntervalSet) -> Result<IntervalSet, RearrangementError> {
        set.iter().map(|i| self.image_of(i)).collect()
    }

    /// `τ⁻¹(S)` for `S` inside the image.
    pub fn preimage_collection(&self, set: &IntervalSet) -> Result<IntervalSet, RearrangementError> {
        set.iter()
            .map(|i| self.preimage_of(i).ok_or(RearrangementError::NotInDomain(i)))
            .collect()
    }

    /// `Tx` with `(Tx)_{τ(I)} = x_I`.
    pub fn transport(&self, x: &HaarExpansion) -> Result<HaarExpansion, RearrangementError> {
        let mut out = HaarExpansion::new();
        for (i, c) in x.iter() {
            out.set(self.image_of(i)?, c.clone());
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Self {
        Self {
            universe: self.universe,
            forward: self.backward.clone(),
            backward: self.forward.clone(),
        }
    }

    /// `self ∘ other`, defined where `other(I)` lies in the domain of `self`.
    pub fn compose(&self, other: &Self) -> Result<Self, RearrangementError> {
        if self.universe != other.universe {
            return Err(RearrangementError::UniverseMismatch(
                self.universe.max_depth(),
                other.universe.max_depth(),
            ));
        }
        Self::validate(
            self.universe,
            other.pairs().filter_map(|(a, b)| self.apply(b).map(|c| (a, c))),
        )
    }

    /// Fails unless the domain is the whole universe.
    pub fn require_total(&self) -> Result<(), RearrangementError> {
        match self.universe.iter().find(|i| !self.in_domain(*i)) {
            Some(missing) => Err(RearrangementError::NotTotal(missing)),
            None => Ok(()),
        }
    }

    /// Whether `|τ(I)| = |I|` on the whole domain.
    pub fn is_level_preserving(&self) -> bool {
        self.pairs().all(|(a, b)| a.depth() == b.depth())
    }
}
