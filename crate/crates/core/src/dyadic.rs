//! Dyadic intervals of `[0,1)`, truncated universes and finite interval
//! collections.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::rational::{DyadicRational, UNIT_EXP};

/// Largest supported universe depth.
pub const MAX_DEPTH: u8 = 62;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DyadicError {
    #[error("invalid dyadic interval ({depth}, {index}): index must be below 2^depth")]
    InvalidIndex { depth: u8, index: u64 },
    #[error("depth {0} exceeds the supported maximum {MAX_DEPTH}")]
    DepthTooLarge(u32),
    #[error("no children in universe: {0} is at max depth {1}")]
    NoChildren(DyadicInterval, u8),
    #[error("root has no parent")]
    RootHasNoParent,
    #[error("interval {0} exceeds max depth {1}")]
    OutsideUniverse(DyadicInterval, u8),
}

/// `[k 2^-n, (k+1) 2^-n)`. Ordered by depth, then index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicInterval {
    depth: u8,
    index: u64,
}

/// How two dyadic intervals sit relative to each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Equal,
    Contains,
    ContainedIn,
    Disjoint,
}

impl DyadicInterval {
    pub const ROOT: DyadicInterval = DyadicInterval { depth: 0, index: 0 };

    pub fn new(depth: u32, index: u64) -> Result<Self, DyadicError> {
        if depth > MAX_DEPTH as u32 {
            return Err(DyadicError::DepthTooLarge(depth));
        }
        let depth = depth as u8;
        if index >> depth != 0 {
            return Err(DyadicError::InvalidIndex { depth, index });
        }
        Ok(Self { depth, index })
    }

    pub fn depth(self) -> u8 {
        self.depth
    }

    pub fn index(self) -> u64 {
        self.index
    }

    /// `|I| = 2^-depth`.
    pub fn measure(self) -> DyadicRational {
        DyadicRational::pow2_neg(self.depth as u32)
    }

    /// `|I|` in units of `2^-62`.
    pub fn units(self) -> u128 {
        1u128 << (UNIT_EXP - self.depth as u32)
    }

    /// Left endpoint in units of `2^-62`.
    pub fn start_units(self) -> u64 {
        self.index << (UNIT_EXP - self.depth as u32)
    }

    pub fn left_endpoint(self) -> DyadicRational {
        DyadicRational::new(self.index, self.depth as u32)
    }

    pub fn right_endpoint(self) -> DyadicRational {
        DyadicRational::new(self.index + 1, self.depth as u32)
    }

    /// Both halves, ignoring any universe bound.
    pub fn halves(self) -> Option<(Self, Self)> {
        if self.depth >= MAX_DEPTH {
            return None;
        }
        let d = self.depth + 1;
        Some((
            Self { depth: d, index: self.index << 1 },
            Self { depth: d, index: (self.index << 1) | 1 },
        ))
    }

    pub fn parent(self) -> Result<Self, DyadicError> {
        if self.depth == 0 {
            return Err(DyadicError::RootHasNoParent);
        }
        Ok(Self { depth: self.depth - 1, index: self.index >> 1 })
    }

    /// The ancestor at `depth` (self when equal).
    pub fn ancestor_at(self, depth: u8) -> Option<Self> {
        (depth <= self.depth).then(|| Self { depth, index: self.index >> (self.depth - depth) })
    }

    /// Self, then each ancestor up to the root.
    pub fn ancestors_inclusive(self) -> impl Iterator<Item = Self> {
        (0..=self.depth).rev().map(move |d| Self { depth: d, index: self.index >> (self.depth - d) })
    }

    pub fn relation(self, other: Self) -> Relation {
        if self == other {
            Relation::Equal
        } else if self.depth < other.depth
            && other.index >> (other.depth - self.depth) == self.index
        {
            Relation::Contains
        } else if other.depth < self.depth
            && self.index >> (self.depth - other.depth) == other.index
        {
            Relation::ContainedIn
        } else {
            Relation::Disjoint
        }
    }

    /// `self ⊆ other`.
    pub fn is_within(self, other: Self) -> bool {
        matches!(self.relation(other), Relation::Equal | Relation::ContainedIn)
    }

    pub fn intersects(self, other: Self) -> bool {
        self.relation(other) != Relation::Disjoint
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.depth, self.index)
    }
}

/// All dyadic intervals of depth at most `max_depth`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Universe {
    max_depth: u8,
}

impl Universe {
    pub fn new(max_depth: u32) -> Result<Self, DyadicError> {
        if max_depth > MAX_DEPTH as u32 {
            return Err(DyadicError::DepthTooLarge(max_depth));
        }
        Ok(Self { max_depth: max_depth as u8 })
    }

    pub fn max_depth(self) -> u8 {
        self.max_depth
    }

    /// `2^(D+1) - 1`.
    pub fn len(self) -> u128 {
        (1u128 << (self.max_depth as u32 + 1)) - 1
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn contains(self, interval: DyadicInterval) -> bool {
        interval.depth <= self.max_depth
    }

    pub fn check(self, interval: DyadicInterval) -> Result<(), DyadicError> {
        if self.contains(interval) {
            Ok(())
        } else {
            Err(DyadicError::OutsideUniverse(interval, self.max_depth))
        }
    }

    pub fn children(
        self,
        interval: DyadicInterval,
    ) -> Result<(DyadicInterval, DyadicInterval), DyadicError> {
        if interval.depth >= self.max_depth {
            return Err(DyadicError::NoChildren(interval, self.max_depth));
        }
        Ok(interval.halves().expect("depth below MAX_DEPTH"))
    }

    /// Canonical order: depth, then index.
    pub fn iter(self) -> impl Iterator<Item = DyadicInterval> {
        (0..=self.max_depth).flat_map(|d| (0..1u64 << d).map(move |k| DyadicInterval { depth: d, index: k }))
    }

    /// Every interval of the universe contained in `top`, in canonical order.
    pub fn subtree(self, top: DyadicInterval) -> impl Iterator<Item = DyadicInterval> {
        (top.depth..=self.max_depth).flat_map(move |d| {
            let shift = d - top.depth;
            let first = top.index << shift;
            (first..first + (1u64 << shift)).map(move |k| DyadicInterval { depth: d, index: k })
        })
    }

    pub fn all(self) -> IntervalSet {
        self.iter().collect()
    }
}

/// A finite set of dyadic intervals, iterated by depth then index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntervalSet {
    members: BTreeSet<DyadicInterval>,
}

impl IntervalSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn insert(&mut self, interval: DyadicInterval) -> bool {
        self.members.insert(interval)
    }

    pub fn remove(&mut self, interval: &DyadicInterval) -> bool {
        self.members.remove(interval)
    }

    pub fn contains(&self, interval: &DyadicInterval) -> bool {
        self.members.contains(interval)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = DyadicInterval> + '_ {
        self.members.iter().copied()
    }

    pub fn first(&self) -> Option<DyadicInterval> {
        self.members.first().copied()
    }

    pub fn max_depth(&self) -> Option<u8> {
        self.members.iter().map(|i| i.depth).max()
    }

    pub fn check_universe(&self, universe: Universe) -> Result<(), DyadicError> {
        self.iter().try_for_each(|i| universe.check(i))
    }

    pub fn union(&self, other: &Self) -> Self {
        Self { members: self.members.union(&other.members).copied().collect() }
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self { members: self.members.difference(&other.members).copied().collect() }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self { members: self.members.intersection(&other.members).copied().collect() }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn is_disjoint_from(&self, other: &Self) -> bool {
        self.members.is_disjoint(&other.members)
    }

    /// `S ∩ J`: the members contained in `top`.
    pub fn restrict(&self, top: DyadicInterval) -> Self {
        self.iter().filter(|i| i.is_within(top)).collect()
    }

    /// Whether some member strictly contains `interval`.
    pub fn has_strict_ancestor_of(&self, interval: DyadicInterval) -> bool {
        interval.ancestors_inclusive().skip(1).any(|a| self.contains(&a))
    }

    /// Whether some member contains `interval` (possibly equal to it).
    pub fn covers(&self, interval: DyadicInterval) -> bool {
        interval.ancestors_inclusive().any(|a| self.contains(&a))
    }

    /// Members contained in no other member.
    pub fn maximal_elements(&self) -> Self {
        self.iter().filter(|&i| !self.has_strict_ancestor_of(i)).collect()
    }

    pub fn is_pairwise_disjoint(&self) -> bool {
        self.iter().all(|i| !self.has_strict_ancestor_of(i))
    }

    /// `|⋃S|`.
    pub fn covered_measure(&self) -> DyadicRational {
        DyadicRational::from_units(self.covered_units())
    }

    pub(crate) fn covered_units(&self) -> u128 {
        self.maximal_elements().iter().map(DyadicInterval::units).sum()
    }

    /// `Σ_{I∈S} |I|`.
    pub fn total_measure(&self) -> DyadicRational {
        DyadicRational::from_units(self.iter().map(DyadicInterval::units).sum())
    }

    /// Every interval of `universe` contained in some member.
    pub fn down_set(&self, universe: Universe) -> Self {
        let mut out = BTreeSet::new();
        for top in self.maximal_elements().iter() {
            out.extend(universe.subtree(top));
        }
        Self { members: out }
    }

    /// Members grouped by depth.
    pub fn by_depth(&self) -> BTreeMap<u8, Vec<DyadicInterval>> {
        let mut out: BTreeMap<u8, Vec<DyadicInterval>> = BTreeMap::new();
        for i in self.iter() {
            out.entry(i.depth).or_default().push(i);
        }
        out
    }
}

impl FromIterator<DyadicInterval> for IntervalSet {
    fn from_iter<T: IntoIterator<Item = DyadicInterval>>(iter: T) -> Self {
        Self { members: iter.into_iter().collect() }
    }
}

impl Extend<DyadicInterval> for IntervalSet {
    fn extend<T: IntoIterator<Item = DyadicInterval>>(&mut self, iter: T) {
        self.members.extend(iter)
    }
}

impl<'a> IntoIterator for &'a IntervalSet {
    type Item = DyadicInterval;
    type IntoIter = std::iter::Copied<std::collections::btree_set::Iter<'a, DyadicInterval>>;
    fn into_iter(self) -> Self::IntoIter {
        self.members.iter().copied()
    }
}

/// Incrementally maintained `|⋃K|` for a growing collection.
#[derive(Clone, Debug, Default)]
pub(crate) struct CoverTracker {
    // Maximal intervals keyed by (left endpoint, depth) so that the
    // descendants of any interval form a contiguous range.
    maximal: BTreeSet<(u64, u8)>,
    units: u128,
}

impl CoverTracker {
    pub fn units(&self) -> u128 {
        self.units
    }

    fn is_covered(&self, interval: DyadicInterval) -> bool {
        interval.ancestors_inclusive().any(|a| self.maximal.contains(&(a.start_units(), a.depth)))
    }

    /// Cover measure after hypothetically adding `interval`.
    pub fn units_with(&self, interval: DyadicInterval) -> u128 {
        if self.is_covered(interval) {
            return self.units;
        }
        let (lo, hi) = Self::span(interval);
        let inside: u128 = self
            .maximal
            .range((lo, 0)..(hi, 0))
            .map(|&(_, d)| 1u128 << (UNIT_EXP - d as u32))
            .sum();
        self.units - inside + interval.units()
    }

    pub fn insert(&mut self, interval: DyadicInterval) {
        if self.is_covered(interval) {
            return;
        }
        let (lo, hi) = Self::span(interval);
        let inside: Vec<(u64, u8)> = self.maximal.range((lo, 0)..(hi, 0)).copied().collect();
        for key in inside {
            self.maximal.remove(&key);
            self.units -= 1u128 << (UNIT_EXP - key.1 as u32);
        }
        self.maximal.insert((lo, interval.depth));
        self.units += interval.units();
    }

    fn span(interval: DyadicInterval) -> (u64, u64) {
        let lo = interval.start_units();
        (lo, lo + (interval.units() as u64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(n: u32, k: u64) -> DyadicInterval {
        DyadicInterval::new(n, k).unwrap()
    }

    fn set(items: &[(u32, u64)]) -> IntervalSet {
        items.iter().map(|&(n, k)| iv(n, k)).collect()
    }

    #[test]
    fn rejects_bad_index() {
        assert!(DyadicInterval::new(2, 4).is_err());
        assert!(DyadicInterval::new(63, 0).is_err());
        assert!(DyadicInterval::new(62, (1 << 62) - 1).is_ok());
    }

    #[test]
    fn children_and_parent() {
        let u = Universe::new(3).unwrap();
        assert_eq!(u.children(DyadicInterval::ROOT).unwrap(), (iv(1, 0), iv(1, 1)));
        assert_eq!(iv(2, 3).parent().unwrap(), iv(1, 1));
        let u6 = Universe::new(6).unwrap();
        assert_eq!(u6.children(iv(5, 17)).unwrap().0.parent().unwrap(), iv(5, 17));
        assert_eq!(u.children(iv(3, 1)), Err(DyadicError::NoChildren(iv(3, 1), 3)));
        assert_eq!(DyadicInterval::ROOT.parent(), Err(DyadicError::RootHasNoParent));
        assert_eq!(DyadicError::RootHasNoParent.to_string(), "root has no parent");
    }

    #[test]
    fn relation_examples() {
        assert_eq!(iv(1, 0).relation(iv(2, 1)), Relation::Contains);
        assert_eq!(iv(2, 1).relation(iv(1, 0)), Relation::ContainedIn);
        assert_eq!(iv(2, 1).relation(iv(2, 2)), Relation::Disjoint);
        assert_eq!(iv(3, 5).relation(iv(3, 5)), Relation::Equal);
    }

    #[test]
    fn restrict_examples() {
        let s = set(&[(0, 0), (1, 0), (1, 1)]);
        assert_eq!(s.restrict(iv(1, 0)), set(&[(1, 0)]));
        assert_eq!(s.restrict(DyadicInterval::ROOT), s);
        assert_eq!(set(&[(2, 0), (2, 3)]).restrict(iv(1, 1)), set(&[(2, 3)]));
    }

    #[test]
    fn maximal_examples() {
        assert_eq!(set(&[(0, 0), (1, 0), (2, 3)]).maximal_elements(), set(&[(0, 0)]));
        let flat = set(&[(2, 0), (2, 1), (1, 1)]);
        assert_eq!(flat.maximal_elements(), flat);
        assert!(IntervalSet::new().maximal_elements().is_empty());
    }

    #[test]
    fn covered_measure_examples() {
        let half = DyadicRational::pow2_neg(1);
        assert_eq!(set(&[(1, 0), (2, 1)]).covered_measure(), half);
        assert_eq!(set(&[(2, 0), (2, 2)]).covered_measure(), half);
        assert_eq!(IntervalSet::new().covered_measure(), DyadicRational::zero());
    }

    #[test]
    fn down_set_examples() {
        let u2 = Universe::new(2).unwrap();
        assert_eq!(set(&[(0, 0)]).down_set(u2), u2.all());
        assert_eq!(set(&[(2, 1)]).down_set(u2), set(&[(2, 1)]));
        let mut non_root = u2.all();
        non_root.remove(&DyadicInterval::ROOT);
        assert_eq!(set(&[(1, 0), (1, 1)]).down_set(u2), non_root);
    }

    #[test]
    fn universe_enumeration_size() {
        for d in 0..=8 {
            let u = Universe::new(d).unwrap();
            let all = u.all();
            assert_eq!(all.len() as u128, u.len());
            assert_eq!(all.len(), u.iter().count());
        }
    }

    #[test]
    fn pairwise_nested_or_disjoint_at_small_depth() {
        let u = Universe::new(4).unwrap();
        for a in u.iter() {
            for b in u.iter() {
                let (al, ar) = (a.left_endpoint(), a.right_endpoint());
                let (bl, br) = (b.left_endpoint(), b.right_endpoint());
                let a_in_b = bl <= al && ar <= br;
                let b_in_a = al <= bl && br <= ar;
                let disjoint = ar <= bl || br <= al;
                assert!(a_in_b || b_in_a || disjoint);
                let expected = match (a_in_b, b_in_a) {
                    (true, true) => Relation::Equal,
                    (false, true) => Relation::Contains,
                    (true, false) => Relation::ContainedIn,
                    (false, false) => Relation::Disjoint,
                };
                assert_eq!(a.relation(b), expected, "{a} vs {b}");
            }
        }
    }

    fn arb_set(max_depth: u32) -> impl Strategy<Value = IntervalSet> {
        let all: Vec<DyadicInterval> = Universe::new(max_depth).unwrap().iter().collect();
        proptest::sample::subsequence(all.clone(), 0..=all.len())
            .prop_map(|v| v.into_iter().collect::<IntervalSet>())
    }

    proptest! {
        #[test]
        fn maximal_preserves_cover_and_is_idempotent(s in arb_set(5)) {
            let m = s.maximal_elements();
            prop_assert_eq!(m.covered_measure(), s.covered_measure());
            prop_assert_eq!(m.maximal_elements(), m.clone());
            prop_assert!(m.is_pairwise_disjoint());
            prop_assert!(s.covered_measure() <= DyadicRational::one());
            if let Some(first) = s.first() {
                prop_assert!(s.covered_measure() >= first.measure());
            }
        }

        #[test]
        fn full_subtree_mass(depth in 0u32..=7, pick in 0usize..255) {
            let u = Universe::new(depth).unwrap();
            let all: Vec<_> = u.iter().collect();
            let top = all[pick % all.len()];
            let sub: IntervalSet = std::iter::once(top).collect();
            let mass = sub.down_set(u).total_measure();
            let levels = DyadicRational::integer((depth - top.depth() as u32 + 1) as i64);
            prop_assert_eq!(mass, &levels * &top.measure());
        }

        #[test]
        fn cover_tracker_matches_maximal_sum(v in proptest::collection::vec((0u32..=6, any::<u64>()), 0..40)) {
            let mut tracker = CoverTracker::default();
            let mut seen = IntervalSet::new();
            for (n, k) in v {
                let i = iv(n, k % (1 << n));
                let predicted = tracker.units_with(i);
                tracker.insert(i);
                seen.insert(i);
                prop_assert_eq!(predicted, tracker.units());
                prop_assert_eq!(tracker.units(), seen.covered_units());
            }
        }
    }
}
