//! Carleson packing constants and dyadic BMO norms of finite Haar expansions.
//!
//! For a collection `S`, the Carleson constant is the largest packing ratio
//! `(1/|J|) Σ_{I∈S, I⊆J} |I|` over dyadic `J`. For an expansion
//! `x = Σ x_I h_I` (with `h_I` the ±1 Haar function on `I`), the squared BMO
//! norm is the largest `(1/|J|) Σ_{I⊆J} x_I² |I|`. Only ancestors of members
//! can carry a nonzero packing sum, so the maximum is taken over those.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::dyadic::{DyadicInterval, IntervalSet, Universe};
use crate::rational::{sqrt_f64, DyadicRational};

/// A finitely supported Haar expansion with exact rational coefficients.
/// Zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HaarExpansion {
    coefficients: BTreeMap<DyadicInterval, BigRational>,
}

impl HaarExpansion {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `x_I`, dropping the entry when the value is zero.
    pub fn set(&mut self, interval: DyadicInterval, value: BigRational) {
        if value.is_zero() {
            self.coefficients.remove(&interval);
        } else {
            self.coefficients.insert(interval, value);
        }
    }

    /// Adds `value` to `x_I`.
    pub fn add(&mut self, interval: DyadicInterval, value: BigRational) {
        let sum = self.get(interval) + value;
        self.set(interval, sum);
    }

    pub fn get(&self, interval: DyadicInterval) -> BigRational {
        self.coefficients.get(&interval).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadicInterval, &BigRational)> {
        self.coefficients.iter().map(|(i, c)| (*i, c))
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn support(&self) -> IntervalSet {
        self.coefficients.keys().copied().collect()
    }

    pub fn check_universe(&self, universe: Universe) -> Result<(), crate::dyadic::DyadicError> {
        self.support().check_universe(universe)
    }

    /// `I ↦ x_I²`.
    pub fn squares(&self) -> BTreeMap<DyadicInterval, BigRational> {
        self.iter().map(|(i, c)| (i, c * c)).collect()
    }

    pub fn max_abs_coefficient(&self) -> BigRational {
        self.iter().map(|(_, c)| c.abs()).max().unwrap_or_else(BigRational::zero)
    }
}

impl FromIterator<(DyadicInterval, BigRational)> for HaarExpansion {
    fn from_iter<T: IntoIterator<Item = (DyadicInterval, BigRational)>>(iter: T) -> Self {
        let mut x = HaarExpansion::new();
        for (i, c) in iter {
            x.add(i, c);
        }
        x
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CarlesonReport {
    pub constant: DyadicRational,
    /// The least `J` (depth, then index) attaining the constant.
    pub witness: Option<DyadicInterval>,
    pub per_interval_sums: Option<BTreeMap<DyadicInterval, DyadicRational>>,
}

/// `J ↦ Σ_{I∈S, I⊆J} |I|` in measure units, over all ancestors of members.
pub(crate) fn packing_sums(members: impl IntoIterator<Item = DyadicInterval>) -> BTreeMap<DyadicInterval, u128> {
    let mut sums: BTreeMap<DyadicInterval, u128> = BTreeMap::new();
    for i in members {
        let w = i.units();
        for j in i.ancestors_inclusive() {
            *sums.entry(j).or_insert(0) += w;
        }
    }
    sums
}

/// Packing ratio `S_J / |J|` in measure units.
fn ratio_units(j: DyadicInterval, sum: u128) -> u128 {
    sum << j.depth()
}

/// Carleson constant in measure units together with the least attaining `J`.
pub(crate) fn carleson_units(members: impl IntoIterator<Item = DyadicInterval>) -> (u128, Option<DyadicInterval>) {
    let mut best = (0u128, None);
    for (j, s) in packing_sums(members) {
        let r = ratio_units(j, s);
        if r > best.0 {
            best = (r, Some(j));
        }
    }
    best
}

pub fn carleson_constant(set: &IntervalSet) -> CarlesonReport {
    let (units, witness) = carleson_units(set.iter());
    CarlesonReport { constant: DyadicRational::from_units(units), witness, per_interval_sums: None }
}

/// As [`carleson_constant`], also returning every nonzero packing sum.
pub fn carleson_report(set: &IntervalSet) -> CarlesonReport {
    let sums = packing_sums(set.iter());
    let mut report = carleson_constant(set);
    report.per_interval_sums = Some(sums.into_iter().map(|(j, s)| (j, DyadicRational::from_units(s))).collect());
    report
}

/// `(1/|J|) Σ_{I∈S, I⊆J} |I|` for a single `J`.
pub fn packing_ratio(set: &IntervalSet, j: DyadicInterval) -> DyadicRational {
    let sum: u128 = set.iter().filter(|i| i.is_within(j)).map(DyadicInterval::units).sum();
    DyadicRational::from_units(ratio_units(j, sum))
}

/// Squared BMO norm of the expansion whose squared coefficients are given.
pub fn norm_sq_of_squares(
    squares: &BTreeMap<DyadicInterval, BigRational>,
) -> (BigRational, Option<DyadicInterval>) {
    let mut sums: BTreeMap<DyadicInterval, BigRational> = BTreeMap::new();
    for (&i, sq) in squares {
        let w = sq / BigRational::from_integer(BigInt::from(1u128 << i.depth()));
        for j in i.ancestors_inclusive() {
            let e = sums.entry(j).or_insert_with(BigRational::zero);
            *e += &w;
        }
    }
    let mut best = (BigRational::zero(), None);
    for (j, s) in sums {
        let r = s * BigRational::from_integer(BigInt::from(1u128 << j.depth()));
        if r > best.0 {
            best = (r, Some(j));
        }
    }
    best
}

pub fn bmo_norm_sq(x: &HaarExpansion) -> BigRational {
    norm_sq_of_squares(&x.squares()).0
}

/// Squared norm with the least attaining `J`.
pub fn bmo_norm_sq_with_witness(x: &HaarExpansion) -> (BigRational, Option<DyadicInterval>) {
    norm_sq_of_squares(&x.squares())
}

pub fn bmo_norm(x: &HaarExpansion) -> f64 {
    sqrt_f64(&bmo_norm_sq(x))
}

/// Coefficient 1 on every member of `set`.
pub fn indicator_expansion(set: &IntervalSet) -> HaarExpansion {
    set.iter().map(|i| (i, BigRational::from_integer(1.into()))).collect()
}
