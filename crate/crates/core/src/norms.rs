//! Oracles and certified bounds for the operator `T h_I = h_{τ(I)}` on BMO.
//!
//! * Carleson distortion `sup_E ⟦τ(E)⟧ / ⟦E⟧` (exhaustive or greedy).
//! * A lower bound on `‖T‖` from indicator witnesses and coordinate ascent.
//! * The upper bound `‖T‖² ≤ M₃ = max{⟦τ(E)⟧ : ⟦E⟧ ≤ 3}`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bmo::{carleson_units, indicator_expansion, norm_sq_of_squares, HaarExpansion};
use crate::dyadic::{DyadicInterval, IntervalSet};
use crate::rational::{cmp_fractions, fraction, ratio_string, sqrt_f64, DyadicRational, UNIT_EXP};
use crate::rearrangement::{Rearrangement, RearrangementError};

/// Largest domain for which subsets are enumerated.
pub const EXHAUSTIVE_CAP: usize = 15;
/// Largest domain for which pairwise-disjoint families are enumerated.
pub const DISJOINT_CAP: usize = 31;
/// Evaluation budget used when no budget is supplied.
pub const DEFAULT_BUDGET: u64 = 4000;

const ASCENT_BITS: u32 = 10;
const ASCENT_STARTS: u64 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormsError {
    #[error("domain too large for exhaustive mode: {size} intervals, cap is {cap}")]
    DomainTooLarge { size: usize, cap: usize },
    #[error(transparent)]
    Rearrangement(#[from] RearrangementError),
    #[error("lower bound squared {lower} exceeds certified upper bound {upper}")]
    Sandwich { lower: String, upper: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistortionMode {
    Exhaustive,
    Greedy { budget: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Distortion {
    pub ratio: BigRational,
    pub witness: IntervalSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    pub value_sq: BigRational,
    pub witness: HaarExpansion,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpperBound {
    pub bound_sq: BigRational,
    pub witness: IntervalSet,
    /// False when `M₃` was only estimated from below by greedy search.
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    pub distortion: Distortion,
    pub lower: LowerBound,
    pub upper: UpperBound,
}

/// A candidate subset with score `num / den`; larger wins, then smaller mask.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    mask: u32,
    num: u128,
    den: u128,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    match cmp_fractions(a.num, a.den, b.num, b.den) {
        Ordering::Greater => a,
        Ordering::Less => b,
        Ordering::Equal if a.mask <= b.mask => a,
        Ordering::Equal => b,
    }
}

/// Domain and image in canonical domain order with containment masks.
struct SubsetTable {
    dom: Vec<DyadicInterval>,
    img: Vec<DyadicInterval>,
    dom_below: Vec<u32>,
    img_below: Vec<u32>,
}

impl SubsetTable {
    fn new(tau: &Rearrangement) -> Result<Self, NormsError> {
        if tau.len() > EXHAUSTIVE_CAP {
            return Err(NormsError::DomainTooLarge { size: tau.len(), cap: EXHAUSTIVE_CAP });
        }
        let (dom, img): (Vec<_>, Vec<_>) = tau.pairs().unzip();
        let below = |v: &[DyadicInterval]| -> Vec<u32> {
            v.iter()
                .map(|j| v.iter().enumerate().filter(|(_, i)| i.is_within(*j)).fold(0, |m, (k, _)| m | 1 << k))
                .collect()
        };
        let dom_below = below(&dom);
        let img_below = below(&img);
        Ok(Self { dom, img, dom_below, img_below })
    }

    fn subsets(&self) -> std::ops::Range<u32> {
        1..(1u32 << self.dom.len())
    }

    /// `⟦E⟧` in units. The supremum is attained at a member of `E`.
    fn packing(intervals: &[DyadicInterval], below: &[u32], mask: u32) -> u128 {
        let mut best = 0;
        let mut rest = mask;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let mut sum = 0u128;
            let mut sub = mask & below[j];
            while sub != 0 {
                sum += intervals[sub.trailing_zeros() as usize].units();
                sub &= sub - 1;
            }
            best = best.max(sum << intervals[j].depth());
        }
        best
    }

    fn domain_units(&self, mask: u32) -> u128 {
        Self::packing(&self.dom, &self.dom_below, mask)
    }

    fn image_units(&self, mask: u32) -> u128 {
        Self::packing(&self.img, &self.img_below, mask)
    }

    fn witness(&self, mask: u32) -> IntervalSet {
        (0..self.dom.len()).filter(|k| mask >> k & 1 == 1).map(|k| self.dom[k]).collect()
    }
}

pub fn carleson_distortion(tau: &Rearrangement, mode: DistortionMode) -> Result<Distortion, NormsError> {
    match mode {
        DistortionMode::Exhaustive => carleson_distortion_exhaustive(tau),
        DistortionMode::Greedy { budget, seed } => Ok(carleson_distortion_greedy(tau, budget, seed)),
    }
}

/// Exact maximum of `⟦τ(E)⟧ / ⟦E⟧` over nonempty `E ⊆ Dom`. Ties go to the
/// witness whose membership bitmask, in canonical domain order, is least.
pub fn carleson_distortion_exhaustive(tau: &Rearrangement) -> Result<Distortion, NormsError> {
    let table = SubsetTable::new(tau)?;
    let best = table
        .subsets()
        .into_par_iter()
        .map(|mask| Candidate { mask, num: table.image_units(mask), den: table.domain_units(mask) })
        .reduce_with(better);
    Ok(match best {
        Some(c) => Distortion { ratio: fraction(c.num, c.den), witness: table.witness(c.mask) },
        None => Distortion { ratio: BigRational::zero(), witness: IntervalSet::new() },
    })
}

/// Scores `(num, den)` of a subset, or `None` when it is not admissible.
type Score<'a> = dyn Fn(&IntervalSet) -> Option<(u128, u128)> + Sync + 'a;

fn exceeds(a: (u128, u128), b: (u128, u128)) -> bool {
    cmp_fractions(a.0, a.1, b.0, b.1) == Ordering::Greater
}

/// Greedy growth from alternating singleton and seeded random starts until
/// `budget` subset evaluations are spent.
fn greedy_search(dom: &[DyadicInterval], budget: u64, seed: u64, score: &Score) -> Option<(IntervalSet, (u128, u128))> {
    if dom.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spent = 0u64;
    let mut best: Option<(IntervalSet, (u128, u128))> = None;
    let mut round = 0usize;
    while spent < budget {
        let start: IntervalSet = if round % 2 == 0 && round / 2 < dom.len() {
            [dom[round / 2]].into_iter().collect()
        } else {
            let mut picks: Vec<DyadicInterval> = dom.iter().copied().filter(|_| rng.random_bool(0.25)).collect();
            if picks.is_empty() {
                picks.push(*dom.choose(&mut rng).expect("nonempty"));
            }
            picks.into_iter().collect()
        };
        round += 1;
        spent += 1;
        let Some(mut current_score) = score(&start) else { continue };
        let mut current = start;
        'grow: loop {
            let mut step: Option<(DyadicInterval, (u128, u128))> = None;
            for &c in dom {
                if current.contains(&c) {
                    continue;
                }
                if spent >= budget {
                    break 'grow;
                }
                spent += 1;
                let mut trial = current.clone();
                trial.insert(c);
                if let Some(s) = score(&trial) {
                    if step.is_none_or(|(_, b)| exceeds(s, b)) {
                        step = Some((c, s));
                    }
                }
            }
            match step {
                Some((c, s)) if exceeds(s, current_score) => {
                    current.insert(c);
                    current_score = s;
                }
                _ => break,
            }
        }
        if best.as_ref().is_none_or(|(_, b)| exceeds(current_score, *b)) {
            best = Some((current, current_score));
        }
    }
    best
}

/// Lower bound on the distortion by greedy growth; deterministic in `seed`.
pub fn carleson_distortion_greedy(tau: &Rearrangement, budget: u64, seed: u64) -> Distortion {
    let dom: Vec<DyadicInterval> = tau.domain().iter().collect();
    let score = |e: &IntervalSet| {
        let image = e.iter().map(|i| tau.apply(i).expect("domain member"));
        Some((carleson_units(image).0, carleson_units(e.iter()).0))
    };
    match greedy_search(&dom, budget, seed, &score) {
        Some((witness, (num, den))) => Distortion { ratio: fraction(num, den), witness },
        None => Distortion { ratio: BigRational::zero(), witness: IntervalSet::new() },
    }
}

/// `max ⟦τ(E)⟧` over pairwise-disjoint `E ⊆ Dom`.
pub fn max_disjoint_image_constant(tau: &Rearrangement) -> Result<DyadicRational, NormsError> {
    if tau.len() > DISJOINT_CAP {
        return Err(NormsError::DomainTooLarge { size: tau.len(), cap: DISJOINT_CAP });
    }
    let (dom, img): (Vec<_>, Vec<_>) = tau.pairs().unzip();
    let slots: BTreeMap<DyadicInterval, usize> = img
        .iter()
        .flat_map(|i| i.ancestors_inclusive())
        .collect::<IntervalSet>()
        .iter()
        .enumerate()
        .map(|(k, i)| (i, k))
        .collect();
    let ancestors: Vec<Vec<usize>> = img.iter().map(|i| i.ancestors_inclusive().map(|a| slots[&a]).collect()).collect();

    struct Search<'a> {
        dom: &'a [DyadicInterval],
        img: &'a [DyadicInterval],
        ancestors: &'a [Vec<usize>],
        sums: Vec<u128>,
        chosen: Vec<usize>,
        best: u128,
    }
    impl Search<'_> {
        fn run(&mut self, k: usize) {
            if k == self.dom.len() {
                let value = self
                    .chosen
                    .iter()
                    .map(|&c| self.sums[self.ancestors[c][0]] << self.img[c].depth())
                    .max()
                    .unwrap_or(0);
                self.best = self.best.max(value);
                return;
            }
            self.run(k + 1);
            if self.chosen.iter().all(|&c| !self.dom[c].intersects(self.dom[k])) {
                let w = self.img[k].units();
                for &s in &self.ancestors[k] {
                    self.sums[s] += w;
                }
                self.chosen.push(k);
                self.run(k + 1);
                self.chosen.pop();
                for &s in &self.ancestors[k] {
                    self.sums[s] -= w;
                }
            }
        }
    }
    let mut search =
        Search { dom: &dom, img: &img, ancestors: &ancestors, sums: vec![0; slots.len()], chosen: Vec::new(), best: 0 };
    search.run(0);
    Ok(DyadicRational::from_units(search.best))
}

fn ratio_of_squares(tau: &Rearrangement, squares: &BTreeMap<DyadicInterval, BigRational>) -> Option<BigRational> {
    let (x, _) = norm_sq_of_squares(squares);
    if x.is_zero() {
        return None;
    }
    let image: BTreeMap<DyadicInterval, BigRational> =
        squares.iter().map(|(i, s)| (tau.apply(*i).expect("domain member"), s.clone())).collect();
    Some(norm_sq_of_squares(&image).0 / x)
}

/// Coordinate ascent on coefficients `m / 2^10` from one seeded start.
fn ascend(tau: &Rearrangement, dom: &[DyadicInterval], budget: u64, rng: &mut ChaCha8Rng) -> Option<(BigRational, Vec<u64>)> {
    let unit = 1u64 << ASCENT_BITS;
    let mut coeffs: Vec<u64> = dom.iter().map(|_| rng.random_range(0..=4u64) * (unit / 4)).collect();
    if coeffs.iter().all(|c| *c == 0) {
        let k = rng.random_range(0..dom.len());
        coeffs[k] = unit;
    }
    let denom = BigInt::from(unit) * BigInt::from(unit);
    let squares = |c: &[u64]| -> BTreeMap<DyadicInterval, BigRational> {
        dom.iter()
            .zip(c)
            .filter(|(_, m)| **m > 0)
            .map(|(i, m)| (*i, BigRational::new(BigInt::from(*m) * BigInt::from(*m), denom.clone())))
            .collect()
    };
    let mut spent = 1u64;
    let mut best = ratio_of_squares(tau, &squares(&coeffs))?;
    for t in 0..=ASCENT_BITS {
        let step = unit >> t;
        let mut improved = true;
        while improved {
            improved = false;
            for k in 0..dom.len() {
                for up in [true, false] {
                    if spent >= budget {
                        return Some((best, coeffs));
                    }
                    let old = coeffs[k];
                    coeffs[k] = if up { old + step } else if old >= step { old - step } else { continue };
                    spent += 1;
                    match ratio_of_squares(tau, &squares(&coeffs)) {
                        Some(r) if r > best => {
                            best = r;
                            improved = true;
                        }
                        _ => coeffs[k] = old,
                    }
                }
            }
        }
    }
    Some((best, coeffs))
}

/// `max ‖Tx‖ / ‖x‖` over indicator witnesses of the distortion and seeded
/// coordinate ascent. Earlier candidates win ties.
pub fn operator_norm_lower_bound(tau: &Rearrangement, budget: u64, seed: u64) -> Result<LowerBound, NormsError> {
    tau.require_total()?;
    let distortion = if tau.len() <= EXHAUSTIVE_CAP {
        carleson_distortion_exhaustive(tau)?
    } else {
        carleson_distortion_greedy(tau, budget, seed)
    };
    Ok(lower_bound_from(tau, &distortion, budget, seed))
}

fn lower_bound_from(tau: &Rearrangement, distortion: &Distortion, budget: u64, seed: u64) -> LowerBound {
    let mut best_sq = distortion.ratio.clone();
    let mut witness = indicator_expansion(&distortion.witness);

    let dom: Vec<DyadicInterval> = tau.domain().iter().collect();
    if !dom.is_empty() {
        let per_start = budget / ASCENT_STARTS;
        let runs: Vec<Option<(BigRational, Vec<u64>)>> = (0..ASCENT_STARTS)
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s + 1);
                ascend(tau, &dom, per_start, &mut rng)
            })
            .collect();
        let unit = BigInt::from(1u64 << ASCENT_BITS);
        for (r, coeffs) in runs.into_iter().flatten() {
            if r > best_sq {
                best_sq = r;
                witness = dom
                    .iter()
                    .zip(&coeffs)
                    .filter(|(_, m)| **m > 0)
                    .map(|(i, m)| (*i, BigRational::new(BigInt::from(*m), unit.clone())))
                    .collect();
            }
        }
    }
    LowerBound { value: sqrt_f64(&best_sq), value_sq: best_sq, witness }
}

/// `M₃ = max{⟦τ(E)⟧ : E ⊆ Dom, ⟦E⟧ ≤ 3}`, exact when the domain is within the
/// enumeration cap, else a greedy estimate flagged as uncertified.
pub fn operator_norm_upper_bound(tau: &Rearrangement) -> UpperBound {
    operator_norm_upper_bound_with(tau, DEFAULT_BUDGET, 0)
}

pub fn operator_norm_upper_bound_with(tau: &Rearrangement, budget: u64, seed: u64) -> UpperBound {
    let cap = 3u128 << UNIT_EXP;
    if let Ok(table) = SubsetTable::new(tau) {
        let best = table
            .subsets()
            .into_par_iter()
            .filter(|&mask| table.domain_units(mask) <= cap)
            .map(|mask| Candidate { mask, num: table.image_units(mask), den: 1 })
            .reduce_with(better);
        let (units, witness) = best.map_or((0, IntervalSet::new()), |c| (c.num, table.witness(c.mask)));
        return UpperBound { bound_sq: DyadicRational::from_units(units).to_big_rational(), witness, certified: true };
    }
    let dom: Vec<DyadicInterval> = tau.domain().iter().collect();
    let score = |e: &IntervalSet| {
        (carleson_units(e.iter()).0 <= cap)
            .then(|| (carleson_units(e.iter().map(|i| tau.apply(i).expect("domain member"))).0, 1))
    };
    let (witness, units) = greedy_search(&dom, budget, seed, &score).map_or((IntervalSet::new(), 0), |(w, s)| (w, s.0));
    UpperBound { bound_sq: DyadicRational::from_units(units).to_big_rational(), witness, certified: false }
}

/// Distortion, lower bound and upper bound together, checking the sandwich
/// `distortion ≤ lower² ≤ M₃` whenever the upper bound is certified.
pub fn bounds_report(tau: &Rearrangement, budget: u64, seed: u64) -> Result<BoundsReport, NormsError> {
    bounds_report_with(tau, None, budget, seed)
}

/// As [`bounds_report`] with the distortion mode forced; `None` enumerates
/// exhaustively whenever the domain is within the cap.
pub fn bounds_report_with(
    tau: &Rearrangement,
    mode: Option<DistortionMode>,
    budget: u64,
    seed: u64,
) -> Result<BoundsReport, NormsError> {
    tau.require_total()?;
    let mode = mode.unwrap_or(if tau.len() <= EXHAUSTIVE_CAP {
        DistortionMode::Exhaustive
    } else {
        DistortionMode::Greedy { budget, seed }
    });
    let distortion = carleson_distortion(tau, mode)?;
    let lower = lower_bound_from(tau, &distortion, budget, seed);
    let upper = operator_norm_upper_bound_with(tau, budget, seed);
    if upper.certified && lower.value_sq > upper.bound_sq {
        return Err(NormsError::Sandwich { lower: ratio_string(&lower.value_sq), upper: ratio_string(&upper.bound_sq) });
    }
    Ok(BoundsReport { distortion, lower, upper })
}
