//! Splitting a rationalized expansion into `K` thin collections.
//!
//! With `x_I² = k_I / K`, let `v_n` list the intervals of length `2^-n` whose
//! image lies in `J`, ordered by left endpoint and each repeated `k_I` times.
//! The entry at 1-based position `p` goes to class `((p - 1) mod K) + 1`.
//! Entries under any fixed interval are consecutive in `v_n`, so each class
//! receives at most `1 + (1/K) Σ k_I` of them per scale, which makes every
//! class `(2 + ‖x‖²)`-Carleson.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::DecomposeError;
use crate::bmo::{carleson_units, norm_sq_of_squares, HaarExpansion};
use crate::dyadic::{DyadicInterval, IntervalSet};
use crate::rational::DyadicRational;
use crate::rearrangement::Rearrangement;

/// Squared coefficients on the grid `1/K`: `x_I² = k_I / K` with `k_I ≤ K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquaredGrid {
    denominator: u64,
    weights: BTreeMap<DyadicInterval, u64>,
}

impl SquaredGrid {
    pub fn new(denominator: u64, weights: impl IntoIterator<Item = (DyadicInterval, u64)>) -> Result<Self, DecomposeError> {
        if denominator == 0 {
            return Err(DecomposeError::ParameterK);
        }
        let mut map = BTreeMap::new();
        for (i, k) in weights {
            if k > denominator {
                return Err(DecomposeError::CoefficientTooLarge(i));
            }
            if k > 0 {
                map.insert(i, k);
            }
        }
        Ok(Self { denominator, weights: map })
    }

    /// Exact grid weights of `x`; fails on the first `x_I²` off the grid.
    pub fn from_expansion(x: &HaarExpansion, denominator: u64) -> Result<Self, DecomposeError> {
        if denominator == 0 {
            return Err(DecomposeError::ParameterK);
        }
        let k = BigRational::from_integer(BigInt::from(denominator));
        let mut weights = Vec::new();
        for (i, c) in x.iter() {
            let scaled = c * c * &k;
            if !scaled.is_integer() {
                return Err(DecomposeError::OffGrid(i, denominator));
            }
            let w = scaled.to_integer().to_u64().ok_or(DecomposeError::CoefficientTooLarge(i))?;
            weights.push((i, w));
        }
        Self::new(denominator, weights)
    }

    /// Rounds each `x_I²` down to the grid, capping at 1.
    pub fn round_down(x: &HaarExpansion, denominator: u64) -> Result<Self, DecomposeError> {
        if denominator == 0 {
            return Err(DecomposeError::ParameterK);
        }
        let k = BigRational::from_integer(BigInt::from(denominator));
        let weights = x.iter().map(|(i, c)| {
            let w = (c * c * &k).floor().to_integer().to_u64().unwrap_or(u64::MAX);
            (i, w.min(denominator))
        });
        Self::new(denominator, weights)
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn weight(&self, interval: DyadicInterval) -> u64 {
        self.weights.get(&interval).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadicInterval, u64)> + '_ {
        self.weights.iter().map(|(i, k)| (*i, *k))
    }

    /// `I ↦ k_I / K`.
    pub fn squares(&self) -> BTreeMap<DyadicInterval, BigRational> {
        let k = BigInt::from(self.denominator);
        self.iter().map(|(i, w)| (i, BigRational::new(BigInt::from(w), k.clone()))).collect()
    }

    pub fn norm_sq(&self) -> BigRational {
        norm_sq_of_squares(&self.squares()).0
    }
}

/// Both sides of the per-scale identity `Σ k_I |τ(I)| = Σ_i Σ_{I∈E_i} |τ(I)|`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleIdentity {
    pub depth: u8,
    pub weighted: DyadicRational,
    pub distributed: DyadicRational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientSplit {
    pub classes: Vec<IntervalSet>,
    pub class_constants: Vec<DyadicRational>,
    pub scales: Vec<ScaleIdentity>,
}

impl CoefficientSplit {
    pub fn identity_holds(&self) -> bool {
        self.scales.iter().all(|s| s.weighted == s.distributed)
    }
}

pub fn coefficient_split(
    grid: &SquaredGrid,
    tau: &Rearrangement,
    j: DyadicInterval,
) -> Result<CoefficientSplit, DecomposeError> {
    let classes_n = grid.denominator as usize;
    let mut scales_in: BTreeMap<u8, Vec<(DyadicInterval, u64)>> = BTreeMap::new();
    for (i, k) in grid.iter() {
        if tau.image_of(i)?.is_within(j) {
            scales_in.entry(i.depth()).or_default().push((i, k));
        }
    }

    let mut classes = vec![IntervalSet::new(); classes_n];
    let mut scales = Vec::new();
    for (depth, entries) in &scales_in {
        // Same depth, so index order is left-endpoint order.
        let mut position = 0usize;
        let mut weighted = 0u128;
        for &(i, k) in entries {
            let t = tau.apply(i).expect("checked").units();
            weighted += k as u128 * t;
            for _ in 0..k {
                classes[position % classes_n].insert(i);
                position += 1;
            }
        }
        let distributed: u128 = classes
            .iter()
            .flat_map(|c| c.iter().filter(|i| i.depth() == *depth))
            .map(|i| tau.apply(i).expect("checked").units())
            .sum();
        scales.push(ScaleIdentity {
            depth: *depth,
            weighted: DyadicRational::from_units(weighted),
            distributed: DyadicRational::from_units(distributed),
        });
    }

    let class_constants: Vec<DyadicRational> =
        classes.iter().map(|c| DyadicRational::from_units(carleson_units(c.iter()).0)).collect();
    let split = CoefficientSplit { classes, class_constants, scales };

    if !split.identity_holds() {
        return Err(DecomposeError::Postcondition("per-scale mass identity fails".into()));
    }
    let limit = grid.norm_sq() + BigRational::from_integer(2.into());
    if let Some(bad) = split.class_constants.iter().position(|c| c.to_big_rational() > limit) {
        return Err(DecomposeError::Postcondition(format!(
            "class {} has Carleson constant {} above 2 + ‖x‖²",
            bad + 1,
            split.class_constants[bad]
        )));
    }
    Ok(split)
}
