//! Carleson bound for unions of layers sitting between nested generations.

use super::DecomposeError;
use crate::bmo::carleson_units;
use crate::dyadic::{DyadicInterval, IntervalSet};
use crate::rational::DyadicRational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lemma2Outcome {
    /// `⟦⋃ V_k⟧`.
    pub union_constant: DyadicRational,
    /// `max_k ⟦V_k⟧`.
    pub max_layer_constant: DyadicRational,
}

fn violation(generation: usize, interval: DyadicInterval, reason: &str) -> DecomposeError {
    DecomposeError::Hypothesis { generation, interval, reason: reason.to_string() }
}

pub(crate) fn check_nesting(generations: &[IntervalSet]) -> Result<(), DecomposeError> {
    for (k, g) in generations.iter().enumerate() {
        if let Some(bad) = g.iter().find(|&i| g.has_strict_ancestor_of(i)) {
            return Err(violation(k, bad, "generation is not pairwise disjoint"));
        }
    }
    for (k, gk) in generations.iter().enumerate() {
        for (m, gm) in generations.iter().enumerate().skip(k + 1) {
            for later in gm.iter() {
                for earlier in gk.iter().filter(|e| e.intersects(later)) {
                    if !later.is_within(earlier) || later == earlier {
                        return Err(violation(m, later, &format!(
                            "intersects {earlier} of generation {k} without being strictly inside it"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn check_decay(generations: &[IntervalSet]) -> Result<(), DecomposeError> {
    for (k, gk) in generations.iter().enumerate() {
        for i in gk.iter() {
            for (l, later) in generations.iter().enumerate().skip(k + 1).map(|(m, g)| (m - k, g)) {
                let inside: u128 = later.iter().filter(|c| c.is_within(i)).map(DyadicInterval::units).sum();
                if inside > i.units() >> l {
                    return Err(violation(k, i, &format!("generation {} packs more than 2^-{l} of it", k + l)));
                }
            }
        }
    }
    Ok(())
}

/// Checks the layering hypotheses and returns `⟦⋃V_k⟧`, which is at most
/// `2 max_k ⟦V_k⟧`. Layers beyond the last generation must be empty.
pub fn lemma2_union_bound(generations: &[IntervalSet], layers: &[IntervalSet]) -> Result<Lemma2Outcome, DecomposeError> {
    check_nesting(generations)?;
    check_decay(generations)?;
    let empty = IntervalSet::new();
    for (k, v) in layers.iter().enumerate() {
        let here = generations.get(k).unwrap_or(&empty);
        let below = generations.get(k + 1).unwrap_or(&empty);
        for i in v.iter() {
            if !here.covers(i) {
                return Err(violation(k, i, "layer member is not below generation k"));
            }
            if below.covers(i) {
                return Err(violation(k, i, "layer member is below generation k+1"));
            }
        }
    }
    let union: IntervalSet = layers.iter().flat_map(|v| v.iter()).collect();
    let union_units = carleson_units(union.iter()).0;
    let max_units = layers.iter().map(|v| carleson_units(v.iter()).0).max().unwrap_or(0);
    if union_units > 2 * max_units {
        return Err(DecomposeError::Postcondition(format!(
            "union constant {} exceeds twice the largest layer constant {}",
            DyadicRational::from_units(union_units),
            DyadicRational::from_units(max_units)
        )));
    }
    Ok(Lemma2Outcome {
        union_constant: DyadicRational::from_units(union_units),
        max_layer_constant: DyadicRational::from_units(max_units),
    })
}
