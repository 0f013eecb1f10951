//! Splitting a collection into parts of Carleson constant at most 4 by
//! repeatedly peeling off the members of low local density.

use crate::bmo::{carleson_units, packing_sums};
use crate::dyadic::IntervalSet;
use crate::rational::UNIT_EXP;

const DENSITY_CAP: u128 = 4 << UNIT_EXP;

/// Peels `part = {I ∈ R : (1/|I|) Σ_{K∈R, K⊆I} |K| ≤ 4}` from the remainder
/// `R` until nothing is left. Every part has Carleson constant at most 4, and
/// the parts partition the input.
pub fn jones_split(set: &IntervalSet) -> Vec<IntervalSet> {
    let mut parts = Vec::new();
    let mut rest = set.clone();
    while !rest.is_empty() {
        let sums = packing_sums(rest.iter());
        let part: IntervalSet = rest.iter().filter(|i| sums[i] << i.depth() <= DENSITY_CAP).collect();
        debug_assert!(!part.is_empty(), "minimal members always have density 1");
        rest = rest.difference(&part);
        parts.push(part);
    }
    parts
}

/// `⌈⟦B⟧⌉`, the part count the peeling is expected to stay within.
pub fn part_count_bound(set: &IntervalSet) -> usize {
    let units = carleson_units(set.iter()).0;
    units.div_ceil(1u128 << UNIT_EXP) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmo::carleson_constant;
    use crate::dyadic::{DyadicInterval, Universe};
    use crate::rational::DyadicRational;
    use proptest::prelude::*;

    fn iv(n: u32, k: u64) -> DyadicInterval {
        DyadicInterval::new(n, k).unwrap()
    }

    #[test]
    fn disjoint_family_is_one_part() {
        let b: IntervalSet = [iv(2, 0), iv(2, 1), iv(1, 1)].into_iter().collect();
        assert_eq!(jones_split(&b), vec![b]);
    }

    #[test]
    fn full_tree_of_depth_seven() {
        let u = Universe::new(7).unwrap();
        let parts = jones_split(&u.all());
        assert_eq!(parts.len(), 2);
        let bottom: IntervalSet = u.iter().filter(|i| i.depth() >= 4).collect();
        let top: IntervalSet = u.iter().filter(|i| i.depth() < 4).collect();
        assert_eq!(parts[0], bottom);
        assert_eq!(parts[1], top);
        for p in &parts {
            assert_eq!(carleson_constant(p).constant, DyadicRational::integer(4));
        }
        assert_eq!(part_count_bound(&u.all()), 8);
    }

    #[test]
    fn short_chain_is_one_part() {
        let b: IntervalSet = [DyadicInterval::ROOT, iv(1, 0), iv(2, 0)].into_iter().collect();
        assert_eq!(jones_split(&b).len(), 1);
    }

    proptest! {
        #[test]
        fn parts_partition_and_are_thin(v in proptest::collection::vec((0u32..=6, any::<u64>()), 1..80)) {
            let b: IntervalSet = v.into_iter().map(|(n, k)| iv(n, k % (1 << n))).collect();
            let parts = jones_split(&b);
            let mut union = IntervalSet::new();
            for p in &parts {
                prop_assert!(p.is_disjoint_from(&union));
                union = union.union(p);
                prop_assert!(carleson_constant(p).constant <= DyadicRational::integer(4));
            }
            prop_assert_eq!(union, b);
        }
    }
}
