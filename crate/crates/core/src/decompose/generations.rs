//! Generational decomposition: the main lemma applied layer by layer.
//!
//! The preimage family is `P = {I ∈ Dom ∩ B : τ(I) ⊆ J}`. Generation 0 is the
//! maximal elements of `P`. Each generation node `I` runs the coloring over
//! `P` below `I`; its red intervals become error blocks `τ(C_I)`, and the
//! maximal members of `P` strictly inside a red interval form the next
//! generation. When `P` is a full subtree those are exactly the children of
//! the red intervals.

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;

use super::certificate::{block_constants, Block, Mode, PropertyPCertificate};
use super::main_lemma::{main_lemma, Family, MainLemmaResult};
use super::DecomposeError;
use crate::dyadic::{DyadicInterval, IntervalSet};
use crate::rearrangement::Rearrangement;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationNode {
    pub generation: usize,
    pub result: MainLemmaResult,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GenerationTree {
    pub generations: Vec<IntervalSet>,
    /// Nodes in construction order: by generation, then canonical order.
    pub nodes: Vec<GenerationNode>,
}

impl GenerationTree {
    /// Nesting: for `I ∈ G_k`, `K ∈ G_m` intersecting, `I ⊋ K` iff `k < m`.
    pub fn check_nesting(&self) -> Result<(), DecomposeError> {
        super::lemma2::check_nesting(&self.generations)
    }

    /// Decay: `Σ_{K∈G_{k+l}, K⊆I} |K| ≤ 2^-l |I|` for `I ∈ G_k`.
    pub fn check_decay(&self) -> Result<(), DecomposeError> {
        super::lemma2::check_decay(&self.generations)
    }

    /// Line-oriented log of every rule application, grouped by node.
    pub fn trace_lines(&self) -> Vec<String> {
        self.nodes
            .iter()
            .flat_map(|n| {
                let root = n.result.root;
                let g = n.generation;
                n.result.trace.iter().map(move |s| format!("g{g} {root} {s}"))
            })
            .collect()
    }
}

/// `A = 2 M` for a Carleson-preservation bound `M`.
pub fn default_a(m_input: &BigRational) -> BigRational {
    m_input * BigRational::from_integer(BigInt::from(2))
}

pub fn generational_decomposition(
    tau: &Rearrangement,
    j: DyadicInterval,
    family: Option<&IntervalSet>,
    a: &BigRational,
) -> Result<(PropertyPCertificate, GenerationTree), DecomposeError> {
    tau.universe().check(j).map_err(|_| DecomposeError::RootNotInFamily(j))?;
    if let Some(b) = family {
        if let Some(outside) = b.iter().find(|i| !tau.in_domain(*i)) {
            return Err(tau.image_of(outside).unwrap_err().into());
        }
    }
    let preimages: IntervalSet = tau
        .pairs()
        .filter(|(from, to)| to.is_within(j) && family.is_none_or(|b| b.contains(from)))
        .map(|(from, _)| from)
        .collect();

    let mut tree = GenerationTree::default();
    let mut current = preimages.maximal_elements();
    while !current.is_empty() {
        let generation = tree.generations.len();
        let results: Vec<MainLemmaResult> = current
            .iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|root| main_lemma(tau, root, a, Family::Within(&preimages)))
            .collect::<Result<_, _>>()?;

        let reds: IntervalSet = results.iter().flat_map(|r| r.red.iter()).collect();
        let next = preimages
            .iter()
            .filter(|&i| reds.has_strict_ancestor_of(i))
            .collect::<IntervalSet>()
            .maximal_elements();

        tree.generations.push(current);
        tree.nodes.extend(results.into_iter().map(|result| GenerationNode { generation, result }));
        current = next;
    }

    let blocks: Vec<Block> = tree
        .nodes
        .iter()
        .map(|n| Block {
            preimage: n.result.green.clone(),
            error: tau.map_collection(&n.result.red).expect("reds lie in the domain"),
        })
        .collect();
    let constants = block_constants(tau, j, &blocks);
    let mode = if family.is_some() { Mode::Weak } else { Mode::Strong };
    Ok((PropertyPCertificate { root: j, mode, blocks, constants }, tree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{verify_property_p, verify_weak_property_p};
    use crate::dyadic::Universe;
    use crate::examples::random_rearrangement;
    use crate::norms::carleson_distortion_exhaustive;
    use crate::rational::DyadicRational;
    use num_traits::One;

    fn int(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    #[test]
    fn identity_gives_one_block() {
        let u = Universe::new(4).unwrap();
        let tau = Rearrangement::identity(u);
        let (cert, tree) = generational_decomposition(&tau, DyadicInterval::ROOT, None, &int(2)).unwrap();
        assert_eq!(cert.blocks.len(), 1);
        assert_eq!(cert.blocks[0].preimage, u.all());
        assert!(cert.blocks[0].error.is_empty());
        assert_eq!(cert.constants.error_carleson, DyadicRational::zero());
        assert!(cert.constants.homogeneity <= BigRational::one());
        assert_eq!(cert.constants.mass, DyadicRational::one());
        assert_eq!(tree.generations.len(), 1);

        let v = verify_property_p(&tau, DyadicInterval::ROOT, &cert);
        assert!(v.holds());
        assert_eq!(v.constants.as_ref(), Some(&cert.constants));
    }

    #[test]
    fn level_preserving_single_generation() {
        let u = Universe::new(4).unwrap();
        for seed in 0..20 {
            let tau = random_rearrangement(u, seed, true);
            for j in [DyadicInterval::ROOT, DyadicInterval::new(2, 1).unwrap()] {
                let (cert, tree) = generational_decomposition(&tau, j, None, &int(2)).unwrap();
                assert_eq!(tree.generations.len(), 1);
                assert!(cert.blocks.iter().all(|b| b.error.is_empty()));
                assert!(verify_property_p(&tau, j, &cert).holds());
                if j == DyadicInterval::ROOT {
                    assert_eq!(cert.constants.mass, DyadicRational::one());
                }
            }
        }
    }

    #[test]
    fn certificates_verify_and_satisfy_bounds() {
        let u = Universe::new(3).unwrap();
        for seed in 0..40 {
            let tau = random_rearrangement(u, seed, false);
            let m_cc = carleson_distortion_exhaustive(&tau).unwrap().ratio;
            let a = default_a(&m_cc);
            let two_m = &a;
            for j in u.iter() {
                let (cert, tree) = generational_decomposition(&tau, j, None, &a).unwrap();
                tree.check_nesting().unwrap();
                tree.check_decay().unwrap();
                let v = verify_property_p(&tau, j, &cert);
                assert!(v.holds(), "{:?}", v.structural);
                let c = v.constants.unwrap();
                assert_eq!(c, cert.constants);
                assert!(c.error_carleson.to_big_rational() <= *two_m);
                assert!(c.mass.to_big_rational() <= two_m * c.weak_sup.to_big_rational());
                assert!(c.homogeneity <= a);
            }
        }
    }

    #[test]
    fn weak_mode_on_subfamilies() {
        let u = Universe::new(3).unwrap();
        for seed in 0..30 {
            let tau = random_rearrangement(u, seed, false);
            let m_cc = carleson_distortion_exhaustive(&tau).unwrap().ratio;
            let a = default_a(&m_cc);
            let b: IntervalSet = u.iter().filter(|i| (i.index() * 7 + seed) % 3 != 1).collect();
            for j in u.iter() {
                let (cert, tree) = generational_decomposition(&tau, j, Some(&b), &a).unwrap();
                assert_eq!(cert.mode, Mode::Weak);
                tree.check_nesting().unwrap();
                tree.check_decay().unwrap();
                let v = verify_weak_property_p(&tau, &b, j, &cert);
                assert!(v.holds(), "{:?}", v.structural);
                let c = v.constants.unwrap();
                assert!(c.error_carleson.to_big_rational() <= a);
                assert!(c.mass.to_big_rational() <= &a * c.weak_sup.to_big_rational());
            }
        }
    }

    #[test]
    fn trace_lines_are_prefixed_by_node() {
        let u = Universe::new(2).unwrap();
        let tau = Rearrangement::swap(u, DyadicInterval::new(1, 0).unwrap(), DyadicInterval::new(2, 0).unwrap()).unwrap();
        let (_, tree) = generational_decomposition(&tau, DyadicInterval::ROOT, None, &int(4)).unwrap();
        assert_eq!(tree.trace_lines()[0], "g0 [0,0] rule1 [1,0] green");
    }
}
