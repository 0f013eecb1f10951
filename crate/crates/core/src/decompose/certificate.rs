//! Decomposition certificates and the verifiers that compute the minimal
//! constants for each clause of the homogeneity conditions.
//!
//! A certificate for `(τ, J)` splits the target family (`τ(Dom) ∩ J`, or
//! `τ(B) ∩ J` in weak mode) into blocks `τ(L_i) ∪ E_i`. The clause constants
//! are:
//!
//! * `error_carleson = ⟦⋃ E_i⟧`,
//! * `homogeneity = max_i max_{I∈L_i} (|τ(I)|/|I|) |L_i*| / (|τ(L_i)*| + |E_i*|)`,
//! * `mass = Σ_i |τ(L_i)*| / |J|`,
//! * `weak_sup = max_i ⟦τ⁻¹(max τ(L_i))⟧` (zero with no blocks).

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::bmo::carleson_units;
use crate::dyadic::{DyadicInterval, IntervalSet};
use crate::rational::{fraction, DyadicRational};
use crate::rearrangement::Rearrangement;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Strong,
    Weak,
}

/// One block: the preimage side `L_i` and the image-side error part `E_i`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Block {
    pub preimage: IntervalSet,
    pub error: IntervalSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertificateConstants {
    pub error_carleson: DyadicRational,
    pub homogeneity: BigRational,
    pub mass: DyadicRational,
    pub weak_sup: DyadicRational,
}

impl CertificateConstants {
    /// Smallest `M` for which the weak mass clause
    /// `Σ|τ(L_i)*| ≤ M |J| weak_sup` holds.
    pub fn weak_mass_ratio(&self) -> BigRational {
        if self.weak_sup.is_zero() {
            BigRational::zero()
        } else {
            self.mass.to_big_rational() / self.weak_sup.to_big_rational()
        }
    }

    /// Smallest `M` satisfying every clause of the chosen mode.
    pub fn overall(&self, mode: Mode) -> BigRational {
        let mass = match mode {
            Mode::Strong => self.mass.to_big_rational(),
            Mode::Weak => self.weak_mass_ratio(),
        };
        [self.error_carleson.to_big_rational(), self.homogeneity.clone(), mass]
            .into_iter()
            .max()
            .expect("three clauses")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyPCertificate {
    pub root: DyadicInterval,
    pub mode: Mode,
    pub blocks: Vec<Block>,
    pub constants: CertificateConstants,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructuralFailure {
    Repeated(DyadicInterval),
    Missing(DyadicInterval),
    Extraneous(DyadicInterval),
    NotInDomain(DyadicInterval),
    NotInFamily(DyadicInterval),
}

impl StructuralFailure {
    pub fn interval(&self) -> DyadicInterval {
        match *self {
            Self::Repeated(i)
            | Self::Missing(i)
            | Self::Extraneous(i)
            | Self::NotInDomain(i)
            | Self::NotInFamily(i) => i,
        }
    }
}

impl fmt::Display for StructuralFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Repeated(i) => write!(f, "blocks are not disjoint: {i} appears more than once"),
            Self::Missing(i) => write!(f, "blocks do not cover the target family: {i} is missing"),
            Self::Extraneous(i) => write!(f, "{i} is not in the target family"),
            Self::NotInDomain(i) => write!(f, "{i} is not in the domain of τ"),
            Self::NotInFamily(i) => write!(f, "{i} is not in the family B"),
        }
    }
}

/// Outcome of a Property P or weak-Property P check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub structural: Result<(), StructuralFailure>,
    pub constants: Option<CertificateConstants>,
    pub overall: Option<BigRational>,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.structural.is_ok()
    }

    fn failed(f: StructuralFailure) -> Self {
        Self { structural: Err(f), constants: None, overall: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionSVerdict {
    pub structural: Result<(), StructuralFailure>,
    pub error_carleson: Option<DyadicRational>,
    pub homogeneity: Option<BigRational>,
    pub overall: Option<BigRational>,
}

impl ConditionSVerdict {
    pub fn holds(&self) -> bool {
        self.structural.is_ok()
    }
}

fn image_cover_units(tau: &Rearrangement, set: &IntervalSet) -> u128 {
    set.iter().filter_map(|i| tau.apply(i)).collect::<IntervalSet>().covered_units()
}

/// `max_{I∈L} (|τ(I)|/|I|) · |L*| / denom_units`.
fn block_homogeneity(tau: &Rearrangement, preimage: &IntervalSet, denom_units: u128) -> BigRational {
    let Some(worst) = preimage
        .iter()
        .map(|i| (tau.apply(i).expect("checked domain").depth() as i32, i.depth() as i32))
        .map(|(ti, i)| i - ti)
        .max()
    else {
        return BigRational::zero();
    };
    // |τ(I)|/|I| = 2^(depth I - depth τ(I)).
    let scale = if worst >= 0 {
        BigRational::from_integer(BigInt::from(1) << worst as u32)
    } else {
        BigRational::new(1.into(), BigInt::from(1) << (-worst) as u32)
    };
    scale * fraction(preimage.covered_units(), denom_units)
}

/// Clause constants for the given blocks, assumed structurally valid.
pub fn block_constants(tau: &Rearrangement, root: DyadicInterval, blocks: &[Block]) -> CertificateConstants {
    let all_errors: IntervalSet = blocks.iter().flat_map(|b| b.error.iter()).collect();
    let error_carleson = DyadicRational::from_units(carleson_units(all_errors.iter()).0);

    let mut homogeneity = BigRational::zero();
    let mut mass_units = 0u128;
    let mut weak_sup = 0u128;
    for b in blocks {
        if b.preimage.is_empty() {
            continue;
        }
        let image: IntervalSet = b.preimage.iter().filter_map(|i| tau.apply(i)).collect();
        let image_cover = image.covered_units();
        mass_units += image_cover;
        let h = block_homogeneity(tau, &b.preimage, image_cover + b.error.covered_units());
        homogeneity = homogeneity.max(h);
        let tops: IntervalSet = image.maximal_elements().iter().filter_map(|i| tau.preimage_of(i)).collect();
        weak_sup = weak_sup.max(carleson_units(tops.iter()).0);
    }
    CertificateConstants {
        error_carleson,
        homogeneity,
        mass: DyadicRational::from_units(mass_units).shl(root.depth() as u32),
        weak_sup: DyadicRational::from_units(weak_sup),
    }
}

/// Checks that `τ(L_i)` and `E_i` partition `target`.
fn check_partition(
    tau: &Rearrangement,
    target: &IntervalSet,
    blocks: &[Block],
    family: Option<&IntervalSet>,
) -> Result<(), StructuralFailure> {
    let mut seen: BTreeMap<DyadicInterval, ()> = BTreeMap::new();
    for b in blocks {
        for i in b.preimage.iter() {
            let t = tau.apply(i).ok_or(StructuralFailure::NotInDomain(i))?;
            if let Some(f) = family {
                if !f.contains(&i) {
                    return Err(StructuralFailure::NotInFamily(i));
                }
            }
            if seen.insert(t, ()).is_some() {
                return Err(StructuralFailure::Repeated(t));
            }
        }
        for e in b.error.iter() {
            if seen.insert(e, ()).is_some() {
                return Err(StructuralFailure::Repeated(e));
            }
        }
    }
    if let Some(extra) = seen.keys().find(|i| !target.contains(i)) {
        return Err(StructuralFailure::Extraneous(*extra));
    }
    if let Some(missing) = target.iter().find(|i| !seen.contains_key(i)) {
        return Err(StructuralFailure::Missing(missing));
    }
    Ok(())
}

fn verify(
    tau: &Rearrangement,
    root: DyadicInterval,
    target: &IntervalSet,
    certificate: &PropertyPCertificate,
    family: Option<&IntervalSet>,
    mode: Mode,
) -> Verdict {
    if let Err(f) = check_partition(tau, target, &certificate.blocks, family) {
        return Verdict::failed(f);
    }
    let constants = block_constants(tau, root, &certificate.blocks);
    let overall = constants.overall(mode);
    Verdict { structural: Ok(()), constants: Some(constants), overall: Some(overall) }
}

/// Property P check of a certificate for `τ(Dom) ∩ J`.
pub fn verify_property_p(tau: &Rearrangement, j: DyadicInterval, certificate: &PropertyPCertificate) -> Verdict {
    let target = tau.image().restrict(j);
    verify(tau, j, &target, certificate, None, Mode::Strong)
}

/// Weak-Property P check of a certificate for `τ(B) ∩ J`.
pub fn verify_weak_property_p(
    tau: &Rearrangement,
    family: &IntervalSet,
    j: DyadicInterval,
    certificate: &PropertyPCertificate,
) -> Verdict {
    if let Some(outside) = family.iter().find(|i| !tau.in_domain(*i)) {
        return Verdict::failed(StructuralFailure::NotInDomain(outside));
    }
    let target = tau.map_collection(family).expect("domain checked").restrict(j);
    verify(tau, j, &target, certificate, Some(family), Mode::Weak)
}

/// Condition S check of a single split `τ(Dom) ∩ J = τ(L) ∪ E`.
pub fn verify_condition_s(
    tau: &Rearrangement,
    j: DyadicInterval,
    preimage: &IntervalSet,
    error: &IntervalSet,
) -> ConditionSVerdict {
    let target = tau.image().restrict(j);
    let block = Block { preimage: preimage.clone(), error: error.clone() };
    if let Err(f) = check_partition(tau, &target, std::slice::from_ref(&block), None) {
        return ConditionSVerdict { structural: Err(f), error_carleson: None, homogeneity: None, overall: None };
    }
    let error_carleson = DyadicRational::from_units(carleson_units(error.iter()).0);
    let homogeneity = if preimage.is_empty() {
        BigRational::zero()
    } else {
        block_homogeneity(tau, preimage, image_cover_units(tau, preimage))
    };
    let overall = homogeneity.clone().max(error_carleson.to_big_rational());
    ConditionSVerdict {
        structural: Ok(()),
        error_carleson: Some(error_carleson),
        homogeneity: Some(homogeneity),
        overall: Some(overall),
    }
}
