//! Stopping-time decompositions of rearranged dyadic trees and the verifiers
//! for the homogeneity conditions they certify.

mod certificate;
mod coefficient;
mod generations;
mod jones;
mod lemma2;
mod main_lemma;

pub use certificate::{
    block_constants, verify_condition_s, verify_property_p, verify_weak_property_p, Block,
    CertificateConstants, ConditionSVerdict, Mode, PropertyPCertificate, StructuralFailure, Verdict,
};
pub use coefficient::{coefficient_split, CoefficientSplit, ScaleIdentity, SquaredGrid};
pub use generations::{default_a, generational_decomposition, GenerationNode, GenerationTree};
pub use jones::{jones_split, part_count_bound};
pub use lemma2::{lemma2_union_bound, Lemma2Outcome};
pub use main_lemma::{
    main_lemma, main_lemma_with, Color, Family, MainLemmaResult, Rule, SweepOrder, TraceStep,
};

use thiserror::Error;

use crate::dyadic::DyadicInterval;
use crate::rearrangement::RearrangementError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("parameter error: A = {0} must be at least 1")]
    ParameterA(String),
    #[error("parameter error: K must be positive")]
    ParameterK,
    #[error("domain error: {0}")]
    Domain(#[from] RearrangementError),
    #[error("starting interval {0} is not in the working family")]
    RootNotInFamily(DyadicInterval),
    #[error("hypothesis violated at generation {generation}, interval {interval}: {reason}")]
    Hypothesis { generation: usize, interval: DyadicInterval, reason: String },
    #[error("rationalization error: x_I² at {0} is not a multiple of 1/{1}")]
    OffGrid(DyadicInterval, u64),
    #[error("rationalization error: x_I² at {0} exceeds 1")]
    CoefficientTooLarge(DyadicInterval),
    #[error("internal postcondition failed: {0}")]
    Postcondition(String),
}
