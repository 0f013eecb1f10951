//! Exact finite-depth toolkit for rearrangements of the Haar system acting on
//! dyadic BMO: Carleson constants, stopping-time decompositions with
//! checkable certificates, norm bounds and example generators.

pub mod bmo;
pub mod cli;
pub mod decompose;
pub mod dyadic;
pub mod examples;
pub mod json;
pub mod norms;
pub mod rational;
pub mod rearrangement;

pub use bmo::{bmo_norm, bmo_norm_sq, carleson_constant, indicator_expansion, HaarExpansion};
pub use dyadic::{DyadicInterval, IntervalSet, Universe};
pub use rational::DyadicRational;
pub use rearrangement::Rearrangement;
