//! JSON wire formats. Intervals are `[n, k]`; exact quantities are `"p/q"`
//! strings; only documented float fields carry floats.

use num_rational::BigRational;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bmo::{CarlesonReport, HaarExpansion};
use crate::decompose::{
    block_constants, Block, CertificateConstants, CoefficientSplit, GenerationTree, Mode, PropertyPCertificate,
    StructuralFailure, Verdict,
};
use crate::dyadic::{DyadicError, DyadicInterval, IntervalSet, Universe};
use crate::examples::{Section5Params, StageParams, StageReport, Truncation};
use crate::norms::BoundsReport;
use crate::rational::{parse_ratio, ratio_string, DyadicRational, ParseRationalError};
use crate::rearrangement::{Rearrangement, RearrangementError};

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Rearrangement(#[from] RearrangementError),
    #[error(transparent)]
    Rational(#[from] ParseRationalError),
}

impl From<serde_json::Error> for JsonError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep only the message.
        let message = match message.rfind(" at line ") {
            Some(cut) => message[..cut].to_string(),
            None => message,
        };
        JsonError::Syntax { line: e.line(), column: e.column(), message }
    }
}

pub type IntervalWire = (u32, u64);

pub fn interval_wire(i: DyadicInterval) -> IntervalWire {
    (i.depth() as u32, i.index())
}

fn interval_from(w: IntervalWire, universe: Universe) -> Result<DyadicInterval, JsonError> {
    let i = DyadicInterval::new(w.0, w.1)?;
    universe.check(i)?;
    Ok(i)
}

pub fn set_wire(set: &IntervalSet) -> Vec<IntervalWire> {
    set.iter().map(interval_wire).collect()
}

fn set_from(w: &[IntervalWire], universe: Universe) -> Result<IntervalSet, JsonError> {
    w.iter().map(|&i| interval_from(i, universe)).collect()
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T, JsonError> {
    Ok(serde_json::from_str(text)?)
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("wire types serialize");
    s.push('\n');
    s
}

pub fn parse_interval_set(text: &str, universe: Universe) -> Result<IntervalSet, JsonError> {
    let w: Vec<IntervalWire> = parse(text)?;
    set_from(&w, universe)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientWire {
    pub interval: IntervalWire,
    pub coeff: String,
}

pub fn expansion_wire(x: &HaarExpansion) -> Vec<CoefficientWire> {
    x.iter().map(|(i, c)| CoefficientWire { interval: interval_wire(i), coeff: ratio_string(c) }).collect()
}

pub fn parse_expansion(text: &str, universe: Universe) -> Result<HaarExpansion, JsonError> {
    let w: Vec<CoefficientWire> = parse(text)?;
    let mut x = HaarExpansion::new();
    let mut seen = IntervalSet::new();
    for c in w {
        let i = interval_from(c.interval, universe)?;
        if !seen.insert(i) {
            return Err(JsonError::Invalid(format!("duplicate coefficient for {i}")));
        }
        x.set(i, parse_ratio(&c.coeff)?);
    }
    Ok(x)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapEntryWire {
    pub from: IntervalWire,
    pub to: IntervalWire,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RearrangementWire {
    pub depth: u32,
    #[serde(default)]
    pub total: bool,
    pub map: Vec<MapEntryWire>,
}

pub fn rearrangement_wire(tau: &Rearrangement) -> RearrangementWire {
    RearrangementWire {
        depth: tau.universe().max_depth() as u32,
        total: tau.is_total(),
        map: tau.pairs().map(|(a, b)| MapEntryWire { from: interval_wire(a), to: interval_wire(b) }).collect(),
    }
}

/// Parses and validates a map; `depth`, when given, must match the file.
pub fn parse_rearrangement(text: &str, depth: Option<u8>) -> Result<Rearrangement, JsonError> {
    let w: RearrangementWire = parse(text)?;
    if let Some(d) = depth {
        if d as u32 != w.depth {
            return Err(JsonError::Invalid(format!("map declares depth {} but the universe has depth {d}", w.depth)));
        }
    }
    let universe = Universe::new(w.depth)?;
    let mut pairs = Vec::with_capacity(w.map.len());
    for e in &w.map {
        pairs.push((interval_from(e.from, universe)?, interval_from(e.to, universe)?));
    }
    let tau = Rearrangement::validate(universe, pairs)?;
    if w.total {
        tau.require_total()?;
    }
    Ok(tau)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockWire {
    #[serde(rename = "L")]
    pub preimage: Vec<IntervalWire>,
    #[serde(rename = "E")]
    pub error: Vec<IntervalWire>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsWire {
    pub error_carleson: String,
    pub homogeneity: String,
    pub mass: String,
    pub weak_sup: Option<String>,
}

pub fn constants_wire(c: &CertificateConstants) -> ConstantsWire {
    ConstantsWire {
        error_carleson: c.error_carleson.to_string(),
        homogeneity: ratio_string(&c.homogeneity),
        mass: c.mass.to_string(),
        weak_sup: Some(c.weak_sup.to_string()),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateWire {
    pub root: IntervalWire,
    pub mode: String,
    pub blocks: Vec<BlockWire>,
    #[serde(default)]
    pub constants: Option<ConstantsWire>,
    /// Generations of the decomposition that produced the certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<Vec<Vec<IntervalWire>>>,
}

pub fn certificate_wire(cert: &PropertyPCertificate, tree: Option<&GenerationTree>) -> CertificateWire {
    CertificateWire {
        root: interval_wire(cert.root),
        mode: match cert.mode {
            Mode::Strong => "strong",
            Mode::Weak => "weak",
        }
        .into(),
        blocks: cert
            .blocks
            .iter()
            .map(|b| BlockWire { preimage: set_wire(&b.preimage), error: set_wire(&b.error) })
            .collect(),
        constants: Some(constants_wire(&cert.constants)),
        generations: tree.map(|t| t.generations.iter().map(set_wire).collect()),
    }
}

/// A certificate as read from disk: constants are recomputed from the
/// blocks, and the constants it claimed, if any, are kept alongside.
pub struct CertificateFile {
    pub certificate: PropertyPCertificate,
    pub claimed: Option<ConstantsWire>,
}

pub fn parse_certificate(text: &str, tau: &Rearrangement) -> Result<CertificateFile, JsonError> {
    let w: CertificateWire = parse(text)?;
    let universe = tau.universe();
    let root = interval_from(w.root, universe)?;
    let mode = match w.mode.as_str() {
        "strong" => Mode::Strong,
        "weak" => Mode::Weak,
        other => return Err(JsonError::Invalid(format!("unknown mode {other:?}, expected \"strong\" or \"weak\""))),
    };
    let mut blocks = Vec::with_capacity(w.blocks.len());
    for b in &w.blocks {
        blocks.push(Block { preimage: set_from(&b.preimage, universe)?, error: set_from(&b.error, universe)? });
    }
    if let Some(c) = &w.constants {
        for s in [&c.error_carleson, &c.homogeneity, &c.mass].into_iter().chain(c.weak_sup.as_ref()) {
            parse_ratio(s)?;
        }
    }
    let constants = block_constants(tau, root, &blocks);
    Ok(CertificateFile { certificate: PropertyPCertificate { root, mode, blocks, constants }, claimed: w.constants })
}

#[derive(Serialize)]
pub struct CarlesonWire {
    pub constant: String,
    pub witness: Option<IntervalWire>,
}

pub fn carleson_wire(r: &CarlesonReport) -> CarlesonWire {
    CarlesonWire { constant: r.constant.to_string(), witness: r.witness.map(interval_wire) }
}

#[derive(Serialize)]
pub struct BmoWire {
    pub norm_sq: String,
    pub norm: f64,
    pub witness: Option<IntervalWire>,
}

#[derive(Serialize)]
pub struct FailureWire {
    pub kind: &'static str,
    pub interval: IntervalWire,
    pub message: String,
}

pub fn failure_wire(f: &StructuralFailure) -> FailureWire {
    let kind = match f {
        StructuralFailure::Repeated(_) => "repeated",
        StructuralFailure::Missing(_) => "missing",
        StructuralFailure::Extraneous(_) => "extraneous",
        StructuralFailure::NotInDomain(_) => "not_in_domain",
        StructuralFailure::NotInFamily(_) => "not_in_family",
    };
    FailureWire { kind, interval: interval_wire(f.interval()), message: f.to_string() }
}

#[derive(Serialize)]
pub struct VerdictWire {
    pub holds: bool,
    pub structural: Option<FailureWire>,
    pub constants: Option<ConstantsWire>,
    pub overall: Option<String>,
    /// Whether the constants stored in the certificate equal the recomputed ones.
    pub matches_claimed: Option<bool>,
}

pub fn verdict_wire(v: &Verdict, claimed: Option<&ConstantsWire>) -> VerdictWire {
    let constants = v.constants.as_ref().map(constants_wire);
    let matches_claimed = match (claimed, &constants) {
        (Some(c), Some(ours)) => Some(same_constants(c, ours)),
        _ => None,
    };
    VerdictWire {
        holds: v.holds(),
        structural: v.structural.as_ref().err().map(failure_wire),
        constants,
        overall: v.overall.as_ref().map(ratio_string),
        matches_claimed,
    }
}

fn same_constants(claimed: &ConstantsWire, ours: &ConstantsWire) -> bool {
    let eq = |a: &str, b: &str| matches!((parse_ratio(a), parse_ratio(b)), (Ok(x), Ok(y)) if x == y);
    eq(&claimed.error_carleson, &ours.error_carleson)
        && eq(&claimed.homogeneity, &ours.homogeneity)
        && eq(&claimed.mass, &ours.mass)
        && match (&claimed.weak_sup, &ours.weak_sup) {
            (Some(a), Some(b)) => eq(a, b),
            _ => true,
        }
}

#[derive(Serialize)]
pub struct PartWire {
    pub intervals: Vec<IntervalWire>,
    pub constant: String,
}

fn part_wire(set: &IntervalSet, constant: &DyadicRational) -> PartWire {
    PartWire { intervals: set_wire(set), constant: constant.to_string() }
}

#[derive(Serialize)]
pub struct JonesWire {
    pub input_constant: String,
    pub parts: Vec<PartWire>,
    pub part_count: usize,
    pub part_count_bound: usize,
    pub within_bound: bool,
}

pub fn jones_wire(input: &IntervalSet, parts: &[IntervalSet]) -> JonesWire {
    let bound = crate::decompose::part_count_bound(input);
    JonesWire {
        input_constant: crate::bmo::carleson_constant(input).constant.to_string(),
        parts: parts.iter().map(|p| part_wire(p, &crate::bmo::carleson_constant(p).constant)).collect(),
        part_count: parts.len(),
        part_count_bound: bound,
        within_bound: parts.len() <= bound,
    }
}

#[derive(Serialize)]
pub struct ScaleWire {
    pub depth: u8,
    pub weighted: String,
    pub distributed: String,
}

#[derive(Serialize)]
pub struct CoefficientSplitWire {
    #[serde(rename = "K")]
    pub k: u64,
    pub root: IntervalWire,
    pub norm_sq: String,
    pub classes: Vec<PartWire>,
    pub scales: Vec<ScaleWire>,
    pub identity_holds: bool,
}

pub fn coefficient_split_wire(k: u64, root: DyadicInterval, norm_sq: &BigRational, s: &CoefficientSplit) -> CoefficientSplitWire {
    CoefficientSplitWire {
        k,
        root: interval_wire(root),
        norm_sq: ratio_string(norm_sq),
        classes: s.classes.iter().zip(&s.class_constants).map(|(c, k)| part_wire(c, k)).collect(),
        scales: s
            .scales
            .iter()
            .map(|x| ScaleWire { depth: x.depth, weighted: x.weighted.to_string(), distributed: x.distributed.to_string() })
            .collect(),
        identity_holds: s.identity_holds(),
    }
}

#[derive(Serialize)]
pub struct BoundsWire {
    pub distortion: String,
    pub witness: Vec<IntervalWire>,
    pub lower_bound: f64,
    pub lower_bound_sq: String,
    pub lower_witness: Vec<CoefficientWire>,
    pub upper_bound_sq: String,
    pub upper_witness: Vec<IntervalWire>,
    pub certified: bool,
}

pub fn bounds_wire(r: &BoundsReport) -> BoundsWire {
    BoundsWire {
        distortion: ratio_string(&r.distortion.ratio),
        witness: set_wire(&r.distortion.witness),
        lower_bound: r.lower.value,
        lower_bound_sq: ratio_string(&r.lower.value_sq),
        lower_witness: expansion_wire(&r.lower.witness),
        upper_bound_sq: ratio_string(&r.upper.bound_sq),
        upper_witness: set_wire(&r.upper.witness),
        certified: r.upper.certified,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageParamsWire {
    pub kn_depth: u8,
    pub l_n: u32,
    pub eps_exp: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section5ParamsWire {
    pub depth: u8,
    pub stages: Vec<StageParamsWire>,
}

pub fn parse_section5_params(text: &str) -> Result<Section5Params, JsonError> {
    let w: Section5ParamsWire = parse(text)?;
    Ok(Section5Params {
        depth: w.depth,
        stages: w.stages.iter().map(|s| StageParams { kn_depth: s.kn_depth, l_n: s.l_n, eps_exp: s.eps_exp }).collect(),
    })
}

pub fn section5_params_wire(p: &Section5Params) -> Section5ParamsWire {
    Section5ParamsWire {
        depth: p.depth,
        stages: p.stages.iter().map(|s| StageParamsWire { kn_depth: s.kn_depth, l_n: s.l_n, eps_exp: s.eps_exp }).collect(),
    }
}

#[derive(Serialize)]
pub struct StageReportWire {
    pub stage: usize,
    pub k_n: IntervalWire,
    pub k_n_measure: String,
    pub l_n: u32,
    pub eps_exp: u8,
    pub generation_covers: Vec<String>,
    pub stage_sum: String,
    pub rho_cover: String,
    pub cumulative: String,
}

#[derive(Serialize)]
pub struct TruncationWire {
    pub stage: usize,
    pub default_l_n: u64,
    pub used_l_n: u32,
}

#[derive(Serialize)]
pub struct BundleReportWire {
    pub params: Section5ParamsWire,
    pub stages: Vec<StageReportWire>,
    pub truncations: Vec<TruncationWire>,
}

pub fn bundle_report_wire(params: &Section5Params, report: &[StageReport], truncations: &[Truncation]) -> BundleReportWire {
    BundleReportWire {
        params: section5_params_wire(params),
        stages: report
            .iter()
            .map(|r| StageReportWire {
                stage: r.stage,
                k_n: interval_wire(r.k_n),
                k_n_measure: r.k_n.measure().to_string(),
                l_n: r.l_n,
                eps_exp: r.eps_exp,
                generation_covers: r.generation_covers.iter().map(ToString::to_string).collect(),
                stage_sum: r.stage_sum.to_string(),
                rho_cover: r.rho_cover.to_string(),
                cumulative: r.cumulative.to_string(),
            })
            .collect(),
        truncations: truncations
            .iter()
            .map(|t| TruncationWire { stage: t.stage, default_l_n: t.default_l_n, used_l_n: t.used_l_n })
            .collect(),
    }
}

/// Renders any report as `path<TAB>value` lines in document order.
pub fn to_table<T: Serialize>(value: &T) -> String {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut String) {
        use serde_json::Value;
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, out);
                }
            }
            Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array() && !is_interval(x)) => {
                for (k, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}[{k}]"), x, out);
                }
            }
            Value::String(s) => out.push_str(&format!("{prefix}\t{s}\n")),
            other => out.push_str(&format!("{prefix}\t{other}\n")),
        }
    }
    fn is_interval(v: &serde_json::Value) -> bool {
        v.as_array().is_some_and(|a| a.len() == 2 && a.iter().all(|x| x.is_u64()))
    }
    let mut out = String::new();
    walk("", &serde_json::to_value(value).expect("wire types serialize"), &mut out);
    out
}
