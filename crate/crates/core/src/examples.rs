//! Input generators: seeded random rearrangements and the stacked-generation
//! construction `τ = ρ∘σ⁻¹` whose Carleson mass grows with the stage count.
//!
//! Stage `n` picks `K_n ⊂ [0, 1/4)` and its generations
//! `G_i = {I ⊆ K_n : |I| = 2^-i |K_n|}`, `i = 0..=l_n`. For `i ≥ 1`, `ρ`
//! translates `G_i` into the slot `[1/2 + (i-1)|K_n|, 1/2 + i|K_n|)`, so the
//! slots of one stage tile `[1/2, 1/2 + l_n |K_n|)`; `ρ(K_n) = K_n + 1/4`.
//! `σ` shrinks the subtree of `K_n` by `2^-e_n` towards the left endpoint of
//! `K_n`. All three maps are then extended to the whole universe.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dyadic::{DyadicError, DyadicInterval, IntervalSet, Universe};
use crate::rational::{DyadicRational, UNIT_EXP};
use crate::rearrangement::{Rearrangement, RearrangementError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExampleError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Rearrangement(#[from] RearrangementError),
    #[error("stage {stage}: {what} is {found}, expected {expected}")]
    Postcondition { stage: usize, what: &'static str, found: DyadicRational, expected: DyadicRational },
}

/// A seeded uniform permutation of every level, or of the whole universe.
pub fn random_rearrangement(universe: Universe, seed: u64, level_preserving: bool) -> Rearrangement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(DyadicInterval, DyadicInterval)> = if level_preserving {
        (0..=universe.max_depth())
            .flat_map(|d| {
                let mut targets: Vec<u64> = (0..1u64 << d).collect();
                targets.shuffle(&mut rng);
                targets.into_iter().enumerate().map(move |(k, t)| (iv(d, k as u64), iv(d, t)))
            })
            .collect()
    } else {
        let sources: Vec<DyadicInterval> = universe.iter().collect();
        let mut targets = sources.clone();
        targets.shuffle(&mut rng);
        sources.into_iter().zip(targets).collect()
    };
    Rearrangement::validate(universe, pairs).expect("a permutation is injective")
}

fn iv(depth: u8, index: u64) -> DyadicInterval {
    DyadicInterval::new(depth as u32, index).expect("index in range")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageParams {
    /// `|K_n| = 2^-kn_depth`.
    pub kn_depth: u8,
    pub l_n: u32,
    /// `ε_n = 2^-eps_exp`.
    pub eps_exp: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section5Params {
    pub depth: u8,
    pub stages: Vec<StageParams>,
}

/// A stage whose default generation count did not fit the universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Truncation {
    pub stage: usize,
    pub default_l_n: u64,
    pub used_l_n: u32,
}

impl Section5Params {
    /// `|K_1| = 1/8`, `l_n = 1/(2|K_n|)`, `|K_{n+1}| = |K_n|²/4`, with each
    /// `l_n` cut down to what depth `depth` allows.
    pub fn stage_defaults(depth: u8, stage_count: usize, eps_exp: u8) -> Result<(Self, Vec<Truncation>), ExampleError> {
        let mut stages = Vec::new();
        let mut truncations = Vec::new();
        let mut kn: u32 = 3;
        for stage in 1..=stage_count {
            let default_l = 1u64 << (kn - 1).min(63);
            let room = depth as i64 - kn as i64 - eps_exp as i64;
            if room < 1 {
                return Err(ExampleError::Parameter(format!(
                    "stage {stage}: K_n of depth {kn} leaves no generations within depth {depth}"
                )));
            }
            let used = default_l.min(room as u64) as u32;
            if used as u64 != default_l {
                truncations.push(Truncation { stage, default_l_n: default_l, used_l_n: used });
            }
            stages.push(StageParams { kn_depth: kn as u8, l_n: used, eps_exp });
            kn = 2 * kn + 2;
        }
        let params = Self { depth, stages };
        params.placements()?;
        Ok((params, truncations))
    }

    /// Left-to-right aligned placement of every `K_n` inside `[0, 1/4)`.
    pub fn placements(&self) -> Result<Vec<DyadicInterval>, ExampleError> {
        let universe = Universe::new(self.depth as u32)?;
        if self.stages.is_empty() {
            return Err(ExampleError::Parameter("at least one stage is required".into()));
        }
        let quarter = 1u128 << (UNIT_EXP - 2);
        let mut cursor = 0u128;
        let mut out = Vec::new();
        for (n, s) in self.stages.iter().enumerate() {
            let stage = n + 1;
            let bad = |msg: String| Err(ExampleError::Parameter(format!("stage {stage}: {msg}")));
            if s.kn_depth < 2 {
                return bad(format!("K_n of depth {} does not fit in [0,1/4)", s.kn_depth));
            }
            if s.l_n == 0 {
                return bad("l_n must be positive".into());
            }
            let deepest = s.kn_depth as u32 + s.l_n;
            if deepest > self.depth as u32 || deepest + s.eps_exp as u32 > self.depth as u32 {
                return bad(format!(
                    "kn_depth + l_n + eps_exp = {} exceeds depth {}",
                    deepest + s.eps_exp as u32,
                    self.depth
                ));
            }
            if s.l_n as u64 > 1u64 << (s.kn_depth - 1) {
                return bad(format!("slot overflow: l_n |K_n| = {}/2^{} > 1/2", s.l_n, s.kn_depth));
            }
            let len = 1u128 << (UNIT_EXP - s.kn_depth as u32);
            let start = cursor.div_ceil(len) * len;
            if start + len > quarter {
                return bad("K_n does not fit in [0,1/4) after the earlier stages".into());
            }
            let k = iv(s.kn_depth, (start / len) as u64);
            universe.check(k)?;
            out.push(k);
            cursor = start + len;
        }
        Ok(out)
    }
}

/// Exact per-stage quantities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageReport {
    pub stage: usize,
    pub k_n: DyadicInterval,
    pub l_n: u32,
    pub eps_exp: u8,
    /// `|G_i(K_n)*|` for `i = 1..=l_n`.
    pub generation_covers: Vec<DyadicRational>,
    /// `Σ_{i=1}^{l_n} |G_i*| = l_n |K_n|`.
    pub stage_sum: DyadicRational,
    /// `|ρ(G_1 ∪ … ∪ G_{l_n})*|`.
    pub rho_cover: DyadicRational,
    /// `Σ_{m≤n}` of `rho_cover`.
    pub cumulative: DyadicRational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExampleBundle {
    pub params: Section5Params,
    pub rho: Rearrangement,
    pub sigma: Rearrangement,
    pub tau: Rearrangement,
    /// Domain intervals of `σ` and `τ` that came from the construction rather
    /// than the extension.
    pub stage_domains: Vec<IntervalSet>,
    pub stage_report: Vec<StageReport>,
}

pub fn build_section5(params: &Section5Params) -> Result<ExampleBundle, ExampleError> {
    let universe = Universe::new(params.depth as u32)?;
    let placements = params.placements()?;

    let mut rho_pairs = Vec::new();
    let mut sigma_pairs = Vec::new();
    let mut stage_domains = Vec::new();
    let mut report = Vec::new();
    let mut cumulative = DyadicRational::zero();
    for (n, (s, &k)) in params.stages.iter().zip(&placements).enumerate() {
        let stage = n + 1;
        let kd = s.kn_depth;
        let mut generations: Vec<IntervalSet> = Vec::new();
        let mut sigma_image = IntervalSet::new();
        for i in 0..=s.l_n as u8 {
            let depth = kd + i;
            let first = k.index() << i;
            let mut generation = IntervalSet::new();
            for offset in 0..1u64 << i {
                let interval = iv(depth, first + offset);
                let image = if i == 0 {
                    iv(kd, k.index() + (1u64 << (kd - 2)))
                } else {
                    let half = 1u64 << (depth - 1);
                    let slot = ((i - 1) as u64) << i;
                    iv(depth, half + slot + offset)
                };
                let shrunk = iv(depth + s.eps_exp, (k.index() << (i + s.eps_exp)) + offset);
                rho_pairs.push((interval, image));
                sigma_pairs.push((interval, shrunk));
                sigma_image.insert(shrunk);
                generation.insert(interval);
            }
            generations.push(generation);
        }
        stage_domains.push(sigma_image);

        let kn_measure = k.measure();
        let generation_covers: Vec<DyadicRational> = generations[1..].iter().map(IntervalSet::covered_measure).collect();
        let stage_sum: DyadicRational = generation_covers.iter().cloned().sum();
        let expected = kn_measure.clone() * DyadicRational::integer(s.l_n as i64);
        if stage_sum != expected {
            return Err(ExampleError::Postcondition { stage, what: "stage sum", found: stage_sum, expected });
        }
        let images: IntervalSet = rho_pairs
            .iter()
            .filter(|(from, _)| from.depth() > kd && from.is_within(k))
            .map(|(_, to)| *to)
            .collect();
        let rho_cover = images.covered_measure();
        if rho_cover != expected {
            return Err(ExampleError::Postcondition { stage, what: "ρ cover", found: rho_cover, expected });
        }
        cumulative = cumulative + rho_cover.clone();
        report.push(StageReport {
            stage,
            k_n: k,
            l_n: s.l_n,
            eps_exp: s.eps_exp,
            generation_covers,
            stage_sum,
            rho_cover,
            cumulative: cumulative.clone(),
        });
    }

    let rho = Rearrangement::validate(universe, rho_pairs)?;
    let sigma = Rearrangement::validate(universe, sigma_pairs)?;
    let tau = rho.compose(&sigma.inverse())?;
    Ok(ExampleBundle {
        params: params.clone(),
        rho: extend_to_total(&rho),
        sigma: extend_to_total(&sigma),
        tau: extend_to_total(&tau),
        stage_domains,
        stage_report: report,
    })
}

/// Completes an injective map to a bijection of its universe: free intervals
/// first map to themselves, then to the first free interval of equal length,
/// and whatever is left is paired in canonical order.
pub fn extend_to_total(partial: &Rearrangement) -> Rearrangement {
    let universe = partial.universe();
    let mut free_images: BTreeMap<u8, BTreeSet<u64>> = BTreeMap::new();
    for i in universe.iter().filter(|i| partial.preimage_of(*i).is_none()) {
        free_images.entry(i.depth()).or_default().insert(i.index());
    }
    let mut pairs: Vec<(DyadicInterval, DyadicInterval)> = partial.pairs().collect();
    let mut pending = Vec::new();
    for i in universe.iter().filter(|i| !partial.in_domain(*i)) {
        if free_images.get_mut(&i.depth()).is_some_and(|s| s.remove(&i.index())) {
            pairs.push((i, i));
        } else {
            pending.push(i);
        }
    }
    let mut leftover = Vec::new();
    for i in pending {
        match free_images.get_mut(&i.depth()).and_then(|s| s.pop_first()) {
            Some(k) => pairs.push((i, iv(i.depth(), k))),
            None => leftover.push(i),
        }
    }
    let rest = free_images.into_iter().flat_map(|(d, s)| s.into_iter().map(move |k| iv(d, k)));
    pairs.extend(leftover.into_iter().zip(rest));
    Rearrangement::validate(universe, pairs).expect("free intervals are paired bijectively")
}
