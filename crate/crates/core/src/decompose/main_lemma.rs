//! The red/green coloring that finds a maximal homogeneous block under a
//! starting interval `I₀`.
//!
//! Rule 1 grows the colored collection `K` from green intervals: a missing
//! child `I₁` becomes green when `|τ(I₁)|/|I₁| ≤ A |τ(K ∪ {I₁})*| / |I₀|` and
//! red otherwise. Rule 2 recolors a red `I` green once
//! `|τ(I)|/|I| ≤ A |τ(K)*| / |I₀|`. The two rules alternate until a Rule 2
//! sweep changes nothing; the red intervals then form the stopping family.
//!
//! Rule 1 always expands the least green interval (depth, then index) that
//! still has a missing child, and adds its least missing child. When the
//! working family is a subfamily `B` rather than the full dyadic tree, the
//! children of `I` are the maximal members of `B` strictly inside `I`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use super::DecomposeError;
use crate::dyadic::{CoverTracker, DyadicInterval, IntervalSet, Universe};
use crate::rearrangement::Rearrangement;
use crate::rational::ratio_string;

/// The collection the coloring runs over.
#[derive(Clone, Copy, Debug)]
pub enum Family<'a> {
    /// Every interval of the universe below `I₀`.
    All,
    /// Only members of the given collection below `I₀`.
    Within(&'a IntervalSet),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Color {
    Green,
    Red,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Rule1,
    Rule2,
}

/// Order in which a Rule 2 sweep visits the red intervals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SweepOrder {
    #[default]
    Canonical,
    Reverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub interval: DyadicInterval,
    pub rule: Rule,
    pub color: Color,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = match self.rule {
            Rule::Rule1 => "rule1",
            Rule::Rule2 => "rule2",
        };
        let color = match self.color {
            Color::Green => "green",
            Color::Red => "red",
        };
        write!(f, "{rule} {} {color}", self.interval)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MainLemmaResult {
    pub root: DyadicInterval,
    /// Pairwise disjoint stopping intervals.
    pub red: IntervalSet,
    pub green: IntervalSet,
    pub trace: Vec<TraceStep>,
}

impl MainLemmaResult {
    /// Whether every green `I` satisfies
    /// `|τ(I)|/|I| ≤ A (|τ(green)*| + |τ(red)*|) / |I₀|`.
    pub fn homogeneity_holds(&self, tau: &Rearrangement, a: &BigRational) -> bool {
        let images = |s: &IntervalSet| -> u128 {
            s.iter().filter_map(|i| tau.apply(i)).collect::<IntervalSet>().covered_units()
        };
        let cover = images(&self.green) + images(&self.red);
        self.green.iter().all(|i| {
            let t = tau.apply(i).expect("green intervals lie in the domain");
            within_threshold(t.units(), i.units(), self.root.units(), cover, a)
        })
    }
}

/// `τ_units / i_units ≤ A · cover / root_units`.
fn within_threshold(tau_units: u128, i_units: u128, root_units: u128, cover: u128, a: &BigRational) -> bool {
    let lhs = BigInt::from(tau_units) * BigInt::from(root_units) * a.denom();
    let rhs = a.numer() * BigInt::from(cover) * BigInt::from(i_units);
    lhs <= rhs
}

enum Tree {
    Full(Universe),
    Induced(BTreeMap<DyadicInterval, Vec<DyadicInterval>>),
}

impl Tree {
    fn children(&self, i: DyadicInterval) -> Vec<DyadicInterval> {
        match self {
            Tree::Full(u) => match u.children(i) {
                Ok((l, r)) => vec![l, r],
                Err(_) => Vec::new(),
            },
            Tree::Induced(map) => map.get(&i).cloned().unwrap_or_default(),
        }
    }
}

fn build_tree(
    tau: &Rearrangement,
    root: DyadicInterval,
    family: Family<'_>,
) -> Result<Tree, DecomposeError> {
    let universe = tau.universe();
    match family {
        Family::All => {
            universe.check(root).map_err(|_| DecomposeError::RootNotInFamily(root))?;
            for i in universe.subtree(root) {
                tau.image_of(i)?;
            }
            Ok(Tree::Full(universe))
        }
        Family::Within(b) => {
            if !b.contains(&root) {
                return Err(DecomposeError::RootNotInFamily(root));
            }
            let mut map: BTreeMap<DyadicInterval, Vec<DyadicInterval>> = BTreeMap::new();
            for k in b.restrict(root).iter() {
                tau.image_of(k)?;
                if k == root {
                    continue;
                }
                let parent = k
                    .ancestors_inclusive()
                    .skip(1)
                    .find(|a| b.contains(a))
                    .expect("root lies above every restricted member");
                map.entry(parent).or_default().push(k);
            }
            Ok(Tree::Induced(map))
        }
    }
}

pub fn main_lemma(
    tau: &Rearrangement,
    root: DyadicInterval,
    a: &BigRational,
    family: Family<'_>,
) -> Result<MainLemmaResult, DecomposeError> {
    main_lemma_with(tau, root, a, family, SweepOrder::Canonical)
}

pub fn main_lemma_with(
    tau: &Rearrangement,
    root: DyadicInterval,
    a: &BigRational,
    family: Family<'_>,
    order: SweepOrder,
) -> Result<MainLemmaResult, DecomposeError> {
    if *a < BigRational::one() {
        return Err(DecomposeError::ParameterA(ratio_string(a)));
    }
    let tree = build_tree(tau, root, family)?;
    let image = |i: DyadicInterval| tau.apply(i).expect("domain checked");
    let root_units = root.units();

    let mut colors: BTreeMap<DyadicInterval, Color> = BTreeMap::new();
    let mut cover = CoverTracker::default();
    let mut frontier: BTreeSet<DyadicInterval> = BTreeSet::new();
    let mut trace = Vec::new();

    colors.insert(root, Color::Green);
    cover.insert(image(root));
    frontier.insert(root);

    loop {
        // Rule 1 until every green interval has all its children colored.
        while let Some(&g) = frontier.first() {
            let Some(child) = tree.children(g).into_iter().find(|c| !colors.contains_key(c)) else {
                frontier.remove(&g);
                continue;
            };
            let t = image(child);
            let color = if within_threshold(t.units(), child.units(), root_units, cover.units_with(t), a) {
                frontier.insert(child);
                Color::Green
            } else {
                Color::Red
            };
            colors.insert(child, color);
            cover.insert(t);
            trace.push(TraceStep { interval: child, rule: Rule::Rule1, color });
        }

        // Rule 2; the cover is fixed during a sweep.
        let reds: Vec<DyadicInterval> =
            colors.iter().filter(|(_, c)| **c == Color::Red).map(|(i, _)| *i).collect();
        let visit: Box<dyn Iterator<Item = &DyadicInterval>> = match order {
            SweepOrder::Canonical => Box::new(reds.iter()),
            SweepOrder::Reverse => Box::new(reds.iter().rev()),
        };
        let mut changed = false;
        for &r in visit {
            if within_threshold(image(r).units(), r.units(), root_units, cover.units(), a) {
                colors.insert(r, Color::Green);
                frontier.insert(r);
                trace.push(TraceStep { interval: r, rule: Rule::Rule2, color: Color::Green });
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut red = IntervalSet::new();
    let mut green = IntervalSet::new();
    for (i, c) in colors {
        match c {
            Color::Green => green.insert(i),
            Color::Red => red.insert(i),
        };
    }
    let result = MainLemmaResult { root, red, green, trace };
    if !result.red.is_pairwise_disjoint() {
        return Err(DecomposeError::Postcondition("red intervals overlap".into()));
    }
    if !result.homogeneity_holds(tau, a) {
        return Err(DecomposeError::Postcondition("green homogeneity bound fails".into()));
    }
    Ok(result)
}
