//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! the real stdout, then asserts.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use dyadic_bmo::bmo::{bmo_norm_sq, carleson_constant, indicator_expansion, HaarExpansion};
use dyadic_bmo::decompose::{
    coefficient_split, default_a, generational_decomposition, jones_split, main_lemma, part_count_bound,
    verify_property_p, Family, SquaredGrid,
};
use dyadic_bmo::dyadic::{DyadicInterval, IntervalSet, Universe};
use dyadic_bmo::examples::{build_section5, random_rearrangement, Section5Params, StageParams};
use dyadic_bmo::norms::{
    bounds_report, carleson_distortion_exhaustive, carleson_distortion_greedy, max_disjoint_image_constant,
};
use dyadic_bmo::rational::DyadicRational;
use dyadic_bmo::rearrangement::Rearrangement;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, failures: &[String], detail: &str) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let line = format!("criterion {n}: {status} ({detail})\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(failures.is_empty(), "criterion {n} failed: {:?}", &failures[..failures.len().min(5)]);
}

fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(p.into(), d.into())
}

fn measure(i: DyadicInterval) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << i.depth())
}

/// `max_J (1/|J|) Σ_{I⊆J} w_I |I|` by direct enumeration of every `J` in the universe.
fn oracle_packing(weights: &BTreeMap<DyadicInterval, BigRational>, universe: Universe) -> BigRational {
    universe
        .iter()
        .map(|j| {
            let s: BigRational =
                weights.iter().filter(|(i, _)| i.is_within(j)).map(|(i, w)| w * measure(*i)).sum();
            s / measure(j)
        })
        .max()
        .unwrap_or_else(BigRational::zero)
}

fn oracle_carleson(set: &IntervalSet, universe: Universe) -> BigRational {
    oracle_packing(&set.iter().map(|i| (i, BigRational::one())).collect(), universe)
}

/// Measure of the union, by marking the deepest-level cells it covers.
fn oracle_cover(set: &IntervalSet, universe: Universe) -> BigRational {
    let d = universe.max_depth();
    let cells: std::collections::BTreeSet<u64> = set
        .iter()
        .flat_map(|i| {
            let shift = d - i.depth();
            (i.index() << shift)..((i.index() + 1) << shift)
        })
        .collect();
    BigRational::new(BigInt::from(cells.len()), BigInt::one() << d)
}

fn random_set(rng: &mut ChaCha8Rng, universe: Universe) -> IntervalSet {
    let p = rng.random_range(0.05..0.6);
    universe.iter().filter(|_| rng.random_bool(p)).collect()
}

fn random_universe(rng: &mut ChaCha8Rng, max: u32) -> Universe {
    Universe::new(rng.random_range(0..=max)).unwrap()
}

#[test]
fn criterion_1_indicator_norm_equals_carleson_constant() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut failures = Vec::new();
    for case in 0..500 {
        let u = random_universe(&mut rng, 5);
        let s = random_set(&mut rng, u);
        let norm = bmo_norm_sq(&indicator_expansion(&s));
        let constant = carleson_constant(&s).constant.to_big_rational();
        let oracle = oracle_carleson(&s, u);
        if norm != constant || constant != oracle {
            failures.push(format!("case {case}: norm {norm}, constant {constant}, oracle {oracle}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        failures.push(format!("took {elapsed:?}"));
    }
    report(1, &failures, &format!("500 collections at D <= 5, {:.2}s", elapsed.as_secs_f64()));
}

#[test]
fn criterion_2_basic_inequalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut failures = Vec::new();
    for case in 0..500 {
        let u = random_universe(&mut rng, 5);
        let x: HaarExpansion = random_set(&mut rng, u)
            .iter()
            .map(|i| (i, q(rng.random_range(-6..=6), rng.random_range(1..=5))))
            .collect();
        let s = random_set(&mut rng, u);
        let norm_sq = bmo_norm_sq(&x);
        if norm_sq != oracle_packing(&x.squares(), u) {
            failures.push(format!("case {case}: norm disagrees with oracle"));
        }
        let sup_sq = x.iter().map(|(_, c)| c * c).max().unwrap_or_else(BigRational::zero);
        if sup_sq > norm_sq {
            failures.push(format!("case {case}: sup |x_I|^2 = {sup_sq} > {norm_sq}"));
        }
        let cover = oracle_cover(&s, u);
        if cover != s.covered_measure().to_big_rational() {
            failures.push(format!("case {case}: cover disagrees with oracle"));
        }
        let weighted: BigRational = s.iter().map(|i| x.get(i) * x.get(i) * measure(i)).sum();
        if weighted > &norm_sq * &cover {
            failures.push(format!("case {case}: weighted sum {weighted} > {norm_sq} * {cover}"));
        }
        let total: BigRational = s.iter().map(measure).sum();
        let constant = oracle_carleson(&s, u);
        if total > &constant * &cover {
            failures.push(format!("case {case}: total {total} > {constant} * {cover}"));
        }
    }
    report(2, &failures, "500 (x, S) pairs at D <= 5, exact");
}

#[test]
fn criterion_3_main_lemma_bounds() {
    let start = Instant::now();
    let u = Universe::new(3).unwrap();
    let mut failures = Vec::new();
    let mut runs = 0;
    for seed in 0..200 {
        let tau = random_rearrangement(u, seed, false);
        let m_disj = max_disjoint_image_constant(&tau).unwrap().to_big_rational();
        let i0 = u.iter().nth((seed as usize * 7) % 15).unwrap();
        for root in [DyadicInterval::ROOT, i0] {
            for a in [1, 2, 4, 8] {
                let a = q(a, 1);
                let r = main_lemma(&tau, root, &a, Family::All).unwrap();
                runs += 1;
                let tag = format!("seed {seed}, I0 {root}, A {a}");
                let red_sum: BigRational = r.red.iter().map(measure).sum();
                if red_sum > &m_disj * measure(root) / &a {
                    failures.push(format!("{tag}: red mass {red_sum} above M_disj |I0| / A"));
                }
                if !r.red.is_pairwise_disjoint() {
                    failures.push(format!("{tag}: red not disjoint"));
                }
                let below: IntervalSet = u.subtree(root).collect();
                let under_red: IntervalSet = below.iter().filter(|i| r.red.covers(*i)).collect();
                if !r.green.is_disjoint_from(&under_red) || r.green.union(&under_red) != below {
                    failures.push(format!("{tag}: green and red do not partition Q(I0)"));
                }
                let cover = oracle_cover(&tau.map_collection(&r.green).unwrap(), u)
                    + oracle_cover(&tau.map_collection(&r.red).unwrap(), u);
                for i in r.green.iter() {
                    let ratio = measure(tau.image_of(i).unwrap()) / measure(i);
                    if ratio * measure(root) > &a * &cover {
                        failures.push(format!("{tag}: homogeneity fails at {i}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(60) {
        failures.push(format!("took {elapsed:?}"));
    }
    report(3, &failures, &format!("{runs} runs on 200 maps at D = 3, {:.2}s", elapsed.as_secs_f64()));
}

#[test]
fn criterion_4_generational_certificates() {
    let u = Universe::new(3).unwrap();
    let mut failures = Vec::new();
    let mut certificates = 0;
    for seed in 0..200 {
        let tau = random_rearrangement(u, seed, false);
        let m_cc = carleson_distortion_exhaustive(&tau).unwrap().ratio;
        let a = default_a(&m_cc);
        for j in u.iter() {
            let tag = format!("seed {seed}, J {j}");
            let (cert, tree) = generational_decomposition(&tau, j, None, &a).unwrap();
            certificates += 1;
            if let Err(e) = tree.check_nesting().and_then(|_| tree.check_decay()) {
                failures.push(format!("{tag}: {e}"));
            }
            let v = verify_property_p(&tau, j, &cert);
            let Some(c) = v.constants.clone().filter(|_| v.holds()) else {
                failures.push(format!("{tag}: structural failure {:?}", v.structural));
                continue;
            };
            let errors: IntervalSet = cert.blocks.iter().flat_map(|b| b.error.iter()).collect();
            let err = oracle_carleson(&errors, u);
            if err != c.error_carleson.to_big_rational() {
                failures.push(format!("{tag}: error constant disagrees with oracle"));
            }
            if err > a {
                failures.push(format!("{tag}: error constant {err} > 2 M_cc = {a}"));
            }
            let mass: BigRational = cert
                .blocks
                .iter()
                .map(|b| oracle_cover(&tau.map_collection(&b.preimage).unwrap(), u))
                .sum::<BigRational>()
                / measure(j);
            if mass != c.mass.to_big_rational() {
                failures.push(format!("{tag}: mass disagrees with oracle"));
            }
            if mass > &a * c.weak_sup.to_big_rational() {
                failures.push(format!("{tag}: mass {mass} > 2 M_cc weak_sup"));
            }
            if c.homogeneity > a {
                failures.push(format!("{tag}: homogeneity {} > A", c.homogeneity));
            }
        }
    }
    report(4, &failures, &format!("{certificates} certificates on 200 maps at D = 3, every J"));
}

#[test]
fn criterion_5_coefficient_split() {
    let u = Universe::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut failures = Vec::new();
    for case in 0..200u64 {
        let k = [1u64, 2, 4, 8][case as usize % 4];
        let tau = random_rearrangement(u, 5000 + case, false);
        let j = u.iter().nth(rng.random_range(0..15)).unwrap();
        let mut weights: BTreeMap<DyadicInterval, u64> = u.iter().map(|i| (i, rng.random_range(0..=k))).collect();
        // Lower weights until the norm is at most 1.
        loop {
            let grid = SquaredGrid::new(k, weights.clone()).unwrap();
            if grid.norm_sq() <= BigRational::one() {
                break;
            }
            let nonzero: Vec<DyadicInterval> = weights.iter().filter(|(_, w)| **w > 0).map(|(i, _)| *i).collect();
            *weights.get_mut(&nonzero[rng.random_range(0..nonzero.len())]).unwrap() -= 1;
        }
        let grid = SquaredGrid::new(k, weights.clone()).unwrap();
        let split = coefficient_split(&grid, &tau, j).unwrap();
        let tag = format!("case {case}, K {k}, J {j}");
        if split.classes.len() != k as usize {
            failures.push(format!("{tag}: {} classes", split.classes.len()));
        }
        for (n, class) in split.classes.iter().enumerate() {
            let c = oracle_carleson(class, u);
            if c > q(3, 1) || c != split.class_constants[n].to_big_rational() {
                failures.push(format!("{tag}: class {n} constant {c}"));
            }
        }
        for depth in 0..=3u8 {
            let weighted: BigRational = weights
                .iter()
                .filter(|(i, _)| i.depth() == depth && tau.image_of(**i).unwrap().is_within(j))
                .map(|(i, w)| q(*w as i64, 1) * measure(tau.image_of(*i).unwrap()))
                .sum();
            let distributed: BigRational = split
                .classes
                .iter()
                .flat_map(|c| c.iter().filter(|i| i.depth() == depth))
                .map(|i| measure(tau.image_of(i).unwrap()))
                .sum();
            if weighted != distributed {
                failures.push(format!("{tag}: identity fails at depth {depth}"));
            }
        }
        if !split.identity_holds() {
            failures.push(format!("{tag}: reported identity fails"));
        }
    }
    report(5, &failures, "200 grids with K in {1,2,4,8} at D = 3");
}

#[test]
fn criterion_6_jones_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let mut failures = Vec::new();
    let mut over_count = Vec::new();
    for case in 0..200 {
        let u = random_universe(&mut rng, 6);
        let b = random_set(&mut rng, u);
        if b.is_empty() {
            continue;
        }
        let parts = jones_split(&b);
        let mut union = IntervalSet::new();
        for p in &parts {
            if !p.is_disjoint_from(&union) {
                failures.push(format!("case {case}: parts overlap"));
            }
            union = union.union(p);
            if oracle_carleson(p, u) > q(4, 1) {
                failures.push(format!("case {case}: part constant above 4"));
            }
        }
        if union != b {
            failures.push(format!("case {case}: parts do not cover B"));
        }
        let bound = oracle_carleson(&b, u).ceil().to_integer().to_usize().unwrap();
        if bound != part_count_bound(&b) {
            failures.push(format!("case {case}: part count bound disagrees with oracle"));
        }
        if parts.len() > bound {
            over_count.push(case);
        }
    }
    report(
        6,
        &failures,
        &format!("200 collections at D <= 6; {} exceeded the part count bound {:?}", over_count.len(), over_count),
    );
}

#[test]
fn criterion_7_norm_sandwich() {
    let u = Universe::new(3).unwrap();
    let mut failures = Vec::new();
    let to_f = |r: &BigRational| r.to_f64().unwrap();
    for seed in 0..100 {
        let tau = random_rearrangement(u, seed, false);
        let r = bounds_report(&tau, 400, seed).unwrap();
        let lower_sq = r.lower.value * r.lower.value;
        if to_f(&r.distortion.ratio) > lower_sq + 1e-9 || lower_sq > to_f(&r.upper.bound_sq) + 1e-9 || !r.upper.certified {
            failures.push(format!(
                "seed {seed}: {} / {lower_sq} / {}",
                r.distortion.ratio, r.upper.bound_sq
            ));
        }
    }
    let id = bounds_report(&Rearrangement::identity(u), 400, 0).unwrap();
    if id.distortion.ratio != BigRational::one() || id.lower.value != 1.0 || id.upper.bound_sq != q(3, 1) {
        failures.push(format!(
            "identity gives ({}, {}, {})",
            id.distortion.ratio, id.lower.value, id.upper.bound_sq
        ));
    }
    report(7, &failures, "100 maps at D = 3 plus identity (1, 1, 3)");
}

#[test]
fn criterion_8_stacked_generation_example() {
    let mut failures = Vec::new();
    let (defaults, truncations) = Section5Params::stage_defaults(10, 1, 3).unwrap();
    let s = defaults.stages[0];
    if s.kn_depth != 3 || s.l_n != 4 || !truncations.is_empty() {
        failures.push(format!("defaults {s:?}, truncations {truncations:?}"));
    }
    let bundle = build_section5(&defaults).unwrap();
    let r = &bundle.stage_report[0];
    if r.k_n.measure() != DyadicRational::new(1, 3) || r.stage_sum != DyadicRational::new(1, 1) {
        failures.push(format!("K_1 {}, stage sum {}", r.k_n, r.stage_sum));
    }
    let slots: IntervalSet = (1..=4u64)
        .flat_map(|i| {
            bundle
                .rho
                .pairs()
                .filter(move |(f, _)| f.depth() == 3 + i as u8 && f.is_within(r.k_n))
                .map(move |(_, t)| (i, t))
        })
        .filter(|(i, t)| t.is_within(DyadicInterval::new(3, 3 + i).unwrap()))
        .map(|(_, t)| t)
        .collect();
    if slots.len() != 2 + 4 + 8 + 16 || oracle_cover(&slots, Universe::new(10).unwrap()) != q(1, 2) {
        failures.push("generations 1..4 do not tile [1/2, 1) slot by slot".into());
    }

    let stages = [
        StageParams { kn_depth: 3, l_n: 4, eps_exp: 2 },
        StageParams { kn_depth: 5, l_n: 3, eps_exp: 2 },
        StageParams { kn_depth: 7, l_n: 1, eps_exp: 2 },
    ];
    let mut masses = Vec::new();
    for m in 1..=3 {
        let params = Section5Params { depth: 10, stages: stages[..m].to_vec() };
        let b = build_section5(&params).unwrap();
        let m_est = carleson_distortion_greedy(&b.tau, 3000, 1).ratio;
        let a = default_a(&m_est);
        let (cert, _) = generational_decomposition(&b.tau, DyadicInterval::ROOT, None, &a).unwrap();
        let v = verify_property_p(&b.tau, DyadicInterval::ROOT, &cert);
        match v.constants.filter(|_| v.structural.is_ok()) {
            Some(c) => masses.push(c.mass),
            None => failures.push(format!("m = {m}: certificate rejected")),
        }
    }
    if masses.windows(2).any(|w| w[0] > w[1]) {
        failures.push(format!("mass not nondecreasing: {masses:?}"));
    }
    if masses.get(1).is_none_or(|m| *m <= DyadicRational::one()) {
        failures.push("mass does not exceed 1 at m = 2".into());
    }
    let shown: Vec<String> = masses.iter().map(ToString::to_string).collect();
    report(8, &failures, &format!("stage 1 defaults exact; masses for m = 1, 2, 3: {}", shown.join(", ")));
}

#[test]
fn criterion_9_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_dyadic-bmo");
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let run = |args: &[&str]| -> (i32, Vec<u8>) {
        let out = Command::new(bin).args(args).output().unwrap();
        (out.status.code().unwrap_or(-1), out.stdout)
    };
    let mut failures = Vec::new();
    let tau = path("tau.json");
    let (code, _) = run(&["random", "--depth", "3", "--seed", "17", "--out", &tau]);
    if code != 0 {
        failures.push("random failed".into());
    }
    let set = path("set.json");
    std::fs::write(&set, "[[0,0],[1,0],[2,1],[3,5],[3,6]]").unwrap();
    let commands: Vec<Vec<String>> = vec![
        vec!["random".into(), "--depth".into(), "4".into(), "--seed".into(), "9".into()],
        vec!["bounds".into(), "--tau".into(), tau.clone(), "--seed".into(), "3".into(), "--budget".into(), "300".into()],
        vec!["decompose".into(), "--tau".into(), tau.clone()],
        vec!["split".into(), "jones".into(), "--input".into(), set.clone(), "--depth".into(), "3".into()],
        vec!["carleson".into(), "--input".into(), set.clone(), "--format".into(), "table".into()],
    ];
    for args in &commands {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (c1, o1) = run(&args);
        let (c2, o2) = run(&args);
        if c1 != 0 || c1 != c2 || o1 != o2 || o1.is_empty() {
            failures.push(format!("{args:?}: exit {c1}/{c2}, identical {}", o1 == o2));
        }
    }
    let mut bundles = Vec::new();
    for k in 0..2 {
        let out = path(&format!("bundle{k}"));
        let (code, _) = run(&["example", "section5", "--depth", "10", "--out", &out]);
        if code != 0 {
            failures.push("example section5 failed".into());
        }
        let files: Vec<Vec<u8>> = ["rho.json", "sigma.json", "tau.json", "stage_report.json"]
            .iter()
            .map(|f| std::fs::read(dir.path().join(format!("bundle{k}")).join(f)).unwrap_or_default())
            .collect();
        bundles.push(files);
    }
    if bundles[0] != bundles[1] {
        failures.push("section5 bundles differ".into());
    }
    report(9, &failures, &format!("{} seeded commands run twice, byte-identical", commands.len() + 1));
}
