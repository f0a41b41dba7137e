//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

#![allow(clippy::needless_range_loop)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use snowflake_embed::dimension::{
    covering_number, default_quasidoubling_grid, default_scale_grid, level_samples,
    estimate_minkowski, estimate_quasidoubling_constant, CoverMethod,
};
use snowflake_embed::embedding::{
    build_embedding, bump, check_disjoint_supports, dense_subsets, BuildOptions, CandidateLattice, Direction,
    Embedding, Threshold,
};
use snowflake_embed::generators::{gen_space, Family, GeneratorSpec};
use snowflake_embed::metric_space::default_labels;
use snowflake_embed::nets::{build_hierarchy, NetOrder};
use snowflake_embed::params::{
    color_budget, derive_practical, derive_strict, solve_tau, EmbeddingParams, Mode, ParamError,
    PracticalInputs, StrictInputs, TauCondition, TauInputs, DEFAULT_BUDGET_CAP, DEFAULT_TAU_STEP,
};
use snowflake_embed::verify::{distortion_report, lipschitz_norm};
use snowflake_embed::MetricSpace;

const SLACK: f64 = 1e-9;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn generated(family: Family, seed: u64) -> MetricSpace {
    gen_space(&GeneratorSpec::new(family, seed)).expect("generator")
}

fn normalized(s: &MetricSpace) -> MetricSpace {
    s.normalize_diameter().expect("nondegenerate").0
}

/// The theorem fixture: evenly spaced points at diameter 1/2, strict parameters.
struct Fixture {
    space: MetricSpace,
    params: EmbeddingParams,
    c: f64,
    binding: Vec<TauCondition>,
}

fn strict_fixture(points: usize) -> Result<Fixture, ParamError> {
    let space = normalized(&generated(Family::Interval { points }, 0));
    let q = estimate_quasidoubling_constant(&space, 0.5, 1.2, &default_quasidoubling_grid()).expect("estimate");
    let tau = TauInputs::new(0.75, 0.5, 1.2, q.constant);
    let binding = solve_tau(&tau, DEFAULT_TAU_STEP)?.binding;
    let params = derive_strict(&StrictInputs::new(tau, space.diameter()))?;
    Ok(Fixture {
        space,
        params,
        c: q.constant,
        binding,
    })
}

fn a1_fixture() -> Fixture {
    // Fall back to four points if eight exceed the color cap.
    match strict_fixture(8) {
        Err(ParamError::BudgetOverflow { .. }) => strict_fixture(4).expect("4-point fixture"),
        other => other.expect("8-point fixture"),
    }
}

fn a1() -> Result<String, String> {
    let f = a1_fixture();
    ensure(f.params.n == f.params.n0 + 1, || "n must be n0 + 1".into())?;
    let e = build_embedding(&f.space, &f.params, BuildOptions::default()).map_err(|e| e.to_string())?;
    let report = distortion_report(&f.space, &e).map_err(|e| e.to_string())?;
    ensure(report.slack == SLACK, || format!("slack {}", report.slack))?;
    ensure(report.pass && report.certifies_theorem_bounds, || {
        format!(
            "upper {:?} vs {}, lower {:?} vs {}",
            report.worst_upper, report.upper_constant, report.worst_lower, report.lower_constant
        )
    })?;

    // The verifier must reject an embedding with a color block wiped out.
    let mut broken = e.clone();
    let (start, width) = (broken.block_offset(1, Direction::Forward), 2 * broken.params.dimension);
    for row in &mut broken.coords {
        row[start..start + width].iter_mut().for_each(|x| *x = 0.0);
    }
    let bad = distortion_report(&f.space, &broken).map_err(|e| e.to_string())?;
    ensure(!bad.pass && bad.lower_witness.is_some(), || "zeroed block went unnoticed".into())?;

    // And the command-line pipeline must agree.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = cli(dir.path(), &[
        "pipeline", "--family", "interval", "--size", &f.space.len().to_string(),
        "--epsilon", "0.75", "--theta", "0.5", "--mode", "strict", "--require-pass",
    ]);
    ensure(out.status.code() == Some(0), || format!("pipeline exit {:?}", out.status.code()))?;

    Ok(format!(
        "{} points, C = {:.4}, tau = {} (binding {:?}), N = {}, M = {}; upper {:.3e} <= {:.3e}, lower {:.3e} >= {:.3e}",
        f.space.len(),
        f.c,
        f.params.tau,
        f.binding,
        f.params.colors,
        f.params.dimension,
        report.worst_upper.unwrap_or(0.0),
        report.upper_constant,
        report.worst_lower.unwrap_or(0.0),
        report.lower_constant,
    ))
}

/// Number of candidates each (x', y') pair rules out under the 3 tau^3 r^eps surrogate.
fn max_kills(space: &MetricSpace, e: &Embedding<f64>, candidates: usize) -> (usize, usize) {
    let p = &e.params;
    let lattice = CandidateLattice::new(p.dimension, p.tau);
    let vs: Vec<Vec<f64>> = lattice.iter().take(candidates).map(|z| lattice.vector(&z)).collect();
    let (mut worst, mut pairs) = (0, 0);
    for map in &e.maps {
        for (li, level) in map.levels.iter().enumerate() {
            let radius = level.radius;
            let threshold = Threshold::Surrogate.value(p.tau, level.weight);
            for (pos, entry) in level.entries.iter().enumerate() {
                let sets = dense_subsets(space, entry.point, radius, p.tau, p.theta);
                for &x in &sets.inner {
                    let a = map.partial(space, x, li, 0);
                    for &y in &sets.outer {
                        let b = map.partial_before(space, y, level.k, pos);
                        let killed = vs
                            .iter()
                            .filter(|v| {
                                let gap: f64 = (0..a.len())
                                    .map(|i| (a[i] + level.weight * v[i] - b[i]).powi(2))
                                    .sum::<f64>()
                                    .sqrt();
                                gap < threshold
                            })
                            .count();
                        worst = worst.max(killed);
                        pairs += 1;
                    }
                }
            }
        }
    }
    (worst, pairs)
}

fn a2() -> Result<String, String> {
    let f = a1_fixture();
    let e = build_embedding(&f.space, &f.params, BuildOptions::default()).map_err(|e| e.to_string())?;
    let mut selections = 0;
    for map in &e.maps {
        for s in &map.selections {
            ensure(s.lattice > (s.inner * s.outer) as f64, || format!("count fails at {s:?}"))?;
            ensure(s.rejected <= s.inner * s.outer, || format!("too many rejections at {s:?}"))?;
            selections += 1;
        }
    }
    ensure(e.params.mode == Mode::Strict && selections > 0, || "no strict selections ran".into())?;

    // Brute force over a small lattice: each pair eliminates at most one candidate.
    let space = normalized(&MetricSpace::from_line(&[0.0, 0.004, 0.1, 0.5]).unwrap());
    let params = derive_practical(&PracticalInputs {
        epsilon: 0.75,
        theta: 0.5,
        delta: 1.0,
        c: 1.0,
        tau: 0.05,
        n: Some(2),
        colors: None,
        dimension: Some(2),
        diameter: space.diameter(),
        budget_cap: DEFAULT_BUDGET_CAP,
    })
    .map_err(|e| e.to_string())?;
    let lattice_size = CandidateLattice::new(2, 0.05).iter().count();
    let small = build_embedding(&space, &params, BuildOptions::default()).map_err(|e| e.to_string())?;
    let (worst, pairs) = max_kills(&space, &small, lattice_size);
    ensure(pairs > 0 && worst <= 1, || format!("a pair killed {worst} candidates"))?;
    Ok(format!(
        "{selections} strict selections, count > |E1||E2| each; {pairs} pairs x {lattice_size} candidates, max kills {worst}"
    ))
}

/// Tail and Lipschitz bounds for every map and every level below the top.
fn partial_sum_checks(space: &MetricSpace, e: &Embedding<f64>) -> Result<usize, String> {
    let p = &e.params;
    let mut checks = 0;
    for map in &e.maps {
        for k in p.n0..p.n {
            let tail_bound = 2.0 * p.tau * p.tau * p.radius(k + 1).powf(p.epsilon);
            for x in 0..space.len() {
                let full = map.eval(space, x);
                let partial = map.eval_through(space, x, k);
                let gap = snowflake_embed::scalar::euclidean(&full, &partial);
                ensure(gap <= tail_bound * (1.0 + SLACK), || {
                    format!("color {} k {k} x {x}: tail {gap} > {tail_bound}", map.color)
                })?;
            }
            let lip = lipschitz_norm(|x| map.eval_through(space, x, k), space, 1.0).map_err(|e| e.to_string())?;
            let lip_bound = p.radius(k).powf(p.epsilon - 1.0);
            ensure(lip <= lip_bound * (1.0 + SLACK), || {
                format!("color {} k {k}: Lipschitz {lip} > {lip_bound}", map.color)
            })?;
            checks += 1;
        }
    }
    Ok(checks)
}

fn a3() -> Result<String, String> {
    let f = a1_fixture();
    let e = build_embedding(&f.space, &f.params, BuildOptions::default()).map_err(|e| e.to_string())?;
    let strict = partial_sum_checks(&f.space, &e)?;

    // A deeper practical hierarchy exercises more than one level below the top.
    let tree = normalized(&generated(Family::GwTree { vertices: 30 }, 11));
    let params = derive_practical(&PracticalInputs {
        epsilon: 0.75,
        theta: 0.5,
        delta: 1.5,
        c: 1.0,
        tau: 0.1,
        n: Some(3),
        colors: None,
        dimension: Some(4),
        diameter: tree.diameter(),
        budget_cap: DEFAULT_BUDGET_CAP,
    })
    .map_err(|e| e.to_string())?;
    let deep = build_embedding(&tree, &params, BuildOptions::default()).map_err(|e| e.to_string())?;
    let practical = partial_sum_checks(&tree, &deep)?;
    Ok(format!(
        "{strict} (map, level) pairs on the theorem fixture and {practical} on a 30-vertex tree within tail and Lipschitz bounds"
    ))
}

/// Net, coloring and color-count invariants on one space at the given radii.
fn net_invariants(space: &MetricSpace, tau: f64, n: i32) -> Result<(usize, usize), String> {
    let (theta, delta) = (0.5, 1.5);
    let params = derive_practical(&PracticalInputs {
        epsilon: 0.75,
        theta,
        delta,
        c: 1.0,
        tau,
        n: Some(n),
        colors: None,
        dimension: Some(1),
        diameter: space.diameter(),
        budget_cap: DEFAULT_BUDGET_CAP,
    })
    .map_err(|e| e.to_string())?;
    let radii: Vec<f64> = params.levels().map(|k| params.radius(k)).collect();
    let mut grid = default_quasidoubling_grid();
    grid.extend(level_samples(&radii, theta));
    let q = estimate_quasidoubling_constant(space, theta, delta, &grid)
        .map_err(|e| e.to_string())?;
    let h = build_hierarchy(space, &params, NetOrder::Input).map_err(|e| e.to_string())?;
    let mut bounded = 0;
    for level in &h.levels {
        let r = level.net.radius;
        let m = &level.net.members;
        for (a, &p) in m.iter().enumerate() {
            for &q in &m[a + 1..] {
                ensure(space.distance(p, q) >= r, || format!("k {}: {p},{q} closer than r", level.k))?;
            }
        }
        for x in 0..space.len() {
            ensure(m.iter().any(|&c| space.distance(x, c) < r || c == x), || {
                format!("k {}: point {x} uncovered", level.k)
            })?;
        }
        let sep = r.powf(theta);
        for (a, &p) in m.iter().enumerate() {
            for (b, &q) in m.iter().enumerate().skip(a + 1) {
                if level.coloring.colors[a] == level.coloring.colors[b] {
                    ensure(space.distance(p, q) > sep, || format!("k {}: {p},{q} share a color", level.k))?;
                }
            }
        }
        if q.witnesses_validate() {
            let bound = color_budget(theta, delta, q.constant, tau, level.k, u64::MAX)
                .map_err(|e| e.to_string())?
                .value as usize;
            ensure(level.coloring.max_color <= bound, || {
                format!("k {}: {} colors > bound {bound}", level.k, level.coloring.max_color)
            })?;
            bounded += 1;
        }
    }
    Ok((h.levels.len(), bounded))
}

fn a4() -> Result<String, String> {
    let start = Instant::now();
    let (mut levels, mut bounded) = (0, 0);
    let mut tally = |(l, b): (usize, usize)| {
        levels += l;
        bounded += b;
    };
    for seed in 0..100u64 {
        let vertices = 2 + (seed as usize * 37) % 63;
        let tree = generated(Family::GwTree { vertices }, seed);
        tally(net_invariants(&normalized(&tree), 0.1, 2).map_err(|e| format!("tree seed {seed}: {e}"))?);
    }
    for arms in [1, 2, 4, 8, 16, 24, 32] {
        let star = generated(Family::Star { arms }, 0);
        tally(net_invariants(&normalized(&star), 0.1, 3).map_err(|e| format!("star {arms}: {e}"))?);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("took {secs:.1}s"))?;
    ensure(bounded == levels, || format!("color bound checked on {bounded} of {levels} levels"))?;
    Ok(format!(
        "100 GW trees and 7 stars: {levels} levels separated, maximal and properly colored, {bounded} within the color bound ({secs:.1}s)"
    ))
}

fn brute_cover(space: &MetricSpace, r: f64) -> usize {
    let n = space.len();
    (1u32..1 << n)
        .filter(|mask| (0..n).all(|s| (0..n).any(|c| mask & (1 << c) != 0 && space.distance(c, s) <= r)))
        .map(u32::count_ones)
        .min()
        .unwrap_or(0) as usize
}

fn a5() -> Result<String, String> {
    let interval = generated(Family::Interval { points: 1024 }, 0);
    let mi = estimate_minkowski(&interval, &default_scale_grid(&interval)).map_err(|e| e.to_string())?.value;
    ensure((mi - 1.0).abs() <= 0.05, || format!("interval {mi}"))?;

    let cantor = generated(Family::Cantor { depth: 7 }, 0);
    let grid: Vec<f64> = (2..=7).map(|i| 2f64.powi(-i)).collect();
    let mc = estimate_minkowski(&cantor, &grid).map_err(|e| e.to_string())?.value;
    ensure((mc - 0.631).abs() <= 0.07, || format!("cantor {mc}"))?;

    let point = MetricSpace::from_line(&[0.0]).unwrap();
    let mp = estimate_minkowski(&point, &grid).map_err(|e| e.to_string())?.value;
    ensure(mp == 0.0, || format!("single point {mp}"))?;

    // Exhaustive oracle on small instances: random plane sets of 1..=12 points.
    let mut instances = 0;
    for seed in 0..60u64 {
        let n = 1 + (seed as usize % 12);
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (next(), next())).collect();
        let rows = pts
            .iter()
            .map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
            .collect();
        let Ok(space) = MetricSpace::validate(rows, default_labels(n)) else { continue };
        let all: Vec<usize> = (0..n).collect();
        for r in [0.05, 0.15, 0.3, 0.6] {
            let exact = covering_number(&space, &all, r, CoverMethod::ExactCover).map_err(|e| e.to_string())?;
            let greedy = covering_number(&space, &all, r, CoverMethod::GreedyCover).map_err(|e| e.to_string())?;
            let oracle = brute_cover(&space, r);
            ensure(exact.count == oracle && greedy.count >= oracle, || {
                format!("seed {seed} r {r}: exact {} greedy {} oracle {oracle}", exact.count, greedy.count)
            })?;
            instances += 1;
        }
    }
    Ok(format!(
        "interval {mi:.4}, cantor {mc:.4}, point {mp}; {instances} cover instances match the oracle"
    ))
}

fn a6() -> Result<String, String> {
    let f = a1_fixture();
    let tree = normalized(&generated(Family::GwTree { vertices: 24 }, 3));
    let tree_params = derive_practical(&PracticalInputs {
        epsilon: 0.75,
        theta: 0.5,
        delta: 1.5,
        c: 1.0,
        tau: 0.1,
        n: Some(2),
        colors: None,
        dimension: Some(1),
        diameter: tree.diameter(),
        budget_cap: DEFAULT_BUDGET_CAP,
    })
    .map_err(|e| e.to_string())?;
    let mut bumps = 0;
    for (space, params) in [(&f.space, &f.params), (&tree, &tree_params)] {
        let h = build_hierarchy(space, params, NetOrder::Input).map_err(|e| e.to_string())?;
        check_disjoint_supports(space, &h).map_err(|e| e.to_string())?;
        for level in &h.levels {
            let r = level.net.radius;
            for (a, &c) in level.net.members.iter().enumerate() {
                let phi: Vec<f64> = (0..space.len()).map(|x| bump(space, c, r, x)).collect();
                for x in 0..space.len() {
                    let d = space.distance(x, c);
                    if d <= r {
                        ensure(phi[x] == 1.0, || format!("phi != 1 inside B_j at {x}"))?;
                    }
                    if d > 2.0 * r {
                        ensure(phi[x] == 0.0, || format!("phi != 0 outside 2B_j at {x}"))?;
                    }
                    for y in 0..space.len() {
                        let lip = space.distance(x, y) / r;
                        ensure((phi[x] - phi[y]).abs() <= lip * (1.0 + SLACK), || {
                            format!("bump at {c} not 1/r-Lipschitz on ({x}, {y})")
                        })?;
                    }
                }
                for (b, &c2) in level.net.members.iter().enumerate().skip(a + 1) {
                    if level.coloring.colors[a] == level.coloring.colors[b] {
                        for x in 0..space.len() {
                            ensure(phi[x] == 0.0 || bump(space, c2, r, x) == 0.0, || {
                                format!("same-color bumps at {c} and {c2} overlap at {x}")
                            })?;
                        }
                    }
                }
                bumps += 1;
            }
        }
    }
    Ok(format!("{bumps} bumps checked exhaustively"))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_snowflake-embed")
}

fn cli(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(bin())
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn same_bytes(a: &Path, b: &Path, names: &[&str]) -> Result<(), String> {
    for name in names {
        let x = std::fs::read(a.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(x == y, || format!("{name} differs after replay"))?;
    }
    Ok(())
}

fn a7() -> Result<String, String> {
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 2] = [
        &["pipeline", "--family", "interval", "--size", "8", "--mode", "strict"],
        &[
            "pipeline", "--family", "gw-tree", "--size", "20", "--seed", "5", "--mode", "practical",
            "--tau", "0.1", "--n", "2", "--dump-vectors", "--pairs-csv", "--coords-csv",
        ],
    ];
    let artifacts = [
        "space.json", "dims.json", "params.json", "nets.json", "embedding.json", "report.json",
    ];
    for args in runs {
        let out = cli(first.path(), args);
        ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
        let replay = Command::new(bin())
            .arg("--out-dir")
            .arg(second.path())
            .arg("replay")
            .arg(first.path().join("pipeline.manifest.json"))
            .output()
            .map_err(|e| e.to_string())?;
        ensure(replay.status.success(), || String::from_utf8_lossy(&replay.stderr).into_owned())?;
        same_bytes(first.path(), second.path(), &artifacts)?;
    }
    same_bytes(first.path(), second.path(), &["vectors.json", "pairs.csv", "embedding.csv"])?;
    Ok("strict and practical pipelines replay byte-identically".into())
}

fn main() {
    let checks: [(&str, &str, Check); 7] = [
        ("A1", "theorem check, strict mode", a1),
        ("A2", "counting guarantee", a2),
        ("A3", "partial-sum estimates", a3),
        ("A4", "net and coloring invariants", a4),
        ("A5", "dimension estimators", a5),
        ("A6", "bump and partition properties", a6),
        ("A7", "determinism", a7),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} {name}: PASS ({secs:.2}s) {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id} {name}: FAIL ({secs:.2}s) {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
