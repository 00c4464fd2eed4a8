//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line; run with
//! `--nocapture` to see them.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use padic_dyn::cli;
use padic_dyn::dynamics::{
    attraction_bound, closed_form_iterate, fixed_point_analysis, fixed_point_distance, find_periodic,
    finite_difference_multiplier, iterate_steps, step, BoundKind, Character, RootStatus,
};
use padic_dyn::norm_geometry::{classify_start, radius_exponent_at, Limit, TrajectoryClass};
use padic_dyn::roots::{cube_roots, roots_of_unity};
use padic_dyn::verification::{check_sphere_invariance, random_unit};
use padic_dyn::{MapParams, Measured, PAdicContext, PAdicNumber, RadiusExp};

const N: u32 = 64;
const CRITERION_1_BUDGET: Duration = Duration::from_secs(5);
const CRITERION_5_BUDGET: Duration = Duration::from_secs(1);
const CRITERION_6_BUDGET: Duration = Duration::from_secs(10);
const FD_EXPONENT: u32 = 32;

fn report(id: &str, ok: bool, detail: &str) {
    println!("criterion {id}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn unit_map(p: u64) -> MapParams {
    let ctx = PAdicContext::new(p, N).unwrap();
    MapParams::exact(ctx.one(), 2).unwrap()
}

fn random_element(rng: &mut ChaCha8Rng, ctx: &PAdicContext, v: i64) -> PAdicNumber {
    let u = random_unit(rng, ctx);
    ctx.from_parts(v, u.unit().unwrap().clone()).unwrap()
}

fn cli_run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("padic-dyn").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn criterion_01_closed_form_matches_stepping() {
    let primes = [2u64, 5, 7, 13, 31];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC105ED);
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for trial in 0..200 {
        let p = primes[trial % primes.len()];
        let ctx = PAdicContext::new(p, N).unwrap();
        let (va, vx) = (rng.gen_range(-3..=3), rng.gen_range(-3..=3));
        let a = random_element(&mut rng, &ctx, va);
        let x = random_element(&mut rng, &ctx, vx);
        let n = rng.gen_range(0..=25u32);
        let params = MapParams::exact(a, 2).unwrap();
        let stepped = iterate_steps(&params, &x, n).unwrap();
        let closed = closed_form_iterate(&params, &x, n).unwrap();
        if stepped != closed {
            mismatches.push((trial, p, n));
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches.is_empty() && elapsed < CRITERION_1_BUDGET;
    report(
        "1",
        ok,
        &format!("200 trials, {} mismatches, {:.2?}", mismatches.len(), elapsed),
    );
    assert!(mismatches.is_empty(), "mismatches: {mismatches:?}");
    assert!(elapsed < CRITERION_1_BUDGET, "took {elapsed:?}");
}

#[test]
fn criterion_02_cube_roots_of_one_mod_7() {
    let ctx = PAdicContext::new(7, N).unwrap();
    let set = cube_roots(&ctx.one()).unwrap();
    let m49 = BigInt::from(49);
    let got: BTreeSet<BigInt> = set
        .roots
        .iter()
        .map(|r| r.to_integer_rep().unwrap() % &m49)
        .collect();
    // Brute force over Z/49.
    let oracle: BTreeSet<BigInt> = (1..49i64)
        .filter(|x| (x * x * x - 1) % 49 == 0)
        .map(BigInt::from)
        .collect();
    let expected: BTreeSet<BigInt> = [1, 18, 30].into_iter().map(BigInt::from).collect();
    let all_cube_to_one = set
        .roots
        .iter()
        .all(|r| (&(&(r * r) * r) - &ctx.one()).is_zero_at_precision());
    let ok = got == expected && oracle == expected && set.count() == 3 && all_cube_to_one;
    report("2", ok, &format!("roots mod 49 = {got:?}, brute force {oracle:?}"));
    assert!(ok);
}

#[test]
fn criterion_03_root_of_unity_counts() {
    let cases = [(5u64, 3u64, 1usize), (7, 3, 3), (31, 3, 3), (31, 15, 15)];
    let mut ok = true;
    let mut seen = Vec::new();
    for (p, k, want) in cases {
        let ctx = PAdicContext::new(p, N).unwrap();
        let set = roots_of_unity(k, &ctx).unwrap();
        let exact = set
            .roots
            .iter()
            .all(|r| (&r.pow_i64(k as i64).unwrap() - &ctx.one()).is_zero_at_precision());
        ok &= set.count() == want && exact;
        seen.push(format!("(p={p},k={k})->{}", set.count()));
    }
    report("3", ok, &seen.join(", "));
    assert!(ok);
}

#[test]
fn criterion_04_multiplier_classification() {
    let mut ok = true;
    let mut seen = Vec::new();
    for p in [2u64, 5, 7, 13, 31] {
        let params = unit_map(p);
        let fps = fixed_point_analysis(&params).unwrap();
        let (want, character) = if p == 2 {
            (RadiusExp::from_int(2, 1), Character::Attracting)
        } else {
            (RadiusExp::one(p), Character::Indifferent)
        };
        ok &= fps.status == RootStatus::Exact && !fps.points().is_empty();
        ok &= fps.multiplier_norm == want && fps.character == character;
        ok &= fps.multiplier.norm() == Measured::Exact(want.clone());
        for x in fps.points() {
            let fd = finite_difference_multiplier(&params, x, FD_EXPONENT).unwrap();
            ok &= fd == Measured::Exact(want.clone());
        }
        seen.push(format!("p={p}: {} {:?}", fps.multiplier_norm, fps.character));
    }
    report("4", ok, &seen.join("; "));
    assert!(ok);
}

/// Exponent recurrence `e_{n+1} = v(a) - q e_n`, iterated directly.
fn iterate_exponent(v: &BigRational, q: u32, e0: &BigRational, n: u32) -> Vec<BigRational> {
    let q = BigRational::from_integer(BigInt::from(q));
    let mut out = vec![e0.clone()];
    for _ in 0..n {
        let last = out.last().unwrap();
        out.push(v - &q * last);
    }
    out
}

/// Limit read off a subsequence of exponents: norms `p^(-e)`.
fn observed_limit(seq: &[BigRational], e_alpha: &BigRational) -> Option<Limit> {
    let first = &seq[0];
    let last = &seq[seq.len() - 1];
    let big = BigRational::from_integer(BigInt::from(1_000_000));
    if seq.iter().all(|e| e == e_alpha) {
        Some(Limit::Alpha)
    } else if seq.iter().all(|e| e == first) {
        None
    } else if last > &big {
        Some(Limit::Zero)
    } else if last < &-big {
        Some(Limit::Infinity)
    } else {
        None
    }
}

#[test]
fn criterion_05_radius_trichotomy() {
    let mut elapsed = Duration::ZERO;
    let mut checked = 0usize;
    let mut bad = Vec::new();
    for v in -3i64..=3 {
        for q in 1u32..=3 {
            let params = MapParams::valuation_only(5, v, q).unwrap();
            let vr = BigRational::from_integer(BigInt::from(v));
            let e_alpha = &vr / BigRational::from_integer(BigInt::from(q + 1));
            for num in -3i64..=3 {
                for den in 1i64..=3 {
                    let e0 = BigRational::new(BigInt::from(num), BigInt::from(den));
                    let seq = iterate_exponent(&vr, q, &e0, 60);
                    let t = Instant::now();
                    let closed: Vec<_> = (0..=60).map(|n| radius_exponent_at(&params, &e0, n)).collect();
                    let class = classify_start(&params, &RadiusExp::new(5, e0.clone())).unwrap();
                    elapsed += t.elapsed();
                    let closed_ok = closed == seq;
                    let evens: Vec<_> = seq.iter().step_by(2).cloned().collect();
                    let odds: Vec<_> = seq.iter().skip(1).step_by(2).cloned().collect();
                    let agrees = match class.trajectory {
                        TrajectoryClass::PeriodTwo => {
                            q == 1
                                && e0 != e_alpha
                                && evens.iter().all(|e| *e == e0)
                                && odds.iter().all(|e| *e == &vr - &e0)
                        }
                        TrajectoryClass::InvariantSphere => seq.iter().all(|e| *e == e_alpha),
                        _ => {
                            observed_limit(&evens, &e_alpha) == Some(class.even_limit)
                                && observed_limit(&odds, &e_alpha) == Some(class.odd_limit)
                        }
                    };
                    checked += 1;
                    if !(agrees && closed_ok) {
                        bad.push(format!("v={v} q={q} e0={e0}"));
                    }
                }
            }
        }
    }
    let ok = bad.is_empty() && elapsed < CRITERION_5_BUDGET;
    report("5", ok, &format!("{checked} starts, {} disagreements, {elapsed:.2?}", bad.len()));
    assert!(bad.is_empty(), "{bad:?}");
    assert!(elapsed < CRITERION_5_BUDGET, "took {elapsed:?}");
}

#[test]
fn criterion_06_period_four_at_31() {
    let start = Instant::now();
    let params = unit_map(31);
    let res = find_periodic(&params, 4).unwrap();
    let fps = fixed_point_analysis(&params).unwrap();
    let candidates = res.candidates.as_ref().map(|c| c.count()).unwrap_or(0);
    let mut ok = candidates == 15 && res.fixed_count == 3 && res.mm_members.len() == 12;
    ok &= res.multiplier_norm == RadiusExp::one(31);
    let one = RadiusExp::one(31);
    for x in &res.mm_members {
        let f1 = step(&params, x).unwrap();
        let f4 = iterate_steps(&params, x, 4).unwrap();
        ok &= (&f4 - x).is_zero_at_precision();
        ok &= !(&f1 - x).vanishes();
        for fp in fps.points() {
            ok &= x.distance(fp).unwrap() == Measured::Exact(one.clone());
        }
    }
    // Orbits under direct iteration: three 4-cycles, closed inside the member set.
    let mut remaining: Vec<PAdicNumber> = res.mm_members.clone();
    let mut orbit_lengths = Vec::new();
    while let Some(x) = remaining.pop() {
        let mut y = step(&params, &x).unwrap();
        let mut len = 1;
        while !(&y - &x).vanishes() && len <= 4 {
            let before = remaining.len();
            remaining.retain(|z| !(z - &y).vanishes());
            ok &= remaining.len() + 1 == before;
            y = step(&params, &y).unwrap();
            len += 1;
        }
        orbit_lengths.push(len);
    }
    ok &= orbit_lengths == vec![4, 4, 4] && res.cycles.len() == 3;
    ok &= res.cycles.iter().all(|c| c.len() == 4);
    let elapsed = start.elapsed();
    ok &= elapsed < CRITERION_6_BUDGET;
    report(
        "6",
        ok,
        &format!(
            "{candidates} candidates, {} fixed, {} members, orbits {orbit_lengths:?}, {elapsed:.2?}",
            res.fixed_count,
            res.mm_members.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_period_two_rejected() {
    let cases = [("2", "1"), ("5", "1"), ("7", "1"), ("7", "3/5"), ("13", "8"), ("31", "1"), ("31", "v:3")];
    let mut ok = true;
    for (p, a) in cases {
        let (code, out, err) = cli_run(&["periodic", "--prime", p, "--a", a, "--m", "2"]);
        let cited = err.contains("period m = 2 rejected") && err.contains("t^3 = 1");
        ok &= code == cli::EXIT_DOMAIN && out.is_empty() && cited;
    }
    report("7", ok, &format!("{} (p, a) pairs", cases.len()));
    assert!(ok);
}

#[test]
fn criterion_08a_halving_rate_at_2() {
    let params = unit_map(2);
    let rho = RadiusExp::from_int(2, 1);
    let r = check_sphere_invariance(&params, 0, &rho, 20, 40, 8).unwrap();
    let first = r.failures.first().map(|f| f.detail.clone()).unwrap_or_default();
    let ok = r.failures.is_empty() && r.undecided == 0;
    report(
        "8a",
        ok,
        &format!(
            "p=2, rho=2^-1: {} of {} samples off 2^(-1-n), first: {first}",
            r.failures.len(),
            r.samples
        ),
    );
    assert!(ok, "{:?}", r.failures.first());
}

#[test]
fn criterion_08b_siegel_spheres_at_7() {
    let params = unit_map(7);
    let fps = fixed_point_analysis(&params).unwrap();
    let mut ok = true;
    for i in 0..fps.points().len() {
        for depth in [1, 2] {
            let rho = RadiusExp::from_int(7, depth);
            let r = check_sphere_invariance(&params, i, &rho, 20, 100, 8).unwrap();
            ok &= r.failures.is_empty() && r.undecided == 0;
        }
    }
    report("8b", ok, "p=7, rho in {7^-1, 7^-2}, 100 steps at every fixed point");
    assert!(ok);
}

#[test]
fn criterion_09_fixed_point_distances() {
    let params = unit_map(7);
    let fps = fixed_point_analysis(&params).unwrap();
    let one = RadiusExp::one(7);
    let mut ok = fps.exact_pairwise_distances.len() == 3
        && fps
            .exact_pairwise_distances
            .iter()
            .all(|d| *d == Measured::Exact(one.clone()))
        && fps.alpha == one;
    for v in -4i64..=4 {
        let p3 = MapParams::valuation_only(3, v, 2).unwrap();
        let want = BigRational::new(BigInt::from(v), BigInt::from(3))
            + BigRational::new(BigInt::one(), BigInt::from(2));
        ok &= fixed_point_distance(&p3).exponent() == Some(&want);
    }
    let p3 = unit_map(3);
    let fps3 = fixed_point_analysis(&p3).unwrap();
    ok &= fps3.status == RootStatus::NotLiftable;
    ok &= fps3.pairwise_distance == RadiusExp::from_ratio(3, 1, 2);
    report("9", ok, "p=7 pairwise distances 1; p=3 exponent v/3 + 1/2");
    assert!(ok);
}

#[test]
fn criterion_10_bound_evaluator() {
    let q = attraction_bound(1, &RadiusExp::from_int(2, 1), 2).unwrap();
    let ok_q = q.kind == BoundKind::Q
        && q.value == RadiusExp::from_int(2, 1)
        && q.threshold == RadiusExp::one(2)
        && q.satisfied
        && q.n_cutoff >= 1
        && q.terms.len() as u64 <= q.n_cutoff;
    let s = attraction_bound(2, &RadiusExp::from_int(7, 1), 7).unwrap();
    let ok_s = s.kind == BoundKind::S
        && s.value < RadiusExp::one(7)
        && s.threshold == RadiusExp::one(7)
        && s.satisfied;
    let ok = ok_q && ok_s;
    report(
        "10",
        ok,
        &format!("Q = {} (cutoff n = {}), S = {}", q.value, q.n_cutoff, s.value),
    );
    assert!(ok);
}

#[test]
fn criterion_11_verify_is_deterministic() {
    let (c1, out1, _) = cli_run(&["verify", "--seed", "42"]);
    let (c2, out2, _) = cli_run(&["verify", "--seed", "42"]);
    let doc: serde_json::Value = serde_json::from_str(&out1).unwrap();
    let reports = doc["reports"].as_array().cloned().unwrap_or_default();
    let failures: usize = reports
        .iter()
        .map(|r| r["failures"].as_array().map(Vec::len).unwrap_or(usize::MAX))
        .sum();
    let undecided: u64 = reports.iter().map(|r| r["undecided"].as_u64().unwrap_or(u64::MAX)).sum();
    let ok = c1 == cli::EXIT_OK
        && c2 == cli::EXIT_OK
        && out1 == out2
        && doc["precision"] == serde_json::json!(N)
        && !reports.is_empty()
        && failures == 0
        && undecided == 0;
    report(
        "11",
        ok,
        &format!(
            "{} reports, byte-identical {}, failures {failures}, undecided {undecided}",
            reports.len(),
            out1 == out2
        ),
    );
    assert!(ok);
}
