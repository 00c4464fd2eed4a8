//! Seeded, reproducible checks of the dynamics on the invariant sphere
//! `S_alpha(0)`.
//!
//! Every sample `k` of a suite draws from its own ChaCha8 stream
//! `(seed, k)`, so a report depends only on the seed and the parameters,
//! never on evaluation order.
//!
//! Points are labelled relative to the fixed points `x_i`:
//!
//! * `NEAR_FIXED(i, rho)`: on the sphere with `|x - x_i| = rho < alpha`;
//! * `EQUIDISTANT`: on the sphere at distance `alpha` from every fixed point;
//! * `UNDECIDED`: precision ran out before the label could be settled.
//!
//! Fixed points outside `Q_p` (the conjugates `c * omega` when `p = 2 mod 3`)
//! are at distance exactly `alpha` from every point of `S_alpha(0)` in `Q_p`,
//! because `omega` does not reduce into `F_p`. Only the fixed points in `Q_p`
//! can therefore make a point `NEAR_FIXED`.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{closed_form_iterate, fixed_point_analysis, step, FixedPointReport, RootStatus};
use crate::error::{Error, Result};
use crate::norm_geometry::{MapParams, Measured, OuterRegion, RadiusExp};
use crate::padic::{PAdicContext, PAdicNumber};

/// Identifies the sampler in reports; bump when the draw procedure changes.
pub const SAMPLER: &str = "chacha8-stream-v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "label", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionLabel {
    Inside,
    Outside,
    /// `x` lies in `S_alpha(0)` within `rho < alpha` of fixed point `index`.
    NearFixed { index: usize, rho: Measured },
    Equidistant,
    /// Within `alpha` of several fixed points at once; impossible for `p != 3`.
    Overlap { indices: Vec<usize> },
    Undecided,
}

impl RegionLabel {
    pub fn outer(&self) -> Option<OuterRegion> {
        match self {
            RegionLabel::Inside => Some(OuterRegion::Inside),
            RegionLabel::Outside => Some(OuterRegion::Outside),
            RegionLabel::Undecided => None,
            _ => Some(OuterRegion::OnSphere),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            RegionLabel::Inside => "INSIDE",
            RegionLabel::Outside => "OUTSIDE",
            RegionLabel::NearFixed { .. } => "NEAR_FIXED",
            RegionLabel::Equidistant => "EQUIDISTANT",
            RegionLabel::Overlap { .. } => "OVERLAP",
            RegionLabel::Undecided => "UNDECIDED",
        }
    }
}

fn exact_fixed_points(fps: &FixedPointReport) -> Result<&[PAdicNumber]> {
    if fps.status != RootStatus::Exact {
        return Err(Error::Precondition(format!(
            "fixed points are not available exactly ({:?})",
            fps.status
        )));
    }
    Ok(fps.points())
}

pub fn label_point(params: &MapParams, x: &PAdicNumber, fps: &FixedPointReport) -> Result<RegionLabel> {
    if params.prime() == 3 {
        return Err(Error::Precondition(
            "p = 3: the fixed points are not in Q_3 and the sphere has no partition".into(),
        ));
    }
    let points = exact_fixed_points(fps)?;
    let alpha = params.alpha();
    let r = match x.norm() {
        Measured::Exact(r) => r,
        Measured::Below(_) => return Ok(RegionLabel::Undecided),
    };
    if r < alpha {
        return Ok(RegionLabel::Inside);
    }
    if r > alpha {
        return Ok(RegionLabel::Outside);
    }
    let mut near = Vec::new();
    for (i, fp) in points.iter().enumerate() {
        let d = x.distance(fp)?;
        if d.upper_bound() < &alpha {
            near.push((i, d));
        } else if !d.is_exact() {
            return Ok(RegionLabel::Undecided);
        }
    }
    Ok(match near.len() {
        0 => RegionLabel::Equidistant,
        1 => {
            let (index, rho) = near.pop().expect("one element");
            RegionLabel::NearFixed { index, rho }
        }
        _ => RegionLabel::Overlap {
            indices: near.into_iter().map(|(i, _)| i).collect(),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub sample: usize,
    pub x: PAdicNumber,
    pub step: u32,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExitEvent {
    pub sample: usize,
    /// First step `n0` at which the orbit left `EQUIDISTANT`.
    pub step: u32,
    pub index: usize,
    /// `mu = |f^n0(x) - x_index| < alpha`.
    pub mu: RadiusExp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub theorem: String,
    pub prime: u64,
    pub sampler: &'static str,
    pub seed: u64,
    pub samples: usize,
    pub n_steps: u32,
    pub failures: Vec<Counterexample>,
    pub undecided: usize,
    pub observations: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub exits: Vec<ExitEvent>,
    pub pass: bool,
}

impl VerificationReport {
    fn new(theorem: &str, prime: u64, seed: u64, samples: usize, n_steps: u32) -> Self {
        Self {
            theorem: theorem.to_string(),
            prime,
            sampler: SAMPLER,
            seed,
            samples,
            n_steps,
            failures: Vec::new(),
            undecided: 0,
            observations: Vec::new(),
            exits: Vec::new(),
            pass: false,
        }
    }

    fn fail(&mut self, sample: usize, x: &PAdicNumber, step: u32, detail: String) {
        self.failures.push(Counterexample {
            sample,
            x: x.clone(),
            step,
            detail,
        });
    }

    fn finish(mut self) -> Self {
        self.pass = self.failures.is_empty() && self.undecided == 0;
        self
    }

    fn absorb(&mut self, other: VerificationReport) {
        self.failures.extend(other.failures);
        self.undecided += other.undecided;
        self.observations.extend(other.observations);
        self.exits.extend(other.exits);
    }
}

/// The RNG for sample `index` of a suite seeded with `seed`.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// A unit drawn uniformly from `(Z / p^N)^*`.
pub fn random_unit(rng: &mut ChaCha8Rng, ctx: &PAdicContext) -> PAdicNumber {
    let modulus = ctx.modulus(ctx.precision());
    let p = BigUint::from(ctx.prime());
    loop {
        let u = rng.gen_biguint_below(&modulus);
        if !(&u % &p).is_zero() {
            return ctx.from_parts(0, u).expect("unit coprime to p");
        }
    }
}

fn context_of(params: &MapParams) -> Result<&PAdicContext> {
    params
        .a_exact()
        .map(PAdicNumber::context)
        .ok_or_else(|| Error::Domain("the coefficient a must be given exactly".into()))
}

fn integral_exponent(r: &RadiusExp) -> Result<BigInt> {
    match r.exponent() {
        Some(e) if e.is_integer() => Ok(e.to_integer()),
        _ => Err(Error::SamplingUnsupported(format!(
            "radius {r} is not an integral power of p"
        ))),
    }
}

/// `p^e * u` for a random unit `u`.
fn random_of_valuation(rng: &mut ChaCha8Rng, ctx: &PAdicContext, e: &BigInt) -> PAdicNumber {
    let u = random_unit(rng, ctx);
    &u * &ctx.from_int(ctx.prime()).pow(e).expect("power of p")
}

/// A random point of `S_alpha(0)`.
pub fn sample_sphere(params: &MapParams, rng: &mut ChaCha8Rng) -> Result<PAdicNumber> {
    let ctx = context_of(params)?;
    let e = integral_exponent(&params.alpha())?;
    Ok(random_of_valuation(rng, ctx, &e))
}

fn alpha_exponent_int(params: &MapParams) -> Result<BigInt> {
    integral_exponent(&params.alpha())
}

fn setup(params: &MapParams) -> Result<(FixedPointReport, BigInt)> {
    if params.prime() == 3 {
        return Err(Error::Precondition(
            "p = 3 is covered by the norm layer only".into(),
        ));
    }
    let fps = fixed_point_analysis(params)?;
    exact_fixed_points(&fps)?;
    let e_alpha = alpha_exponent_int(params)?;
    Ok((fps, e_alpha))
}

/// Points at distance `rho < alpha` from fixed point `i` keep that distance
/// (`p >= 3`) or shrink it by exactly `1/2` per step (`p = 2`).
pub fn check_sphere_invariance(
    params: &MapParams,
    i: usize,
    rho: &RadiusExp,
    samples: usize,
    n_steps: u32,
    seed: u64,
) -> Result<VerificationReport> {
    let (fps, e_alpha) = setup(params)?;
    let p = params.prime();
    let fixed = fps
        .points()
        .get(i)
        .ok_or_else(|| Error::Domain(format!("no fixed point with index {i}")))?
        .clone();
    if rho >= &params.alpha() {
        return Err(Error::Precondition(format!("rho = {rho} must be below alpha")));
    }
    let mut report = VerificationReport::new("near-fixed-sphere-invariance", p, seed, samples, n_steps);
    report
        .observations
        .push(format!("fixed point {i}, rho = {rho}, alpha exponent {e_alpha}"));
    if rho.is_zero() {
        let mut y = fixed.clone();
        for n in 1..=n_steps {
            y = step(params, &y)?;
            if !(&y - &fixed).vanishes() {
                report.fail(0, &fixed, n, "fixed point moved".into());
                break;
            }
        }
        return Ok(report.finish());
    }
    let e_rho = integral_exponent(rho)?;
    let ctx = context_of(params)?;
    for k in 0..samples {
        let mut rng = sample_rng(seed, k);
        let x = &fixed + &random_of_valuation(&mut rng, ctx, &e_rho);
        let mut y = x.clone();
        for n in 1..=n_steps {
            y = step(params, &y)?;
            let expected = if p == 2 { &e_rho + BigInt::from(n) } else { e_rho.clone() };
            match y.distance(&fixed)? {
                Measured::Exact(d) if d == RadiusExp::from_int(p, expected.clone()) => {}
                Measured::Exact(d) => {
                    report.fail(k, &x, n, format!("distance {d}, expected {p}^(-{expected})"));
                    break;
                }
                Measured::Below(_) => {
                    report.undecided += 1;
                    break;
                }
            }
        }
    }
    Ok(report.finish())
}

/// `p = 2`: every point of the sphere near the fixed point converges to it,
/// and equidistant points stay equidistant.
pub fn check_basin_p2(params: &MapParams, samples: usize, n_steps: u32, seed: u64) -> Result<VerificationReport> {
    if params.prime() != 2 {
        return Err(Error::Precondition("the basin check is for p = 2".into()));
    }
    let (fps, e_alpha) = setup(params)?;
    let ctx = context_of(params)?;
    let threshold = &e_alpha + BigInt::from(ctx.precision() / 2);
    let mut report = VerificationReport::new("p2-basin", 2, seed, samples, n_steps);
    let mut equidistant = 0usize;
    for k in 0..samples {
        let mut rng = sample_rng(seed, k);
        // half the samples near a fixed point, half anywhere on the sphere
        let x = if k % 2 == 0 {
            let j = k / 2 % fps.points().len();
            let depth = BigInt::from(1 + (k / 2) % 4);
            &fps.points()[j] + &random_of_valuation(&mut rng, ctx, &(&e_alpha + depth))
        } else {
            sample_sphere(params, &mut rng)?
        };
        match label_point(params, &x, &fps)? {
            RegionLabel::NearFixed { index, rho } => {
                let target = &fps.points()[index];
                let mut last = rho;
                let mut converged = false;
                let mut y = x.clone();
                for n in 1..=n_steps {
                    y = step(params, &y)?;
                    let d = y.distance(target)?;
                    let below_threshold = d.upper_bound() <= &RadiusExp::from_int(2, threshold.clone());
                    if d.upper_bound() >= last.upper_bound() && !below_threshold {
                        report.fail(k, &x, n, format!("distance {d} did not shrink from {last}"));
                        break;
                    }
                    if below_threshold {
                        converged = true;
                        break;
                    }
                    last = d;
                }
                if !converged && report.failures.last().is_none_or(|c| c.sample != k) {
                    report.fail(k, &x, n_steps, "no convergence within the horizon".into());
                }
            }
            RegionLabel::Equidistant => {
                equidistant += 1;
                let mut y = x.clone();
                for n in 1..=n_steps {
                    y = step(params, &y)?;
                    let label = label_point(params, &y, &fps)?;
                    if label != RegionLabel::Equidistant {
                        report.fail(k, &x, n, format!("left the equidistant set: {}", label.name()));
                        break;
                    }
                }
            }
            RegionLabel::Undecided => report.undecided += 1,
            other => report.fail(k, &x, 0, format!("sample is not on the sphere: {}", other.name())),
        }
    }
    report.observations.push(format!(
        "convergence threshold 2^(-{threshold}); {equidistant} equidistant samples"
    ));
    if equidistant == 0 {
        report.observations.push(
            "every unit of Q_2 is 1 mod 2, so the equidistant set has no points in Q_2".into(),
        );
    }
    Ok(report.finish())
}

/// `p >= 3`: spheres of radius `rho < alpha` about each fixed point are
/// invariant, for `rho = p^(-1), p^(-2), p^(-3)` relative to `alpha`.
pub fn check_siegel(params: &MapParams, samples: usize, n_steps: u32, seed: u64) -> Result<VerificationReport> {
    if params.prime() == 2 {
        return Err(Error::Precondition("the Siegel check is for p >= 3".into()));
    }
    let (fps, e_alpha) = setup(params)?;
    let p = params.prime();
    let mut report = VerificationReport::new("siegel-disk", p, seed, samples, n_steps);
    for i in 0..fps.points().len() {
        for depth in 1..=3 {
            let rho = RadiusExp::from_int(p, &e_alpha + BigInt::from(depth));
            let sub = check_sphere_invariance(params, i, &rho, samples, n_steps, seed)?;
            report.absorb(sub);
        }
    }
    Ok(report.finish())
}

/// Labels of random sphere points: each gets exactly one, never `OVERLAP`.
pub fn check_partition(params: &MapParams, samples: usize, seed: u64) -> Result<VerificationReport> {
    let (fps, _) = setup(params)?;
    let mut report = VerificationReport::new("sphere-partition", params.prime(), seed, samples, 0);
    let mut near = vec![0usize; fps.points().len()];
    let mut equidistant = 0usize;
    for k in 0..samples {
        let x = sample_sphere(params, &mut sample_rng(seed, k))?;
        match label_point(params, &x, &fps)? {
            RegionLabel::NearFixed { index, .. } => near[index] += 1,
            RegionLabel::Equidistant => equidistant += 1,
            RegionLabel::Undecided => report.undecided += 1,
            other => report.fail(k, &x, 0, format!("label {}", other.name())),
        }
    }
    report
        .observations
        .push(format!("near-fixed counts {near:?}, equidistant {equidistant}"));
    Ok(report.finish())
}

/// A point within `rho < alpha` of `x_i` is at distance exactly `alpha` from
/// every other fixed point, hence in no other near-fixed set.
pub fn check_fixed_point_separation(params: &MapParams, samples: usize, seed: u64) -> Result<VerificationReport> {
    let (fps, e_alpha) = setup(params)?;
    let ctx = context_of(params)?;
    let alpha = params.alpha();
    let count = fps.points().len();
    let mut report = VerificationReport::new("fixed-point-separation", params.prime(), seed, samples, 0);
    for k in 0..samples {
        let mut rng = sample_rng(seed, k);
        let i = k % count;
        let depth = BigInt::from(1 + (k / count) % 5);
        let x = &fps.points()[i] + &random_of_valuation(&mut rng, ctx, &(&e_alpha + depth));
        for (j, other) in fps.points().iter().enumerate() {
            if j == i {
                continue;
            }
            match x.distance(other)? {
                Measured::Exact(d) if d == alpha => {}
                Measured::Exact(d) => report.fail(k, &x, 0, format!("distance {d} to fixed point {j}")),
                Measured::Below(_) => report.undecided += 1,
            }
        }
        if let RegionLabel::Overlap { indices } = label_point(params, &x, &fps)? {
            report.fail(k, &x, 0, format!("near several fixed points {indices:?}"));
        }
    }
    report.observations.push(format!("{count} fixed points in Q_p"));
    Ok(report.finish())
}

/// Follow an equidistant point until it falls near a fixed point or the
/// horizon runs out. After an exit at step `n0` the distance `mu` must stay
/// constant, and recomputing `f^n0(x)` by the closed form must give the same `mu`.
pub fn track_equidistant(params: &MapParams, x: &PAdicNumber, n_steps: u32) -> Result<VerificationReport> {
    track_equidistant_sample(params, x, n_steps, 0, 0)
}

fn track_equidistant_sample(
    params: &MapParams,
    x: &PAdicNumber,
    n_steps: u32,
    seed: u64,
    sample: usize,
) -> Result<VerificationReport> {
    let (fps, _) = setup(params)?;
    let mut report = VerificationReport::new("equidistant-exit", params.prime(), seed, 1, n_steps);
    if label_point(params, x, &fps)? != RegionLabel::Equidistant {
        return Err(Error::Precondition("starting point is not equidistant".into()));
    }
    let mut y = x.clone();
    let mut exit: Option<ExitEvent> = None;
    for n in 1..=n_steps {
        y = step(params, &y)?;
        if let Some(ev) = &exit {
            let d = y.distance(&fps.points()[ev.index])?;
            if d != Measured::Exact(ev.mu.clone()) {
                report.fail(sample, x, n, format!("distance drifted to {d} after exit"));
                break;
            }
            continue;
        }
        match label_point(params, &y, &fps)? {
            RegionLabel::Equidistant => {}
            RegionLabel::NearFixed { index, rho: Measured::Exact(mu) } => {
                let recomputed = closed_form_iterate(params, x, n)?.distance(&fps.points()[index])?;
                if recomputed != Measured::Exact(mu.clone()) {
                    report.fail(sample, x, n, format!("closed form gives {recomputed}, stepping gives {mu}"));
                    break;
                }
                exit = Some(ExitEvent {
                    sample,
                    step: n,
                    index,
                    mu,
                });
            }
            RegionLabel::Undecided | RegionLabel::NearFixed { .. } => {
                report.undecided += 1;
                break;
            }
            other => {
                report.fail(sample, x, n, format!("left the sphere: {}", other.name()));
                break;
            }
        }
    }
    match exit {
        Some(ev) => {
            report.observations.push(format!(
                "sample {sample}: left the equidistant set at step {} towards fixed point {} at distance {}",
                ev.step, ev.index, ev.mu
            ));
            report.exits.push(ev);
        }
        None => report.observations.push(format!(
            "sample {sample}: still equidistant after {n_steps} steps"
        )),
    }
    Ok(report.finish())
}

/// [`track_equidistant`] over random sphere points that start equidistant.
pub fn check_equidistant_exits(params: &MapParams, samples: usize, n_steps: u32, seed: u64) -> Result<VerificationReport> {
    let (fps, _) = setup(params)?;
    let mut report = VerificationReport::new("equidistant-exit", params.prime(), seed, samples, n_steps);
    let mut tracked = 0usize;
    let mut stayed = 0usize;
    for k in 0..samples {
        let x = sample_sphere(params, &mut sample_rng(seed, k))?;
        if label_point(params, &x, &fps)? != RegionLabel::Equidistant {
            continue;
        }
        tracked += 1;
        let sub = track_equidistant_sample(params, &x, n_steps, seed, k)?;
        if sub.exits.is_empty() {
            stayed += 1;
        }
        report.failures.extend(sub.failures);
        report.undecided += sub.undecided;
        report.exits.extend(sub.exits);
    }
    report.observations.push(format!(
        "{tracked} equidistant samples: {} exited, {stayed} still equidistant after {n_steps} steps",
        tracked - stayed
    ));
    Ok(report.finish())
}

/// Cap on steps for the `p = 2` contraction check so that the expected
/// distance stays representable at the working precision.
fn p2_horizon(ctx: &PAdicContext, e_rho: &BigInt, e_alpha: &BigInt, n_steps: u32) -> u32 {
    let room = BigInt::from(ctx.precision()) + e_alpha - e_rho - BigInt::from(1);
    room.to_u32().map_or(0, |r| r.min(n_steps))
}

/// The standard battery for one map: every suite that applies to its prime.
pub fn run_suites(params: &MapParams, samples: usize, n_steps: u32, seed: u64) -> Result<Vec<VerificationReport>> {
    let (fps, e_alpha) = setup(params)?;
    let ctx = context_of(params)?;
    let p = params.prime();
    let mut reports = vec![
        check_partition(params, samples * 10, seed)?,
        check_fixed_point_separation(params, samples, seed)?,
    ];
    if p == 2 {
        for depth in [2, 3] {
            let e_rho = &e_alpha + BigInt::from(depth);
            let horizon = p2_horizon(ctx, &e_rho, &e_alpha, n_steps);
            let rho = RadiusExp::from_int(p, e_rho);
            for i in 0..fps.points().len() {
                let mut r = check_sphere_invariance(params, i, &rho, samples, horizon, seed)?;
                if horizon < n_steps {
                    r.observations
                        .push(format!("horizon capped at {horizon} steps by the precision"));
                }
                reports.push(r);
            }
        }
        reports.push(check_basin_p2(params, samples, n_steps, seed)?);
    } else {
        reports.push(check_siegel(params, samples, n_steps, seed)?);
        reports.push(check_equidistant_exits(params, samples, n_steps, seed)?);
    }
    Ok(reports)
}

/// The maps covered by `verify` when no prime is given: `a = 1` over
/// `p = 2, 7, 13, 31`.
pub fn default_maps(precision: u32) -> Result<Vec<MapParams>> {
    [2u64, 7, 13, 31]
        .into_iter()
        .map(|p| {
            let ctx = PAdicContext::new(p, precision)?;
            MapParams::exact(ctx.one(), 2)
        })
        .collect()
}
