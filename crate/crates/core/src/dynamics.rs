//! The map `f(x) = a / x^q` on exact points of `Q_p`.
//!
//! Stepping and the closed form work for any `q >= 1`:
//!
//! ```text
//! f^n(x) = a^((1 - (-q)^n) / (q + 1)) * x^((-q)^n)
//! ```
//!
//! where the exponent of `a` is an integer because `(-q)^n = 1 mod (q + 1)`.
//! Fixed points, periodic points and the radius bounds are specific to
//! `q = 2` and refuse other exponents.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::norm_geometry::{MapParams, Measured, RadiusExp};
use crate::padic::{valuation_of, PAdicContext, PAdicNumber, DEFAULT_PRECISION};
use crate::roots::{cube_roots, roots_of_unity, RootSet};

/// Largest period accepted by [`find_periodic`]; keeps `2^m + 1` in a `u64`.
pub const MAX_PERIOD: u32 = 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Character {
    Attracting,
    Indifferent,
    Repelling,
}

impl Character {
    /// From the norm of a multiplier.
    pub fn of(norm: &RadiusExp) -> Character {
        let one = RadiusExp::one(norm.prime());
        match norm.cmp(&one) {
            std::cmp::Ordering::Less => Character::Attracting,
            std::cmp::Ordering::Equal => Character::Indifferent,
            std::cmp::Ordering::Greater => Character::Repelling,
        }
    }
}

fn coefficient(params: &MapParams) -> Result<&PAdicNumber> {
    params
        .a_exact()
        .ok_or_else(|| Error::Domain("the coefficient a must be given exactly".into()))
}

fn require_quadratic(params: &MapParams) -> Result<()> {
    if params.q() != 2 {
        return Err(Error::Domain(format!(
            "this analysis is for f(x) = a/x^2, got q = {}",
            params.q()
        )));
    }
    Ok(())
}

fn check_point(params: &MapParams, x: &PAdicNumber) -> Result<()> {
    let a = coefficient(params)?;
    if a.context() != x.context() {
        return Err(Error::ContextMismatch(
            format!("{:?}", a.context()),
            format!("{:?}", x.context()),
        ));
    }
    if x.vanishes() {
        return Err(Error::Domain("f is undefined at 0".into()));
    }
    Ok(())
}

/// `f(x) = a * x^(-q)`.
pub fn step(params: &MapParams, x: &PAdicNumber) -> Result<PAdicNumber> {
    check_point(params, x)?;
    let a = coefficient(params)?;
    Ok(a * &x.pow(&-BigInt::from(params.q()))?)
}

/// `f^n(x)` by `n` applications of [`step`].
pub fn iterate_steps(params: &MapParams, x: &PAdicNumber, n: u32) -> Result<PAdicNumber> {
    (0..n).try_fold(x.clone(), |y, _| step(params, &y))
}

/// Exponents `((1 - (-q)^n) / (q + 1), (-q)^n)` of `a` and `x` in `f^n(x)`.
pub fn closed_form_exponents(q: u32, n: u32) -> Result<(BigInt, BigInt)> {
    let x_exp = (-BigInt::from(q)).pow(n);
    let (a_exp, rem) = (BigInt::one() - &x_exp).div_rem(&BigInt::from(q + 1));
    if !rem.is_zero() {
        return Err(Error::Internal(format!(
            "1 - (-{q})^{n} is not divisible by {}",
            q + 1
        )));
    }
    Ok((a_exp, x_exp))
}

/// `f^n(x)` from the closed form: two modular exponentiations.
pub fn closed_form_iterate(params: &MapParams, x: &PAdicNumber, n: u32) -> Result<PAdicNumber> {
    check_point(params, x)?;
    let a = coefficient(params)?;
    let (a_exp, x_exp) = closed_form_exponents(params.q(), n)?;
    Ok(&a.pow(&a_exp)? * &x.pow(&x_exp)?)
}

/// `|2|_p^m`, the norm of `(f^m)'` at any periodic point of period dividing `m`.
pub fn cycle_multiplier_norm(m: u32, prime: u64) -> (RadiusExp, Character) {
    let norm = if prime == 2 {
        RadiusExp::from_int(prime, m)
    } else {
        RadiusExp::one(prime)
    };
    let character = Character::of(&norm);
    (norm, character)
}

/// Whether the fixed points could be computed in `Q_p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RootStatus {
    Exact,
    /// `a` has no cube root in `Q_p`.
    NoCubeRoot,
    /// Hensel's condition fails (`p = 3`).
    NotLiftable,
    /// Only `v(a)` is known.
    NormLayerOnly,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FixedPointReport {
    pub status: RootStatus,
    /// The cube roots of `a` lying in `Q_p`.
    pub fixed_points: Option<RootSet>,
    pub alpha: RadiusExp,
    /// `f'(x_k) = -2` at every fixed point.
    pub multiplier: PAdicNumber,
    pub multiplier_norm: RadiusExp,
    pub character: Character,
    /// Distance between any two of the three fixed points in the algebraic
    /// closure: `alpha`, or `alpha * 3^(-1/2)` at `p = 3`.
    pub pairwise_distance: RadiusExp,
    /// Distances between the fixed points that lie in `Q_p`, pair by pair.
    pub exact_pairwise_distances: Vec<Measured>,
}

impl FixedPointReport {
    pub fn points(&self) -> &[PAdicNumber] {
        self.fixed_points.as_ref().map(|s| s.roots.as_slice()).unwrap_or(&[])
    }
}

/// `|x_i - x_j|_p` for distinct fixed points, from `(x_i - x_j)^2 = -3 x_i x_j`.
pub fn fixed_point_distance(params: &MapParams) -> RadiusExp {
    let p = params.prime();
    let mut e = params.alpha_exponent();
    if p == 3 {
        e += BigRational::new(BigInt::one(), BigInt::from(2));
    }
    RadiusExp::new(p, e)
}

pub fn fixed_point_analysis(params: &MapParams) -> Result<FixedPointReport> {
    require_quadratic(params)?;
    let p = params.prime();
    let ctx = match params.a_exact() {
        Some(a) => a.context().clone(),
        None => PAdicContext::new(p, DEFAULT_PRECISION)?,
    };
    let (status, fixed_points) = match params.a_exact() {
        None => (RootStatus::NormLayerOnly, None),
        Some(a) => match cube_roots(a) {
            Ok(set) if set.is_empty() => (RootStatus::NoCubeRoot, Some(set)),
            Ok(set) => (RootStatus::Exact, Some(set)),
            Err(Error::NotLiftable { .. }) => (RootStatus::NotLiftable, None),
            Err(e) => return Err(e),
        },
    };
    let mut exact_pairwise_distances = Vec::new();
    if let Some(set) = &fixed_points {
        for (i, xi) in set.roots.iter().enumerate() {
            for xj in &set.roots[i + 1..] {
                exact_pairwise_distances.push(xi.distance(xj)?);
            }
        }
    }
    let (multiplier_norm, character) = cycle_multiplier_norm(1, p);
    Ok(FixedPointReport {
        status,
        fixed_points,
        alpha: params.alpha(),
        multiplier: ctx.from_int(-2),
        multiplier_norm,
        character,
        pairwise_distance: fixed_point_distance(params),
        exact_pairwise_distances,
    })
}

/// `|f(x_k + h) - x_k| / |h|` with `h = p^j`: a finite-difference reading of `|f'(x_k)|_p`.
pub fn finite_difference_multiplier(params: &MapParams, fixed_point: &PAdicNumber, j: u32) -> Result<Measured> {
    let ctx = fixed_point.context();
    let h = ctx.from_int(BigInt::from(ctx.prime()).pow(j));
    let moved = step(params, &(fixed_point + &h))?;
    let h_norm = RadiusExp::from_int(ctx.prime(), j);
    Ok(match (&moved - fixed_point).norm() {
        Measured::Exact(r) => Measured::Exact(r.div(&h_norm)?),
        Measured::Below(r) => Measured::Below(r.div(&h_norm)?),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodicSearchResult {
    pub m: u32,
    pub parity: Parity,
    /// `2^m - 1` for even `m`, `2^m + 1` for odd `m`.
    pub unity_order: u64,
    pub status: RootStatus,
    /// The roots of unity `theta` of that order in `Q_p`.
    pub candidates: Option<RootSet>,
    /// `a^(1/3) * theta` (even `m`) or `a^(1/3) / theta` (odd `m`), one per candidate.
    pub points: Vec<PAdicNumber>,
    /// How many candidates are fixed points (`theta^3 = 1`).
    pub fixed_count: usize,
    /// The non-fixed points at distance 1 (relative to `alpha`) from every fixed point.
    pub mm_members: Vec<PAdicNumber>,
    /// Orbits of the members, each rotated to start at its smallest element.
    pub cycles: Vec<Vec<PAdicNumber>>,
    pub multiplier_norm: RadiusExp,
    pub character: Character,
}

/// The `m`-periodic points of `f(x) = a/x^2` off the fixed points, built as
/// `a^(1/3)` times roots of unity rather than by solving `f^m(x) = x`.
pub fn find_periodic(params: &MapParams, m: u32) -> Result<PeriodicSearchResult> {
    require_quadratic(params)?;
    match m {
        2 => return Err(Error::PeriodTwoRejected),
        0 | 1 => {
            return Err(Error::Domain(format!(
                "period m must be at least 3 (m = 1 are the fixed points), got {m}"
            )))
        }
        _ if m > MAX_PERIOD => {
            return Err(Error::Domain(format!("period m must be at most {MAX_PERIOD}")))
        }
        _ => {}
    }
    let p = params.prime();
    let parity = if m.is_multiple_of(2) { Parity::Even } else { Parity::Odd };
    let unity_order = match parity {
        Parity::Even => (1u64 << m) - 1,
        Parity::Odd => (1u64 << m) + 1,
    };
    let (multiplier_norm, character) = cycle_multiplier_norm(m, p);
    let fixed = fixed_point_analysis(params)?;
    let mut result = PeriodicSearchResult {
        m,
        parity,
        unity_order,
        status: fixed.status,
        candidates: None,
        points: Vec::new(),
        fixed_count: 0,
        mm_members: Vec::new(),
        cycles: Vec::new(),
        multiplier_norm,
        character,
    };
    if fixed.status != RootStatus::Exact {
        return Ok(result);
    }
    let cube_root = fixed.points()[0].clone();
    let ctx = cube_root.context().clone();
    let thetas = roots_of_unity(unity_order, &ctx)?;
    // Cube roots of unity outside Q_p are at distance 1 from every theta in Q_p
    // (p != 3), so only those in Q_p can violate the distance condition.
    let cube_unity_residues: Vec<u64> = roots_of_unity(3, &ctx)?
        .roots
        .iter()
        .filter_map(PAdicNumber::unit_residue)
        .collect();
    for theta in &thetas.roots {
        let point = match parity {
            Parity::Even => &cube_root * theta,
            Parity::Odd => cube_root.div(theta)?,
        };
        let residue = theta.unit_residue().expect("roots of unity are units");
        if cube_unity_residues.contains(&residue) {
            result.fixed_count += 1;
        } else {
            result.mm_members.push(point.clone());
        }
        result.points.push(point);
    }
    result.candidates = Some(thetas);

    let alpha = params.alpha();
    for x in &result.mm_members {
        if !(&closed_form_iterate(params, x, m)? - x).vanishes() {
            return Err(Error::Internal(format!("f^{m}(x) != x for candidate {x}")));
        }
        for fp in fixed.points() {
            if x.distance(fp)? != Measured::Exact(alpha.clone()) {
                return Err(Error::Internal(format!("candidate {x} is not equidistant")));
            }
        }
    }
    result.cycles = assemble_cycles(params, &result.mm_members, m)?;
    Ok(result)
}

fn assemble_cycles(params: &MapParams, members: &[PAdicNumber], m: u32) -> Result<Vec<Vec<PAdicNumber>>> {
    let mut assigned = vec![false; members.len()];
    let mut cycles = Vec::new();
    for start in 0..members.len() {
        if assigned[start] {
            continue;
        }
        let mut orbit = vec![members[start].clone()];
        let mut y = step(params, &members[start])?;
        while !(&y - &members[start]).vanishes() {
            if orbit.len() as u32 >= m {
                return Err(Error::Internal("orbit longer than the period".into()));
            }
            orbit.push(y.clone());
            y = step(params, &y)?;
        }
        for point in &orbit {
            if let Some(i) = members.iter().position(|z| (z - point).vanishes()) {
                assigned[i] = true;
            }
        }
        let lowest = (0..orbit.len())
            .min_by_key(|&i| orbit[i].sort_key())
            .expect("orbit is nonempty");
        orbit.rotate_left(lowest);
        cycles.push(orbit);
    }
    cycles.sort_by_key(|c| c[0].sort_key());
    Ok(cycles)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    /// Basin criterion, `max_{n >= 1}`, compared against 1.
    Q,
    /// Siegel criterion, `max_{n >= 2}`, compared against `|phi'|_p`.
    S,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundTerm {
    pub n: u64,
    pub value: RadiusExp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundReport {
    pub m: u32,
    pub r_over_alpha: RadiusExp,
    pub kind: BoundKind,
    /// The maximum over all `n`; zero if every coefficient vanishes.
    pub value: RadiusExp,
    pub threshold: RadiusExp,
    pub satisfied: bool,
    /// First `n` whose geometric factor alone is already below the maximum.
    pub n_cutoff: u64,
    pub terms: Vec<BoundTerm>,
}

/// Evaluate the Taylor-coefficient bound of `phi = f^m` around an `m`-periodic
/// point on `S_alpha(0)`, rescaled so that only `r / alpha` enters:
///
/// ```text
/// term_n = | prod_{s<n} ((-2)^m - s) / n! |_p * (r/alpha)^(n-1)
/// ```
///
/// At `p = 2` this is the basin bound `Q` (needs `Q < 1`); otherwise the
/// Siegel bound `S` over `n >= 2` (needs `S < |phi'|_p = 1`).
pub fn attraction_bound(m: u32, r_over_alpha: &RadiusExp, prime: u64) -> Result<BoundReport> {
    let e = match r_over_alpha.exponent() {
        Some(e) if e.is_positive() => e.clone(),
        _ => {
            return Err(Error::OutOfRegime(format!(
                "r/alpha must satisfy 0 < r/alpha < 1, got {r_over_alpha}"
            )))
        }
    };
    if r_over_alpha.prime() != prime {
        return Err(Error::ContextMismatch(
            format!("p = {prime}"),
            format!("radius over p = {}", r_over_alpha.prime()),
        ));
    }
    let (kind, start) = if prime == 2 { (BoundKind::Q, 1u64) } else { (BoundKind::S, 2u64) };
    let top = (-BigInt::from(2)).pow(m);
    let threshold = match kind {
        BoundKind::Q => RadiusExp::one(prime),
        BoundKind::S => RadiusExp::of_integer(prime, &top),
    };

    let mut v_product = BigInt::zero();
    let mut v_factorial = BigInt::zero();
    let mut vanished = false;
    let mut best: Option<BigRational> = None;
    let mut terms = Vec::new();
    let mut n = 1u64;
    let n_cutoff = loop {
        let geometric = &e * BigRational::from_integer(BigInt::from(n - 1));
        if n >= start {
            if let Some(b) = &best {
                if &geometric >= b {
                    break n;
                }
            }
        }
        let factor = &top - BigInt::from(n - 1);
        if factor.is_zero() {
            vanished = true;
        }
        if vanished {
            // every later coefficient is 0 as well
            break n;
        }
        v_product += valuation_of(&factor, prime);
        v_factorial += valuation_of(&BigInt::from(n), prime);
        let v_coeff = &v_product - &v_factorial;
        if v_coeff.is_negative() {
            return Err(Error::Internal(format!("coefficient {n} is not an integer")));
        }
        if n >= start {
            let exponent = BigRational::from_integer(v_coeff) + geometric;
            if best.as_ref().is_none_or(|b| &exponent < b) {
                best = Some(exponent.clone());
            }
            terms.push(BoundTerm {
                n,
                value: RadiusExp::new(prime, exponent),
            });
        }
        n += 1;
    };
    let value = match best {
        Some(b) => RadiusExp::new(prime, b),
        None => RadiusExp::zero(prime),
    };
    Ok(BoundReport {
        m,
        r_over_alpha: r_over_alpha.clone(),
        kind,
        satisfied: value < threshold,
        value,
        threshold,
        n_cutoff,
        terms,
    })
}

/// `|(-2)^m|_p`, the norm of the first Taylor coefficient of `f^m`.
pub fn derivative_norm(m: u32, prime: u64) -> RadiusExp {
    RadiusExp::of_integer(prime, &(-BigInt::from(2)).pow(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(p: u64, n: u32, num: i64, den: i64) -> MapParams {
        let ctx = PAdicContext::new(p, n).unwrap();
        MapParams::exact(ctx.from_rational(num, den).unwrap(), 2).unwrap()
    }

    #[test]
    fn step_examples() {
        let prm = quad(3, 16, 3, 1);
        let ctx = prm.a_exact().unwrap().context().clone();
        assert_eq!(step(&prm, &ctx.one()).unwrap(), ctx.from_int(3));
        assert!(matches!(step(&prm, &ctx.zero()), Err(Error::Domain(_))));
    }

    #[test]
    fn closed_form_second_iterate() {
        let prm = quad(3, 16, 3, 1);
        let ctx = prm.a_exact().unwrap().context().clone();
        let direct = step(&prm, &step(&prm, &ctx.one()).unwrap()).unwrap();
        assert_eq!(direct, ctx.from_rational(1, 3).unwrap());
        assert_eq!(closed_form_iterate(&prm, &ctx.one(), 2).unwrap(), direct);
        assert_eq!(closed_form_iterate(&prm, &ctx.one(), 1).unwrap(), step(&prm, &ctx.one()).unwrap());
    }

    #[test]
    fn exponent_integrality() {
        for n in 0..=1000 {
            assert!(closed_form_exponents(2, n).is_ok());
        }
        for q in 1..6 {
            for n in 0..40 {
                closed_form_exponents(q, n).unwrap();
            }
        }
    }

    #[test]
    fn q_one_is_an_involution() {
        let ctx = PAdicContext::new(5, 20).unwrap();
        let prm = MapParams::exact(ctx.from_rational(7, 5).unwrap(), 1).unwrap();
        let x = ctx.from_rational(-12, 25).unwrap();
        assert_eq!(iterate_steps(&prm, &x, 2).unwrap(), x);
        assert!(fixed_point_analysis(&prm).is_err());
    }

    #[test]
    fn seven_has_three_fixed_points() {
        let prm = quad(7, 64, 1, 1);
        let rep = fixed_point_analysis(&prm).unwrap();
        assert_eq!(rep.status, RootStatus::Exact);
        assert_eq!(rep.points().len(), 3);
        assert_eq!(rep.character, Character::Indifferent);
        for d in &rep.exact_pairwise_distances {
            assert_eq!(d, &Measured::Exact(RadiusExp::one(7)));
        }
        for x in rep.points() {
            assert_eq!(&step(&prm, x).unwrap(), x);
        }
    }

    #[test]
    fn two_is_attracting() {
        let rep = fixed_point_analysis(&quad(2, 64, 1, 1)).unwrap();
        assert_eq!(rep.character, Character::Attracting);
        assert_eq!(rep.multiplier_norm, RadiusExp::from_int(2, 1));
    }

    #[test]
    fn three_is_norm_layer_only() {
        let rep = fixed_point_analysis(&quad(3, 64, 1, 1)).unwrap();
        assert_eq!(rep.status, RootStatus::NotLiftable);
        assert_eq!(rep.pairwise_distance, RadiusExp::from_ratio(3, 1, 2));
        let prm = MapParams::valuation_only(3, 6, 2).unwrap();
        assert_eq!(
            fixed_point_analysis(&prm).unwrap().pairwise_distance,
            RadiusExp::from_ratio(3, 5, 2)
        );
    }

    #[test]
    fn periodic_rejections() {
        let prm = quad(31, 16, 1, 1);
        assert_eq!(find_periodic(&prm, 2), Err(Error::PeriodTwoRejected));
        assert!(matches!(find_periodic(&prm, 0), Err(Error::Domain(_))));
        assert!(matches!(find_periodic(&prm, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn no_periodic_points_at_five_and_two() {
        let r = find_periodic(&quad(5, 32, 1, 1), 4).unwrap();
        assert_eq!(r.candidates.as_ref().unwrap().count(), 1);
        assert!(r.mm_members.is_empty());
        let r = find_periodic(&quad(2, 32, 1, 1), 3).unwrap();
        assert_eq!(r.unity_order, 9);
        assert_eq!(r.candidates.as_ref().unwrap().count(), 1);
        assert!(r.cycles.is_empty());
    }

    #[test]
    fn period_six_contains_three_cycles() {
        // 63 = 9 * 7 and gcd(63, 18) = 9 at p = 19: all non-fixed points have period 3
        let prm = quad(19, 32, 1, 1);
        let r = find_periodic(&prm, 6).unwrap();
        assert_eq!(r.candidates.as_ref().unwrap().count(), 9);
        assert_eq!(r.fixed_count, 3);
        assert!(r.cycles.iter().all(|c| c.len() == 3));
        assert_eq!(r.cycles.len(), 2);
    }

    #[test]
    fn cycle_multipliers() {
        assert_eq!(cycle_multiplier_norm(3, 2), (RadiusExp::from_int(2, 3), Character::Attracting));
        assert_eq!(cycle_multiplier_norm(5, 13), (RadiusExp::one(13), Character::Indifferent));
        assert_eq!(cycle_multiplier_norm(0, 2).0, RadiusExp::one(2));
    }

    #[test]
    fn bound_examples() {
        let b = attraction_bound(1, &RadiusExp::from_int(2, 1), 2).unwrap();
        assert_eq!(b.kind, BoundKind::Q);
        assert_eq!(b.terms[0].value, RadiusExp::from_int(2, 1));
        assert_eq!(b.value, RadiusExp::from_int(2, 1));
        assert!(b.satisfied);
        assert_eq!(b.n_cutoff, 2);

        let b = attraction_bound(2, &RadiusExp::from_int(7, 1), 7).unwrap();
        assert_eq!(b.kind, BoundKind::S);
        assert!(b.value <= RadiusExp::from_int(7, 1));
        assert!(b.satisfied);

        assert!(matches!(
            attraction_bound(2, &RadiusExp::one(7), 7),
            Err(Error::OutOfRegime(_))
        ));
    }

    #[test]
    fn first_bound_term_is_norm_of_top() {
        for m in [1u32, 4, 7] {
            let b = attraction_bound(m, &RadiusExp::from_int(2, 1), 2).unwrap();
            assert_eq!(b.terms[0].n, 1);
            assert_eq!(b.terms[0].value, derivative_norm(m, 2));
        }
    }

    #[test]
    fn even_period_bound_vanishes_past_two_to_the_m() {
        // for small r/alpha the max is at n = 2 well before 2^m + 1
        let b = attraction_bound(2, &RadiusExp::from_ratio(5, 1, 100), 5).unwrap();
        assert!(b.terms.len() <= 5);
    }
}
