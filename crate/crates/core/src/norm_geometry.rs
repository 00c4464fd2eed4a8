//! The norm layer: radii `p^(-e)` with rational exponent `e`, and the
//! valuation-only dynamics of `f(x) = a / x^q`.
//!
//! Everything here depends on `|a|_p` and `|x|_p` alone, so the results hold
//! for points of the algebraic closure as well as for `Q_p`. With
//! `alpha = |a|_p^(1/(q+1))` and `r = |x|_p`, the norm of the n-th iterate is
//!
//! ```text
//! r_n = alpha^(1 - (-q)^n) * r^((-q)^n)
//! ```
//!
//! which in exponent form reads `e_n - e_alpha = (-q)^n (e_0 - e_alpha)`.
//! The sign of `e_0 - e_alpha` and the parity of `n` decide every limit.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::error::{Error, Result};
use crate::json;
use crate::padic::PAdicNumber;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Kind {
    Zero,
    Finite(BigRational),
    Infinite,
}

/// A radius `p^(-e)` with `e` rational, or one of the two ends `0` and `+inf`.
///
/// Ordering is by radius: a larger exponent is a smaller radius.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RadiusExp {
    prime: u64,
    kind: Kind,
}

impl RadiusExp {
    pub fn new(prime: u64, exponent: BigRational) -> Self {
        Self {
            prime,
            kind: Kind::Finite(exponent),
        }
    }

    pub fn from_int(prime: u64, exponent: impl Into<BigInt>) -> Self {
        Self::new(prime, BigRational::from_integer(exponent.into()))
    }

    pub fn from_ratio(prime: u64, num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        Self::new(prime, BigRational::new(num.into(), den.into()))
    }

    /// The radius 1.
    pub fn one(prime: u64) -> Self {
        Self::from_int(prime, 0)
    }

    pub fn zero(prime: u64) -> Self {
        Self {
            prime,
            kind: Kind::Zero,
        }
    }

    pub fn infinite(prime: u64) -> Self {
        Self {
            prime,
            kind: Kind::Infinite,
        }
    }

    /// `|n|_p` for a nonzero integer `n`.
    pub fn of_integer(prime: u64, n: &BigInt) -> Self {
        if n.is_zero() {
            return Self::zero(prime);
        }
        Self::from_int(prime, crate::padic::valuation_of(n, prime))
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    /// The exponent `e` of a finite nonzero radius.
    pub fn exponent(&self) -> Option<&BigRational> {
        match &self.kind {
            Kind::Finite(e) => Some(e),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kind == Kind::Zero
    }

    pub fn is_infinite(&self) -> bool {
        self.kind == Kind::Infinite
    }

    pub fn is_finite_nonzero(&self) -> bool {
        matches!(self.kind, Kind::Finite(_))
    }

    /// Product of radii: exponents add.
    pub fn mul(&self, other: &RadiusExp) -> Result<RadiusExp> {
        self.same_prime(other)?;
        let kind = match (&self.kind, &other.kind) {
            (Kind::Zero, Kind::Infinite) | (Kind::Infinite, Kind::Zero) => {
                return Err(Error::Domain("0 * inf is undefined".into()))
            }
            (Kind::Zero, _) | (_, Kind::Zero) => Kind::Zero,
            (Kind::Infinite, _) | (_, Kind::Infinite) => Kind::Infinite,
            (Kind::Finite(a), Kind::Finite(b)) => Kind::Finite(a + b),
        };
        Ok(Self {
            prime: self.prime,
            kind,
        })
    }

    /// `self / other`; exponents subtract.
    pub fn div(&self, other: &RadiusExp) -> Result<RadiusExp> {
        self.mul(&other.recip()?)
    }

    pub fn recip(&self) -> Result<RadiusExp> {
        let kind = match &self.kind {
            Kind::Zero => Kind::Infinite,
            Kind::Infinite => Kind::Zero,
            Kind::Finite(e) => Kind::Finite(-e),
        };
        Ok(Self {
            prime: self.prime,
            kind,
        })
    }

    /// `self^k` for a rational power; the ends `0` and `inf` swap under negative powers.
    pub fn pow(&self, k: &BigRational) -> RadiusExp {
        let kind = match &self.kind {
            _ if k.is_zero() => Kind::Finite(BigRational::zero()),
            Kind::Finite(e) => Kind::Finite(e * k),
            Kind::Zero if k.is_positive() => Kind::Zero,
            Kind::Zero => Kind::Infinite,
            Kind::Infinite if k.is_positive() => Kind::Infinite,
            Kind::Infinite => Kind::Zero,
        };
        Self {
            prime: self.prime,
            kind,
        }
    }

    fn same_prime(&self, other: &RadiusExp) -> Result<()> {
        if self.prime != other.prime {
            return Err(Error::ContextMismatch(
                format!("p = {}", self.prime),
                format!("p = {}", other.prime),
            ));
        }
        Ok(())
    }

    fn rank(&self) -> u8 {
        match self.kind {
            Kind::Zero => 0,
            Kind::Finite(_) => 1,
            Kind::Infinite => 2,
        }
    }
}

impl Ord for RadiusExp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.prime.cmp(&other.prime).then_with(|| {
            match (&self.kind, &other.kind) {
                // larger exponent, smaller radius
                (Kind::Finite(a), Kind::Finite(b)) => b.cmp(a),
                _ => self.rank().cmp(&other.rank()),
            }
        })
    }
}

impl PartialOrd for RadiusExp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for RadiusExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Zero => write!(f, "0"),
            Kind::Infinite => write!(f, "inf"),
            Kind::Finite(e) if e.is_zero() => write!(f, "1"),
            Kind::Finite(e) => write!(f, "{}^({})", self.prime, -e),
        }
    }
}

impl Serialize for RadiusExp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("p", &self.prime)?;
        match &self.kind {
            Kind::Zero => map.serialize_entry("zero", &true)?,
            Kind::Infinite => map.serialize_entry("infinite", &true)?,
            Kind::Finite(e) => {
                map.serialize_entry("num", &json::big_int(e.numer()))?;
                map.serialize_entry("den", &json::big_int(e.denom()))?;
            }
        }
        map.end()
    }
}

/// A norm read off a finite-precision value.
///
/// `Below(r)` means the quantity vanished at the available precision and is
/// only known to be at most `r`. It is never the same thing as an exact zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Measured {
    Exact(RadiusExp),
    Below(RadiusExp),
}

impl Measured {
    pub fn exact(&self) -> Option<&RadiusExp> {
        match self {
            Measured::Exact(r) => Some(r),
            Measured::Below(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Measured::Exact(_))
    }

    /// An upper bound that always holds.
    pub fn upper_bound(&self) -> &RadiusExp {
        match self {
            Measured::Exact(r) | Measured::Below(r) => r,
        }
    }
}

impl fmt::Display for Measured {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measured::Exact(r) => write!(f, "{r}"),
            Measured::Below(r) => write!(f, "<= {r}"),
        }
    }
}

impl Serialize for Measured {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(1))?;
        match self {
            Measured::Exact(r) => map.serialize_entry("exact", r)?,
            Measured::Below(r) => map.serialize_entry("below", r)?,
        }
        map.end()
    }
}

/// Parameters of `f(x) = a / x^q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapParams {
    prime: u64,
    a_valuation: BigInt,
    a_exact: Option<PAdicNumber>,
    q: u32,
}

impl MapParams {
    /// The map with an exactly known coefficient `a` in `Q_p`.
    pub fn exact(a: PAdicNumber, q: u32) -> Result<Self> {
        check_q(q)?;
        let a_valuation = match a.valuation() {
            Some(v) => v.clone(),
            None => return Err(Error::Domain("coefficient a must be nonzero".into())),
        };
        Ok(Self {
            prime: a.context().prime(),
            a_valuation,
            a_exact: Some(a),
            q,
        })
    }

    /// The map known only through `v(a)`; enough for every norm-level statement.
    pub fn valuation_only(prime: u64, a_valuation: impl Into<BigInt>, q: u32) -> Result<Self> {
        check_q(q)?;
        Ok(Self {
            prime,
            a_valuation: a_valuation.into(),
            a_exact: None,
            q,
        })
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn a_valuation(&self) -> &BigInt {
        &self.a_valuation
    }

    pub fn a_exact(&self) -> Option<&PAdicNumber> {
        self.a_exact.as_ref()
    }

    /// Exponent of `alpha`: `v(a) / (q + 1)`.
    pub fn alpha_exponent(&self) -> BigRational {
        BigRational::new(self.a_valuation.clone(), BigInt::from(self.q + 1))
    }

    /// The invariant radius `alpha = |a|_p^(1/(q+1))`.
    pub fn alpha(&self) -> RadiusExp {
        RadiusExp::new(self.prime, self.alpha_exponent())
    }
}

fn check_q(q: u32) -> Result<()> {
    if q == 0 {
        return Err(Error::Domain("exponent q must be at least 1".into()));
    }
    Ok(())
}

/// Where a sphere `S_r(0)` sits relative to `S_alpha(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OuterRegion {
    Inside,
    OnSphere,
    Outside,
}

/// Symbolic limit of a subsequence of `|f^n(x)|_p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Limit {
    /// The norms tend to 0, so the iterates themselves tend to 0.
    Zero,
    Infinity,
    /// Constant at `alpha`.
    Alpha,
    /// Constant at the starting radius (the `q = 1` two-cycle, even steps).
    Initial,
    /// Constant at `|a|_p / r` (the `q = 1` two-cycle, odd steps).
    Reflected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrajectoryClass {
    CollapseEvenEscapeOdd,
    EscapeEvenCollapseOdd,
    InvariantSphere,
    PeriodTwo,
}

impl TrajectoryClass {
    /// Limits of the (even, odd) subsequences.
    pub fn limits(self) -> (Limit, Limit) {
        match self {
            TrajectoryClass::CollapseEvenEscapeOdd => (Limit::Zero, Limit::Infinity),
            TrajectoryClass::EscapeEvenCollapseOdd => (Limit::Infinity, Limit::Zero),
            TrajectoryClass::InvariantSphere => (Limit::Alpha, Limit::Alpha),
            TrajectoryClass::PeriodTwo => (Limit::Initial, Limit::Reflected),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct RadiusTrajectory {
    pub initial: RadiusExp,
    /// `terms[k]` is `r_{k+1}`.
    pub terms: Vec<RadiusExp>,
    pub classification: TrajectoryClass,
}

impl RadiusTrajectory {
    /// CSV with columns `n,num,den`; row `n = 0` is the starting radius.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,num,den\n");
        for (n, r) in std::iter::once(&self.initial).chain(&self.terms).enumerate() {
            // radii here are always finite and nonzero
            let e = r.exponent().expect("finite radius");
            out.push_str(&format!("{n},{},{}\n", e.numer(), e.denom()));
        }
        out
    }
}

fn finite_exponent(r: &RadiusExp, what: &str) -> Result<BigRational> {
    match r.exponent() {
        Some(e) => Ok(e.clone()),
        None if r.is_zero() => Err(Error::Domain(format!(
            "{what}: f is undefined at 0 (radius must be positive)"
        ))),
        None => Err(Error::Domain(format!("{what}: radius must be finite"))),
    }
}

fn check_prime(params: &MapParams, r: &RadiusExp) -> Result<()> {
    if params.prime != r.prime() {
        return Err(Error::ContextMismatch(
            format!("map over p = {}", params.prime),
            format!("radius over p = {}", r.prime()),
        ));
    }
    Ok(())
}

/// Exponent of `r_n`, in closed form: `(1 - (-q)^n) e_alpha + (-q)^n e_0`.
pub fn radius_exponent_at(params: &MapParams, e0: &BigRational, n: u32) -> BigRational {
    let factor = BigRational::from_integer((-BigInt::from(params.q)).pow(n));
    let e_alpha = params.alpha_exponent();
    (BigRational::one() - &factor) * e_alpha + factor * e0
}

fn classify_exponent(params: &MapParams, e0: &BigRational) -> TrajectoryClass {
    let e_alpha = params.alpha_exponent();
    match e0.cmp(&e_alpha) {
        Ordering::Equal => TrajectoryClass::InvariantSphere,
        _ if params.q == 1 => TrajectoryClass::PeriodTwo,
        // larger exponent: r < alpha
        Ordering::Greater => TrajectoryClass::CollapseEvenEscapeOdd,
        Ordering::Less => TrajectoryClass::EscapeEvenCollapseOdd,
    }
}

/// The exact radius sequence `r_1, ..., r_{n_max}` of a point with `|x|_p = r`.
pub fn radius_iterate(params: &MapParams, r: &RadiusExp, n_max: u32) -> Result<RadiusTrajectory> {
    check_prime(params, r)?;
    let e0 = finite_exponent(r, "radius_iterate")?;
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let terms = (1..=n_max)
        .map(|n| RadiusExp::new(params.prime, radius_exponent_at(params, &e0, n)))
        .collect();
    Ok(RadiusTrajectory {
        initial: r.clone(),
        terms,
        classification: classify_exponent(params, &e0),
    })
}

/// Outer label of a starting radius together with its even/odd limits.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct StartClassification {
    pub region: OuterRegion,
    pub trajectory: TrajectoryClass,
    pub even_limit: Limit,
    pub odd_limit: Limit,
}

pub fn classify_start(params: &MapParams, r: &RadiusExp) -> Result<StartClassification> {
    check_prime(params, r)?;
    let e0 = finite_exponent(r, "classify_start")?;
    let region = match e0.cmp(&params.alpha_exponent()) {
        Ordering::Greater => OuterRegion::Inside,
        Ordering::Equal => OuterRegion::OnSphere,
        Ordering::Less => OuterRegion::Outside,
    };
    let trajectory = classify_exponent(params, &e0);
    let (even_limit, odd_limit) = trajectory.limits();
    Ok(StartClassification {
        region,
        trajectory,
        even_limit,
        odd_limit,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct MappedRegion {
    pub source: OuterRegion,
    /// `|a|_p / r^q`
    pub image_radius: RadiusExp,
    pub image: OuterRegion,
}

/// Where `f` sends the sphere `S_r(0)`.
pub fn ball_mapping_check(params: &MapParams, r: &RadiusExp) -> Result<MappedRegion> {
    check_prime(params, r)?;
    let e0 = finite_exponent(r, "ball_mapping_check")?;
    let e_image = BigRational::from_integer(params.a_valuation.clone())
        - BigRational::from_integer(BigInt::from(params.q)) * &e0;
    let e_alpha = params.alpha_exponent();
    let side = |e: &BigRational| match e.cmp(&e_alpha) {
        Ordering::Greater => OuterRegion::Inside,
        Ordering::Equal => OuterRegion::OnSphere,
        Ordering::Less => OuterRegion::Outside,
    };
    Ok(MappedRegion {
        source: side(&e0),
        image: side(&e_image),
        image_radius: RadiusExp::new(params.prime, e_image),
    })
}

/// Witness that no point of `S_r(0)`, `r != alpha`, returns to its sphere after `m` steps.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct OffSphereWitness {
    pub m: u32,
    pub initial: RadiusExp,
    pub after_m: RadiusExp,
    pub holds: bool,
}

pub fn no_offsphere_periodics(params: &MapParams, r: &RadiusExp, m: u32) -> Result<OffSphereWitness> {
    check_prime(params, r)?;
    let e0 = finite_exponent(r, "no_offsphere_periodics")?;
    if m == 0 {
        return Err(Error::Domain("period m must be at least 1".into()));
    }
    if e0 == params.alpha_exponent() {
        return Err(Error::Precondition(
            "r = alpha: the invariant sphere is excluded".into(),
        ));
    }
    let em = radius_exponent_at(params, &e0, m);
    Ok(OffSphereWitness {
        m,
        holds: em != e0,
        initial: r.clone(),
        after_m: RadiusExp::new(params.prime, em),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: u64, v: i64, q: u32) -> MapParams {
        MapParams::valuation_only(p, v, q).unwrap()
    }

    #[test]
    fn ordering_follows_radius() {
        let p = 5;
        let small = RadiusExp::from_int(p, 3);
        let big = RadiusExp::from_int(p, -1);
        assert!(small < big);
        assert!(RadiusExp::zero(p) < small);
        assert!(big < RadiusExp::infinite(p));
        assert!(RadiusExp::from_ratio(p, 1, 3) < RadiusExp::one(p));
    }

    #[test]
    fn radius_sequence_for_unit_start_outside() {
        // v(a) = 1, q = 2, r = 1 > alpha = p^(-1/3)
        let p = 7;
        let t = radius_iterate(&params(p, 1, 2), &RadiusExp::one(p), 3).unwrap();
        assert_eq!(t.terms[0], RadiusExp::from_int(p, 1));
        assert_eq!(t.terms[1], RadiusExp::from_int(p, -1));
        assert_eq!(t.terms[2], RadiusExp::from_int(p, 3));
        assert_eq!(t.classification, TrajectoryClass::EscapeEvenCollapseOdd);
    }

    #[test]
    fn alpha_start_is_invariant() {
        let prm = params(3, 2, 2);
        let t = radius_iterate(&prm, &prm.alpha(), 20).unwrap();
        assert!(t.terms.iter().all(|r| *r == prm.alpha()));
        assert_eq!(t.classification, TrajectoryClass::InvariantSphere);
    }

    #[test]
    fn q_one_is_two_periodic() {
        let prm = params(5, 1, 1);
        let r = RadiusExp::from_int(5, 2);
        let t = radius_iterate(&prm, &r, 10).unwrap();
        assert_eq!(t.terms[1], r);
        assert_eq!(t.terms[0], RadiusExp::from_int(5, -1));
        assert_eq!(t.classification, TrajectoryClass::PeriodTwo);
    }

    #[test]
    fn q_zero_rejected() {
        assert!(matches!(MapParams::valuation_only(5, 0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn classify_examples() {
        let c = classify_start(&params(5, 0, 2), &RadiusExp::from_int(5, 1)).unwrap();
        assert_eq!(c.region, OuterRegion::Inside);
        assert_eq!((c.even_limit, c.odd_limit), (Limit::Zero, Limit::Infinity));

        let prm = params(5, 4, 2);
        assert_eq!(classify_start(&prm, &prm.alpha()).unwrap().region, OuterRegion::OnSphere);

        // alpha = p when v(a) = -3
        let c = classify_start(&params(5, -3, 2), &RadiusExp::one(5)).unwrap();
        assert_eq!(c.region, OuterRegion::Inside);

        assert!(matches!(
            classify_start(&params(5, 0, 2), &RadiusExp::zero(5)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mapping_swaps_inside_and_outside() {
        let prm = params(3, 0, 2);
        let m = ball_mapping_check(&prm, &RadiusExp::from_int(3, 1)).unwrap();
        assert_eq!((m.source, m.image), (OuterRegion::Inside, OuterRegion::Outside));
        let m = ball_mapping_check(&prm, &RadiusExp::from_int(3, -1)).unwrap();
        assert_eq!(m.image_radius, RadiusExp::from_int(3, 2));
        assert_eq!(m.image, OuterRegion::Inside);
        let m = ball_mapping_check(&prm, &prm.alpha()).unwrap();
        assert_eq!(m.image, OuterRegion::OnSphere);
    }

    #[test]
    fn offsphere_witness() {
        let prm = params(5, 0, 2);
        let w = no_offsphere_periodics(&prm, &RadiusExp::from_int(5, 1), 3).unwrap();
        assert!(w.holds);
        assert_eq!(w.after_m, RadiusExp::from_int(5, -8));
        assert!(matches!(
            no_offsphere_periodics(&prm, &prm.alpha(), 2),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn csv_columns() {
        let prm = params(2, 0, 2);
        let t = radius_iterate(&prm, &RadiusExp::from_int(2, 1), 2).unwrap();
        assert_eq!(t.to_csv(), "n,num,den\n0,1,1\n1,-2,1\n2,4,1\n");
    }

    #[test]
    fn json_shape() {
        let r = RadiusExp::from_ratio(3, 1, 2);
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"p":3,"num":1,"den":2}"#);
        assert_eq!(
            serde_json::to_string(&RadiusExp::zero(3)).unwrap(),
            r#"{"p":3,"zero":true}"#
        );
    }
}
