//! Roots in `Q_p` by Hensel lifting: cube roots of `a`, roots of unity and
//! Teichmüller representatives.
//!
//! Seeds are found by scanning every residue mod `p`, which keeps the search
//! trivially verifiable for primes at desk scale.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::error::{Error, Result};
use crate::padic::{PAdicContext, PAdicNumber};

/// An integer polynomial, read modulo `p^N` when lifting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Poly {
    /// `x^degree - constant`
    Binomial { degree: u64, constant: BigInt },
    /// Coefficients from the constant term upwards.
    Dense(Vec<BigInt>),
}

impl Poly {
    pub fn cube_minus(constant: impl Into<BigInt>) -> Self {
        Poly::Binomial {
            degree: 3,
            constant: constant.into(),
        }
    }

    pub fn unity(k: u64) -> Self {
        Poly::Binomial {
            degree: k,
            constant: BigInt::one(),
        }
    }

    /// `(poly(x), poly'(x)) mod modulus`.
    fn eval(&self, x: &BigUint, modulus: &BigUint) -> (BigUint, BigUint) {
        let m = BigInt::from(modulus.clone());
        let reduce = |v: BigInt| v.mod_floor(&m).to_biguint().expect("reduced");
        match self {
            Poly::Binomial { degree, constant } => {
                if *degree == 0 {
                    return (reduce(BigInt::one() - constant), BigUint::zero());
                }
                let lower = x.modpow(&BigUint::from(degree - 1), modulus);
                let value = BigInt::from(&lower * x % modulus) - constant;
                let deriv = BigUint::from(*degree) * lower % modulus;
                (reduce(value), deriv)
            }
            Poly::Dense(coeffs) => {
                let x = BigInt::from(x.clone());
                let mut value = BigInt::zero();
                let mut deriv = BigInt::zero();
                for c in coeffs.iter().rev() {
                    deriv = (deriv * &x + &value).mod_floor(&m);
                    value = (value * &x + c).mod_floor(&m);
                }
                (reduce(value), reduce(deriv))
            }
        }
    }
}

/// Lift a simple root `seed` of `poly mod p` to the root in `Z_p`, correct mod `p^N`.
///
/// Newton's iteration doubles the number of correct digits per step.
pub fn hensel_lift(poly: &Poly, seed: u64, ctx: &PAdicContext) -> Result<PAdicNumber> {
    let p = ctx.prime();
    let p_big = BigUint::from(p);
    let seed_big = BigUint::from(seed % p);
    let (value, deriv) = poly.eval(&seed_big, &p_big);
    if !value.is_zero() {
        return Err(Error::BadSeed { prime: p, seed });
    }
    if deriv.is_zero() {
        return Err(Error::NotLiftable { prime: p, seed });
    }
    let target = ctx.precision();
    let mut x = seed_big;
    let mut digits = 1u32;
    while digits < target {
        digits = (2 * digits).min(target);
        let modulus = ctx.modulus(digits);
        let (value, deriv) = poly.eval(&x, &modulus);
        let step = value * deriv.modinv(&modulus).expect("derivative is a unit") % &modulus;
        x = (x + &modulus - step) % &modulus;
    }
    let lifted = ctx.from_int(BigInt::from(x));
    Ok(lifted.truncate_abs(&BigInt::from(target)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Equation {
    CubeRootOf(PAdicNumber),
    RootOfUnity(u64),
}

impl Equation {
    pub fn describe(&self) -> String {
        match self {
            Equation::CubeRootOf(_) => "x^3 = a".to_string(),
            Equation::RootOfUnity(k) => format!("x^{k} = 1"),
        }
    }
}

/// All solutions in `Q_p` of one equation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootSet {
    pub equation: Equation,
    /// Ordered by the residue of the lifting seed.
    pub roots: Vec<PAdicNumber>,
}

impl RootSet {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

impl Serialize for RootSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(3))?;
        map.serialize_entry("equation", &self.equation.describe())?;
        map.serialize_entry("g", &self.count())?;
        map.serialize_entry("roots", &self.roots)?;
        map.end()
    }
}

fn small_pow(base: u64, exp: u64, p: u64) -> u64 {
    BigUint::from(base)
        .modpow(&BigUint::from(exp), &BigUint::from(p))
        .to_u64()
        .expect("below p")
}

/// Residues `1 <= s < p` with `s^k = c mod p`.
fn scan_residues(k: u64, c: u64, p: u64) -> Vec<u64> {
    (1..p).filter(|&s| small_pow(s, k, p) == c % p).collect()
}

/// Every `x` in `Q_p` with `x^3 = a`.
///
/// Empty when `v(a)` is not a multiple of 3 or the unit part is not a cube
/// mod `p`. At `p = 3` the simple-root condition fails and the lift is
/// reported as [`Error::NotLiftable`].
pub fn cube_roots(a: &PAdicNumber) -> Result<RootSet> {
    let (valuation, unit) = match (a.valuation(), a.unit()) {
        (Some(v), Some(u)) => (v.clone(), u.clone()),
        _ => return Err(Error::Domain("cube roots of 0".into())),
    };
    let ctx = a.context();
    let p = ctx.prime();
    let equation = Equation::CubeRootOf(a.clone());
    let (third, rem) = valuation.div_mod_floor(&BigInt::from(3));
    if !rem.is_zero() {
        return Ok(RootSet {
            equation,
            roots: Vec::new(),
        });
    }
    let residue = (&unit % BigUint::from(p)).to_u64().expect("below p");
    let poly = Poly::cube_minus(BigInt::from(unit));
    let scale = ctx.from_int(BigInt::from(p)).pow(&third)?;
    let abs = &third + BigInt::from(a.known_digits());
    let mut roots = Vec::new();
    for seed in scan_residues(3, residue, p) {
        let root = hensel_lift(&poly, seed, ctx)?;
        roots.push((&root * &scale).truncate_abs(&abs));
    }
    Ok(RootSet { equation, roots })
}

/// The solutions of `x^k = 1` in `Q_p`.
///
/// For odd `p` these are the `gcd(k, p - 1)` Teichmüller lifts of the
/// residues of order dividing `k`; in `Q_2` they are `1`, and `-1` when `k`
/// is even.
pub fn roots_of_unity(k: u64, ctx: &PAdicContext) -> Result<RootSet> {
    if k == 0 {
        return Err(Error::Domain("root-of-unity order must be at least 1".into()));
    }
    let p = ctx.prime();
    let equation = Equation::RootOfUnity(k);
    if p == 2 {
        let mut roots = vec![ctx.one()];
        if k.is_multiple_of(2) {
            roots.push(-&ctx.one());
        }
        return Ok(RootSet { equation, roots });
    }
    // p does not divide g, so x^g - 1 has only simple roots mod p
    let g = k.gcd(&(p - 1));
    let poly = Poly::unity(g);
    let roots = scan_residues(g, 1, p)
        .into_iter()
        .map(|seed| hensel_lift(&poly, seed, ctx))
        .collect::<Result<Vec<_>>>()?;
    Ok(RootSet { equation, roots })
}

/// The root of unity in `Z_p` congruent to `residue` mod `p`.
pub fn teichmuller(residue: u64, ctx: &PAdicContext) -> Result<PAdicNumber> {
    let p = ctx.prime();
    if residue.is_multiple_of(p) {
        return Err(Error::Domain(format!("residue {residue} is not a unit mod {p}")));
    }
    if p == 2 {
        return Ok(ctx.one());
    }
    hensel_lift(&Poly::unity(p - 1), residue % p, ctx)
}
