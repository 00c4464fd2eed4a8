//! Finite-precision elements of `Q_p` stored as `p^v * u` with `u` a unit
//! known modulo `p^d`.
//!
//! Multiplication, inversion and powers never lose digits in this form; only
//! addition of equal-valuation operands can cancel leading digits, and the
//! result's `known_digits` shrinks accordingly. A sum whose digits cancel
//! entirely is kept as "zero up to precision", which is distinct from the
//! exact zero.

use std::fmt;
use std::sync::Arc;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::error::{Error, Result};
use crate::json;
use crate::norm_geometry::{Measured, RadiusExp};

/// Default number of base-p digits carried by a unit.
pub const DEFAULT_PRECISION: u32 = 64;

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(small) {
            return n == small;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(acc, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `v_p(n)` for nonzero `n`.
pub fn valuation_of(n: &BigInt, prime: u64) -> u64 {
    debug_assert!(!n.is_zero());
    let p = BigInt::from(prime);
    let mut m = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

fn strip_biguint(n: &BigUint, prime: u64) -> (u64, BigUint) {
    let p = BigUint::from(prime);
    let mut m = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&p);
        if !r.is_zero() {
            return (v, m);
        }
        m = q;
        v += 1;
    }
}

/// The prime `p` and the number of digits `N` carried by units.
#[derive(Clone, Debug)]
pub struct PAdicContext {
    prime: u64,
    precision: u32,
    full_modulus: Arc<BigUint>,
}

impl PartialEq for PAdicContext {
    fn eq(&self, other: &Self) -> bool {
        self.prime == other.prime && self.precision == other.precision
    }
}

impl Eq for PAdicContext {}

impl std::hash::Hash for PAdicContext {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.prime.hash(state);
        self.precision.hash(state);
    }
}

impl PAdicContext {
    pub fn new(prime: u64, precision: u32) -> Result<Self> {
        if !is_prime(prime) {
            return Err(Error::NotPrime(prime));
        }
        if precision == 0 {
            return Err(Error::BadPrecision(precision));
        }
        let full_modulus = Arc::new(BigUint::from(prime).pow(precision));
        Ok(Self {
            prime,
            precision,
            full_modulus,
        })
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// `p^digits`
    pub fn modulus(&self, digits: u32) -> BigUint {
        if digits == self.precision {
            return (*self.full_modulus).clone();
        }
        BigUint::from(self.prime).pow(digits)
    }

    /// Order of the unit group of `Z / p^digits`.
    pub fn unit_group_order(&self, digits: u32) -> BigUint {
        BigUint::from(self.prime).pow(digits.saturating_sub(1)) * BigUint::from(self.prime - 1)
    }

    pub fn from_rational(&self, num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<PAdicNumber> {
        PAdicNumber::from_rational(num, den, self)
    }

    pub fn from_int(&self, n: impl Into<BigInt>) -> PAdicNumber {
        PAdicNumber::from_rational(n, 1, self).expect("denominator is 1")
    }

    pub fn zero(&self) -> PAdicNumber {
        PAdicNumber {
            ctx: self.clone(),
            value: Value::Zero,
        }
    }

    pub fn one(&self) -> PAdicNumber {
        self.from_int(1)
    }

    /// `p^v * unit` with `unit` read modulo `p^N`; `unit` must be coprime to `p`.
    pub fn from_parts(&self, valuation: impl Into<BigInt>, unit: BigUint) -> Result<PAdicNumber> {
        let unit = unit % self.modulus(self.precision);
        if (&unit % BigUint::from(self.prime)).is_zero() {
            return Err(Error::Domain(format!("unit {unit} is divisible by p = {}", self.prime)));
        }
        Ok(PAdicNumber {
            ctx: self.clone(),
            value: Value::Unit {
                valuation: valuation.into(),
                unit,
                digits: self.precision,
            },
        })
    }
}

/// Inverse of a unit mod `p^digits` by Newton iteration from the inverse mod `p`.
fn unit_inverse(unit: &BigUint, prime: u64, digits: u32, modulus: &BigUint) -> Result<BigUint> {
    let p = BigUint::from(prime);
    let r = (unit % &p)
        .modinv(&p)
        .ok_or_else(|| Error::Internal("unit not invertible".into()))?;
    let mut inv = r;
    let mut known = 1u32;
    let two = BigUint::from(2u32);
    while known < digits {
        known = (known * 2).min(digits);
        let m = p.pow(known);
        let t = (unit % &m) * &inv % &m;
        let correction = (&two + &m - t) % &m;
        inv = inv * correction % &m;
    }
    Ok(inv % modulus)
}

fn small_pow_mod(base: &BigUint, mut e: u32, modulus: &BigUint) -> BigUint {
    let mut acc = BigUint::from(1u32);
    let mut b = base.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc = (&acc * &b) % modulus;
        }
        e >>= 1;
        if e > 0 {
            b = (&b * &b) % modulus;
        }
    }
    acc % modulus
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Value {
    Zero,
    /// Known to be `0 mod p^abs_precision`, nothing more.
    Vanished { abs_precision: BigInt },
    /// `p^valuation * unit`, unit known mod `p^digits` and stored reduced.
    Unit {
        valuation: BigInt,
        unit: BigUint,
        digits: u32,
    },
}

/// An element of `Q_p` known to finite precision.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PAdicNumber {
    ctx: PAdicContext,
    value: Value,
}

impl PAdicNumber {
    pub fn from_rational(num: impl Into<BigInt>, den: impl Into<BigInt>, ctx: &PAdicContext) -> Result<Self> {
        let num = num.into();
        let den = den.into();
        if den.is_zero() {
            return Err(Error::Domain("zero denominator".into()));
        }
        if num.is_zero() {
            return Ok(ctx.zero());
        }
        let p = ctx.prime;
        let vn = valuation_of(&num, p);
        let vd = valuation_of(&den, p);
        let pb = BigInt::from(p);
        let n = &num / pb.pow(vn as u32);
        let d = &den / pb.pow(vd as u32);
        let modulus = BigInt::from(ctx.modulus(ctx.precision));
        let d_inv = d
            .mod_floor(&modulus)
            .modinv(&modulus)
            .ok_or_else(|| Error::Internal("p-free denominator not invertible".into()))?;
        let unit = (n * d_inv).mod_floor(&modulus);
        Ok(Self {
            ctx: ctx.clone(),
            value: Value::Unit {
                valuation: BigInt::from(vn) - BigInt::from(vd),
                unit: unit.to_biguint().expect("reduced mod p^N"),
                digits: ctx.precision,
            },
        })
    }

    pub fn context(&self) -> &PAdicContext {
        &self.ctx
    }

    pub fn prime(&self) -> u64 {
        self.ctx.prime
    }

    /// Exact zero.
    pub fn is_zero(&self) -> bool {
        self.value == Value::Zero
    }

    /// All digits cancelled: indistinguishable from zero, but not known to be zero.
    pub fn is_zero_at_precision(&self) -> bool {
        matches!(self.value, Value::Vanished { .. })
    }

    /// Either an exact zero or zero up to precision.
    pub fn vanishes(&self) -> bool {
        !matches!(self.value, Value::Unit { .. })
    }

    pub fn valuation(&self) -> Option<&BigInt> {
        match &self.value {
            Value::Unit { valuation, .. } => Some(valuation),
            _ => None,
        }
    }

    pub fn unit(&self) -> Option<&BigUint> {
        match &self.value {
            Value::Unit { unit, .. } => Some(unit),
            _ => None,
        }
    }

    /// Number of unit digits that are guaranteed correct.
    pub fn known_digits(&self) -> u32 {
        match &self.value {
            Value::Unit { digits, .. } => *digits,
            _ => 0,
        }
    }

    /// The element is known modulo `p^abs_precision`; `None` for the exact zero.
    pub fn abs_precision(&self) -> Option<BigInt> {
        match &self.value {
            Value::Zero => None,
            Value::Vanished { abs_precision } => Some(abs_precision.clone()),
            Value::Unit { valuation, digits, .. } => Some(valuation + BigInt::from(*digits)),
        }
    }

    /// Residue of the unit part mod `p`.
    pub fn unit_residue(&self) -> Option<u64> {
        self.unit()
            .map(|u| (u % BigUint::from(self.ctx.prime)).to_u64().expect("residue < p"))
    }

    /// Canonical sort key: exact zero, then vanished, then by (valuation, unit).
    pub fn sort_key(&self) -> (u8, BigInt, BigUint) {
        match &self.value {
            Value::Zero => (0, BigInt::zero(), BigUint::zero()),
            Value::Vanished { abs_precision } => (1, abs_precision.clone(), BigUint::zero()),
            Value::Unit { valuation, unit, .. } => (2, valuation.clone(), unit.clone()),
        }
    }

    fn check_ctx(&self, other: &PAdicNumber) {
        assert!(
            self.ctx == other.ctx,
            "p-adic context mismatch: {:?} vs {:?}",
            self.ctx,
            other.ctx
        );
    }

    pub fn try_add(&self, other: &PAdicNumber) -> Result<PAdicNumber> {
        self.same_context(other)?;
        Ok(self + other)
    }

    pub fn try_sub(&self, other: &PAdicNumber) -> Result<PAdicNumber> {
        self.same_context(other)?;
        Ok(self - other)
    }

    pub fn try_mul(&self, other: &PAdicNumber) -> Result<PAdicNumber> {
        self.same_context(other)?;
        Ok(self * other)
    }

    fn same_context(&self, other: &PAdicNumber) -> Result<()> {
        if self.ctx != other.ctx {
            return Err(Error::ContextMismatch(
                format!("{:?}", self.ctx),
                format!("{:?}", other.ctx),
            ));
        }
        Ok(())
    }

    fn add_impl(&self, other: &PAdicNumber) -> PAdicNumber {
        self.check_ctx(other);
        let p = self.ctx.prime;
        let value = match (&self.value, &other.value) {
            (Value::Zero, _) => other.value.clone(),
            (_, Value::Zero) => self.value.clone(),
            (Value::Vanished { abs_precision: a }, Value::Vanished { abs_precision: b }) => {
                Value::Vanished {
                    abs_precision: a.min(b).clone(),
                }
            }
            (Value::Vanished { abs_precision }, unit @ Value::Unit { .. })
            | (unit @ Value::Unit { .. }, Value::Vanished { abs_precision }) => {
                truncate_abs(unit, abs_precision, p)
            }
            (
                Value::Unit {
                    valuation: vx,
                    unit: ux,
                    digits: dx,
                },
                Value::Unit {
                    valuation: vy,
                    unit: uy,
                    digits: dy,
                },
            ) => {
                let low = vx.min(vy).clone();
                let abs = (vx + BigInt::from(*dx)).min(vy + BigInt::from(*dy));
                let width = (&abs - &low).to_u32().expect("width bounded by digits");
                let modulus = self.ctx.modulus(width);
                let shifted = |u: &BigUint, v: &BigInt| -> BigUint {
                    let shift = v - &low;
                    match shift.to_u32() {
                        Some(s) if s < width => (u * BigUint::from(p).pow(s)) % &modulus,
                        _ => BigUint::zero(),
                    }
                };
                let sum = (shifted(ux, vx) + shifted(uy, vy)) % &modulus;
                if sum.is_zero() {
                    Value::Vanished { abs_precision: abs }
                } else {
                    let (t, unit) = strip_biguint(&sum, p);
                    Value::Unit {
                        valuation: low + BigInt::from(t),
                        unit,
                        digits: width - t as u32,
                    }
                }
            }
        };
        PAdicNumber {
            ctx: self.ctx.clone(),
            value,
        }
    }

    fn neg_impl(&self) -> PAdicNumber {
        let value = match &self.value {
            Value::Unit {
                valuation,
                unit,
                digits,
            } => Value::Unit {
                valuation: valuation.clone(),
                unit: self.ctx.modulus(*digits) - unit,
                digits: *digits,
            },
            other => other.clone(),
        };
        PAdicNumber {
            ctx: self.ctx.clone(),
            value,
        }
    }

    fn mul_impl(&self, other: &PAdicNumber) -> PAdicNumber {
        self.check_ctx(other);
        let value = match (&self.value, &other.value) {
            (Value::Zero, _) | (_, Value::Zero) => Value::Zero,
            (Value::Vanished { abs_precision: a }, Value::Vanished { abs_precision: b }) => {
                Value::Vanished {
                    abs_precision: a + b,
                }
            }
            (Value::Vanished { abs_precision }, Value::Unit { valuation, .. })
            | (Value::Unit { valuation, .. }, Value::Vanished { abs_precision }) => {
                Value::Vanished {
                    abs_precision: abs_precision + valuation,
                }
            }
            (
                Value::Unit {
                    valuation: vx,
                    unit: ux,
                    digits: dx,
                },
                Value::Unit {
                    valuation: vy,
                    unit: uy,
                    digits: dy,
                },
            ) => {
                let digits = (*dx).min(*dy);
                Value::Unit {
                    valuation: vx + vy,
                    unit: (ux * uy) % self.ctx.modulus(digits),
                    digits,
                }
            }
        };
        PAdicNumber {
            ctx: self.ctx.clone(),
            value,
        }
    }

    /// Multiplicative inverse; valuation negates, digits are kept.
    pub fn inv(&self) -> Result<PAdicNumber> {
        match &self.value {
            Value::Unit {
                valuation,
                unit,
                digits,
            } => {
                let modulus = self.ctx.modulus(*digits);
                let inverse = unit_inverse(unit, self.ctx.prime, *digits, &modulus)?;
                Ok(PAdicNumber {
                    ctx: self.ctx.clone(),
                    value: Value::Unit {
                        valuation: -valuation,
                        unit: inverse,
                        digits: *digits,
                    },
                })
            }
            Value::Zero => Err(Error::Domain("inverse of 0".into())),
            Value::Vanished { .. } => Err(Error::Domain(
                "inverse of a value that is zero up to precision".into(),
            )),
        }
    }

    pub fn div(&self, other: &PAdicNumber) -> Result<PAdicNumber> {
        self.same_context(other)?;
        Ok(self * &other.inv()?)
    }

    /// `self^k` for an arbitrary integer `k`.
    ///
    /// The valuation is scaled by the full `k`; the unit exponent is reduced
    /// modulo the order `p^(d-1)(p-1)` of the unit group mod `p^d`.
    pub fn pow(&self, k: &BigInt) -> Result<PAdicNumber> {
        if k.is_zero() {
            return Ok(self.ctx.one());
        }
        let value = match &self.value {
            Value::Zero if k.is_positive() => Value::Zero,
            Value::Vanished { abs_precision } if k.is_positive() => Value::Vanished {
                abs_precision: abs_precision * k,
            },
            Value::Zero | Value::Vanished { .. } => {
                return Err(Error::Domain("negative power of zero".into()))
            }
            Value::Unit {
                valuation,
                unit,
                digits,
            } => {
                let modulus = self.ctx.modulus(*digits);
                let base = if k.is_negative() {
                    unit_inverse(unit, self.ctx.prime, *digits, &modulus)?
                } else {
                    unit.clone()
                };
                let e = if k.bits() < 64 {
                    k.magnitude().clone()
                } else {
                    k.magnitude() % self.ctx.unit_group_order(*digits)
                };
                let unit = match e.to_u32() {
                    Some(small) if small < 64 => small_pow_mod(&base, small, &modulus),
                    _ => base.modpow(&e, &modulus),
                };
                Value::Unit {
                    valuation: valuation * k,
                    unit,
                    digits: *digits,
                }
            }
        };
        Ok(PAdicNumber {
            ctx: self.ctx.clone(),
            value,
        })
    }

    pub fn pow_i64(&self, k: i64) -> Result<PAdicNumber> {
        self.pow(&BigInt::from(k))
    }

    /// `|self|_p`; a vanished value reports only its upper bound.
    pub fn norm(&self) -> Measured {
        let p = self.ctx.prime;
        match &self.value {
            Value::Zero => Measured::Exact(RadiusExp::zero(p)),
            Value::Vanished { abs_precision } => {
                Measured::Below(RadiusExp::from_int(p, abs_precision.clone()))
            }
            Value::Unit { valuation, .. } => Measured::Exact(RadiusExp::from_int(p, valuation.clone())),
        }
    }

    /// `|self - other|_p`.
    pub fn distance(&self, other: &PAdicNumber) -> Result<Measured> {
        self.same_context(other)?;
        Ok((self - other).norm())
    }

    /// Reduce to the absolute precision `p^abs` (no-op if already coarser).
    pub fn truncate_abs(&self, abs: &BigInt) -> PAdicNumber {
        let value = match &self.value {
            Value::Zero => Value::Vanished {
                abs_precision: abs.clone(),
            },
            Value::Vanished { abs_precision } => Value::Vanished {
                abs_precision: abs_precision.min(abs).clone(),
            },
            unit => truncate_abs(unit, abs, self.ctx.prime),
        };
        PAdicNumber {
            ctx: self.ctx.clone(),
            value,
        }
    }

    /// True when `finer` (possibly from a higher-precision context over the
    /// same prime) agrees with every digit `self` claims to know.
    pub fn agrees_with(&self, finer: &PAdicNumber) -> bool {
        if self.ctx.prime != finer.ctx.prime {
            return false;
        }
        match (&self.value, &finer.value) {
            (Value::Zero, Value::Zero) => true,
            (Value::Zero, _) => false,
            (Value::Vanished { abs_precision }, _) => match finer.abs_precision() {
                None => true,
                Some(_) => match finer.valuation() {
                    Some(v) => v >= abs_precision,
                    None => true,
                },
            },
            (Value::Unit { valuation, unit, digits }, Value::Unit { valuation: fv, unit: fu, digits: fd }) => {
                valuation == fv
                    && fd >= digits
                    && (fu % self.ctx.modulus(*digits)) == *unit
            }
            (Value::Unit { .. }, _) => false,
        }
    }

    /// The value as a rational integer representative `p^v * u` when `v >= 0`.
    pub fn to_integer_rep(&self) -> Option<BigInt> {
        match &self.value {
            Value::Zero => Some(BigInt::zero()),
            Value::Unit { valuation, unit, .. } if !valuation.is_negative() => {
                let v = valuation.to_u32()?;
                Some(BigInt::from_biguint(Sign::Plus, unit * BigUint::from(self.ctx.prime).pow(v)))
            }
            _ => None,
        }
    }
}

fn truncate_abs(value: &Value, abs: &BigInt, p: u64) -> Value {
    match value {
        Value::Unit {
            valuation,
            unit,
            digits,
        } => {
            if valuation >= abs {
                return Value::Vanished {
                    abs_precision: abs.clone(),
                };
            }
            let room = (abs - valuation).to_u32().unwrap_or(u32::MAX);
            let d = (*digits).min(room);
            Value::Unit {
                valuation: valuation.clone(),
                unit: unit % BigUint::from(p).pow(d),
                digits: d,
            }
        }
        other => other.clone(),
    }
}

impl Add for &PAdicNumber {
    type Output = PAdicNumber;
    fn add(self, rhs: &PAdicNumber) -> PAdicNumber {
        self.add_impl(rhs)
    }
}

impl Sub for &PAdicNumber {
    type Output = PAdicNumber;
    fn sub(self, rhs: &PAdicNumber) -> PAdicNumber {
        self.add_impl(&rhs.neg_impl())
    }
}

impl Mul for &PAdicNumber {
    type Output = PAdicNumber;
    fn mul(self, rhs: &PAdicNumber) -> PAdicNumber {
        self.mul_impl(rhs)
    }
}

impl Neg for &PAdicNumber {
    type Output = PAdicNumber;
    fn neg(self) -> PAdicNumber {
        self.neg_impl()
    }
}

impl fmt::Display for PAdicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            Value::Zero => write!(f, "0"),
            Value::Vanished { abs_precision } => write!(f, "O({}^{})", self.ctx.prime, abs_precision),
            Value::Unit {
                valuation,
                unit,
                digits,
            } => write!(
                f,
                "{}^{} * {} + O({}^{})",
                self.ctx.prime,
                valuation,
                unit,
                self.ctx.prime,
                valuation + BigInt::from(*digits)
            ),
        }
    }
}

impl Serialize for PAdicNumber {
    /// `{"p", "v", "unit", "digits"}`; the exact zero has `"v": null`, a
    /// vanished value has `"unit": "0"` with `"v"` its absolute precision.
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(4))?;
        map.serialize_entry("p", &self.ctx.prime)?;
        match &self.value {
            Value::Zero => {
                map.serialize_entry("v", &serde_json::Value::Null)?;
                map.serialize_entry("unit", "0")?;
                map.serialize_entry("digits", &0)?;
            }
            Value::Vanished { abs_precision } => {
                map.serialize_entry("v", &json::big_int(abs_precision))?;
                map.serialize_entry("unit", "0")?;
                map.serialize_entry("digits", &0)?;
            }
            Value::Unit {
                valuation,
                unit,
                digits,
            } => {
                map.serialize_entry("v", &json::big_int(valuation))?;
                map.serialize_entry("unit", &unit.to_string())?;
                map.serialize_entry("digits", digits)?;
            }
        }
        map.end()
    }
}
