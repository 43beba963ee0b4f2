//! Exact rational arithmetic and the delta diagnostics.
//!
//! A shift `delta` is admissible when its relative distance to the dyadic
//! rationals, `d(delta) = inf over n >= 0 of dist(2^n * delta, Z)`, is
//! positive. For rational `delta` the doubling orbit `2^n * delta mod 1` is
//! eventually periodic, so the infimum is an exact minimum over one
//! pre-period plus one period.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::HashSet;

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always kept in lowest terms by `num`.
pub type Rational = BigRational;

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// 2^n as an exact rational, for any sign of n.
pub fn pow2(n: i64) -> Rational {
    if n >= 0 {
        Rational::from_integer(BigInt::one() << n as usize)
    } else {
        Rational::new(BigInt::one(), BigInt::one() << (-n) as usize)
    }
}

/// Parse "p/q" or "p".
pub fn parse_rational(s: &str) -> Result<Rational> {
    s.trim()
        .parse::<Rational>()
        .map_err(|e| Error::Parse(format!("bad rational {s:?}: {e}")))
}

/// Render as "p/q", or "p" when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

/// floor(r) as a BigInt (toward negative infinity).
pub fn floor_big(r: &Rational) -> BigInt {
    r.floor().to_integer()
}

/// ceil(r) as a BigInt.
pub fn ceil_big(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

/// r mod 1, in [0, 1).
pub fn frac_mod_one(r: &Rational) -> Rational {
    r - Rational::from_integer(floor_big(r))
}

/// Largest e with 2^e <= r. Requires r > 0.
pub fn floor_log2(r: &Rational) -> i64 {
    assert!(r.is_positive(), "floor_log2 needs a positive rational");
    let mut e = r.numer().bits() as i64 - r.denom().bits() as i64;
    // The bit-length guess is off by at most one in either direction.
    while pow2(e) > *r {
        e -= 1;
    }
    while pow2(e + 1) <= *r {
        e += 1;
    }
    e
}

/// Distance from r to the nearest integer.
pub fn dist_to_int(r: &Rational) -> Rational {
    let f = frac_mod_one(r);
    let alt = Rational::one() - f.clone();
    if f <= alt {
        f
    } else {
        alt
    }
}

/// Dyadic rational `mantissa * 2^-scale` in canonical form (mantissa odd or zero).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dyadic {
    mantissa: BigInt,
    scale: i64,
}

impl Dyadic {
    pub fn new(mantissa: BigInt, scale: i64) -> Self {
        let mut d = Dyadic { mantissa, scale };
        d.normalize();
        d
    }

    /// The length 2^-level of a level-`level` grid interval.
    pub fn interval_length(level: i32) -> Self {
        Dyadic::new(BigInt::one(), level as i64)
    }

    fn normalize(&mut self) {
        if self.mantissa.is_zero() {
            self.scale = 0;
            return;
        }
        while self.mantissa.is_even() {
            self.mantissa /= 2;
            self.scale -= 1;
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn to_rational(&self) -> Rational {
        Rational::from_integer(self.mantissa.clone()) * pow2(-self.scale)
    }

    /// Exact conversion when the rational has a power-of-two denominator.
    pub fn from_rational(r: &Rational) -> Option<Self> {
        let denom = r.denom();
        if denom.sign() != Sign::Plus {
            return None;
        }
        let bits = denom.bits();
        if *denom != (BigInt::one() << (bits - 1) as usize) {
            return None;
        }
        Some(Dyadic::new(r.numer().clone(), bits as i64 - 1))
    }
}

/// d(delta): exact minimum over the doubling orbit of `dist(2^n delta, Z)`, n >= 0.
///
/// Returns zero exactly when delta is a dyadic rational.
pub fn relative_distance(delta: &Rational) -> Result<Rational> {
    if !(delta > &Rational::zero() && delta < &Rational::one()) {
        return Err(Error::DeltaOutOfRange(format_rational(delta)));
    }
    let q = delta.denom().clone();
    let mut r = delta.numer().clone(); // orbit residue: 2^n p mod q
    let mut seen: HashSet<BigInt> = HashSet::new();
    let mut best: Option<BigInt> = None; // min(r, q - r) over the orbit, scaled by q
    while seen.insert(r.clone()) {
        let near = (&q - &r).min(r.clone());
        best = Some(match best {
            Some(b) => b.min(near),
            None => near,
        });
        r = (r * 2) % &q;
    }
    Ok(Rational::new(best.unwrap(), q))
}

/// C(delta) = 2 / d(delta); errors when delta is dyadic.
pub fn covering_constant(delta: &Rational) -> Result<Rational> {
    let d = relative_distance(delta)?;
    if d.is_zero() {
        return Err(Error::DyadicDelta(format_rational(delta)));
    }
    Ok(int(2) / d)
}

/// A validated shift with its diagnostics computed once, for hot loops that
/// cover many intervals with the same delta.
#[derive(Clone, Debug)]
pub struct AdmissibleShift {
    pub delta: Rational,
    pub distance: Rational,
    pub constant: Rational,
}

impl AdmissibleShift {
    pub fn new(delta: &Rational) -> Result<Self> {
        let distance = relative_distance(delta)?;
        if distance.is_zero() {
            return Err(Error::DyadicDelta(format_rational(delta)));
        }
        let constant = int(2) / distance.clone();
        Ok(AdmissibleShift {
            delta: delta.clone(),
            distance,
            constant,
        })
    }
}

/// Serde adapter: rationals as "p/q" strings.
pub mod serde_ratio {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(
            r: &Option<Rational>,
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            match r {
                Some(r) => s.serialize_some(&format_rational(r)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Option<Rational>, D::Error> {
            let s = Option::<String>::deserialize(d)?;
            match s {
                Some(s) => parse_rational(&s).map(Some).map_err(de::Error::custom),
                None => Ok(None),
            }
        }
    }
}

/// Convert with f64 rounding; exact for dyadic rationals within range.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}
