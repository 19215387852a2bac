use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact binary fraction `mant * 2^exp`, kept with an odd mantissa (or zero).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mant: BigInt,
    exp: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
}

impl Dyadic {
    pub fn new(mant: BigInt, exp: i64) -> Self {
        let mut d = Dyadic { mant, exp };
        d.normalize();
        d
    }

    pub fn zero() -> Self {
        Dyadic { mant: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { mant: BigInt::one(), exp: 0 }
    }

    pub fn from_int<T: Into<BigInt>>(v: T) -> Self {
        Dyadic::new(v.into(), 0)
    }

    /// Exact conversion; panics on non-finite input.
    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "non-finite float");
        if v == 0.0 {
            return Dyadic::zero();
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & 0xf_ffff_ffff_ffff;
        let (m, e) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        Dyadic::new(BigInt::from(sign) * BigInt::from(m), e)
    }

    fn normalize(&mut self) {
        if self.mant.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.mant.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mant >>= tz;
            self.exp += tz as i64;
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn signum(&self) -> i32 {
        match self.mant.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        Dyadic { mant: self.mant.abs(), exp: self.exp }
    }

    /// Multiply by `2^k`.
    pub fn shl(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic { mant: self.mant.clone(), exp: self.exp + k }
    }

    /// Number of significant bits in the mantissa.
    pub fn bits(&self) -> u64 {
        self.mant.bits()
    }

    /// Position of the leading bit: `2^(msb-1) <= |self| < 2^msb`.
    pub fn msb(&self) -> i64 {
        self.mant.bits() as i64 + self.exp
    }

    /// Round to at most `prec` significant bits in the given direction.
    pub fn round(&self, prec: u64, dir: Round) -> Self {
        let bits = self.mant.bits();
        if bits <= prec {
            return self.clone();
        }
        let shift = bits - prec;
        let m = match dir {
            // BigInt shr rounds toward negative infinity.
            Round::Down => &self.mant >> shift,
            Round::Up => -((-&self.mant) >> shift),
        };
        Dyadic::new(m, self.exp + shift as i64)
    }

    pub fn floor(&self) -> BigInt {
        if self.exp >= 0 {
            &self.mant << self.exp as u64
        } else {
            &self.mant >> (-self.exp) as u64
        }
    }

    pub fn ceil(&self) -> BigInt {
        -((-self).floor())
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.mant << self.exp as u64)
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << (-self.exp) as u64)
        }
    }

    /// Nearest-ish float; underflows to zero and overflows to infinity.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits() as i64;
        let (m, e) = if bits > 60 {
            let s = (bits - 60) as u64;
            ((&self.mant >> s).to_f64().unwrap(), self.exp + s as i64)
        } else {
            (self.mant.to_f64().unwrap(), self.exp)
        };
        ldexp(m, e)
    }

    /// `log2 |self|` to roughly double precision; `None` for zero.
    pub fn log2_abs(&self) -> Option<f64> {
        if self.is_zero() {
            return None;
        }
        let bits = self.mant.bits() as i64;
        let (m, e) = if bits > 60 {
            let s = (bits - 60) as u64;
            ((&self.mant.abs() >> s).to_f64().unwrap(), self.exp + s as i64)
        } else {
            (self.mant.abs().to_f64().unwrap(), self.exp)
        };
        Some(m.log2() + e as f64)
    }

    /// `a / b` rounded to `prec` significant bits.
    pub fn div_round(a: &Dyadic, b: &Dyadic, prec: u64, dir: Round) -> Dyadic {
        assert!(!b.is_zero(), "division by zero");
        if a.is_zero() {
            return Dyadic::zero();
        }
        // a.mant * 2^s / b.mant has about prec + 2 bits.
        let s = prec as i64 + 2 + b.mant.bits() as i64 - a.mant.bits() as i64;
        let s = s.max(0) as u64;
        let num = &a.mant << s;
        let (q, r) = num.div_mod_floor(&b.mant);
        let exact = r.is_zero();
        // div_mod_floor gives floor(num / b) for any signs.
        let q = match dir {
            Round::Down => q,
            Round::Up if exact => q,
            Round::Up => q + 1,
        };
        Dyadic::new(q, a.exp - b.exp - s as i64).round(prec, dir)
    }

    /// Enclosing bound of a rational at `prec` significant bits.
    pub fn from_rational(q: &BigRational, prec: u64, dir: Round) -> Dyadic {
        let num = Dyadic::from_int(q.numer().clone());
        let den = Dyadic::from_int(q.denom().clone());
        Dyadic::div_round(&num, &den, prec, dir)
    }
}

pub(crate) fn ldexp(m: f64, e: i64) -> f64 {
    let mut v = m;
    let mut e = e;
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
        if v == 0.0 {
            return v;
        }
    }
    v * 2f64.powi(e as i32)
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self - other;
        d.mant.sign().cmp(&Sign::NoSign)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mant, self.exp)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl<'a> Add<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(rhs.exp);
        let a = &self.mant << (self.exp - e) as u64;
        let b = &rhs.mant << (rhs.exp - e) as u64;
        Dyadic::new(a + b, e)
    }
}

impl<'a> Sub<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.mant * &rhs.mant, self.exp + rhs.exp)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mant: -&self.mant, exp: self.exp }
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_roundtrip() {
        for v in [0.5, -3.25, 1e-300, 123456.789, -0.0] {
            assert_eq!(Dyadic::from_f64(v).to_f64(), v);
        }
    }

    #[test]
    fn rounding_directions() {
        let d = Dyadic::from_int(-13); // -1101b
        assert_eq!(d.round(2, Round::Down), Dyadic::from_int(-16));
        assert_eq!(d.round(2, Round::Up), Dyadic::from_int(-12));
        let d = Dyadic::from_int(13);
        assert_eq!(d.round(2, Round::Down), Dyadic::from_int(12));
        assert_eq!(d.round(2, Round::Up), Dyadic::from_int(16));
    }

    #[test]
    fn floor_and_ceil() {
        let d = Dyadic::from_f64(-2.5);
        assert_eq!(d.floor(), BigInt::from(-3));
        assert_eq!(d.ceil(), BigInt::from(-2));
        assert_eq!(Dyadic::from_f64(7.0).floor(), BigInt::from(7));
    }

    #[test]
    fn division_brackets_quotient() {
        let a = Dyadic::from_int(1);
        let b = Dyadic::from_int(3);
        let lo = Dyadic::div_round(&a, &b, 64, Round::Down);
        let hi = Dyadic::div_round(&a, &b, 64, Round::Up);
        let third = BigRational::new(1.into(), 3.into());
        assert!(lo.to_rational() < third && third < hi.to_rational());
        let neg = Dyadic::div_round(&-a, &b, 64, Round::Down);
        assert!(neg.to_rational() < -third);
    }
}
