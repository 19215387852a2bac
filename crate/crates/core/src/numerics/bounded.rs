use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Serialize, Serializer};

use super::dyadic::{Dyadic, Round};
use crate::{Error, Result};

/// A real number known to lie in a closed interval `[lower, upper]` with dyadic endpoints.
///
/// Addition, subtraction and multiplication are exact on the endpoints, so their
/// results enclose the exact image of the operands. Call [`BoundedReal::rounded`]
/// to cap the endpoint size; rounding is always outward.
#[derive(Clone, PartialEq, Eq)]
pub struct BoundedReal {
    lo: Dyadic,
    hi: Dyadic,
}

/// Three-way comparison that refuses to order overlapping intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Comparison {
    Less,
    Greater,
    Indeterminate,
}

impl BoundedReal {
    pub fn from_bounds(lo: Dyadic, hi: Dyadic) -> Self {
        assert!(lo <= hi, "inverted interval");
        BoundedReal { lo, hi }
    }

    pub fn exact(v: Dyadic) -> Self {
        BoundedReal { lo: v.clone(), hi: v }
    }

    pub fn from_int<T: Into<BigInt>>(v: T) -> Self {
        Self::exact(Dyadic::from_int(v))
    }

    pub fn from_f64(v: f64) -> Self {
        Self::exact(Dyadic::from_f64(v))
    }

    pub fn zero() -> Self {
        Self::exact(Dyadic::zero())
    }

    pub fn one() -> Self {
        Self::exact(Dyadic::one())
    }

    /// `center ± radius`; the radius must be non-negative.
    pub fn from_center_radius(center: Dyadic, radius: Dyadic) -> Self {
        assert!(radius.signum() >= 0, "negative radius");
        BoundedReal { lo: &center - &radius, hi: &center + &radius }
    }

    pub fn from_rational(q: &BigRational, prec: u64) -> Self {
        BoundedReal {
            lo: Dyadic::from_rational(q, prec, Round::Down),
            hi: Dyadic::from_rational(q, prec, Round::Up),
        }
    }

    pub fn lower(&self) -> &Dyadic {
        &self.lo
    }

    pub fn upper(&self) -> &Dyadic {
        &self.hi
    }

    pub fn center(&self) -> Dyadic {
        (&self.lo + &self.hi).shl(-1)
    }

    pub fn radius(&self) -> Dyadic {
        (&self.hi - &self.lo).shl(-1)
    }

    pub fn width(&self) -> Dyadic {
        &self.hi - &self.lo
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: &Dyadic) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn contains_rational(&self, q: &BigRational) -> bool {
        &self.lo.to_rational() <= q && q <= &self.hi.to_rational()
    }

    pub fn contains_zero(&self) -> bool {
        self.lo.signum() <= 0 && self.hi.signum() >= 0
    }

    /// Outward rounding of both endpoints to `prec` significant bits.
    pub fn rounded(&self, prec: u64) -> Self {
        BoundedReal { lo: self.lo.round(prec, Round::Down), hi: self.hi.round(prec, Round::Up) }
    }

    /// Widen by `±eps`.
    pub fn widen(&self, eps: &Dyadic) -> Self {
        let e = eps.abs();
        BoundedReal { lo: &self.lo - &e, hi: &self.hi + &e }
    }

    pub fn compare(&self, other: &BoundedReal) -> Comparison {
        if self.hi < other.lo {
            Comparison::Less
        } else if self.lo > other.hi {
            Comparison::Greater
        } else {
            Comparison::Indeterminate
        }
    }

    /// Sign when determinate.
    pub fn sign(&self) -> Option<Ordering> {
        if self.lo.signum() > 0 {
            Some(Ordering::Greater)
        } else if self.hi.signum() < 0 {
            Some(Ordering::Less)
        } else if self.lo.is_zero() && self.hi.is_zero() {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// Integer part when both endpoints share it.
    pub fn floor(&self) -> Option<BigInt> {
        let a = self.lo.floor();
        let b = self.hi.floor();
        (a == b).then_some(a)
    }

    pub fn abs(&self) -> Self {
        if self.lo.signum() >= 0 {
            self.clone()
        } else if self.hi.signum() <= 0 {
            -self
        } else {
            let m = if -&self.lo > self.hi { -&self.lo } else { self.hi.clone() };
            BoundedReal { lo: Dyadic::zero(), hi: m }
        }
    }

    pub fn div(&self, other: &BoundedReal, prec: u64) -> Result<Self> {
        if other.contains_zero() {
            return Err(Error::IndeterminateSign);
        }
        let cands_lo = [
            Dyadic::div_round(&self.lo, &other.lo, prec, Round::Down),
            Dyadic::div_round(&self.lo, &other.hi, prec, Round::Down),
            Dyadic::div_round(&self.hi, &other.lo, prec, Round::Down),
            Dyadic::div_round(&self.hi, &other.hi, prec, Round::Down),
        ];
        let cands_hi = [
            Dyadic::div_round(&self.lo, &other.lo, prec, Round::Up),
            Dyadic::div_round(&self.lo, &other.hi, prec, Round::Up),
            Dyadic::div_round(&self.hi, &other.lo, prec, Round::Up),
            Dyadic::div_round(&self.hi, &other.hi, prec, Round::Up),
        ];
        let lo = cands_lo.into_iter().min().unwrap();
        let hi = cands_hi.into_iter().max().unwrap();
        Ok(BoundedReal { lo, hi })
    }

    pub fn recip(&self, prec: u64) -> Result<Self> {
        BoundedReal::one().div(self, prec)
    }

    /// `self^n` with outward rounding at every squaring step.
    pub fn powi(&self, n: u64, prec: u64) -> Self {
        let mut base = self.clone();
        let mut acc = BoundedReal::one();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = (&acc * &base).rounded(prec);
            }
            e >>= 1;
            if e > 0 {
                base = (&base * &base).rounded(prec);
            }
        }
        acc
    }

    pub fn mul_int(&self, k: i64) -> Self {
        self * &BoundedReal::from_int(k)
    }

    pub fn add_int(&self, k: i64) -> Self {
        self + &BoundedReal::from_int(k)
    }

    /// Bounds on `log2` of a positive interval; `None` unless `lower > 0`.
    pub fn log2_bounds(&self) -> Option<(f64, f64)> {
        if self.lo.signum() <= 0 {
            return None;
        }
        let a = self.lo.log2_abs()?;
        let b = self.hi.log2_abs()?;
        // float log2 error is far below this pad
        let pad = 1e-12 * (1.0 + a.abs().max(b.abs()));
        Some((a - pad, b + pad))
    }

    pub fn to_f64(&self) -> f64 {
        self.center().to_f64()
    }
}

impl fmt::Debug for BoundedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo.to_f64(), self.hi.to_f64())
    }
}

impl fmt::Display for BoundedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} ± {:e}", self.center().to_f64(), self.radius().to_f64())
    }
}

impl Serialize for BoundedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("BoundedReal", 4)?;
        st.serialize_field("center", &self.center().to_f64())?;
        st.serialize_field("radius", &self.radius().to_f64())?;
        st.serialize_field("lower", &self.lo.to_f64())?;
        st.serialize_field("upper", &self.hi.to_f64())?;
        st.end()
    }
}

impl<'a> Add<&'a BoundedReal> for &'a BoundedReal {
    type Output = BoundedReal;
    fn add(self, rhs: &BoundedReal) -> BoundedReal {
        BoundedReal { lo: &self.lo + &rhs.lo, hi: &self.hi + &rhs.hi }
    }
}

impl<'a> Sub<&'a BoundedReal> for &'a BoundedReal {
    type Output = BoundedReal;
    fn sub(self, rhs: &BoundedReal) -> BoundedReal {
        BoundedReal { lo: &self.lo - &rhs.hi, hi: &self.hi - &rhs.lo }
    }
}

impl<'a> Mul<&'a BoundedReal> for &'a BoundedReal {
    type Output = BoundedReal;
    fn mul(self, rhs: &BoundedReal) -> BoundedReal {
        let p = [&self.lo * &rhs.lo, &self.lo * &rhs.hi, &self.hi * &rhs.lo, &self.hi * &rhs.hi];
        let lo = p.iter().min().unwrap().clone();
        let hi = p.iter().max().unwrap().clone();
        BoundedReal { lo, hi }
    }
}

impl Neg for &BoundedReal {
    type Output = BoundedReal;
    fn neg(self) -> BoundedReal {
        BoundedReal { lo: -&self.hi, hi: -&self.lo }
    }
}

impl<'a> Mul<&'a Dyadic> for &'a BoundedReal {
    type Output = BoundedReal;
    fn mul(self, rhs: &Dyadic) -> BoundedReal {
        self * &BoundedReal::exact(rhs.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn br(c: f64, r: f64) -> BoundedReal {
        BoundedReal::from_center_radius(Dyadic::from_f64(c), Dyadic::from_f64(r))
    }

    #[test]
    fn exact_addition() {
        let s = &BoundedReal::one() + &BoundedReal::one();
        assert!(s.is_exact());
        assert_eq!(s.center(), Dyadic::from_int(2));
    }

    #[test]
    fn self_subtraction_doubles_radius() {
        let x = br(0.75, 0.125);
        let d = &x - &x;
        assert_eq!(d.center(), Dyadic::zero());
        assert_eq!(d.radius(), Dyadic::from_f64(0.25));
    }

    #[test]
    fn product_encloses_corner_products() {
        let a = br(2.0, 0.125);
        let b = br(3.0, 0.125);
        let p = &a * &b;
        // corner oracle
        for x in [1.875, 2.125] {
            for y in [2.875, 3.125] {
                let v = &Dyadic::from_f64(x) * &Dyadic::from_f64(y);
                assert!(p.contains(&v));
            }
        }
        assert_eq!(p.radius().to_f64(), 0.625);
    }

    #[test]
    fn division_by_zero_interval_is_an_error() {
        let a = BoundedReal::one();
        let b = br(0.0, 0.5);
        assert_eq!(a.div(&b, 64), Err(Error::IndeterminateSign));
    }

    #[test]
    fn comparisons() {
        assert_eq!(BoundedReal::zero().compare(&BoundedReal::one()), Comparison::Less);
        assert_eq!(br(1.0, 0.5).compare(&br(1.2, 0.5)), Comparison::Indeterminate);
        let two = BoundedReal::from_int(2);
        let a = two.powi(5, 64).recip(64).unwrap();
        let b = two.powi(4, 64).recip(64).unwrap();
        assert_eq!(a.compare(&b), Comparison::Less);
    }
}
