use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::bounded::BoundedReal;
use super::dyadic::Dyadic;
use crate::{Error, Result};

/// Plain floating-point bisection. Returns the midpoint of the final bracket.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.signum() != fb.signum()) || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoBracketedRoot { lo, hi });
    }
    let tol = tol.max(0.0);
    for _ in 0..2000 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Integer polynomial, coefficients stored lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval_dyadic(&self, x: &Dyadic) -> Dyadic {
        let mut acc = Dyadic::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * x) + &Dyadic::from_int(c.clone());
        }
        acc
    }

    pub fn eval_rational(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + BigRational::from_integer(c.clone());
        }
        acc
    }

    pub fn eval_bounded(&self, x: &BoundedReal, prec: u64) -> BoundedReal {
        let mut acc = BoundedReal::zero();
        for c in self.coeffs.iter().rev() {
            acc = (&(&acc * x) + &BoundedReal::exact(Dyadic::from_int(c.clone()))).rounded(prec);
        }
        acc
    }

    /// Sign changes in the coefficient sequence: an upper bound on positive roots.
    pub fn sign_variations(&self) -> usize {
        let signs: Vec<bool> =
            self.coeffs.iter().filter(|c| !c.is_zero()).map(|c| c.is_positive()).collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Narrow a sign-changing bracket until its width is at most `2^-bits`.
    /// An exactly hit root returns a degenerate bracket.
    pub fn isolate_root(&self, lo: &Dyadic, hi: &Dyadic, bits: u64) -> Result<(Dyadic, Dyadic)> {
        let mut a = lo.clone();
        let mut b = hi.clone();
        let sa = self.eval_dyadic(&a).signum();
        let sb = self.eval_dyadic(&b).signum();
        if sa == 0 {
            return Ok((a.clone(), a));
        }
        if sb == 0 {
            return Ok((b.clone(), b));
        }
        if sa == sb {
            return Err(Error::NoBracketedRoot { lo: lo.to_f64(), hi: hi.to_f64() });
        }
        let target = Dyadic::one().shl(-(bits as i64));
        while &b - &a > target {
            let m = (&a + &b).shl(-1);
            let sm = self.eval_dyadic(&m).signum();
            if sm == 0 {
                return Ok((m.clone(), m));
            }
            if sm == sa {
                a = m;
            } else {
                b = m;
            }
        }
        Ok((a, b))
    }

    pub fn to_rat(&self) -> RatPoly {
        RatPoly::new(self.coeffs.iter().cloned().map(BigRational::from_integer).collect())
    }
}

/// Rational polynomial, lowest degree first, used for exact gcd tests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatPoly {
    coeffs: Vec<BigRational>,
}

impl RatPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        RatPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval_dyadic_sign(&self, x: &Dyadic) -> i32 {
        let q = x.to_rational();
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * &q + c;
        }
        if acc.is_zero() {
            0
        } else if acc.is_positive() {
            1
        } else {
            -1
        }
    }

    /// Remainder of `self` modulo `m`; `m` must be nonzero.
    pub fn rem(&self, m: &RatPoly) -> RatPoly {
        assert!(!m.is_zero(), "division by zero polynomial");
        let mut r = self.coeffs.clone();
        let dm = m.degree();
        let lead = m.coeffs[dm].clone();
        while r.len() > dm && !r.is_empty() {
            let top = r.len() - 1;
            let f = &r[top] / &lead;
            if !f.is_zero() {
                for i in 0..=dm {
                    let t = &f * &m.coeffs[i];
                    r[top - dm + i] -= t;
                }
            }
            r.pop();
            while r.last().is_some_and(|c| c.is_zero()) {
                r.pop();
            }
        }
        RatPoly::new(r)
    }

    pub fn monic(&self) -> RatPoly {
        match self.coeffs.last() {
            None => self.clone(),
            Some(l) => RatPoly::new(self.coeffs.iter().map(|c| c / l).collect()),
        }
    }

    pub fn gcd(&self, other: &RatPoly) -> RatPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r.monic();
        }
        a.monic()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn one() -> RatPoly {
        RatPoly::new(vec![BigRational::one()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_bisection_golden() {
        let r = bisect_root(|x| x * x - x - 1.0, 1.0, 2.0, 1e-14).unwrap();
        assert!((r - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn float_bisection_unbracketed() {
        assert!(matches!(
            bisect_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::NoBracketedRoot { .. })
        ));
    }

    #[test]
    fn exact_isolation_of_cubic() {
        // x^3 - x^2 - 1; oracle by Newton iteration in f64
        let p = IntPoly::from_i64(&[-1, 0, -1, 1]);
        let mut x = 1.5f64;
        for _ in 0..50 {
            x -= (x * x * x - x * x - 1.0) / (3.0 * x * x - 2.0 * x);
        }
        let (a, b) = p.isolate_root(&Dyadic::one(), &Dyadic::from_int(2), 80).unwrap();
        assert!(a.to_f64() <= x + 1e-15 && x - 1e-15 <= b.to_f64());
        assert!((x - 1.465_571_231_876_768).abs() < 1e-14);
    }

    #[test]
    fn exact_root_is_hit() {
        let p = IntPoly::from_i64(&[-1, 1]);
        let (a, b) = p.isolate_root(&Dyadic::zero(), &Dyadic::from_int(2), 40).unwrap();
        assert_eq!(a, Dyadic::one());
        assert_eq!(b, Dyadic::one());
    }

    #[test]
    fn gcd_detects_common_factor() {
        // (x^2 - x - 1)(x - 3) and (x^2 - x - 1)(x + 2)
        let a = IntPoly::from_i64(&[3, 2, -4, 1]).to_rat();
        let b = IntPoly::from_i64(&[-2, -3, 1, 1]).to_rat();
        let g = a.gcd(&b);
        assert_eq!(g, IntPoly::from_i64(&[-1, -1, 1]).to_rat());
        let c = IntPoly::from_i64(&[1, 1]).to_rat();
        assert!(a.gcd(&c).is_constant());
    }

    #[test]
    fn descartes_count() {
        assert_eq!(IntPoly::from_i64(&[-1, -1, 1]).sign_variations(), 1);
        assert_eq!(IntPoly::from_i64(&[1, -2, 1]).sign_variations(), 2);
    }
}
