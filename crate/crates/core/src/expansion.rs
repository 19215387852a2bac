//! Greedy expansions in base `beta`, the infinite expansion of 1, and truncated bases.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::numerics::{BoundedReal, Dyadic, IntPoly, RatPoly};
use crate::{Error, Result};

pub const DEFAULT_PRECISION: u64 = 128;
pub const DEFAULT_PRECISION_CAP: u64 = 1 << 16;

/// A finite digit string.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn new(digits: Vec<u8>) -> Self {
        Word(digits)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn zeros(n: usize) -> Self {
        Word(vec![0; n])
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn concat(&self, other: &[u8]) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(other);
        Word(v)
    }
}

impl Deref for Word {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl From<Vec<u8>> for Word {
    fn from(v: Vec<u8>) -> Self {
        Word(v)
    }
}

impl From<&[u8]> for Word {
    fn from(v: &[u8]) -> Self {
        Word(v.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl FromStr for Word {
    type Err = Error;
    /// Comma separated digits; the empty string is the empty word.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        if s.is_empty() {
            return Ok(Word::empty());
        }
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<u8>()
                    .map_err(|_| Error::InvalidParameter(format!("bad digit {t:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Eventually periodic description `prefix cycle cycle ...` of an infinite digit sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpsPattern {
    pub prefix: Vec<u8>,
    pub cycle: Vec<u8>,
}

impl EpsPattern {
    /// Digit at 1-based position `i`.
    pub fn digit(&self, i: usize) -> u8 {
        debug_assert!(i >= 1);
        if i <= self.prefix.len() {
            self.prefix[i - 1]
        } else {
            self.cycle[(i - 1 - self.prefix.len()) % self.cycle.len()]
        }
    }

    pub fn period_end(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }
}

enum Source {
    Rational { p: BigInt, q: BigInt },
    Algebraic { poly: IntPoly, rat: RatPoly, bracket: Mutex<Bracket> },
}

struct Bracket {
    lo: Dyadic,
    hi: Dyadic,
    bits: u64,
}

struct EpsCache {
    digits: Vec<u8>,
    raw: Vec<u8>,
    pattern: Option<EpsPattern>,
    simple_parry: Option<usize>,
    orbit: Option<OrbitState>,
    history: HashMap<Vec<BigInt>, usize>,
}

struct Inner {
    source: Source,
    label: String,
    alphabet_max: u8,
    beta_f64: f64,
    eps: RwLock<EpsCache>,
}

/// A base `beta > 1` with a lazily extended, append-only cache of the infinite expansion of 1.
///
/// Cloning is cheap and clones share the cache.
#[derive(Clone)]
pub struct BetaContext {
    inner: Arc<Inner>,
    precision: u64,
    cap: u64,
}

impl fmt::Debug for BetaContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BetaContext({})", self.inner.label)
    }
}

impl fmt::Display for BetaContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.inner.label)
    }
}

#[derive(Clone)]
enum OrbitState {
    Rat { num: BigInt, den: BigInt },
    Alg { coeffs: Vec<BigInt>, den: BigInt },
}

fn new_cache(orbit: OrbitState) -> EpsCache {
    EpsCache {
        digits: Vec::new(),
        raw: Vec::new(),
        pattern: None,
        simple_parry: None,
        orbit: Some(orbit),
        history: HashMap::new(),
    }
}

/// Exact value of a decimal (`2.5`) or fraction (`5/2`) literal.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::InvalidBase(format!("cannot parse {s:?}"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().map_err(|_| bad())?;
        let b: BigInt = b.trim().parse().map_err(|_| bad())?;
        if b.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(a, b));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Ok(BigRational::new(num, den))
}

impl BetaContext {
    pub fn from_rational(beta: BigRational) -> Result<Self> {
        if beta <= BigRational::one() {
            return Err(Error::InvalidBase(format!("{beta} is not greater than 1")));
        }
        if beta >= BigRational::from_integer(255.into()) {
            return Err(Error::InvalidBase(format!("{beta} exceeds the supported alphabet")));
        }
        let p = beta.numer().clone();
        let q = beta.denom().clone();
        let alphabet_max = (beta.ceil().to_integer() - 1u32).to_u8().unwrap();
        let label = if q.is_one() { p.to_string() } else { decimal_label(&beta) };
        let inner = Inner {
            beta_f64: p.to_f64().unwrap() / q.to_f64().unwrap(),
            source: Source::Rational { p, q },
            label,
            alphabet_max,
            eps: RwLock::new(new_cache(OrbitState::Rat { num: BigInt::one(), den: BigInt::one() })),
        };
        Ok(Self::wrap(inner))
    }

    pub fn from_integer(k: u32) -> Result<Self> {
        Self::from_rational(BigRational::from_integer(k.into()))
    }

    /// Exact decimal (`"2.5"`) or fraction (`"5/2"`).
    pub fn from_decimal(s: &str) -> Result<Self> {
        Self::from_rational(parse_decimal(s)?)
    }

    /// Named constant or decimal.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "golden" | "phi" => Ok(Self::golden()),
            "tribonacci" => Ok(Self::tribonacci()),
            _ => Self::from_decimal(s),
        }
    }

    pub fn golden() -> Self {
        Self::algebraic(IntPoly::from_i64(&[-1, -1, 1]), Dyadic::one(), Dyadic::from_int(2))
            .expect("golden ratio bracket")
            .relabel("golden")
    }

    pub fn tribonacci() -> Self {
        Self::algebraic(IntPoly::from_i64(&[-1, -1, -1, 1]), Dyadic::one(), Dyadic::from_int(2))
            .expect("tribonacci bracket")
            .relabel("tribonacci")
    }

    /// The unique positive root of a monic integer polynomial with exactly one
    /// coefficient sign change, isolated by `[lo, hi]` with `lo >= 1`.
    pub fn algebraic(poly: IntPoly, lo: Dyadic, hi: Dyadic) -> Result<Self> {
        Self::algebraic_with(poly, lo, hi, None)
    }

    fn algebraic_with(
        poly: IntPoly,
        lo: Dyadic,
        hi: Dyadic,
        preset: Option<(EpsPattern, usize)>,
    ) -> Result<Self> {
        let deg = poly.degree();
        if deg == 0 || !poly.coeffs()[deg].is_one() {
            return Err(Error::InvalidBase("polynomial must be monic of positive degree".into()));
        }
        if poly.sign_variations() != 1 {
            return Err(Error::InvalidBase("polynomial must have exactly one positive root".into()));
        }
        if lo < Dyadic::one() || lo > hi {
            return Err(Error::InvalidBase("bracket must lie in [1, inf)".into()));
        }
        // a rational root of a monic integer polynomial is an integer
        let mut k = lo.ceil();
        while Dyadic::from_int(k.clone()) <= hi {
            if poly.eval_dyadic(&Dyadic::from_int(k.clone())).is_zero() {
                return Self::from_rational(BigRational::from_integer(k));
            }
            k += 1;
        }
        let slo = poly.eval_dyadic(&lo).signum();
        let shi = poly.eval_dyadic(&hi).signum();
        if slo * shi >= 0 {
            return Err(Error::NoBracketedRoot { lo: lo.to_f64(), hi: hi.to_f64() });
        }
        let (a, b) = poly.isolate_root(&lo, &hi, 64)?;
        if a.floor() != b.floor() {
            unreachable!("non-integer root isolated to 2^-64 has a determinate floor");
        }
        let alphabet_max = a
            .floor()
            .to_u8()
            .filter(|&m| m < 255)
            .ok_or_else(|| Error::InvalidBase("base exceeds the supported alphabet".into()))?;
        if alphabet_max == 0 {
            return Err(Error::InvalidBase("root is not greater than 1".into()));
        }
        let beta_f64 = ((&a + &b).shl(-1)).to_f64();
        let mut cache = new_cache(OrbitState::Alg { coeffs: unit_vec(deg), den: BigInt::one() });
        if let Some((pattern, m)) = preset {
            cache.orbit = None;
            cache.simple_parry = Some(m);
            cache.pattern = Some(pattern);
        }
        let rat = poly.to_rat();
        let label = format!("{beta_f64:.12}");
        let inner = Inner {
            source: Source::Algebraic { poly, rat, bracket: Mutex::new(Bracket { lo: a, hi: b, bits: 64 }) },
            label,
            alphabet_max,
            beta_f64,
            eps: RwLock::new(cache),
        };
        Ok(Self::wrap(inner))
    }

    fn wrap(inner: Inner) -> Self {
        BetaContext { inner: Arc::new(inner), precision: DEFAULT_PRECISION, cap: DEFAULT_PRECISION_CAP }
    }

    fn relabel(self, label: &str) -> Self {
        let inner = Arc::try_unwrap(self.inner).ok().expect("fresh context");
        let inner = Inner { label: label.to_string(), ..inner };
        BetaContext { inner: Arc::new(inner), precision: self.precision, cap: self.cap }
    }

    /// Working precision in bits for interval evaluations.
    pub fn with_precision(mut self, bits: u64) -> Self {
        self.precision = bits.max(64);
        self.cap = self.cap.max(self.precision);
        self
    }

    pub fn with_precision_cap(mut self, bits: u64) -> Self {
        self.cap = bits.max(self.precision);
        self
    }

    pub fn precision(&self) -> u64 {
        self.precision
    }

    pub fn precision_cap(&self) -> u64 {
        self.cap
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn alphabet_max(&self) -> u8 {
        self.inner.alphabet_max
    }

    pub fn beta_f64(&self) -> f64 {
        self.inner.beta_f64
    }

    pub fn log2_beta(&self) -> f64 {
        self.inner.beta_f64.log2()
    }

    /// `Some(beta)` when the base is rational.
    pub fn as_rational(&self) -> Option<BigRational> {
        match &self.inner.source {
            Source::Rational { p, q } => Some(BigRational::new(p.clone(), q.clone())),
            Source::Algebraic { .. } => None,
        }
    }

    /// Defining polynomial of an algebraic base.
    pub fn polynomial(&self) -> Option<&IntPoly> {
        match &self.inner.source {
            Source::Rational { .. } => None,
            Source::Algebraic { poly, .. } => Some(poly),
        }
    }

    /// Whether two handles share one underlying base.
    pub fn same_as(&self, other: &BetaContext) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    /// Enclosure of `beta` with absolute width at most `2^-prec`.
    pub fn beta_bounds(&self, prec: u64) -> BoundedReal {
        match &self.inner.source {
            Source::Rational { p, q } => {
                BoundedReal::from_rational(&BigRational::new(p.clone(), q.clone()), prec + 8)
            }
            Source::Algebraic { poly, bracket, .. } => {
                let mut br = bracket.lock().unwrap();
                if br.bits < prec {
                    let (a, b) = poly.isolate_root(&br.lo, &br.hi, prec).expect("isolating bracket");
                    *br = Bracket { lo: a, hi: b, bits: prec };
                }
                BoundedReal::from_bounds(br.lo.clone(), br.hi.clone())
            }
        }
    }

    /// Enclosure of `beta^-n` computed at `prec` bits.
    pub fn beta_pow_neg(&self, n: u64, prec: u64) -> BoundedReal {
        let inv = self.beta_bounds(prec + 16).recip(prec + 16).expect("beta > 1");
        inv.powi(n, prec)
    }

    /// Precision sufficient to carry `steps` multiplications by beta.
    pub fn working_precision(&self, steps: usize) -> u64 {
        self.precision + (steps as f64 * (self.log2_beta() + 0.01)).ceil() as u64 + 32
    }

    /// First `n` digits of the infinite expansion of 1 (periodic rewrite for simple Parry bases).
    pub fn eps_star(&self, n: usize) -> Result<Word> {
        {
            let c = self.inner.eps.read().unwrap();
            if c.digits.len() >= n {
                return Ok(Word(c.digits[..n].to_vec()));
            }
            if let Some(p) = &c.pattern {
                return Ok(Word((1..=n).map(|i| p.digit(i)).collect()));
            }
        }
        let mut c = self.inner.eps.write().unwrap();
        self.extend_eps(&mut c, n)?;
        Ok(Word(c.digits[..n].to_vec()))
    }

    /// Digit at 1-based position `i` of the infinite expansion of 1.
    pub fn eps_digit(&self, i: usize) -> Result<u8> {
        assert!(i >= 1, "positions are 1-based");
        {
            let c = self.inner.eps.read().unwrap();
            if let Some(p) = &c.pattern {
                return Ok(p.digit(i));
            }
            if c.digits.len() >= i {
                return Ok(c.digits[i - 1]);
            }
        }
        let mut c = self.inner.eps.write().unwrap();
        self.extend_eps(&mut c, i)?;
        Ok(c.digits[i - 1])
    }

    /// Eventually periodic structure of the expansion of 1, if already found.
    pub fn eps_pattern(&self) -> Option<EpsPattern> {
        self.inner.eps.read().unwrap().pattern.clone()
    }

    /// Extend the expansion of 1 to `depth` digits and report the periodic structure if found.
    pub fn eps_pattern_within(&self, depth: usize) -> Result<Option<EpsPattern>> {
        if let Some(p) = self.eps_pattern() {
            return Ok(Some(p));
        }
        self.eps_star(depth)?;
        Ok(self.eps_pattern())
    }

    /// Length `m` of the finite greedy expansion of 1, if it terminates within `depth` digits.
    pub fn detect_simple_parry(&self, depth: usize) -> Result<Option<usize>> {
        match self.eps_star(depth) {
            Ok(_) => {}
            Err(Error::PrecisionCap { .. }) => return Err(Error::Inconclusive),
            Err(e) => return Err(e),
        }
        let c = self.inner.eps.read().unwrap();
        Ok(c.simple_parry.filter(|&m| m <= depth))
    }

    /// Known simple Parry length, without extending the cache.
    pub fn simple_parry(&self) -> Option<usize> {
        self.inner.eps.read().unwrap().simple_parry
    }

    fn extend_eps(&self, c: &mut EpsCache, n: usize) -> Result<()> {
        while c.digits.len() < n {
            if let Some(p) = &c.pattern {
                let i = c.digits.len() + 1;
                c.digits.push(p.digit(i));
                continue;
            }
            let orbit = c.orbit.as_mut().expect("orbit present until a pattern is found");
            let d = self.orbit_step(orbit, c.raw.len() + 1)?;
            c.raw.push(d);
            let k = c.raw.len();
            if orbit_is_zero(orbit) {
                let mut cycle = c.raw.clone();
                *cycle.last_mut().unwrap() -= 1;
                c.simple_parry = Some(k);
                c.pattern = Some(EpsPattern { prefix: Vec::new(), cycle });
                c.orbit = None;
                c.history.clear();
                continue;
            }
            c.digits.push(d);
            if orbit_is_one(orbit) {
                c.pattern = Some(EpsPattern { prefix: Vec::new(), cycle: c.raw.clone() });
                c.orbit = None;
                c.history.clear();
                continue;
            }
            if let OrbitState::Alg { coeffs, .. } = orbit {
                if let Some(&j) = c.history.get(coeffs) {
                    c.pattern =
                        Some(EpsPattern { prefix: c.raw[..j].to_vec(), cycle: c.raw[j..k].to_vec() });
                    c.orbit = None;
                    c.history.clear();
                } else {
                    c.history.insert(coeffs.clone(), k);
                }
            }
        }
        Ok(())
    }

    /// One exact step `y <- beta*y - floor(beta*y)`, returning the digit.
    fn orbit_step(&self, state: &mut OrbitState, step: usize) -> Result<u8> {
        let d = match state {
            OrbitState::Rat { num, den } => {
                let Source::Rational { p, q } = &self.inner.source else { unreachable!() };
                *num *= p;
                *den *= q;
                let (d, r) = num.div_mod_floor(den);
                *num = r;
                d
            }
            OrbitState::Alg { coeffs, den } => {
                let Source::Algebraic { poly, .. } = &self.inner.source else { unreachable!() };
                times_x_mod(coeffs, poly);
                let d = self.floor_alg(coeffs, den, step)?;
                coeffs[0] -= &d * &*den;
                d
            }
        };
        d.to_u8().ok_or_else(|| Error::InvalidBase(format!("digit {d} out of range")))
    }

    /// Exact floor of `sum c_i beta^i / den`.
    fn floor_alg(&self, coeffs: &[BigInt], den: &BigInt, step: usize) -> Result<BigInt> {
        let size = coeffs.iter().map(|c| c.bits()).max().unwrap_or(0) + den.bits();
        let mut prec = self.precision.max(size + 64);
        loop {
            let v = self.eval_alg(coeffs, den, prec);
            if let Some(k) = v.floor() {
                return Ok(k);
            }
            // candidate integers inside the enclosure: test for exact equality
            let mut j = v.lower().ceil();
            let top = v.upper().floor();
            while j <= top {
                let mut shifted = coeffs.to_vec();
                shifted[0] -= &j * den;
                if self.alg_is_zero(&shifted) {
                    return Ok(j);
                }
                j += 1;
            }
            if prec >= self.cap {
                let _ = step;
                return Err(Error::PrecisionCap { cap: self.cap });
            }
            prec = (prec * 2).min(self.cap);
        }
    }

    fn eval_alg(&self, coeffs: &[BigInt], den: &BigInt, prec: u64) -> BoundedReal {
        let b = self.beta_bounds(prec + 8);
        let mut acc = BoundedReal::zero();
        for c in coeffs.iter().rev() {
            acc = (&(&acc * &b) + &BoundedReal::from_int(c.clone())).rounded(prec + 8);
        }
        if den.is_one() {
            acc
        } else {
            acc.div(&BoundedReal::from_int(den.clone()), prec + 8).expect("positive denominator")
        }
    }

    /// Exact zero test in `Q[x]/(P)` at the isolated root: `q(beta) = 0` iff
    /// `gcd(P, q)` changes sign on the isolating bracket, since the root is simple
    /// and the only positive root of `P`.
    fn alg_is_zero(&self, coeffs: &[BigInt]) -> bool {
        let Source::Algebraic { rat, bracket, .. } = &self.inner.source else { unreachable!() };
        let q = RatPoly::new(coeffs.iter().cloned().map(BigRational::from_integer).collect());
        if q.is_zero() {
            return true;
        }
        let g = rat.gcd(&q);
        if g.is_constant() {
            return false;
        }
        let br = bracket.lock().unwrap();
        g.eval_dyadic_sign(&br.lo) * g.eval_dyadic_sign(&br.hi) < 0
    }

    /// Exact digit stream of a rational point `x` in `[0, 1)`.
    pub fn digit_stream(&self, x: &BigRational) -> Result<DigitStream> {
        if x.is_negative() || x >= &BigRational::one() {
            return Err(Error::PointOutOfRange);
        }
        let state = match &self.inner.source {
            Source::Rational { .. } => OrbitState::Rat { num: x.numer().clone(), den: x.denom().clone() },
            Source::Algebraic { poly, .. } => {
                let mut coeffs = vec![BigInt::zero(); poly.degree()];
                coeffs[0] = x.numer().clone();
                OrbitState::Alg { coeffs, den: x.denom().clone() }
            }
        };
        Ok(DigitStream { ctx: self.clone(), start: state.clone(), state, produced: 0 })
    }

    /// Exact digit stream of the point `sum c_i beta^i / den` of an algebraic base.
    pub fn digit_stream_algebraic(&self, coeffs: &[BigInt], den: &BigInt) -> Result<DigitStream> {
        let Source::Algebraic { poly, .. } = &self.inner.source else {
            return Err(Error::InvalidBase("base is rational".into()));
        };
        if !den.is_positive() || coeffs.len() > poly.degree() {
            return Err(Error::InvalidParameter("point must be reduced modulo the polynomial".into()));
        }
        let mut c = coeffs.to_vec();
        c.resize(poly.degree(), BigInt::zero());
        let v = self.eval_alg(&c, den, self.precision);
        if v.upper().signum() < 0 || !self.floor_alg(&c, den, 0)?.is_zero() {
            return Err(Error::PointOutOfRange);
        }
        let state = OrbitState::Alg { coeffs: c, den: den.clone() };
        Ok(DigitStream { ctx: self.clone(), start: state.clone(), state, produced: 0 })
    }

    /// Context for a base whose expansion of 1 is known to be `prefix cycle^inf`;
    /// used for truncated bases where the pattern follows from construction.
    fn with_preset(poly: IntPoly, lo: Dyadic, hi: Dyadic, cycle: Vec<u8>, m: usize) -> Result<Self> {
        Self::algebraic_with(poly, lo, hi, Some((EpsPattern { prefix: Vec::new(), cycle }, m)))
    }
}

fn decimal_label(q: &BigRational) -> String {
    // finite decimal when the denominator is 2^a 5^b, else the fraction
    let mut d = q.denom().clone();
    let mut places = 0usize;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", q.numer(), q.denom());
    }
    places += twos.max(fives);
    let scaled = q * BigRational::from_integer(num_traits::pow(BigInt::from(10), places));
    let s = scaled.to_integer().to_string();
    let (int, frac) = s.split_at(s.len().saturating_sub(places));
    let int = if int.is_empty() { "0" } else { int };
    format!("{int}.{frac:0>places$}")
}

fn unit_vec(deg: usize) -> Vec<BigInt> {
    let mut v = vec![BigInt::zero(); deg];
    v[0] = BigInt::one();
    v
}

/// Multiply a residue mod the monic `poly` by `x`.
fn times_x_mod(coeffs: &mut Vec<BigInt>, poly: &IntPoly) {
    let deg = coeffs.len();
    let top = coeffs.pop().unwrap();
    coeffs.insert(0, BigInt::zero());
    if !top.is_zero() {
        let p = poly.coeffs();
        for i in 0..deg {
            if !p[i].is_zero() {
                coeffs[i] -= &top * &p[i];
            }
        }
    }
}

fn orbit_is_zero(s: &OrbitState) -> bool {
    match s {
        OrbitState::Rat { num, .. } => num.is_zero(),
        OrbitState::Alg { coeffs, .. } => coeffs.iter().all(|c| c.is_zero()),
    }
}

fn orbit_is_one(s: &OrbitState) -> bool {
    match s {
        OrbitState::Rat { num, den } => num == den,
        OrbitState::Alg { coeffs, den } => &coeffs[0] == den && coeffs[1..].iter().all(|c| c.is_zero()),
    }
}

/// Exact greedy digits of a rational point, produced on demand.
#[derive(Clone)]
pub struct DigitStream {
    ctx: BetaContext,
    state: OrbitState,
    start: OrbitState,
    produced: usize,
}

impl DigitStream {
    pub fn next_digit(&mut self) -> Result<u8> {
        self.produced += 1;
        self.ctx.orbit_step(&mut self.state, self.produced)
    }

    pub fn take(&mut self, n: usize) -> Result<Vec<u8>> {
        (0..n).map(|_| self.next_digit()).collect()
    }

    pub fn produced(&self) -> usize {
        self.produced
    }

    /// The remaining orbit point is exactly zero.
    pub fn at_zero(&self) -> bool {
        orbit_is_zero(&self.state)
    }

    /// The remaining orbit point equals the starting point exactly.
    pub fn at_start(&self) -> bool {
        match (&self.state, &self.start) {
            (OrbitState::Rat { num, den }, OrbitState::Rat { num: n0, den: d0 }) => num * d0 == n0 * den,
            (OrbitState::Alg { coeffs, den }, OrbitState::Alg { coeffs: c0, den: d0 }) => {
                den == d0 && coeffs == c0
            }
            _ => false,
        }
    }
}

/// Greedy digits of an interval point; fails if a floor is not determinate.
pub fn beta_expand(x: &BoundedReal, ctx: &BetaContext, n: usize) -> Result<Word> {
    if x.lower().signum() < 0 || x.upper() >= &Dyadic::one() {
        return Err(Error::PointOutOfRange);
    }
    let prec = ctx.working_precision(n).max(x.lower().bits().max(x.upper().bits()) + 64);
    let b = ctx.beta_bounds(prec);
    let mut y = x.clone();
    let mut out = Vec::with_capacity(n);
    for step in 1..=n {
        let z = (&b * &y).rounded(prec);
        let d = z.floor().ok_or(Error::DigitIndeterminate { step })?;
        let d = d.to_u8().filter(|&d| d <= ctx.alphabet_max()).ok_or(Error::DigitIndeterminate { step })?;
        y = &z - &BoundedReal::from_int(d);
        out.push(d);
    }
    Ok(Word(out))
}

/// Exact greedy digits of a rational point.
pub fn expand_rational(x: &BigRational, ctx: &BetaContext, n: usize) -> Result<Word> {
    let mut s = ctx.digit_stream(x)?;
    s.take(n).map(Word)
}

/// `sum w_i beta^-i`, without any tail.
pub fn word_value(w: &[u8], ctx: &BetaContext, prec: u64) -> BoundedReal {
    let inv = ctx.beta_bounds(prec + 16).recip(prec + 16).expect("beta > 1");
    let mut acc = BoundedReal::zero();
    for &d in w.iter().rev() {
        acc = (&(&acc + &BoundedReal::from_int(d)) * &inv).rounded(prec);
    }
    acc
}

/// Enclosure of the points whose expansion begins with `w`: value plus a tail in `[0, beta^-n]`.
pub fn evaluate_word(w: &[u8], ctx: &BetaContext) -> BoundedReal {
    let prec = ctx.working_precision(w.len());
    let v = word_value(w, ctx, prec);
    let tail = ctx.beta_pow_neg(w.len() as u64, prec);
    BoundedReal::from_bounds(v.lower().clone(), (&v + &tail).upper().clone())
}

/// The base whose expansion of 1 is the first `n` digits of that of `ctx`.
pub fn approximate_beta(ctx: &BetaContext, n: usize) -> Result<BetaContext> {
    if n == 0 {
        return Err(Error::InvalidTruncationIndex { index: 0 });
    }
    let e = ctx.eps_star(n)?;
    if e[n - 1] == 0 {
        return Err(Error::InvalidTruncationIndex { index: n });
    }
    let total: u64 = e.iter().map(|&d| d as u64).sum();
    if total <= 1 {
        return Err(Error::TruncationTooShort { index: n });
    }
    // x^n - sum e_i x^(n-i)
    let mut coeffs = vec![BigInt::zero(); n + 1];
    coeffs[n] = BigInt::one();
    for (i, &d) in e.iter().enumerate() {
        coeffs[n - 1 - i] = -BigInt::from(d);
    }
    let poly = IntPoly::new(coeffs);
    let hi = Dyadic::from_int(ctx.alphabet_max() as i64 + 2);
    let mut cycle = e.into_vec();
    *cycle.last_mut().unwrap() -= 1;
    let out = BetaContext::with_preset(poly, Dyadic::one(), hi, cycle, n)?;
    Ok(out.with_precision(ctx.precision).with_precision_cap(ctx.cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Comparison;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn word_parsing_and_display() {
        let w: Word = "1,0,2".parse().unwrap();
        assert_eq!(w.digits(), &[1, 0, 2]);
        assert_eq!(w.to_string(), "1,0,2");
        assert_eq!("".parse::<Word>().unwrap(), Word::empty());
        assert!("1,x".parse::<Word>().is_err());
    }

    #[test]
    fn base_parsing() {
        assert_eq!(BetaContext::parse("2.5").unwrap().as_rational(), Some(q(5, 2)));
        assert_eq!(BetaContext::parse("5/2").unwrap().label(), "2.5");
        assert_eq!(BetaContext::parse("3.7").unwrap().alphabet_max(), 3);
        assert_eq!(BetaContext::parse("2").unwrap().alphabet_max(), 1);
        assert!(BetaContext::parse("1").is_err());
        assert!(BetaContext::parse("0.5").is_err());
        assert!(BetaContext::parse("abc").is_err());
        assert_eq!(BetaContext::golden().alphabet_max(), 1);
    }

    #[test]
    fn binary_half() {
        let two = BetaContext::from_integer(2).unwrap();
        let w = beta_expand(&BoundedReal::from_f64(0.5), &two, 3).unwrap();
        assert_eq!(w.digits(), &[1, 0, 0]);
        assert_eq!(expand_rational(&q(1, 2), &two, 3).unwrap().digits(), &[1, 0, 0]);
    }

    #[test]
    fn golden_two_minus_phi() {
        let g = BetaContext::golden();
        // 2 - phi = phi^-2 lands exactly on 0 after two steps, so only the exact stream
        // resolves the third floor
        let mut s = g.digit_stream_algebraic(&[2.into(), (-1).into()], &BigInt::one()).unwrap();
        let w = Word(s.take(4).unwrap());
        assert_eq!(w.digits(), &[0, 1, 0, 0]);
        assert!(s.at_zero());
        let phi = g.beta_bounds(200);
        let x = (&BoundedReal::from_int(2) - &phi).rounded(200);
        assert_eq!(beta_expand(&x, &g, 4), Err(Error::DigitIndeterminate { step: 2 }));
        let back = evaluate_word(&w, &g);
        assert!(back.contains(x.lower()) && back.contains(x.upper()));
    }

    #[test]
    fn zero_is_fixed() {
        let b = BetaContext::from_decimal("2.5").unwrap();
        let w = beta_expand(&BoundedReal::zero(), &b, 5).unwrap();
        assert_eq!(w.digits(), &[0; 5]);
    }

    #[test]
    fn evaluate_small_words() {
        let two = BetaContext::from_integer(2).unwrap();
        let v = evaluate_word(&[1, 0, 0], &two);
        assert_eq!(v.lower().to_f64(), 0.5);
        assert_eq!(v.upper().to_f64(), 0.625);
        let e = evaluate_word(&[], &BetaContext::golden());
        assert_eq!(e.lower().to_f64(), 0.0);
        assert_eq!(e.upper().to_f64(), 1.0);
        let g = evaluate_word(&[0, 1], &BetaContext::golden());
        let two_minus_phi = 2.0 - (1.0 + 5f64.sqrt()) / 2.0;
        assert!((g.lower().to_f64() - two_minus_phi).abs() < 1e-15);
    }

    #[test]
    fn expansion_of_one() {
        let two = BetaContext::from_integer(2).unwrap();
        assert_eq!(two.eps_star(4).unwrap().digits(), &[1, 1, 1, 1]);
        assert_eq!(two.detect_simple_parry(5).unwrap(), Some(1));
        let g = BetaContext::golden();
        assert_eq!(g.eps_star(6).unwrap().digits(), &[1, 0, 1, 0, 1, 0]);
        assert_eq!(g.detect_simple_parry(5).unwrap(), Some(2));
        let b = BetaContext::from_decimal("2.5").unwrap();
        assert_eq!(b.detect_simple_parry(50).unwrap(), None);
        // identity check: sum e_i beta^-i = 1 within the tail
        let e = b.eps_star(60).unwrap();
        let v = evaluate_word(&e, &b);
        assert!(v.contains(&Dyadic::one()) || v.upper() == &Dyadic::one());
        assert_eq!(&e[..3], &[2, 1, 0]);
    }

    #[test]
    fn tribonacci_expansion_is_finite() {
        let t = BetaContext::tribonacci();
        assert_eq!(t.detect_simple_parry(10).unwrap(), Some(3));
        assert_eq!(t.eps_star(6).unwrap().digits(), &[1, 1, 0, 1, 1, 0]);
    }

    #[test]
    fn truncated_bases() {
        let g = BetaContext::golden();
        let b3 = approximate_beta(&g, 3).unwrap();
        assert!((b3.beta_f64() - 1.465_571_231_876_768).abs() < 1e-12);
        assert_eq!(b3.eps_star(6).unwrap().digits(), &[1, 0, 0, 1, 0, 0]);

        let two = BetaContext::from_integer(2).unwrap();
        assert_eq!(approximate_beta(&two, 1).unwrap_err(), Error::TruncationTooShort { index: 1 });
        let b2 = approximate_beta(&two, 2).unwrap();
        assert!((b2.beta_f64() - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert_eq!(approximate_beta(&g, 2).unwrap_err(), Error::InvalidTruncationIndex { index: 2 });
    }

    #[test]
    fn preset_pattern_matches_generic_route() {
        let b = BetaContext::from_decimal("2.5").unwrap();
        for n in [3usize, 5, 8] {
            let e = b.eps_star(n).unwrap();
            if e[n - 1] == 0 {
                continue;
            }
            let fast = approximate_beta(&b, n).unwrap();
            let poly = fast.polynomial().unwrap().clone();
            let slow = BetaContext::algebraic(poly, Dyadic::one(), Dyadic::from_int(4)).unwrap();
            assert_eq!(fast.eps_star(3 * n).unwrap(), slow.eps_star(3 * n).unwrap(), "n = {n}");
            assert_eq!(slow.detect_simple_parry(2 * n).unwrap(), Some(n));
        }
    }

    #[test]
    fn truncated_bases_increase_to_beta() {
        let b = BetaContext::from_decimal("2.5").unwrap();
        let target = BoundedReal::from_f64(2.5);
        let mut prev = BoundedReal::one();
        for n in [5usize, 10, 20, 40] {
            let e = b.eps_star(n).unwrap();
            let n = if e[n - 1] == 0 { (1..n).rev().find(|&i| e[i - 1] > 0).unwrap() } else { n };
            let bn = approximate_beta(&b, n).unwrap().beta_bounds(300);
            assert_eq!(prev.compare(&bn), Comparison::Less, "n = {n}");
            assert_eq!(bn.compare(&target), Comparison::Less, "n = {n}");
            let gap = (&target - &bn).upper().to_f64();
            assert!(gap <= 10.0 * 2.5f64.powi(-(n as i32)), "n = {n}");
            prev = bn;
        }
    }

    #[test]
    fn rational_stream_of_one_third() {
        let two = BetaContext::from_integer(2).unwrap();
        assert_eq!(expand_rational(&q(1, 3), &two, 6).unwrap().digits(), &[0, 1, 0, 1, 0, 1]);
        let g = BetaContext::golden();
        let w = expand_rational(&q(1, 2), &g, 30).unwrap();
        assert!(w.windows(2).all(|p| p != [1, 1]));
    }

    #[test]
    fn contexts_share_cache_across_threads() {
        let b = BetaContext::from_decimal("3.7").unwrap();
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let b = b.clone();
                std::thread::spawn(move || b.eps_star(40 + 10 * i).unwrap())
            })
            .collect();
        let words: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for w in &words {
            assert_eq!(w.digits(), &words[3][..w.len()]);
        }
    }
}
