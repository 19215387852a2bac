//! The beta-shift language: lexicographic order, admissibility, counting, full words, cylinders.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::Serialize;

use crate::expansion::{word_value, BetaContext, Word};
use crate::numerics::BoundedReal;
use crate::{Error, Result};

pub fn lex_compare(a: &[u8], b: &[u8]) -> Result<Ordering> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.cmp(b))
}

/// Transition outcome of the follower automaton.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Next(usize),
    Reject,
    /// The state reached the end of the known prefix of the expansion of 1.
    NeedDepth,
}

/// State `s` records that the current suffix matches the first `s` digits of the
/// expansion of 1. A smaller digit resets to 0, an equal digit advances, a larger one rejects.
///
/// For an eventually periodic expansion the state space is folded at the end of the
/// first period, so the automaton is finite and exact at every length.
#[derive(Clone, Debug)]
pub struct FollowerAutomaton {
    eps: Vec<u8>,
    wrap: Option<(usize, usize)>,
    alphabet_max: u8,
}

impl FollowerAutomaton {
    /// Automaton valid for words of length up to `depth` (any length when the expansion is periodic).
    pub fn new(ctx: &BetaContext, depth: usize) -> Result<Self> {
        let alphabet_max = ctx.alphabet_max();
        if let Some(p) = ctx.eps_pattern_within(depth.max(1))? {
            let end = p.period_end();
            let eps = (1..=end).map(|i| p.digit(i)).collect();
            return Ok(FollowerAutomaton { eps, wrap: Some((end, p.prefix.len())), alphabet_max });
        }
        let eps = ctx.eps_star(depth.max(1))?.into_vec();
        Ok(FollowerAutomaton { eps, wrap: None, alphabet_max })
    }

    pub fn is_finite(&self) -> bool {
        self.wrap.is_some()
    }

    /// Number of states available (folded size when finite).
    pub fn num_states(&self) -> usize {
        match self.wrap {
            Some((end, _)) => end,
            None => self.eps.len() + 1,
        }
    }

    pub fn alphabet_max(&self) -> u8 {
        self.alphabet_max
    }

    /// Largest digit allowed from state `s`.
    #[inline]
    pub fn max_digit(&self, s: usize) -> Option<u8> {
        self.eps.get(s).copied()
    }

    #[inline]
    pub fn step(&self, s: usize, d: u8) -> Step {
        let Some(&e) = self.eps.get(s) else { return Step::NeedDepth };
        match d.cmp(&e) {
            Ordering::Less => Step::Next(0),
            Ordering::Greater => Step::Reject,
            Ordering::Equal => {
                let t = s + 1;
                match self.wrap {
                    Some((end, back)) if t == end => Step::Next(back),
                    _ => Step::Next(t),
                }
            }
        }
    }

    /// Final state after reading `w` from state 0, `Ok(None)` on rejection.
    pub fn run(&self, w: &[u8]) -> Result<Option<usize>> {
        let mut s = 0;
        for &d in w {
            match self.step(s, d) {
                Step::Next(t) => s = t,
                Step::Reject => return Ok(None),
                Step::NeedDepth => {
                    return Err(Error::InsufficientDepth { needed: s + 1, available: self.eps.len() })
                }
            }
        }
        Ok(Some(s))
    }

    /// Number of accepted words of length `n` ending in each state.
    pub fn counts_by_state(&self, n: usize) -> Result<Vec<BigUint>> {
        if !self.is_finite() && n > self.eps.len() {
            return Err(Error::InsufficientDepth { needed: n, available: self.eps.len() });
        }
        let size = self.num_states();
        let mut cur = vec![BigUint::zero(); size];
        cur[0] = BigUint::from(1u8);
        for _ in 0..n {
            let mut next = vec![BigUint::zero(); size];
            for (s, c) in cur.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let e = self.eps[s];
                if e > 0 {
                    next[0] += c * BigUint::from(e);
                }
                if let Step::Next(t) = self.step(s, e) {
                    next[t] += c;
                }
            }
            cur = next;
        }
        Ok(cur)
    }
}

fn check_alphabet(w: &[u8], ctx: &BetaContext) -> Result<()> {
    let max = ctx.alphabet_max();
    match w.iter().find(|&&d| d > max) {
        Some(&d) => Err(Error::DigitOutOfAlphabet { digit: d, max }),
        None => Ok(()),
    }
}

/// Final follower state of `w`, or `None` if inadmissible. The expansion of 1 is
/// extended only as far as the run needs.
pub fn follower_state(w: &[u8], ctx: &BetaContext) -> Result<Option<usize>> {
    check_alphabet(w, ctx)?;
    let mut depth = w.len().clamp(1, 64);
    loop {
        let a = FollowerAutomaton::new(ctx, depth)?;
        match a.run(w) {
            Err(Error::InsufficientDepth { .. }) => depth = (depth * 2).min(w.len().max(1)),
            other => return other,
        }
    }
}

pub fn is_admissible(w: &[u8], ctx: &BetaContext) -> Result<bool> {
    Ok(follower_state(w, ctx)?.is_some())
}

/// Direct check: every suffix is lexicographically at most the equally long prefix
/// of the expansion of 1.
pub fn is_admissible_naive(w: &[u8], ctx: &BetaContext) -> Result<bool> {
    check_alphabet(w, ctx)?;
    let eps = ctx.eps_star(w.len())?;
    Ok((0..w.len()).all(|j| w[j..] <= eps[..w.len() - j]))
}

/// Full words: any admissible continuation stays admissible. Equivalent to the
/// follower state returning to 0.
pub fn is_full(w: &[u8], ctx: &BetaContext) -> Result<bool> {
    match follower_state(w, ctx)? {
        Some(s) => Ok(s == 0),
        None => Err(Error::Inadmissible),
    }
}

pub fn count_admissible(ctx: &BetaContext, n: usize) -> Result<BigUint> {
    let a = FollowerAutomaton::new(ctx, n)?;
    Ok(a.counts_by_state(n)?.into_iter().sum())
}

pub fn count_full(ctx: &BetaContext, n: usize) -> Result<BigUint> {
    let a = FollowerAutomaton::new(ctx, n)?;
    Ok(a.counts_by_state(n)?.swap_remove(0))
}

/// Lexicographic walk over all admissible words of one length, without per-word allocation.
pub struct AdmissibleWalker {
    auto: FollowerAutomaton,
    digits: Vec<u8>,
    states: Vec<usize>,
    started: bool,
    done: bool,
}

impl AdmissibleWalker {
    pub fn new(ctx: &BetaContext, n: usize) -> Result<Self> {
        let auto = FollowerAutomaton::new(ctx, n)?;
        Ok(Self::with_automaton(auto, n))
    }

    pub fn with_automaton(auto: FollowerAutomaton, n: usize) -> Self {
        let mut w = AdmissibleWalker {
            auto,
            digits: vec![0; n],
            states: vec![0; n + 1],
            started: false,
            done: false,
        };
        w.fill_zeros(0);
        w
    }

    fn fill_zeros(&mut self, from: usize) {
        for i in from..self.digits.len() {
            self.digits[i] = 0;
            self.states[i + 1] = match self.auto.step(self.states[i], 0) {
                Step::Next(t) => t,
                _ => unreachable!("0 is always allowed"),
            };
        }
    }

    /// Move to the next word; `false` when exhausted.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            return true;
        }
        let mut i = self.digits.len();
        while i > 0 {
            i -= 1;
            let s = self.states[i];
            let d = self.digits[i];
            if self.auto.max_digit(s).is_some_and(|m| d < m) {
                self.digits[i] = d + 1;
                self.states[i + 1] = match self.auto.step(s, d + 1) {
                    Step::Next(t) => t,
                    _ => unreachable!("digit below the bound"),
                };
                self.fill_zeros(i + 1);
                return true;
            }
        }
        self.done = true;
        false
    }

    pub fn word(&self) -> &[u8] {
        &self.digits
    }

    pub fn state(&self) -> usize {
        *self.states.last().unwrap()
    }
}

/// Streaming iterator over admissible words in lexicographic order.
pub struct AdmissibleWords {
    walker: AdmissibleWalker,
}

impl Iterator for AdmissibleWords {
    type Item = Word;
    fn next(&mut self) -> Option<Word> {
        self.walker.advance().then(|| Word::from(self.walker.word()))
    }
}

pub fn enumerate_admissible(ctx: &BetaContext, n: usize) -> Result<AdmissibleWords> {
    Ok(AdmissibleWords { walker: AdmissibleWalker::new(ctx, n)? })
}

#[derive(Clone, Debug, Serialize)]
pub struct Cylinder {
    pub word: Word,
    pub left: BoundedReal,
    pub length: BoundedReal,
    pub full: bool,
    pub state: usize,
}

impl Cylinder {
    pub fn right(&self) -> BoundedReal {
        &self.left + &self.length
    }
}

/// `T^s(1)` in the sense of the infinite expansion: `sum_j eps*_{s+j} beta^-j`,
/// truncated after `refine` terms with the tail added as an upper margin.
pub fn orbit_of_one(ctx: &BetaContext, s: usize, refine: usize, prec: u64) -> Result<BoundedReal> {
    if s == 0 {
        return Ok(BoundedReal::one());
    }
    let eps = ctx.eps_star(s + refine)?;
    if let Some(p) = ctx.eps_pattern() {
        // eventually periodic: sum the geometric tail in closed form
        let s = if s >= p.period_end() { p.prefix.len() + (s - p.prefix.len()) % p.cycle.len() } else { s };
        let head: Vec<u8> = (s + 1..=p.period_end().max(s)).map(|i| p.digit(i)).collect();
        let start = p.period_end().max(s);
        let cycle: Vec<u8> = (start + 1..=start + p.cycle.len()).map(|i| p.digit(i)).collect();
        let wp = prec + 16;
        let c = word_value(&cycle, ctx, wp);
        let q = ctx.beta_pow_neg(p.cycle.len() as u64, wp);
        let periodic = c.div(&(&BoundedReal::one() - &q), wp)?;
        let shift = ctx.beta_pow_neg(head.len() as u64, wp);
        let v = &word_value(&head, ctx, wp) + &(&shift * &periodic);
        return Ok(v.rounded(prec));
    }
    let v = word_value(&eps[s..], ctx, prec);
    let tail = ctx.beta_pow_neg(refine as u64, prec);
    Ok(BoundedReal::from_bounds(v.lower().clone(), (&v + &tail).upper().clone()))
}

/// Cylinder of the admissible word `w`. The length is `beta^-n` times the image
/// length `T^s(1)`, with `s` the follower state.
pub fn cylinder(w: &[u8], ctx: &BetaContext, refine: usize) -> Result<Cylinder> {
    let s = follower_state(w, ctx)?.ok_or(Error::Inadmissible)?;
    let n = w.len();
    let prec = ctx.working_precision(n + refine);
    let left = word_value(w, ctx, prec);
    let scale = ctx.beta_pow_neg(n as u64, prec);
    let image = orbit_of_one(ctx, s, refine, prec)?;
    let length = (&scale * &image).rounded(prec);
    Ok(Cylinder { word: Word::from(w), left, length, full: s == 0, state: s })
}

#[derive(Clone, Debug, Serialize)]
pub struct FullWindowReport {
    pub n: usize,
    pub total: u64,
    pub full: u64,
    /// Longest run of consecutive non-full cylinders.
    pub max_gap: usize,
    /// Index of the first cylinder that completes a window of `n + 1` non-full ones.
    pub first_violation: Option<u64>,
    pub holds: bool,
}

/// Every window of `n + 1` consecutive order-`n` cylinders contains a full one.
pub fn full_window_check(ctx: &BetaContext, n: usize) -> Result<FullWindowReport> {
    let mut walker = AdmissibleWalker::new(ctx, n)?;
    let (mut total, mut full, mut run, mut max_gap) = (0u64, 0u64, 0usize, 0usize);
    let mut first_violation = None;
    while walker.advance() {
        if walker.state() == 0 {
            full += 1;
            run = 0;
        } else {
            run += 1;
            max_gap = max_gap.max(run);
            if run == n + 1 && first_violation.is_none() {
                first_violation = Some(total);
            }
        }
        total += 1;
    }
    Ok(FullWindowReport { n, total, full, max_gap, first_violation, holds: max_gap <= n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Comparison, Dyadic};

    fn golden() -> BetaContext {
        BetaContext::golden()
    }

    fn fib(n: usize) -> u64 {
        let (mut a, mut b) = (0u64, 1u64);
        for _ in 0..n {
            (a, b) = (b, a + b);
        }
        a
    }

    #[test]
    fn lex_order() {
        assert_eq!(lex_compare(&[1, 0], &[1, 1]).unwrap(), Ordering::Less);
        assert_eq!(lex_compare(&[1, 0], &[1, 0]).unwrap(), Ordering::Equal);
        assert_eq!(lex_compare(&[2, 0, 0], &[1, 9, 9]).unwrap(), Ordering::Greater);
        assert!(lex_compare(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn golden_admissibility() {
        let g = golden();
        assert!(!is_admissible(&[1, 1], &g).unwrap());
        assert!(is_admissible(&[1, 0, 1, 0, 1], &g).unwrap());
        assert!(matches!(is_admissible(&[2], &g), Err(Error::DigitOutOfAlphabet { .. })));
        let two = BetaContext::from_integer(2).unwrap();
        assert!(is_admissible(&[1, 1, 1, 0, 1], &two).unwrap());
    }

    #[test]
    fn golden_counts_are_fibonacci() {
        let g = golden();
        for n in 1..=6 {
            assert_eq!(count_admissible(&g, n).unwrap(), BigUint::from(fib(n + 2)));
        }
        let two = BetaContext::from_integer(2).unwrap();
        assert_eq!(count_admissible(&two, 10).unwrap(), BigUint::from(1024u32));
    }

    #[test]
    fn renyi_bounds_for_two_and_a_half() {
        let b = BetaContext::from_decimal("2.5").unwrap();
        let v = count_admissible(&b, 8).unwrap();
        let brute = enumerate_admissible(&b, 8).unwrap().count();
        assert_eq!(v, BigUint::from(brute));
        // 2.5^8 = 1525.87..., 2.5^9 / 1.5 = 2543.1...
        assert!(v >= BigUint::from(1526u32) && v <= BigUint::from(2543u32));
    }

    #[test]
    fn enumeration_order() {
        let g = golden();
        let words: Vec<String> = enumerate_admissible(&g, 2).unwrap().map(|w| w.to_string()).collect();
        assert_eq!(words, ["0,0", "0,1", "1,0"]);
        let three: Vec<Word> = enumerate_admissible(&g, 3).unwrap().collect();
        assert_eq!(three.len(), 5);
        assert!(three.iter().all(|w| w.windows(2).all(|p| p != [1, 1])));
        let two = BetaContext::from_integer(2).unwrap();
        let all: Vec<String> = enumerate_admissible(&two, 2).unwrap().map(|w| w.to_string()).collect();
        assert_eq!(all, ["0,0", "0,1", "1,0", "1,1"]);
    }

    #[test]
    fn fullness() {
        let g = golden();
        assert!(is_full(&[0], &g).unwrap());
        assert!(!is_full(&[1], &g).unwrap());
        assert!(is_full(&[1, 0], &g).unwrap());
        assert_eq!(is_full(&[1, 1], &g), Err(Error::Inadmissible));
        let two = BetaContext::from_integer(2).unwrap();
        assert!(enumerate_admissible(&two, 5).unwrap().all(|w| is_full(&w, &two).unwrap()));
    }

    #[test]
    fn fullness_matches_concatenation_definition() {
        for ctx in [golden(), BetaContext::from_decimal("2.5").unwrap()] {
            let tails: Vec<Word> = (1..=5).flat_map(|k| enumerate_admissible(&ctx, k).unwrap()).collect();
            for w in enumerate_admissible(&ctx, 5).unwrap() {
                let by_concat = tails.iter().all(|t| is_admissible(&w.concat(t), &ctx).unwrap());
                assert_eq!(is_full(&w, &ctx).unwrap(), by_concat, "{ctx} {w:?}");
            }
        }
    }

    #[test]
    fn cylinders() {
        let g = golden();
        let c = cylinder(&[1], &g, 40).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((c.left.to_f64() - 1.0 / phi).abs() < 1e-15);
        assert!((c.length.to_f64() - phi.powi(-2)).abs() < 1e-12);
        assert!(!c.full);
        let c0 = cylinder(&[0], &g, 40).unwrap();
        assert!(c0.full && (c0.length.to_f64() - 1.0 / phi).abs() < 1e-15);
        let two = BetaContext::from_integer(2).unwrap();
        let c2 = cylinder(&[1, 0], &two, 10).unwrap();
        assert!(c2.full);
        assert_eq!(c2.left.to_f64(), 0.5);
        assert_eq!(c2.length.to_f64(), 0.25);
    }

    #[test]
    fn cylinders_partition_the_unit_interval() {
        let b = BetaContext::from_decimal("2.5").unwrap();
        let cyl: Vec<Cylinder> =
            enumerate_admissible(&b, 6).unwrap().map(|w| cylinder(&w, &b, 60).unwrap()).collect();
        let mut total = BoundedReal::zero();
        for pair in cyl.windows(2) {
            // right end of one cylinder is the left end of the next
            let gap = &pair[1].left - &pair[0].right();
            assert!(gap.upper().to_f64() >= -1e-20 && gap.lower().to_f64() <= 1e-20);
            assert_ne!(pair[0].left.compare(&pair[1].left), Comparison::Greater);
        }
        for c in &cyl {
            total = &total + &c.length;
        }
        assert!(total.lower().to_f64() <= 1.0 + 1e-12 && total.upper().to_f64() >= 1.0 - 1e-12);
        assert!(total.contains(&Dyadic::one()));
    }

    #[test]
    fn windows_contain_full_cylinders() {
        for n in 1..=12 {
            assert!(full_window_check(&golden(), n).unwrap().holds);
        }
        let b = BetaContext::from_decimal("2.5").unwrap();
        for n in 1..=10 {
            let r = full_window_check(&b, n).unwrap();
            assert!(r.holds, "{r:?}");
        }
        let two = BetaContext::from_integer(2).unwrap();
        let r = full_window_check(&two, 6).unwrap();
        assert_eq!((r.full, r.max_gap), (64, 0));
    }
}
