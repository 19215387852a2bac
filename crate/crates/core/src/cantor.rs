//! The Cantor construction `E_N` for prescribed exponents `(r_hat, r)`: sequence plans,
//! the choice of `(N, M)`, the block set `MM`, level sets, sampling and the measure `mu`.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::expansion::{approximate_beta, BetaContext, Word};
use crate::recurrence::OrbitView;
use crate::symbolic::{count_admissible, FollowerAutomaton, Step};
use crate::{Error, Result};

const M_MAX: usize = 256;
const N_MAX: usize = 64;

/// `log2` of a big integer without overflowing `f64`.
pub fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().log2() + shift as f64
}

fn floor_u64(q: &BigRational) -> Result<u64> {
    q.floor()
        .to_integer()
        .to_u64()
        .ok_or_else(|| Error::BudgetExceeded("sequence term exceeds 64 bits".into()))
}

/// Raw sequences `n'_k, m'_k` for `k = 1..=k_count`, then adjusted so that
/// `n_k < m_k < n_{k+1}` and `m_k - n_k` is non-decreasing (by +1 bumps).
///
/// `r_hat = 0` uses `n'_k = k^k`, otherwise `n'_k = floor((r/r_hat)^k)`; in both cases
/// `m'_k = floor((r + 1) n'_k)` up to the floor placement.
pub fn plan_sequences(r_hat: f64, r: f64, k_count: usize) -> Result<(Vec<u64>, Vec<u64>)> {
    if !(r > 0.0 && r.is_finite()) || !(r_hat >= 0.0 && r_hat.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < r < inf and r_hat >= 0, got ({r_hat}, {r})")));
    }
    let bound = r / (1.0 + r);
    if r_hat > bound * (1.0 + 1e-12) {
        return Err(Error::CountableRegime { r_hat, bound });
    }
    let r1 = BigRational::from_float(r + 1.0).expect("finite");
    let mut raw_n = Vec::with_capacity(k_count);
    let mut raw_m = Vec::with_capacity(k_count);
    for k in 1..=k_count {
        let base = if r_hat == 0.0 {
            BigRational::from_integer(BigInt::from(k).pow(k as u32))
        } else {
            let ratio = BigRational::from_float(r / r_hat).expect("finite");
            let mut acc = BigRational::one();
            for _ in 0..k {
                acc = &acc * &ratio;
            }
            acc
        };
        let n = floor_u64(&base)?;
        // (r+1) k^k is exact for the first family; the second uses (r+1)(r/r_hat)^k
        let m = floor_u64(&(&r1 * &base))?;
        raw_n.push(n);
        raw_m.push(m);
    }
    let mut n_seq = Vec::with_capacity(k_count);
    let mut m_seq: Vec<u64> = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut n = raw_n[k].max(1);
        if let Some(&prev_m) = m_seq.last() {
            n = n.max(prev_m + 1);
        }
        let mut m = raw_m[k].max(n + 1);
        if let (Some(&pn), Some(&pm)) = (n_seq.last(), m_seq.last()) {
            let gap: u64 = pm - pn;
            m = m.max(n + gap);
        }
        n_seq.push(n);
        m_seq.push(m);
    }
    Ok((n_seq, m_seq))
}

/// Result of the `(N, M)` search.
#[derive(Clone, Debug)]
pub struct NmChoice {
    pub n: usize,
    pub m: usize,
    pub ctx_n: BetaContext,
    pub count: BigUint,
    /// `log2(#Sigma_{beta_N}^M / M - M - 1) - M (1 - delta) log2(beta)`.
    pub margin: f64,
}

fn nm_margin(count: &BigUint, m: usize, log2_beta: f64, delta: f64) -> f64 {
    let mm = BigUint::from(m);
    let sub = &mm * (m + 1);
    let scaled = count.clone();
    if scaled <= sub {
        return f64::NEG_INFINITY;
    }
    // count/M - M - 1 = (count - M(M+1)) / M
    let lhs = log2_big(&(&scaled - &sub)) - (m as f64).log2();
    lhs - m as f64 * (1.0 - delta) * log2_beta
}

/// Smallest `(N, M)` with `#Sigma_{beta_N}^M / M - M - 1 >= beta^{M(1-delta)}` using exact counts.
/// Search order: `M = 2, 3, ...` ascending; for each `M` the smallest valid truncation `N <= 64`.
pub fn choose_n_m(ctx: &BetaContext, delta: f64) -> Result<NmChoice> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter("delta must lie in (0, 1)".into()));
    }
    let log2_beta = ctx.log2_beta();
    let mut cache: HashMap<usize, Option<BetaContext>> = HashMap::new();
    let mut truncated = |n: usize| -> Result<Option<BetaContext>> {
        if let Some(c) = cache.get(&n) {
            return Ok(c.clone());
        }
        let c = match approximate_beta(ctx, n) {
            Ok(c) => Some(c),
            Err(Error::InvalidTruncationIndex { .. }) | Err(Error::TruncationTooShort { .. }) => None,
            Err(e) => return Err(e),
        };
        cache.insert(n, c.clone());
        Ok(c)
    };
    let mut best = f64::NEG_INFINITY;
    let valid: Vec<usize> = {
        let mut v = Vec::new();
        for n in 1..=N_MAX {
            if truncated(n)?.is_some() {
                v.push(n);
            }
        }
        v
    };
    let Some(&largest) = valid.last() else {
        return Err(Error::SearchExhausted { best_margin: best });
    };
    for m in 2..=M_MAX {
        let top = truncated(largest)?.unwrap();
        let top_margin = nm_margin(&count_admissible(&top, m)?, m, log2_beta, delta);
        best = best.max(top_margin);
        if top_margin <= 0.0 {
            continue;
        }
        // feasibility is monotone in N since the truncated languages are nested
        let (mut lo, mut hi) = (0usize, valid.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let c = truncated(valid[mid])?.unwrap();
            if nm_margin(&count_admissible(&c, m)?, m, log2_beta, delta) > 0.0 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let n = valid[lo];
        let ctx_n = truncated(n)?.unwrap();
        let count = count_admissible(&ctx_n, m)?;
        let margin = nm_margin(&count, m, log2_beta, delta);
        return Ok(NmChoice { n, m, ctx_n, count, margin });
    }
    Err(Error::SearchExhausted { best_margin: best })
}

type PairState = (usize, usize);

/// Words of length `M` admissible for `beta_N` and full for `beta`, with exact completion
/// counts for uniform sampling and constrained counting.
#[derive(Debug)]
pub struct BlockSpace {
    len: usize,
    alphabet_max: u8,
    small: FollowerAutomaton,
    big: FollowerAutomaton,
    /// `back[i][s]`: completions from position `i` in state `s` that end full.
    back: Vec<HashMap<PairState, BigUint>>,
}

impl BlockSpace {
    pub fn new(ctx: &BetaContext, ctx_n: &BetaContext, len: usize) -> Result<Self> {
        let small = FollowerAutomaton::new(ctx_n, len + 1)?;
        let big = FollowerAutomaton::new(ctx, len + 1)?;
        let alphabet_max = ctx_n.alphabet_max();
        let mut space = BlockSpace { len, alphabet_max, small, big, back: Vec::new() };
        let mut reach: Vec<BTreeSet<PairState>> = vec![BTreeSet::new(); len + 1];
        reach[0].insert((0, 0));
        for i in 0..len {
            let cur: Vec<PairState> = reach[i].iter().copied().collect();
            for s in cur {
                for d in 0..=alphabet_max {
                    if let Some(t) = space.step(s, d)? {
                        reach[i + 1].insert(t);
                    }
                }
            }
        }
        let mut back = vec![HashMap::new(); len + 1];
        for &s in &reach[len] {
            if s.1 == 0 {
                back[len].insert(s, BigUint::one());
            }
        }
        for i in (0..len).rev() {
            for &s in &reach[i] {
                let mut total = BigUint::zero();
                for d in 0..=alphabet_max {
                    if let Some(t) = space.step(s, d)? {
                        if let Some(c) = back[i + 1].get(&t) {
                            total += c;
                        }
                    }
                }
                if !total.is_zero() {
                    back[i].insert(s, total);
                }
            }
        }
        space.back = back;
        Ok(space)
    }

    fn step(&self, s: PairState, d: u8) -> Result<Option<PairState>> {
        let a = match self.small.step(s.0, d) {
            Step::Next(a) => a,
            Step::Reject => return Ok(None),
            Step::NeedDepth => return Err(Error::InsufficientDepth { needed: s.0 + 1, available: s.0 }),
        };
        match self.big.step(s.1, d) {
            Step::Next(b) => Ok(Some((a, b))),
            Step::Reject => Ok(None),
            Step::NeedDepth => Err(Error::InsufficientDepth { needed: s.1 + 1, available: s.1 }),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.total().is_zero()
    }

    pub fn total(&self) -> BigUint {
        self.back[0].get(&(0, 0)).cloned().unwrap_or_default()
    }

    pub fn contains(&self, w: &[u8]) -> bool {
        if w.len() != self.len {
            return false;
        }
        let mut s = (0, 0);
        for &d in w {
            match self.step(s, d) {
                Ok(Some(t)) => s = t,
                _ => return false,
            }
        }
        s.1 == 0
    }

    /// Uniform member.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Word {
        let total = self.total();
        let mut r = rng.gen_biguint_below(&total);
        let mut s = (0, 0);
        let mut out = Vec::with_capacity(self.len);
        for i in 0..self.len {
            for d in 0..=self.alphabet_max {
                let Ok(Some(t)) = self.step(s, d) else { continue };
                let Some(c) = self.back[i + 1].get(&t) else { continue };
                if &r < c {
                    out.push(d);
                    s = t;
                    break;
                }
                r -= c;
            }
        }
        Word(out)
    }

    /// Number of members agreeing with the given digits where specified.
    pub fn count_matching(&self, constraint: &[Option<u8>]) -> BigUint {
        let mut cur: HashMap<PairState, BigUint> = HashMap::new();
        cur.insert((0, 0), BigUint::one());
        for (i, c) in constraint.iter().enumerate().take(self.len) {
            let mut next: HashMap<PairState, BigUint> = HashMap::new();
            for (s, n) in &cur {
                for d in 0..=self.alphabet_max {
                    if c.is_some_and(|c| c != d) {
                        continue;
                    }
                    if let Ok(Some(t)) = self.step(*s, d) {
                        if self.back[i + 1].contains_key(&t) {
                            *next.entry(t).or_default() += n;
                        }
                    }
                }
            }
            cur = next;
        }
        cur.into_iter().filter(|(s, _)| s.1 == 0).map(|(_, n)| n).sum()
    }

    /// All members, in lexicographic order.
    pub fn enumerate(&self, budget: usize) -> Result<Vec<Word>> {
        if self.total() > BigUint::from(budget) {
            return Err(Error::BudgetExceeded(format!("block set larger than {budget}")));
        }
        let mut out = Vec::new();
        let mut stack = vec![(Vec::new(), (0usize, 0usize))];
        while let Some((w, s)) = stack.pop() {
            if w.len() == self.len {
                out.push(Word(w));
                continue;
            }
            for d in (0..=self.alphabet_max).rev() {
                if let Ok(Some(t)) = self.step(s, d) {
                    if self.back[w.len() + 1].contains_key(&t) {
                        let mut v = w.clone();
                        v.push(d);
                        stack.push((v, t));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// The cyclic rotation `(w_{n-i+1}, ..., w_n, w_1, ..., w_{n-i})`; `i = n` gives `w`.
pub fn rotation(w: &[u8], i: usize) -> Word {
    let n = w.len();
    let i = i % n.max(1);
    let mut v = w[n - i..].to_vec();
    v.extend_from_slice(&w[..n - i]);
    Word(v)
}

/// A block space with finitely many words removed.
#[derive(Debug, Clone)]
pub struct MSet {
    space: Arc<BlockSpace>,
    excluded: BTreeSet<Word>,
    count: BigUint,
}

impl MSet {
    fn new(space: Arc<BlockSpace>, excluded: impl IntoIterator<Item = Word>) -> Self {
        let excluded: BTreeSet<Word> = excluded.into_iter().filter(|w| space.contains(w)).collect();
        let count = space.total() - BigUint::from(excluded.len());
        MSet { space, excluded, count }
    }

    pub fn count(&self) -> &BigUint {
        &self.count
    }

    pub fn block_len(&self) -> usize {
        self.space.len()
    }

    pub fn contains(&self, w: &[u8]) -> bool {
        self.space.contains(w) && !self.excluded.contains(&Word::from(w))
    }

    pub fn excluded(&self) -> &BTreeSet<Word> {
        &self.excluded
    }

    /// Uniform member (rejection against the excluded words).
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Word {
        loop {
            let w = self.space.sample(rng);
            if !self.excluded.contains(&w) {
                return w;
            }
        }
    }

    pub fn count_matching(&self, constraint: &[Option<u8>]) -> BigUint {
        let base = self.space.count_matching(constraint);
        let hit = self
            .excluded
            .iter()
            .filter(|w| w.iter().zip(constraint).all(|(d, c)| c.is_none_or(|c| c == *d)))
            .count();
        base - BigUint::from(hit)
    }

    pub fn enumerate(&self, budget: usize) -> Result<Vec<Word>> {
        let mut all = self.space.enumerate(budget + self.excluded.len())?;
        all.retain(|w| !self.excluded.contains(w));
        Ok(all)
    }
}

/// `{ w in Sigma_{beta_N}^M : w full (for beta), w not a rotation of u }`.
pub fn m_set(ctx: &BetaContext, ctx_n: &BetaContext, u: &[u8]) -> Result<MSet> {
    let space = Arc::new(BlockSpace::new(ctx, ctx_n, u.len())?);
    if !space.contains(u) || u.iter().all(|&d| d == 0) {
        return Err(Error::InvalidParameter("u must be a full nonzero block".into()));
    }
    let set = MSet::new(space, (1..=u.len()).map(|i| rotation(u, i)));
    if set.count.is_zero() {
        return Err(Error::ConstructionInfeasible);
    }
    Ok(set)
}

/// `0^p` when `p <= N`, otherwise `(w_1, ..., w_{p-N}, 0^N)`.
pub fn pad(w: &[u8], p: usize, n: usize) -> Result<Word> {
    if p <= n {
        return Ok(Word::zeros(p));
    }
    if w.len() < p - n {
        return Err(Error::InvalidParameter(format!("pad needs {} digits, word has {}", p - n, w.len())));
    }
    let mut v = w[..p - n].to_vec();
    v.extend(std::iter::repeat_n(0, n));
    Ok(Word(v))
}

fn ser_u64s<S: Serializer>(v: &[u64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

fn ser_big<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Parameters and sequences of one construction. Level `k` (1-based) uses `n_seq[k-1]`.
#[derive(Clone, Debug, Serialize)]
pub struct CantorPlan {
    pub beta: String,
    pub r_hat: f64,
    pub r: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub big_n: usize,
    #[serde(rename = "M")]
    pub big_m: usize,
    pub beta_n: String,
    /// Index of `n_1` in the unadjusted formula sequence (earlier terms have `n <= 2M`).
    pub first_index: usize,
    #[serde(serialize_with = "ser_u64s")]
    pub n_seq: Vec<u64>,
    #[serde(serialize_with = "ser_u64s")]
    pub m_seq: Vec<u64>,
    /// `m_k = ell_k n_k + p_k`.
    #[serde(serialize_with = "ser_u64s")]
    pub ell: Vec<u64>,
    #[serde(serialize_with = "ser_u64s")]
    pub p: Vec<u64>,
    /// `n_{k+1} - m_k = t_k M + q_k`, one shorter than `n_seq`.
    #[serde(serialize_with = "ser_u64s")]
    pub t: Vec<u64>,
    #[serde(serialize_with = "ser_u64s")]
    pub q: Vec<u64>,
    /// The block repeated in the first level.
    pub u: Word,
    #[serde(rename = "block_count", serialize_with = "ser_big")]
    m_count: BigUint,
    #[serde(skip)]
    ctx: BetaContext,
    #[serde(skip)]
    ctx_n: BetaContext,
    #[serde(skip)]
    blocks: MSet,
}

impl CantorPlan {
    /// Plan with `levels` construction levels; `u` is drawn uniformly (seed 0) from the
    /// full nonzero blocks.
    pub fn new(ctx: &BetaContext, r_hat: f64, r: f64, delta: f64, levels: usize) -> Result<Self> {
        Self::with_u_seed(ctx, r_hat, r, delta, levels, 0)
    }

    pub fn with_u_seed(ctx: &BetaContext, r_hat: f64, r: f64, delta: f64, levels: usize, u_seed: u64) -> Result<Self> {
        if levels < 1 {
            return Err(Error::InvalidParameter("need at least one level".into()));
        }
        plan_sequences(r_hat, r, 1)?;
        let choice = choose_n_m(ctx, delta)?;
        let (big_n, big_m) = (choice.n, choice.m);
        let mut k_count = levels + 2;
        let (n_all, m_all, first) = loop {
            let (n_all, m_all) = plan_sequences(r_hat, r, k_count)?;
            let first = n_all.iter().position(|&n| n > 2 * big_m as u64);
            if let Some(f) = first {
                if n_all.len() - f >= levels {
                    break (n_all, m_all, f);
                }
            }
            k_count += 1;
            if k_count > 400 {
                return Err(Error::BudgetExceeded("plan sequences did not reach n_1 > 2M".into()));
            }
        };
        let n_seq = n_all[first..first + levels].to_vec();
        let m_seq = m_all[first..first + levels].to_vec();
        let ell: Vec<u64> = n_seq.iter().zip(&m_seq).map(|(n, m)| m / n).collect();
        let p: Vec<u64> = n_seq.iter().zip(&m_seq).map(|(n, m)| m % n).collect();
        let mm = big_m as u64;
        let t: Vec<u64> = (0..levels - 1).map(|k| (n_seq[k + 1] - m_seq[k]) / mm).collect();
        let q: Vec<u64> = (0..levels - 1).map(|k| (n_seq[k + 1] - m_seq[k]) % mm).collect();
        let space = Arc::new(BlockSpace::new(ctx, &choice.ctx_n, big_m)?);
        let zero = Word::zeros(big_m);
        let base = MSet::new(space.clone(), [zero]);
        if base.count.is_zero() {
            return Err(Error::ConstructionInfeasible);
        }
        let u = base.sample(&mut ChaCha8Rng::seed_from_u64(u_seed));
        let blocks = MSet::new(space, (1..=big_m).map(|i| rotation(&u, i)));
        if blocks.count.is_zero() {
            return Err(Error::ConstructionInfeasible);
        }
        Ok(CantorPlan {
            beta: ctx.label().to_string(),
            r_hat,
            r,
            delta,
            big_n,
            big_m,
            beta_n: choice.ctx_n.label().to_string(),
            first_index: first + 1,
            n_seq,
            m_seq,
            ell,
            p,
            t,
            q,
            u,
            m_count: blocks.count.clone(),
            ctx: ctx.clone(),
            ctx_n: choice.ctx_n,
            blocks,
        })
    }

    pub fn levels(&self) -> usize {
        self.n_seq.len()
    }

    pub fn ctx(&self) -> &BetaContext {
        &self.ctx
    }

    pub fn ctx_n(&self) -> &BetaContext {
        &self.ctx_n
    }

    pub fn blocks(&self) -> &MSet {
        &self.blocks
    }

    /// `v_1 = (u^{floor(n_1/M)}, 0^{n_1 mod M})`.
    pub fn first_block(&self) -> Word {
        let reps = (self.n_seq[0] / self.big_m as u64) as usize;
        let mut v: Vec<u8> = self.u.iter().copied().cycle().take(reps * self.big_m).collect();
        v.resize(self.n_seq[0] as usize, 0);
        Word(v)
    }

    /// `((w)^{ell_k}, a_{p_k}(w))` for a word `w` of length `n_k`.
    fn level_word(&self, k: usize, w: &[u8]) -> Result<Vec<u8>> {
        let ell = self.ell[k - 1] as usize;
        let mut out = Vec::with_capacity(self.m_seq[k - 1] as usize);
        for _ in 0..ell {
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&pad(w, self.p[k - 1] as usize, self.big_n)?);
        Ok(out)
    }

    /// `v_{k+1}` from its `t_k` blocks.
    fn v_word(&self, k: usize, blocks: &[Word]) -> Vec<u8> {
        let mut v: Vec<u8> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
        v.extend(std::iter::repeat_n(0, self.q[k - 1] as usize));
        v
    }

    /// Where digit `i` (0-based) of a level-`k` word comes from.
    pub fn source(&self, k: usize, i: u64) -> Source {
        let n = self.n_seq[k - 1];
        let ell = self.ell[k - 1];
        let p = self.p[k - 1];
        let r = if i < ell * n {
            i % n
        } else {
            let a = i - ell * n;
            if p <= self.big_n as u64 || a >= p - self.big_n as u64 {
                return Source::Zero;
            }
            a
        };
        let mm = self.big_m as u64;
        if k == 1 {
            return if r < (n / mm) * mm { Source::U((r % mm) as usize) } else { Source::Zero };
        }
        let prev = self.m_seq[k - 2];
        if r < prev {
            return self.source(k - 1, r);
        }
        let o = r - prev;
        if o < self.t[k - 2] * mm {
            Source::Block { level: k, index: o / mm, offset: (o % mm) as usize }
        } else {
            Source::Zero
        }
    }
}

/// Origin of one digit of a construction word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Zero,
    /// Offset into the fixed first-level block `u`.
    U(usize),
    /// Offset into block `index` of `v_level`.
    Block { level: usize, index: u64, offset: usize },
}

/// `#D_k` or `#G_k` in the exact form `factor * base^exponent`.
#[derive(Clone, Debug, Serialize)]
pub struct PowerCount {
    #[serde(serialize_with = "ser_big")]
    pub factor: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub base: BigUint,
    #[serde(serialize_with = "ser_u64_str")]
    pub exponent: u64,
    pub log2: f64,
}

fn ser_u64_str<S: Serializer>(v: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl PowerCount {
    fn new(factor: BigUint, base: BigUint, exponent: u64) -> Self {
        let log2 = log2_big(&factor) + exponent as f64 * log2_big(&base);
        PowerCount { factor, base, exponent, log2 }
    }

    /// The value as a big integer; refuses results above `max_bits`.
    pub fn to_biguint(&self, max_bits: u64) -> Result<BigUint> {
        if self.log2 > max_bits as f64 {
            return Err(Error::BudgetExceeded(format!("count has about {:.0} bits", self.log2)));
        }
        let e = u32::try_from(self.exponent).map_err(|_| Error::BudgetExceeded("exponent".into()))?;
        Ok(&self.factor * self.base.pow(e))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSet {
    pub k: usize,
    pub d_count: PowerCount,
    pub g_count: PowerCount,
    /// Members of `G_k` (exhaustive mode) or the sampled branch word (sample mode).
    pub words: Vec<Word>,
}

#[derive(Clone, Copy, Debug)]
pub enum LevelMode {
    CountsOnly,
    Sample(u64),
    Exhaustive { budget: usize },
}

/// Exact counts `#D_k = #MM^{t_{k-1}}` (`#D_1 = 1`, the block `u` being fixed) and
/// `#G_k = prod #D_i`, plus words per mode.
pub fn build_levels(plan: &CantorPlan, k_max: usize, mode: LevelMode) -> Result<Vec<LevelSet>> {
    if k_max == 0 || k_max > plan.levels() {
        return Err(Error::InvalidParameter(format!("k_max must lie in 1..={}", plan.levels())));
    }
    let base = plan.blocks.count.clone();
    let mut out = Vec::with_capacity(k_max);
    let mut g_exp = 0u64;
    let sample = match mode {
        LevelMode::Sample(seed) => Some(sample_digits(plan, seed, plan.m_seq[k_max - 1] as usize)?),
        _ => None,
    };
    let mut current: Vec<Vec<u8>> = Vec::new();
    for k in 1..=k_max {
        let d_exp = if k == 1 { 0 } else { plan.t[k - 2] };
        g_exp += d_exp;
        let d_count = PowerCount::new(BigUint::one(), base.clone(), d_exp);
        let g_count = PowerCount::new(BigUint::one(), base.clone(), g_exp);
        let words = match mode {
            LevelMode::CountsOnly => Vec::new(),
            LevelMode::Sample(_) => vec![Word::from(&sample.as_ref().unwrap()[..plan.m_seq[k - 1] as usize])],
            LevelMode::Exhaustive { budget } => {
                if g_count.log2 > (budget as f64).log2() {
                    return Err(Error::BudgetExceeded(format!("level {k} has more than {budget} words")));
                }
                current = if k == 1 {
                    vec![plan.level_word(1, &plan.first_block())?]
                } else {
                    let members = plan.blocks.enumerate(budget)?;
                    let t = plan.t[k - 2] as usize;
                    let mut next = Vec::new();
                    for prev in &current {
                        let mut idx = vec![0usize; t];
                        loop {
                            let chosen: Vec<Word> = idx.iter().map(|&i| members[i].clone()).collect();
                            let mut w = prev.clone();
                            w.extend(plan.v_word(k - 1, &chosen));
                            next.push(plan.level_word(k, &w)?);
                            // odometer over the t block choices
                            let mut j = 0;
                            while j < t {
                                idx[j] += 1;
                                if idx[j] < members.len() {
                                    break;
                                }
                                idx[j] = 0;
                                j += 1;
                            }
                            if j == t {
                                break;
                            }
                        }
                    }
                    next
                };
                current.iter().cloned().map(Word).collect()
            }
        };
        out.push(LevelSet { k, d_count, g_count, words });
    }
    Ok(out)
}

/// Digits of a point of `E_N`, blocks of every `v_k` drawn independently and uniformly.
pub fn sample_digits(plan: &CantorPlan, seed: u64, depth: usize) -> Result<Vec<u8>> {
    let last = *plan.m_seq.last().unwrap() as usize;
    if depth > last {
        return Err(Error::InsufficientDepth { needed: depth, available: last });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut digits = plan.level_word(1, &plan.first_block())?;
    let mut k = 1;
    while digits.len() < depth {
        let blocks: Vec<Word> = (0..plan.t[k - 1]).map(|_| plan.blocks.sample(&mut rng)).collect();
        let mut w = digits;
        w.extend(plan.v_word(k, &blocks));
        k += 1;
        digits = plan.level_word(k, &w)?;
    }
    digits.truncate(depth);
    Ok(digits)
}

pub fn sample_point(plan: &CantorPlan, seed: u64, depth: usize) -> Result<OrbitView> {
    Ok(OrbitView::from_digits(&plan.ctx, sample_digits(plan, seed, depth)?))
}

/// `mu(I_n(w))` exactly; zero when `w` leaves the construction tree.
pub fn measure(plan: &CantorPlan, w: &[u8]) -> Result<BigRational> {
    let zero = BigRational::zero();
    if w.is_empty() {
        return Ok(BigRational::one());
    }
    let top = plan.levels();
    if w.len() as u64 > plan.m_seq[top - 1] {
        return Err(Error::InvalidParameter("prefix longer than the planned levels".into()));
    }
    let k = plan.m_seq.iter().position(|&m| m >= w.len() as u64).unwrap() + 1;
    let mm = plan.big_m;
    let mut blocks: HashMap<(usize, u64), Vec<Option<u8>>> = HashMap::new();
    for (i, &d) in w.iter().enumerate() {
        match plan.source(k, i as u64) {
            Source::Zero if d != 0 => return Ok(zero),
            Source::Zero => {}
            Source::U(o) if plan.u[o] != d => return Ok(zero),
            Source::U(_) => {}
            Source::Block { level, index, offset } => {
                let c = blocks.entry((level, index)).or_insert_with(|| vec![None; mm]);
                match c[offset] {
                    Some(e) if e != d => return Ok(zero),
                    _ => c[offset] = Some(d),
                }
            }
        }
    }
    let total = BigInt::from(plan.blocks.count.clone());
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for c in blocks.values() {
        let hits = plan.blocks.count_matching(c);
        if hits.is_zero() {
            return Ok(zero);
        }
        num *= BigInt::from(hits);
        den *= &total;
        let g = num.gcd(&den);
        num /= &g;
        den /= &g;
    }
    Ok(BigRational::new(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{is_admissible, is_full};

    fn two() -> BetaContext {
        BetaContext::from_integer(2).unwrap()
    }

    #[test]
    fn geometric_sequences() {
        let (n, m) = plan_sequences(0.2, 1.0, 6).unwrap();
        assert_eq!(n, vec![5, 25, 125, 625, 3125, 15625]);
        assert_eq!(m, vec![10, 50, 250, 1250, 6250, 31250]);
        for k in 0..5 {
            assert_eq!(5 * (m[k] - n[k]), n[k + 1]);
        }
        let (n, m) = plan_sequences(0.0, 1.0, 5).unwrap();
        assert_eq!(n, vec![1, 4, 27, 256, 3125]);
        assert_eq!(m, vec![2, 8, 54, 512, 6250]);
        assert!(matches!(plan_sequences(0.6, 1.0, 5), Err(Error::CountableRegime { .. })));
    }

    #[test]
    fn adjusted_sequences_interleave() {
        for &(rh, r) in &[(0.2, 1.0), (1.0 / 3.0, 0.5), (0.0, 0.5), (0.1, 3.0), (0.45, 0.9)] {
            let (n, m) = plan_sequences(rh, r, 12).unwrap();
            for k in 0..12 {
                assert!(n[k] < m[k]);
                if k + 1 < 12 {
                    assert!(m[k] < n[k + 1], "({rh}, {r}) k={k}");
                    assert!(m[k + 1] - n[k + 1] >= m[k] - n[k]);
                }
            }
        }
    }

    #[test]
    fn nm_search() {
        let c = choose_n_m(&two(), 0.5).unwrap();
        assert!(c.margin > 0.0);
        assert!(c.m <= 12, "{}", c.m);
        // direct arithmetic check of the inequality with the exact count
        let lhs = c.count.to_f64().unwrap() / c.m as f64 - c.m as f64 - 1.0;
        assert!(lhs >= 2f64.powf(c.m as f64 * 0.5));
        let g = choose_n_m(&BetaContext::golden(), 0.3).unwrap();
        assert!(g.m <= 64 && g.margin > 0.0);
    }

    #[test]
    fn padding() {
        assert_eq!(pad(&[1, 0, 1], 3, 5).unwrap(), Word::zeros(3));
        let w = [1, 0, 1, 0, 0, 1, 1, 0];
        assert_eq!(pad(&w, 8, 5).unwrap(), Word(vec![1, 0, 1, 0, 0, 0, 0, 0]));
        assert_eq!(pad(&w, 0, 5).unwrap(), Word::empty());
        assert!(pad(&[1], 9, 5).is_err());
    }

    #[test]
    fn rotations_cycle() {
        let w = [1, 2, 3, 4];
        assert_eq!(rotation(&w, 1), Word(vec![4, 1, 2, 3]));
        assert_eq!(rotation(&w, 4), Word(w.to_vec()));
    }

    #[test]
    fn block_set_filters() {
        let ctx_n = approximate_beta(&BetaContext::from_decimal("2.5").unwrap(), 2).unwrap();
        let b = BetaContext::from_decimal("2.5").unwrap();
        let space = BlockSpace::new(&b, &ctx_n, 5).unwrap();
        let all = space.enumerate(1 << 20).unwrap();
        assert_eq!(BigUint::from(all.len()), space.total());
        for w in &all {
            assert!(is_admissible(w, &ctx_n).unwrap());
            assert!(is_full(w, &b).unwrap());
        }
        let u = all.iter().find(|w| w.iter().any(|&d| d > 0)).unwrap().clone();
        let m = m_set(&b, &ctx_n, &u).unwrap();
        for i in 1..=5 {
            assert!(!m.contains(&rotation(&u, i)));
        }
        assert_eq!(BigUint::from(m.enumerate(1 << 20).unwrap().len()), *m.count());
        let c = vec![Some(1), None, None, Some(0), None];
        let direct = m.enumerate(1 << 20).unwrap().iter().filter(|w| w[0] == 1 && w[3] == 0).count();
        assert_eq!(m.count_matching(&c), BigUint::from(direct));
    }

    fn small_plan() -> CantorPlan {
        CantorPlan::new(&two(), 0.2, 1.0, 0.5, 4).unwrap()
    }

    #[test]
    fn plan_invariants() {
        let plan = small_plan();
        assert!(plan.n_seq[0] > 2 * plan.big_m as u64);
        for k in 0..plan.levels() {
            assert_eq!(plan.ell[k] * plan.n_seq[k] + plan.p[k], plan.m_seq[k]);
            if k + 1 < plan.levels() {
                assert_eq!(plan.t[k] * plan.big_m as u64 + plan.q[k], plan.n_seq[k + 1] - plan.m_seq[k]);
            }
        }
        let json = serde_json::to_value(&plan).unwrap();
        assert!(json["n_seq"][0].is_string());
    }

    #[test]
    fn sampled_points_are_nested_and_admissible() {
        let plan = small_plan();
        let depth = plan.m_seq[2] as usize;
        let x = sample_digits(&plan, 7, depth).unwrap();
        assert!(is_admissible(&x, plan.ctx()).unwrap());
        let y = sample_digits(&plan, 7, depth).unwrap();
        assert_eq!(x, y);
        let levels = build_levels(&plan, 3, LevelMode::Sample(7)).unwrap();
        for l in &levels {
            assert_eq!(&l.words[0][..], &x[..plan.m_seq[l.k - 1] as usize]);
        }
        // the source map reproduces the sampled digits on the first level
        for i in 0..plan.m_seq[0] {
            match plan.source(1, i) {
                Source::Zero => assert_eq!(x[i as usize], 0),
                Source::U(o) => assert_eq!(x[i as usize], plan.u[o]),
                Source::Block { .. } => unreachable!(),
            }
        }
    }

    #[test]
    fn measure_at_level_boundaries() {
        let plan = small_plan();
        let x = sample_digits(&plan, 3, plan.m_seq[2] as usize).unwrap();
        let counts = build_levels(&plan, 3, LevelMode::CountsOnly).unwrap();
        assert_eq!(measure(&plan, &[]).unwrap(), BigRational::one());
        assert_eq!(measure(&plan, &x[..plan.m_seq[0] as usize]).unwrap(), BigRational::one());
        for k in 2..=3 {
            let g = counts[k - 1].g_count.to_biguint(1 << 16).unwrap();
            let mu = measure(&plan, &x[..plan.m_seq[k - 1] as usize]).unwrap();
            assert_eq!(mu, BigRational::new(BigInt::one(), BigInt::from(g)));
        }
    }

    #[test]
    fn measure_is_additive() {
        let plan = small_plan();
        let x = sample_digits(&plan, 11, plan.m_seq[1] as usize).unwrap();
        let start = plan.m_seq[0] as usize;
        for n in start..start + 2 * plan.big_m {
            let parent = measure(&plan, &x[..n]).unwrap();
            let mut sum = BigRational::zero();
            for d in 0..=plan.ctx().alphabet_max() {
                let mut w = x[..n].to_vec();
                w.push(d);
                sum += measure(&plan, &w).unwrap();
            }
            assert_eq!(parent, sum, "n = {n}");
        }
    }

    #[test]
    fn exhaustive_levels_match_counts() {
        let b = BetaContext::golden();
        let plan = CantorPlan::new(&b, 0.2, 1.0, 0.9, 2).unwrap();
        let budget = 1 << 16;
        match build_levels(&plan, 2, LevelMode::Exhaustive { budget }) {
            Ok(levels) => {
                for l in &levels {
                    assert_eq!(BigUint::from(l.words.len()), l.g_count.to_biguint(64).unwrap());
                    for w in &l.words {
                        assert!(is_admissible(w, &b).unwrap());
                    }
                }
            }
            Err(Error::BudgetExceeded(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
}
