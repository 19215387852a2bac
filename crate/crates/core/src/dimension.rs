//! Closed-form dimension values, the combinatorial local-dimension series of the Cantor
//! construction, and an empirical box-counting estimator.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cantor::{build_levels, CantorPlan, LevelMode};
use crate::expansion::BetaContext;
use crate::recurrence::{Exponent, OrbitView};
use crate::{Error, Result};

/// A dimension value; `countable` marks parameters where the set is at most countable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DimValue {
    pub value: f64,
    pub countable: bool,
}

impl DimValue {
    fn of(value: f64) -> Self {
        DimValue { value, countable: false }
    }
}

/// `(r - (1 + r) r_hat) / ((1 + r)(r - r_hat))`. `r = inf` is accepted as the limit value 0.
pub fn dim_r(r_hat: f64, r: f64) -> Result<DimValue> {
    if r_hat.is_nan() || r.is_nan() || r_hat < 0.0 || r < 0.0 {
        return Err(Error::InvalidParameter(format!("dimension needs r_hat, r >= 0, got ({r_hat}, {r})")));
    }
    if r == f64::INFINITY {
        return Ok(DimValue::of(0.0));
    }
    if r_hat.is_infinite() {
        return Ok(DimValue { value: 0.0, countable: true });
    }
    if r == 0.0 {
        // only r_hat = 0 is possible: the set of points with both exponents zero has full measure
        return Ok(if r_hat == 0.0 { DimValue::of(1.0) } else { DimValue { value: 0.0, countable: true } });
    }
    let bound = r / (1.0 + r);
    if r_hat > bound * (1.0 + 1e-12) {
        return Ok(DimValue { value: 0.0, countable: true });
    }
    let v = (r - (1.0 + r) * r_hat) / ((1.0 + r) * (r - r_hat));
    Ok(DimValue::of(v.max(0.0)))
}

/// `((1 - r_hat) / (1 + r_hat))^2`; countable beyond `r_hat = 1`.
pub fn dim_uniform(r_hat: f64) -> Result<DimValue> {
    if r_hat.is_nan() || r_hat < 0.0 {
        return Err(Error::InvalidParameter(format!("r_hat must be non-negative, got {r_hat}")));
    }
    if r_hat > 1.0 {
        return Ok(DimValue { value: 0.0, countable: true });
    }
    let q = (1.0 - r_hat) / (1.0 + r_hat);
    Ok(DimValue::of(q * q))
}

/// The `r` maximizing `dim_r(r_hat, .)`: `2 r_hat / (1 - r_hat)`.
pub fn maximizer(r_hat: f64) -> Result<Exponent> {
    if !(r_hat > 0.0 && r_hat <= 1.0) {
        return Err(Error::InvalidParameter(format!("maximizer needs 0 < r_hat <= 1, got {r_hat}")));
    }
    if r_hat == 1.0 {
        return Ok(Exponent::Infinite);
    }
    Ok(Exponent::Finite(2.0 * r_hat / (1.0 - r_hat)))
}

/// `sum_{j=1}^{k-1} (n_{j+1} - m_j) / m_k` exactly (`k` 1-based).
pub fn series_value(n_seq: &[u64], m_seq: &[u64], k: usize) -> Result<BigRational> {
    if k == 0 || k > n_seq.len() || k > m_seq.len() {
        return Err(Error::InvalidParameter(format!("k must lie in 1..={}", n_seq.len().min(m_seq.len()))));
    }
    let mut num = BigInt::zero();
    for j in 1..k {
        num += BigInt::from(n_seq[j]) - BigInt::from(m_seq[j - 1]);
    }
    Ok(BigRational::new(num, BigInt::from(m_seq[k - 1])))
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesPoint {
    pub k: usize,
    /// Exact fraction as `num/den`.
    pub exact: String,
    pub value: f64,
}

/// `log mu(I_{m_k}) / log |I_{m_k}|` bracketed by the cylinder-length bounds
/// `beta^-(m_k + N) <= |I_{m_k}| <= beta^-m_k`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MuRatio {
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitCheck {
    pub k: usize,
    /// `n_k / m_k`, tending to `1/(1+r)`.
    pub n_over_m: f64,
    /// `m_k / m_{k-1}`, tending to `r/r_hat`.
    pub m_growth: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DimReport {
    pub formula_value: DimValue,
    pub delta: f64,
    pub series_values: Vec<SeriesPoint>,
    pub mu_log_ratios: Vec<MuRatio>,
    pub limits: Vec<LimitCheck>,
    pub boxcount_slope: Option<BoxCount>,
}

/// Exact series and measure log-ratios of a plan for `k = 1..=k_max`.
pub fn local_dimension_series(plan: &CantorPlan, k_max: usize) -> Result<DimReport> {
    if k_max < 1 || k_max > plan.levels() {
        return Err(Error::InvalidParameter(format!("k_max must lie in 1..={}", plan.levels())));
    }
    let formula_value = dim_r(plan.r_hat, plan.r)?;
    let mut series_values = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let q = series_value(&plan.n_seq, &plan.m_seq, k)?;
        series_values.push(SeriesPoint { k, exact: q.to_string(), value: q.to_f64().unwrap_or(f64::NAN) });
    }
    let levels = build_levels(plan, k_max, LevelMode::CountsOnly)?;
    let lb = plan.ctx().log2_beta();
    let mu_log_ratios = levels
        .iter()
        .map(|l| {
            let m = plan.m_seq[l.k - 1] as f64;
            let g = l.g_count.log2;
            MuRatio { k: l.k, lo: g / ((m + plan.big_n as f64) * lb), hi: g / (m * lb) }
        })
        .collect();
    let limits = (1..=k_max)
        .map(|k| LimitCheck {
            k,
            n_over_m: plan.n_seq[k - 1] as f64 / plan.m_seq[k - 1] as f64,
            m_growth: (k > 1).then(|| plan.m_seq[k - 1] as f64 / plan.m_seq[k - 2] as f64),
        })
        .collect();
    Ok(DimReport { formula_value, delta: plan.delta, series_values, mu_log_ratios, limits, boxcount_slope: None })
}

/// Least-squares slope of `ln(#distinct order-n prefixes)` against `n ln(beta)`.
#[derive(Clone, Debug, Serialize)]
pub struct BoxCount {
    pub slope: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `(n, ln count)` pairs.
    pub pairs: Vec<(usize, f64)>,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn distinct_counts(points: &[&[u8]], ns: &[usize]) -> Vec<f64> {
    ns.iter()
        .map(|&n| {
            let set: HashSet<&[u8]> = points.iter().map(|p| &p[..n]).collect();
            (set.len() as f64).ln()
        })
        .collect()
}

/// Box-counting slope over `n_range` with a percentile bootstrap interval
/// (`resamples` resamples of the points, 95%).
pub fn boxcount(
    points: &mut [OrbitView],
    ctx: &BetaContext,
    n_range: std::ops::RangeInclusive<usize>,
    resamples: usize,
    seed: u64,
) -> Result<BoxCount> {
    let ns: Vec<usize> = n_range.collect();
    if ns.len() < 2 {
        return Err(Error::InvalidParameter("n_range needs at least two scales".into()));
    }
    let depth = *ns.iter().max().unwrap();
    for p in points.iter_mut() {
        if !p.ensure(depth)? {
            return Err(Error::InsufficientDepth { needed: depth, available: p.depth() });
        }
    }
    let digits: Vec<&[u8]> = points.iter().map(|p| &p.digits()[..depth]).collect();
    if digits.is_empty() {
        return Err(Error::InvalidParameter("no points".into()));
    }
    let lb = ctx.beta_f64().ln();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64 * lb).collect();
    let ys = distinct_counts(&digits, &ns);
    let slope = ls_slope(&xs, &ys);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let sample: Vec<&[u8]> = (0..digits.len()).map(|_| digits[rng.gen_range(0..digits.len())]).collect();
        boot.push(ls_slope(&xs, &distinct_counts(&sample, &ns)));
    }
    boot.sort_by(|a, b| a.total_cmp(b));
    let (ci_lo, ci_hi) = if boot.is_empty() {
        (slope, slope)
    } else {
        let at = |q: f64| boot[((boot.len() - 1) as f64 * q).round() as usize];
        (at(0.025), at(0.975))
    };
    Ok(BoxCount { slope, ci_lo, ci_hi, pairs: ns.iter().copied().zip(ys).collect() })
}

/// `(n, ln count)` rows as CSV.
pub fn boxcount_csv(b: &BoxCount) -> String {
    let mut s = String::from("n,ln_count\n");
    for (n, y) in &b.pairs {
        s.push_str(&format!("{n},{y}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn formula_examples() {
        assert!((dim_r(1.0 / 3.0, 2.0).unwrap().value - 0.2).abs() < 1e-15);
        assert!((dim_r(0.2, 1.0).unwrap().value - 0.375).abs() < 1e-15);
        assert_eq!(dim_r(0.5, 1.0).unwrap().value, 0.0);
        assert!(dim_r(0.6, 1.0).unwrap().countable);
        assert_eq!(dim_r(0.3, f64::INFINITY).unwrap().value, 0.0);
        for r in [0.1, 1.0, 7.5] {
            assert!((dim_r(0.0, r).unwrap().value - 1.0 / (1.0 + r)).abs() < 1e-15);
        }
        assert_eq!(dim_uniform(0.0).unwrap().value, 1.0);
        assert_eq!(dim_uniform(1.0).unwrap().value, 0.0);
        assert!((dim_uniform(1.0 / 3.0).unwrap().value - 0.25).abs() < 1e-15);
        assert!(dim_uniform(2.0).unwrap().countable);
        assert!(dim_r(-0.1, 1.0).is_err());
    }

    #[test]
    fn maximizer_is_the_argmax() {
        assert_eq!(maximizer(1.0).unwrap(), Exponent::Infinite);
        for &rh in &[0.05, 1.0 / 3.0, 0.5, 0.8] {
            let Exponent::Finite(star) = maximizer(rh).unwrap() else { panic!() };
            let at_star = dim_r(rh, star).unwrap().value;
            assert!((at_star - dim_uniform(rh).unwrap().value).abs() < 1e-12);
            // grid oracle over the admissible region r >= r_hat / (1 - r_hat)
            let lo = rh / (1.0 - rh);
            let best = (0..20000)
                .map(|i| lo + i as f64 * 1e-3 * (1.0 + star))
                .map(|r| dim_r(rh, r).unwrap().value)
                .fold(0.0, f64::max);
            assert!(best <= at_star + 1e-12);
        }
    }

    #[test]
    fn geometric_series_limit() {
        let n: Vec<u64> = (1..=20).map(|k| 5u64.pow(k)).collect();
        let m: Vec<u64> = n.iter().map(|x| 2 * x).collect();
        let s = series_value(&n, &m, 20).unwrap();
        // closed form 3/8 (1 - 5^-19)
        let five19 = BigInt::from(5).pow(19);
        let expect = BigRational::new(BigInt::from(3) * (&five19 - 1), BigInt::from(8) * five19);
        assert_eq!(s, expect);
        assert!((s.to_f64().unwrap() - 0.375).abs() < 1e-3);
    }

    #[test]
    fn boxcount_degenerate_and_uniform() {
        let two = BetaContext::from_integer(2).unwrap();
        let mut one = vec![OrbitView::from_digits(&two, vec![1, 0, 1, 1, 0, 0, 1, 0])];
        let b = boxcount(&mut one, &two, 1..=8, 10, 0).unwrap();
        assert!(b.slope.abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts: Vec<OrbitView> =
            (0..2000).map(|_| OrbitView::from_digits(&two, (0..12).map(|_| rng.gen_range(0..2)).collect())).collect();
        let b = boxcount(&mut pts, &two, 1..=6, 50, 1).unwrap();
        assert!((b.slope - 1.0).abs() < 0.05, "{}", b.slope);
        assert!(b.ci_lo <= b.slope && b.slope <= b.ci_hi);
        assert!(boxcount_csv(&b).starts_with("n,ln_count\n1,"));
    }
}
