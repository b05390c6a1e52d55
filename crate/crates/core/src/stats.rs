//! One-sided tests on the error-difference vector and the nested-model F-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal};

use crate::error::{Error, Result};

/// Largest sample (after dropping zeros) for which the signed-rank null
/// distribution is computed exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// `|E_r| - |E_u|` per test point; positive entries favour the unrestricted model.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector(Vec<f64>);

impl DeltaVector {
    pub fn new(delta: Vec<f64>) -> Self {
        Self(delta)
    }

    pub fn from_abs_errors(restricted: &[f64], unrestricted: &[f64]) -> Result<Self> {
        if restricted.len() != unrestricted.len() {
            return Err(Error::DimensionMismatch { expected: restricted.len(), got: unrestricted.len() });
        }
        Ok(Self(restricted.iter().zip(unrestricted).map(|(r, u)| r.abs() - u.abs()).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn nonzero(&self) -> Vec<f64> {
        self.0.iter().copied().filter(|&d| d != 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Sign,
    Wilcoxon,
    FTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub p_value: f64,
    pub statistic: f64,
    /// Samples left after dropping exact zeros (sign/Wilcoxon) or the
    /// observation count (F-test).
    pub n_effective: usize,
    pub method: TestMethod,
}

/// `P[X >= k]` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if n <= 62 {
        // exact integer count, a single rounding at the end
        let mut choose = 1u64;
        let mut hits = 0u64;
        for j in 0..=n {
            if j >= k {
                hits += choose;
            }
            choose = (choose as u128 * (n - j) as u128 / (j + 1) as u128) as u64;
        }
        return hits as f64 / (1u64 << n) as f64;
    }
    let ln2n = n as f64 * std::f64::consts::LN_2;
    // ln C(n, j) for j = 0..=n
    let mut ln_choose = vec![0.0; n + 1];
    for j in 1..=n {
        ln_choose[j] = ln_choose[j - 1] + ((n - j + 1) as f64).ln() - (j as f64).ln();
    }
    let term = |j: usize| (ln_choose[j] - ln2n).exp();
    if 2 * k >= n {
        // upper tail; terms grow toward k, so add from the far end
        (k..=n).rev().map(term).sum::<f64>().min(1.0)
    } else {
        let lower: f64 = (0..k).map(term).sum();
        (1.0 - lower).clamp(0.0, 1.0)
    }
}

/// Exact one-sided sign test: `p = P[Binomial(n, 1/2) >= n_plus]` over the
/// nonzero entries. The statistic is `n_plus`.
pub fn sign_test(delta: &DeltaVector) -> Result<TestOutcome> {
    let nz = delta.nonzero();
    if nz.is_empty() {
        return Err(Error::Undecidable(delta.0.len()));
    }
    let n_plus = nz.iter().filter(|&&d| d > 0.0).count();
    Ok(TestOutcome {
        p_value: binomial_upper_tail(nz.len(), n_plus),
        statistic: n_plus as f64,
        n_effective: nz.len(),
        method: TestMethod::Sign,
    })
}

/// Ranks of `|values|`, 1-based, with tied magnitudes sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]].abs() == values[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// One-sided Wilcoxon signed-rank test with statistic `T = sum sgn(d_i) R_i`.
///
/// Zeros are dropped and tied magnitudes get average ranks. Up to
/// [`WILCOXON_EXACT_MAX_N`] samples the tail `P[T >= t]` is exact under
/// random sign flips; above that a continuity-corrected normal
/// approximation is used.
pub fn wilcoxon_signed_rank(delta: &DeltaVector) -> Result<TestOutcome> {
    let nz = delta.nonzero();
    if nz.is_empty() {
        return Err(Error::Undecidable(delta.0.len()));
    }
    let ranks = average_ranks(&nz);
    let t: f64 = nz.iter().zip(&ranks).map(|(d, r)| d.signum() * r).sum();
    let p_value = if nz.len() <= WILCOXON_EXACT_MAX_N { wilcoxon_exact_tail(&nz, &ranks) } else { wilcoxon_normal_tail(t, &ranks) };
    Ok(TestOutcome { p_value, statistic: t, n_effective: nz.len(), method: TestMethod::Wilcoxon })
}

/// Exact `P[T >= t_obs]` by counting subsets of (doubled, hence integer) ranks.
fn wilcoxon_exact_tail(nz: &[f64], ranks: &[f64]) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let observed: usize = nz.iter().zip(&doubled).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let hits: u64 = counts[observed..].iter().sum();
    hits as f64 / (1u64 << nz.len()) as f64
}

fn wilcoxon_normal_tail(t: f64, ranks: &[f64]) -> f64 {
    let sd = ranks.iter().map(|r| r * r).sum::<f64>().sqrt();
    let z = (t - 1.0) / sd;
    let normal = Normal::standard();
    normal.sf(z).clamp(0.0, 1.0)
}

/// Exposes the normal approximation for any sample size, for calibration checks.
pub fn wilcoxon_signed_rank_normal(delta: &DeltaVector) -> Result<TestOutcome> {
    let nz = delta.nonzero();
    if nz.is_empty() {
        return Err(Error::Undecidable(delta.0.len()));
    }
    let ranks = average_ranks(&nz);
    let t: f64 = nz.iter().zip(&ranks).map(|(d, r)| d.signum() * r).sum();
    Ok(TestOutcome { p_value: wilcoxon_normal_tail(t, &ranks), statistic: t, n_effective: nz.len(), method: TestMethod::Wilcoxon })
}

/// Nested-model F-test, `F = ((rss_r - rss_u) / df_num) / (rss_u / df_den)`.
/// A negative improvement clamps `F` to 0 (p = 1).
pub fn nested_f_test(rss_r: f64, rss_u: f64, df_num: usize, df_den: usize, n_obs: usize) -> Result<TestOutcome> {
    if df_den == 0 {
        return Err(Error::InsufficientData("non-positive denominator degrees of freedom".into()));
    }
    if df_num == 0 {
        return Err(Error::InvalidParameter("numerator degrees of freedom must be positive".into()));
    }
    if !(rss_u > 0.0) || !(rss_r >= 0.0) {
        return Err(Error::InvalidParameter(format!("invalid residual sums: rss_r={rss_r}, rss_u={rss_u}")));
    }
    let f = ((rss_r - rss_u) / df_num as f64) / (rss_u / df_den as f64);
    let (statistic, p_value) = if f <= 0.0 {
        (0.0, 1.0)
    } else {
        let dist = FisherSnedecor::new(df_num as f64, df_den as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        (f, dist.sf(f).clamp(0.0, 1.0))
    };
    Ok(TestOutcome { p_value, statistic, n_effective: n_obs, method: TestMethod::FTest })
}

/// Two-series Granger F-test with `(L, N - 2L - 1)` degrees of freedom.
pub fn granger_f_test(rss_r: f64, rss_u: f64, lags: usize, n: usize) -> Result<TestOutcome> {
    let used = 2 * lags + 1;
    if n <= used {
        return Err(Error::InsufficientData(format!("denominator degrees of freedom N - 2L - 1 = {} - {used} is not positive", n)));
    }
    nested_f_test(rss_r, rss_u, lags, n - used, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force tail over all 2^n sign patterns.
    fn enumerate_sign_tail(n: usize, n_plus: usize) -> f64 {
        let hits = (0u32..(1 << n)).filter(|m| m.count_ones() as usize >= n_plus).count();
        hits as f64 / (1u64 << n) as f64
    }

    fn enumerate_wilcoxon_tail(ranks: &[f64], t_obs: f64) -> f64 {
        let n = ranks.len();
        let mut hits = 0u64;
        for m in 0u64..(1 << n) {
            let t: f64 = ranks.iter().enumerate().map(|(i, r)| if m >> i & 1 == 1 { *r } else { -r }).sum();
            if t >= t_obs - 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn sign_examples() {
        let p = sign_test(&DeltaVector::new(vec![1.0; 5])).unwrap();
        assert_eq!(p.p_value, 1.0 / 32.0);
        assert_eq!(p.statistic, 5.0);
        let p = sign_test(&DeltaVector::new(vec![1.0, 1.0, 1.0, -1.0])).unwrap();
        assert!((p.p_value - 5.0 / 16.0).abs() < 1e-15);
        assert!(matches!(sign_test(&DeltaVector::new(vec![0.0; 3])), Err(Error::Undecidable(3))));
        let p = sign_test(&DeltaVector::new(vec![0.0, 2.0, -1.0, 0.0, 3.0])).unwrap();
        assert_eq!(p.n_effective, 3);
    }

    #[test]
    fn sign_matches_enumeration() {
        for n in 1..=20 {
            for k in 0..=n {
                let exact = enumerate_sign_tail(n, k);
                assert!((binomial_upper_tail(n, k) - exact).abs() < 1e-12, "n={n} k={k}");
            }
            let mut last = f64::INFINITY;
            for k in 0..=n {
                let p = binomial_upper_tail(n, k);
                assert!(p <= last);
                last = p;
            }
        }
    }

    #[test]
    fn sign_large_n_is_sane() {
        assert!((binomial_upper_tail(1000, 500) - 0.512_612_509_089_4).abs() < 1e-9);
        assert!(binomial_upper_tail(2000, 2000) > 0.0 || binomial_upper_tail(2000, 2000) == 0.0);
        assert!(binomial_upper_tail(5000, 2600) < 0.01);
    }

    #[test]
    fn wilcoxon_examples() {
        let r = wilcoxon_signed_rank(&DeltaVector::new(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!((r.statistic, r.p_value), (6.0, 0.125));
        let r = wilcoxon_signed_rank(&DeltaVector::new(vec![-1.0, 2.0])).unwrap();
        assert_eq!((r.statistic, r.p_value), (1.0, 0.5));
        let r = wilcoxon_signed_rank(&DeltaVector::new(vec![-5.0])).unwrap();
        assert_eq!((r.statistic, r.p_value), (-1.0, 1.0));
        assert!(wilcoxon_signed_rank(&DeltaVector::new(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[3.0, -1.0, 1.0, 2.0]), vec![4.0, 1.5, 1.5, 3.0]);
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as f64 / (1u64 << 31) as f64
        };
        for n in 1..=12 {
            for _ in 0..20 {
                // coarse grid so ties occur
                let d: Vec<f64> = (0..n).map(|_| ((next() * 8.0).floor() - 3.5) * 0.5).collect();
                let dv = DeltaVector::new(d.clone());
                let r = wilcoxon_signed_rank(&dv).unwrap();
                let nz: Vec<f64> = d.into_iter().filter(|v| *v != 0.0).collect();
                let ranks = average_ranks(&nz);
                let oracle = enumerate_wilcoxon_tail(&ranks, r.statistic);
                assert!((r.p_value - oracle).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn wilcoxon_normal_close_to_exact_at_20_to_25() {
        for n in 20..=25 {
            let ranks: Vec<f64> = (1..=n).map(|r| r as f64).collect();
            let total: f64 = ranks.iter().sum();
            // sweep every attainable statistic via the set of positive-rank sums
            let mut worst: f64 = 0.0;
            let mut w = 0;
            while (w as f64) <= total {
                let t = 2.0 * w as f64 - total;
                // build a sign pattern with positive-rank sum w (greedy from the top)
                let mut rem = w;
                let d: Vec<f64> = ranks
                    .iter()
                    .rev()
                    .map(|&r| {
                        let r = r as usize;
                        if r <= rem {
                            rem -= r;
                            r as f64
                        } else {
                            -(r as f64)
                        }
                    })
                    .collect();
                assert_eq!(rem, 0);
                let dv = DeltaVector::new(d);
                let approx = wilcoxon_signed_rank_normal(&dv).unwrap();
                assert_eq!(approx.statistic, t);
                let exact = wilcoxon_exact_tail(dv.as_slice(), &average_ranks(dv.as_slice()));
                worst = worst.max((approx.p_value - exact).abs());
                w += 7;
            }
            assert!(worst < 0.01, "n={n} worst={worst}");
        }
    }

    /// Upper tail of F(1, 9) at 9 equals P(|t_9| > 3); integrate the t density.
    fn t9_two_sided_tail(x: f64) -> f64 {
        let nu = 9.0f64;
        // Gamma(5)/(sqrt(9 pi) Gamma(4.5)), Gamma(4.5) = 105 sqrt(pi) / 16
        let c = 24.0 / ((nu * std::f64::consts::PI).sqrt() * 105.0 * std::f64::consts::PI.sqrt() / 16.0);
        let pdf = |t: f64| c * (1.0 + t * t / nu).powf(-(nu + 1.0) / 2.0);
        let (a, b, m) = (x, 400.0, 400_000);
        let h = (b - a) / m as f64;
        let mut s = pdf(a) + pdf(b);
        for i in 1..m {
            s += pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        2.0 * s * h / 3.0
    }

    #[test]
    fn f_test_examples() {
        let r = granger_f_test(1.0, 1.0, 2, 20).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = granger_f_test(2.0, 1.0, 1, 12).unwrap();
        assert!((r.statistic - 9.0).abs() < 1e-12);
        let oracle = t9_two_sided_tail(3.0);
        assert!((r.p_value - oracle).abs() < 1e-8, "{} vs {oracle}", r.p_value);
        assert!((r.p_value - 0.0150).abs() < 5e-5);
        assert!(granger_f_test(2.0, 1.0, 1, 3).is_err());
        assert!(granger_f_test(2.0, 0.0, 1, 12).is_err());
        let r = granger_f_test(0.5, 1.0, 1, 12).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    proptest! {
        #[test]
        fn sign_p_in_unit_interval(d in proptest::collection::vec(-5.0f64..5.0, 1..300)) {
            if let Ok(r) = sign_test(&DeltaVector::new(d.clone())) {
                prop_assert!((0.0..=1.0).contains(&r.p_value));
            }
            if let Ok(r) = wilcoxon_signed_rank(&DeltaVector::new(d)) {
                prop_assert!((0.0..=1.0).contains(&r.p_value));
            }
        }
    }
}
