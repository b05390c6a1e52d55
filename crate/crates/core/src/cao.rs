//! Minimum embedding dimension by Cao's averaged false-neighbour ratios,
//! used to pick a common lag count for a panel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ts::TimeSeriesPanel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaoConfig {
    pub d_max: usize,
    /// `E1(d)` counts as saturated once `|E1(d) - 1| < plateau_tol`.
    pub plateau_tol: f64,
}

impl Default for CaoConfig {
    fn default() -> Self {
        Self { d_max: 10, plateau_tol: 0.05 }
    }
}

impl CaoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_max < 2 {
            return Err(Error::InvalidParameter(format!("d_max must be at least 2, got {}", self.d_max)));
        }
        if !(self.plateau_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("plateau tolerance must be positive, got {}", self.plateau_tol)));
        }
        Ok(())
    }

    fn min_length(&self) -> usize {
        // E(d_max + 1) needs at least two embedded points
        self.d_max + 3
    }
}

/// `E1(d)` and `E2(d)` for `d = 1..=d_max`. E2 is informational only.
#[derive(Debug, Clone, PartialEq)]
pub struct CaoCurve {
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

struct Averages {
    e: f64,
    e_star: f64,
}

/// Mean neighbour-distance growth from dimension `d` to `d + 1` (max norm,
/// delay 1). Points whose only neighbours coincide with them are skipped.
fn averages(x: &[f64], d: usize) -> Option<Averages> {
    let n = x.len() - d;
    let mut sum = 0.0;
    let mut sum_star = 0.0;
    let mut used = 0usize;
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut dist: f64 = 0.0;
            for k in 0..d {
                dist = dist.max((x[i + k] - x[j + k]).abs());
                if dist >= best {
                    break;
                }
            }
            if dist > 0.0 && dist < best {
                best = dist;
                best_j = j;
            }
        }
        if best_j == usize::MAX {
            continue;
        }
        let extra = (x[i + d] - x[best_j + d]).abs();
        sum += best.max(extra) / best;
        sum_star += extra;
        used += 1;
    }
    (used > 0).then(|| Averages { e: sum / used as f64, e_star: sum_star / used as f64 })
}

fn is_degenerate(x: &[f64]) -> bool {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt() <= 1e-9 * (1.0 + mean.abs())
}

fn check_series(x: &[f64], config: &CaoConfig) -> Result<()> {
    config.validate()?;
    if x.len() < config.min_length() {
        return Err(Error::InsufficientData(format!("series of length {} is too short to embed in {} dimensions", x.len(), config.d_max)));
    }
    Ok(())
}

/// Full `E1`/`E2` curves up to `d_max`. Undefined ratios come back as NaN.
pub fn cao_curve(x: &[f64], config: &CaoConfig) -> Result<CaoCurve> {
    check_series(x, config)?;
    let avgs: Vec<Option<Averages>> = (1..=config.d_max + 1).map(|d| averages(x, d)).collect();
    let ratio = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) if a > 0.0 => b / a,
        _ => f64::NAN,
    };
    let mut e1 = Vec::with_capacity(config.d_max);
    let mut e2 = Vec::with_capacity(config.d_max);
    for d in 0..config.d_max {
        e1.push(ratio(avgs[d].as_ref().map(|a| a.e), avgs[d + 1].as_ref().map(|a| a.e)));
        e2.push(ratio(avgs[d].as_ref().map(|a| a.e_star), avgs[d + 1].as_ref().map(|a| a.e_star)));
    }
    Ok(CaoCurve { e1, e2 })
}

/// Smallest `d` with `|E1(d) - 1| < plateau_tol`, or `d_max` if none.
/// A numerically constant series returns 1.
pub fn cao_min_dimension(x: &[f64], config: &CaoConfig) -> Result<usize> {
    check_series(x, config)?;
    if is_degenerate(x) {
        return Ok(1);
    }
    let mut prev = match averages(x, 1) {
        Some(a) => a.e,
        None => return Ok(1),
    };
    for d in 1..=config.d_max {
        let next = match averages(x, d + 1) {
            Some(a) => a.e,
            None => return Ok(d),
        };
        if prev > 0.0 && ((next / prev) - 1.0).abs() < config.plateau_tol {
            return Ok(d);
        }
        prev = next;
    }
    Ok(config.d_max)
}

/// Largest per-series minimum embedding dimension, clamped to `[1, d_max]`.
pub fn select_lag_cao(panel: &TimeSeriesPanel, d_max: usize) -> Result<usize> {
    select_lag_cao_with(panel, &CaoConfig { d_max, ..CaoConfig::default() })
}

pub fn select_lag_cao_with(panel: &TimeSeriesPanel, config: &CaoConfig) -> Result<usize> {
    let dims: Vec<usize> = panel.columns().par_iter().map(|x| cao_min_dimension(x, config)).collect::<Result<_>>()?;
    Ok(dims.into_iter().max().unwrap_or(1).clamp(1, config.d_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Straightforward O(n^2 d) version with full distance evaluation.
    fn naive_e(x: &[f64], d: usize) -> f64 {
        let n = x.len() - d;
        let emb = |i: usize, dim: usize| -> Vec<f64> { x[i..i + dim].to_vec() };
        let maxnorm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let mut acc = Vec::new();
        for i in 0..n {
            let mut best = (f64::INFINITY, 0);
            for j in 0..n {
                let dist = maxnorm(&emb(i, d), &emb(j, d));
                if j != i && dist > 0.0 && dist < best.0 {
                    best = (dist, j);
                }
            }
            if best.0.is_finite() {
                acc.push(maxnorm(&emb(i, d + 1), &emb(best.1, d + 1)) / best.0);
            }
        }
        acc.iter().sum::<f64>() / acc.len() as f64
    }

    fn henon(n: usize) -> Vec<f64> {
        let (mut x, mut y) = (0.1, 0.0);
        let mut out = Vec::with_capacity(n);
        for t in 0..n + 200 {
            let nx = 1.0 - 1.4 * x * x + y;
            y = 0.3 * x;
            x = nx;
            if t >= 200 {
                out.push(x);
            }
        }
        out
    }

    #[test]
    fn curve_matches_naive_oracle() {
        let x = henon(300);
        let cfg = CaoConfig { d_max: 4, ..Default::default() };
        let curve = cao_curve(&x, &cfg).unwrap();
        for d in 1..=4 {
            let oracle = naive_e(&x, d + 1) / naive_e(&x, d);
            assert!((curve.e1[d - 1] - oracle).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn henon_needs_two_dimensions() {
        assert_eq!(cao_min_dimension(&henon(1000), &CaoConfig::default()).unwrap(), 2);
    }

    #[test]
    fn noise_free_ar2_agrees_with_oracle_rule() {
        let mut x = vec![1.0, 0.5];
        for t in 2..500 {
            x.push(0.95 * 2f64.sqrt() * x[t - 1] - 0.9025 * x[t - 2]);
        }
        let cfg = CaoConfig { d_max: 6, ..Default::default() };
        let oracle = (1..=6).find(|&d| (naive_e(&x, d + 1) / naive_e(&x, d) - 1.0).abs() < cfg.plateau_tol).unwrap_or(6);
        assert_eq!(cao_min_dimension(&x, &cfg).unwrap(), oracle);
    }

    #[test]
    fn constant_plus_tiny_noise_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..400)
            .map(|_| {
                let w: f64 = StandardNormal.sample(&mut rng);
                5.0 + 1e-12 * w
            })
            .collect();
        assert_eq!(cao_min_dimension(&x, &CaoConfig::default()).unwrap(), 1);
        assert_eq!(cao_min_dimension(&[2.0; 50], &CaoConfig::default()).unwrap(), 1);
    }

    #[test]
    fn output_clamped_and_short_series_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..300).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let panel = TimeSeriesPanel::new(vec!["a".into(), "b".into(), "c".into()], cols).unwrap();
        for d_max in 2..6 {
            let l = select_lag_cao(&panel, d_max).unwrap();
            assert!((1..=d_max).contains(&l));
        }
        assert!(cao_min_dimension(&[1.0, 2.0, 3.0], &CaoConfig::default()).is_err());
        assert!(select_lag_cao(&panel, 1).is_err());
    }
}
