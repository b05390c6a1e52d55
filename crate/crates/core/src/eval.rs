//! Scores a p-value matrix against a ground truth.

use serde::{Deserialize, Serialize};

use crate::engine::PValueMatrix;
use crate::error::{Error, Result};
use crate::simnet::GroundTruth;

pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const GRID_SIZE: usize = 100;

/// Labels and p-values over all off-diagonal ordered pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScores {
    pub labels: Vec<bool>,
    pub pvalues: Vec<f64>,
}

impl EdgeScores {
    pub fn new(labels: Vec<bool>, pvalues: Vec<f64>) -> Result<Self> {
        if labels.len() != pvalues.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: pvalues.len() });
        }
        if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("p-value {p} outside [0, 1]")));
        }
        Ok(Self { labels, pvalues })
    }

    /// Aligns the matrix with the truth by series name. Failed cells count
    /// as p = 1 (no evidence of an edge).
    pub fn from_matrix(matrix: &PValueMatrix, truth: &GroundTruth) -> Result<Self> {
        let missing_in_truth: Vec<&str> = matrix.series.iter().filter(|s| !truth.nodes.contains(s)).map(|s| s.as_str()).collect();
        let missing_in_matrix: Vec<&str> = truth.nodes.iter().filter(|s| !matrix.series.contains(s)).map(|s| s.as_str()).collect();
        if !missing_in_truth.is_empty() || !missing_in_matrix.is_empty() {
            return Err(Error::Format(format!(
                "node sets differ: missing from truth [{}], missing from p-values [{}]",
                missing_in_truth.join(", "),
                missing_in_matrix.join(", ")
            )));
        }
        let g = matrix.series.len();
        if matrix.pvalues.len() != g || matrix.pvalues.iter().any(|r| r.len() != g) {
            return Err(Error::Format(format!("p-value matrix is not {g}x{g}")));
        }
        let pos: Vec<usize> = matrix.series.iter().map(|s| truth.nodes.iter().position(|n| n == s).expect("checked")).collect();
        let mut labels = Vec::with_capacity(g * (g - 1));
        let mut pvalues = Vec::with_capacity(g * (g - 1));
        for i in 0..g {
            for j in 0..g {
                if i == j {
                    continue;
                }
                labels.push(truth.has_edge(pos[i], pos[j]));
                pvalues.push(matrix.pvalues[i][j].unwrap_or(1.0));
            }
        }
        Self::new(labels, pvalues)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l).count();
        (pos, self.labels.len() - pos)
    }
}

/// Rank AUC with score `1 - p`; ties count one half.
pub fn auc(scores: &EdgeScores) -> Result<f64> {
    let (positives, negatives) = scores.class_counts();
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    let mut wins = 0.0;
    for (i, &li) in scores.labels.iter().enumerate() {
        if !li {
            continue;
        }
        let si = 1.0 - scores.pvalues[i];
        for (j, &lj) in scores.labels.iter().enumerate() {
            if lj {
                continue;
            }
            let sj = 1.0 - scores.pvalues[j];
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (positives * negatives) as f64)
}

/// Mean squared gap between `q = 1 - p` and the 0/1 labels.
pub fn brier(scores: &EdgeScores) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InsufficientData("no scored edges".into()));
    }
    let sum: f64 = scores
        .labels
        .iter()
        .zip(&scores.pvalues)
        .map(|(&l, &p)| {
            let q = 1.0 - p;
            let y = if l { 1.0 } else { 0.0 };
            (q - y) * (q - y)
        })
        .sum();
    Ok(sum / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub gmean: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Set when a class is empty and its rate was defined as 0.
    pub empty_class: bool,
}

/// Confusion-matrix metrics when an edge is declared for `p < threshold`.
pub fn threshold_metrics(scores: &EdgeScores, threshold: f64) -> ThresholdMetrics {
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&l, &p) in scores.labels.iter().zip(&scores.pvalues) {
        match (l, p < threshold) {
            (true, true) => tp += 1,
            (true, false) => fneg += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let rate = |hit: usize, total: usize| if total == 0 { 0.0 } else { hit as f64 / total as f64 };
    let sensitivity = rate(tp, tp + fneg);
    let specificity = rate(tn, tn + fp);
    ThresholdMetrics {
        accuracy: rate(tp + tn, scores.len()),
        balanced_accuracy: (sensitivity + specificity) / 2.0,
        gmean: (sensitivity * specificity).sqrt(),
        sensitivity,
        specificity,
        empty_class: tp + fneg == 0 || tn + fp == 0,
    }
}

/// The candidate thresholds `0.01, 0.02, ..., 1.00`.
pub fn threshold_grid() -> Vec<f64> {
    (1..=GRID_SIZE).map(|k| k as f64 / GRID_SIZE as f64).collect()
}

/// Median with linear interpolation between the middle order statistics.
pub fn median(values: &[f64]) -> f64 {
    percentile(values, 0.5)
}

/// Linear-interpolation percentile, `q` in [0, 1]. NaN for empty input.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Grid threshold with the highest median G-mean over the sets; ties go to
/// the smaller threshold.
pub fn gmean_optimal_threshold(score_sets: &[EdgeScores]) -> Result<f64> {
    if score_sets.is_empty() {
        return Err(Error::InsufficientData("no score sets".into()));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in threshold_grid() {
        let gm: Vec<f64> = score_sets.iter().map(|s| threshold_metrics(s, t).gmean).collect();
        let m = median(&gm);
        if m > best.0 {
            best = (m, t);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkEvalReport {
    pub auc: f64,
    pub brier: f64,
    pub threshold: f64,
    pub acc_at_p05: f64,
    pub bal_acc_at_p05: f64,
    pub gmean_threshold: f64,
    pub acc_at_gmean: f64,
    pub bal_acc_at_gmean: f64,
}

impl NetworkEvalReport {
    pub const METRICS: [&'static str; 7] =
        ["auc", "brier", "acc_at_p05", "bal_acc_at_p05", "gmean_threshold", "acc_at_gmean", "bal_acc_at_gmean"];

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "auc" => self.auc,
            "brier" => self.brier,
            "acc_at_p05" => self.acc_at_p05,
            "bal_acc_at_p05" => self.bal_acc_at_p05,
            "gmean_threshold" => self.gmean_threshold,
            "acc_at_gmean" => self.acc_at_gmean,
            "bal_acc_at_gmean" => self.bal_acc_at_gmean,
            _ => return None,
        })
    }
}

/// Full report for one set, given the fixed threshold and a G-mean-optimal
/// threshold chosen elsewhere (per set or per combination).
pub fn evaluate(scores: &EdgeScores, threshold: f64, gmean_threshold: f64) -> Result<NetworkEvalReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} outside [0, 1]")));
    }
    let fixed = threshold_metrics(scores, threshold);
    let opt = threshold_metrics(scores, gmean_threshold);
    Ok(NetworkEvalReport {
        auc: auc(scores)?,
        brier: brier(scores)?,
        threshold,
        acc_at_p05: fixed.accuracy,
        bal_acc_at_p05: fixed.balanced_accuracy,
        gmean_threshold,
        acc_at_gmean: opt.accuracy,
        bal_acc_at_gmean: opt.balanced_accuracy,
    })
}

/// Single-set report with the G-mean threshold optimized on that set.
pub fn evaluate_single(scores: &EdgeScores, threshold: f64) -> Result<NetworkEvalReport> {
    let g = gmean_optimal_threshold(std::slice::from_ref(scores))?;
    evaluate(scores, threshold, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(labels: &[u8], p: &[f64]) -> EdgeScores {
        EdgeScores::new(labels.iter().map(|&l| l == 1).collect(), p.to_vec()).unwrap()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&scores(&[1, 0], &[0.01, 0.9])).unwrap(), 1.0);
        assert_eq!(auc(&scores(&[1, 0, 1, 0], &[0.3; 4])).unwrap(), 0.5);
        assert_eq!(auc(&scores(&[1, 0, 1], &[0.1, 0.2, 0.3])).unwrap(), 0.5);
        assert!(matches!(auc(&scores(&[1, 1], &[0.1, 0.2])), Err(Error::SingleClass { .. })));
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&scores(&[1, 0], &[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(brier(&scores(&[1, 0, 0], &[0.5; 3])).unwrap(), 0.25);
        assert!((brier(&scores(&[1, 0], &[0.1, 0.8])).unwrap() - 0.025).abs() < 1e-15);
    }

    #[test]
    fn threshold_examples() {
        let m = threshold_metrics(&scores(&[1, 0], &[0.01, 0.9]), 0.05);
        assert_eq!((m.accuracy, m.balanced_accuracy, m.gmean), (1.0, 1.0, 1.0));
        let m = threshold_metrics(&scores(&[1, 0, 0], &[0.0, 0.5, 0.2]), 0.0);
        assert_eq!((m.sensitivity, m.specificity, m.gmean), (0.0, 1.0, 0.0));
        let m = threshold_metrics(&scores(&[1, 0, 0, 0], &[0.01, 0.2, 0.01, 0.9]), 0.05);
        assert_eq!(m.accuracy, 0.75);
        assert!((m.balanced_accuracy - 5.0 / 6.0).abs() < 1e-15);
        assert!((m.gmean - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let m = threshold_metrics(&scores(&[1, 1], &[0.3, 0.4]), 0.5);
        assert!(m.empty_class);
    }

    #[test]
    fn gmean_threshold_tie_break() {
        // perfectly separated: true p <= 0.031, false p >= 0.2
        let s = scores(&[1, 1, 0, 0], &[0.02, 0.031, 0.2, 0.7]);
        assert_eq!(gmean_optimal_threshold(&[s]).unwrap(), 0.04);
        assert_eq!(threshold_grid().len(), 100);
    }

    #[test]
    fn gmean_threshold_matches_brute_force() {
        let sets = vec![
            scores(&[1, 0, 1, 0, 0], &[0.02, 0.5, 0.3, 0.25, 0.9]),
            scores(&[1, 0, 1, 0, 0], &[0.6, 0.1, 0.05, 0.8, 0.9]),
            scores(&[1, 1, 0, 0, 0], &[0.45, 0.12, 0.4, 0.03, 0.95]),
        ];
        let got = gmean_optimal_threshold(&sets).unwrap();
        // oracle: median of three is the middle sorted value
        let mut best = (-1.0, 0.0);
        for k in 1..=100 {
            let t = k as f64 / 100.0;
            let mut g: Vec<f64> = sets
                .iter()
                .map(|s| {
                    let tp = s.labels.iter().zip(&s.pvalues).filter(|(l, p)| **l && **p < t).count() as f64;
                    let tn = s.labels.iter().zip(&s.pvalues).filter(|(l, p)| !**l && **p >= t).count() as f64;
                    let pos = s.labels.iter().filter(|l| **l).count() as f64;
                    ((tp / pos) * (tn / (s.len() as f64 - pos))).sqrt()
                })
                .collect();
            g.sort_by(f64::total_cmp);
            if g[1] > best.0 {
                best = (g[1], t);
            }
        }
        assert_eq!(got, best.1);
    }

    #[test]
    fn percentiles() {
        let v = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!((median(&v), percentile(&v, 0.25), percentile(&v, 0.75)), (3.0, 2.0, 4.0));
        assert_eq!(median(&[1.0, 2.0]), 1.5);
    }

    fn labelled() -> impl Strategy<Value = EdgeScores> {
        proptest::collection::vec((any::<bool>(), 0.0f64..=1.0), 2..40)
            .prop_filter("both classes", |v| v.iter().any(|x| x.0) && v.iter().any(|x| !x.0))
            .prop_map(|v| EdgeScores::new(v.iter().map(|x| x.0).collect(), v.iter().map(|x| x.1).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn auc_invariant_under_monotone_transform(s in labelled()) {
            // p -> p^3 keeps the order of 1 - p
            let t = EdgeScores::new(s.labels.clone(), s.pvalues.iter().map(|p| p.powi(3)).collect()).unwrap();
            prop_assert_eq!(auc(&s).unwrap(), auc(&t).unwrap());
        }

        #[test]
        fn brier_symmetric_under_flip(s in labelled()) {
            let flipped = EdgeScores::new(s.labels.iter().map(|l| !l).collect(), s.pvalues.iter().map(|p| 1.0 - p).collect()).unwrap();
            // q = 1 - p against labels equals q' = p against flipped labels
            let direct: f64 = s.labels.iter().zip(&s.pvalues).map(|(&l, &p)| { let y = if l { 1.0 } else { 0.0 }; (1.0 - p - y).powi(2) }).sum::<f64>() / s.len() as f64;
            let other: f64 = flipped.labels.iter().zip(&s.pvalues).map(|(&l, &p)| { let y = if l { 1.0 } else { 0.0 }; (p - y).powi(2) }).sum::<f64>() / s.len() as f64;
            prop_assert_eq!(brier(&s).unwrap(), direct);
            prop_assert!((direct - other).abs() < 1e-15);
        }

        #[test]
        fn threshold_one_predicts_everything(s in labelled()) {
            let s = EdgeScores::new(s.labels.clone(), s.pvalues.iter().map(|p| p.min(0.999)).collect()).unwrap();
            let m = threshold_metrics(&s, 1.0);
            prop_assert_eq!((m.sensitivity, m.specificity), (1.0, 0.0));
        }

        #[test]
        fn gmean_threshold_on_grid(s in labelled()) {
            let t = gmean_optimal_threshold(&[s]).unwrap();
            prop_assert!(threshold_grid().contains(&t));
        }

        #[test]
        fn metrics_in_unit_interval(s in labelled(), t in 0.0f64..=1.0) {
            let r = evaluate_single(&s, t).unwrap();
            for name in NetworkEvalReport::METRICS {
                let v = r.metric(name).unwrap();
                prop_assert!((0.0..=1.0).contains(&v), "{} = {}", name, v);
            }
        }
    }
}
