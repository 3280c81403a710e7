//! ROC construction, AUC and threshold selection.
//!
//! Classification is greater-is-legitimate with the boundary assigned to
//! rogue, so at threshold `t` the true-positive rate is the fraction of
//! legitimate pairs scoring strictly above `t` and the false-positive rate
//! the fraction of rogue pairs doing so. Thresholds are placed at every
//! distinct score plus infinite sentinels; trapezoidal integration over the
//! resulting curve equals the Mann-Whitney pair statistic with ties
//! counted one half.

use std::io::Write;

use crate::detector::DecisionThreshold;
use crate::error::{Error, Result};

/// One operating point: the decision threshold and resulting rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Full ROC curve, sorted by threshold descending so (fpr, tpr) run from
/// (0, 0) to (1, 1).
#[derive(Debug, Clone)]
pub struct RocCurve {
    points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    /// Writes `threshold,fpr,tpr` rows; infinite sentinels serialize as
    /// `inf` / `-inf`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "threshold,fpr,tpr")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.threshold, p.fpr, p.tpr)?;
        }
        Ok(())
    }
}

/// Builds the ROC curve from `(score, label)` pairs; `label = true` marks a
/// legitimate pair. Requires both labels to be present.
pub fn roc(scored: &[(f64, bool)]) -> Result<RocCurve> {
    let n_pos = scored.iter().filter(|(_, l)| *l).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::with_capacity(sorted.len() + 2);
    points.push(RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    });
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        // consume the whole tie group; "score > t" excludes the group itself
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    // the final point already reaches (1, 1); the sentinel makes the
    // always-accept operating point addressable
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    Ok(RocCurve { points })
}

/// Area under the curve by trapezoidal integration over FPR.
pub fn auc(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    for w in curve.points.windows(2) {
        area += (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5;
    }
    area
}

/// Convenience: ROC then AUC.
pub fn auc_from_scores(scored: &[(f64, bool)]) -> Result<f64> {
    Ok(auc(&roc(scored)?))
}

/// A selected threshold together with the rates it achieves empirically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSelection {
    pub threshold: DecisionThreshold,
    pub fpr: f64,
    pub tpr: f64,
}

/// Smallest threshold whose empirical FPR stays within `target_pfa`;
/// maximizes TPR subject to the false-alarm budget. Target 0 is always
/// satisfiable at the +infinity sentinel.
pub fn threshold_for_fpr(curve: &RocCurve, target_pfa: f64) -> Result<ThresholdSelection> {
    if !(0.0..=1.0).contains(&target_pfa) {
        return Err(Error::invalid(format!(
            "target false-alarm probability {target_pfa} outside [0, 1]"
        )));
    }
    let best = curve
        .points
        .iter()
        .filter(|p| p.fpr <= target_pfa)
        .next_back()
        .expect("curve always contains the fpr = 0 sentinel");
    Ok(ThresholdSelection {
        threshold: DecisionThreshold {
            value: best.threshold,
        },
        fpr: best.fpr,
        tpr: best.tpr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(scores: &[f64], labels: &[u8]) -> Vec<(f64, bool)> {
        scores
            .iter()
            .zip(labels)
            .map(|(&s, &l)| (s, l == 1))
            .collect()
    }

    /// Mann-Whitney pair statistic with ties counted one half: the
    /// independent oracle for the trapezoid AUC.
    fn pairwise_auc(scored: &[(f64, bool)]) -> f64 {
        let pos: Vec<f64> = scored.iter().filter(|(_, l)| *l).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scored.iter().filter(|(_, l)| !*l).map(|(s, _)| *s).collect();
        let mut acc = 0.0;
        for &p in &pos {
            for &n in &neg {
                acc += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        acc / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn roc_rejects_single_class() {
        assert!(roc(&labeled(&[0.9, 0.8], &[1, 1])).is_err());
        assert!(roc(&labeled(&[0.9, 0.8], &[0, 0])).is_err());
    }

    #[test]
    fn perfect_separation_hits_the_corner() {
        let curve = roc(&labeled(&[0.9, 0.1], &[1, 0])).unwrap();
        assert!(curve
            .points()
            .iter()
            .any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auc(&curve), 1.0);
    }

    #[test]
    fn four_point_example_is_chance_level() {
        // positives 0.9, 0.1 vs negatives 0.4, 0.6: 2 of 4 pairs ordered correctly
        let scored = labeled(&[0.9, 0.4, 0.6, 0.1], &[1, 0, 0, 1]);
        assert_eq!(pairwise_auc(&scored), 0.5);
        assert!((auc_from_scores(&scored).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identical_scores_give_exactly_half() {
        let scored = labeled(&[0.3, 0.3, 0.3, 0.3], &[1, 0, 1, 0]);
        assert_eq!(auc_from_scores(&scored).unwrap(), 0.5);
    }

    #[test]
    fn trapezoid_matches_pairwise_oracle_on_random_sets() {
        let mut rng = crate::rng::from_seed(61);
        use rand::Rng;
        for trial in 0..20 {
            let n = 50 + trial * 13;
            let scored: Vec<(f64, bool)> = (0..n)
                .map(|_| {
                    // quantized scores force plenty of ties
                    let s = (rng.random_range(0.0_f64..1.0) * 8.0).round() / 8.0;
                    (s, rng.random_range(0..2) == 1)
                })
                .collect();
            if scored.iter().all(|(_, l)| *l) || scored.iter().all(|(_, l)| !*l) {
                continue;
            }
            let trap = auc_from_scores(&scored).unwrap();
            let pairs = pairwise_auc(&scored);
            assert!(
                (trap - pairs).abs() < 1e-12,
                "trapezoid {trap} vs pairwise {pairs}"
            );
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transforms() {
        let scored = labeled(&[0.9, 0.4, 0.6, 0.1, 0.5], &[1, 0, 1, 0, 1]);
        let base = auc_from_scores(&scored).unwrap();
        let squashed: Vec<(f64, bool)> = scored
            .iter()
            .map(|&(s, l)| (1.0 / (1.0 + (-(8.0 * s - 2.0)).exp()), l))
            .collect();
        assert_eq!(auc_from_scores(&squashed).unwrap(), base);
    }

    #[test]
    fn curve_rates_are_monotone() {
        let mut rng = crate::rng::from_seed(62);
        use rand::Rng;
        let scored: Vec<(f64, bool)> = (0..200)
            .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0..2) == 1))
            .collect();
        let curve = roc(&scored).unwrap();
        for w in curve.points().windows(2) {
            assert!(w[0].threshold >= w[1].threshold);
            assert!(w[0].fpr <= w[1].fpr);
            assert!(w[0].tpr <= w[1].tpr);
        }
        let first = curve.points().first().unwrap();
        let last = curve.points().last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn threshold_selection_extremes() {
        let scored = labeled(&[0.9, 0.7, 0.4, 0.2], &[1, 1, 0, 0]);
        let curve = roc(&scored).unwrap();

        let all = threshold_for_fpr(&curve, 1.0).unwrap();
        assert_eq!(all.threshold.value, f64::NEG_INFINITY);
        assert_eq!(all.tpr, 1.0);

        let none = threshold_for_fpr(&curve, 0.0).unwrap();
        assert_eq!(none.fpr, 0.0);
        // strictly-greater decision keeps the max negative score valid
        assert!(none.threshold.value >= 0.4);
        assert_eq!(none.tpr, 1.0);

        assert!(threshold_for_fpr(&curve, 1.5).is_err());
    }

    #[test]
    fn threshold_selection_tracks_an_empirical_quantile() {
        let mut rng = crate::rng::from_seed(63);
        use rand::Rng;
        let scored: Vec<(f64, bool)> = (0..10_000)
            .map(|i| {
                let legit = i % 2 == 0;
                let shift = if legit { 1.2 } else { 0.0 };
                (rng.random_range(0.0..1.0) + shift, legit)
            })
            .collect();
        let curve = roc(&scored).unwrap();
        let sel = threshold_for_fpr(&curve, 0.05).unwrap();
        assert!(sel.fpr <= 0.05);
        assert!(sel.fpr >= 0.04, "achieved FPR {} too conservative", sel.fpr);
        assert!(sel.tpr > 0.9);
    }
}
