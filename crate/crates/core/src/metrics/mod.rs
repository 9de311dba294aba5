//! Performance and calibration metrics for binary scores.
//!
//! Scores are predicted probabilities of class 1 and labels are 0 or 1.

mod boundary;
mod report;

pub use boundary::{decision_boundary_grid, BoundaryGrid, FnScorer, ModelScorer, Scorer};
pub use report::{MetricsReport, ReliabilityRow};

use crate::error::{Error, Result};

/// Clamp applied to a group's mean score in the Hosmer-Lemeshow denominator.
pub const HL_CLAMP: f64 = 1e-6;

fn check_inputs(scores: &[f64], labels: &[usize]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::arg("no scores"));
    }
    if scores.len() != labels.len() {
        return Err(Error::arg(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::arg("labels must be 0 or 1"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::arg("scores must be finite"));
    }
    Ok(())
}

/// Fraction of instances whose thresholded score matches the label.
/// A score equal to the threshold predicts class 1.
pub fn accuracy(scores: &[f64], labels: &[usize], threshold: f64) -> Result<f64> {
    check_inputs(scores, labels)?;
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| usize::from(s >= threshold) == y)
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

/// Area under the ROC curve via the Mann-Whitney statistic with midranks,
/// so tied scores count one half.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        let pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mid * pos as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Expected calibration error over `bins` equal-width bins of the confidence
/// `max(s, 1 - s)` on [0.5, 1]. The predicted class is `s >= 0.5`.
pub fn expected_calibration_error(scores: &[f64], labels: &[usize], bins: usize) -> Result<f64> {
    check_inputs(scores, labels)?;
    if bins == 0 {
        return Err(Error::arg("need at least one bin"));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut hit_sum = vec![0.0; bins];
    for (&s, &y) in scores.iter().zip(labels) {
        let conf = s.max(1.0 - s);
        let b = (((conf - 0.5) * 2.0 * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += conf;
        if usize::from(s >= 0.5) == y {
            hit_sum[b] += 1.0;
        }
    }
    let n = scores.len() as f64;
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n) * (hit_sum[b] / c - conf_sum[b] / c).abs()
        })
        .sum())
}

/// Hosmer-Lemeshow statistic over `groups` groups of instances sorted by
/// (score, label). The first `n % groups` groups hold one extra instance.
pub fn hosmer_lemeshow(scores: &[f64], labels: &[usize], groups: usize) -> Result<f64> {
    check_inputs(scores, labels)?;
    let n = scores.len();
    if groups == 0 || n < groups {
        return Err(Error::arg(format!(
            "need 1 <= groups <= n, got {groups} groups for n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .total_cmp(&scores[b])
            .then(labels[a].cmp(&labels[b]))
    });
    let base = n / groups;
    let extra = n % groups;
    let mut start = 0;
    let mut stat = 0.0;
    for g in 0..groups {
        let size = base + usize::from(g < extra);
        let members = &order[start..start + size];
        start += size;
        let ng = size as f64;
        let mean = members.iter().map(|&i| scores[i]).sum::<f64>() / ng;
        let observed = members.iter().filter(|&&i| labels[i] == 1).count() as f64;
        let expected = ng * mean;
        let p = mean.clamp(HL_CLAMP, 1.0 - HL_CLAMP);
        stat += (observed - expected).powi(2) / (ng * p * (1.0 - p));
    }
    Ok(stat)
}

/// Per-bin summary over `bins` equal-width bins of the raw score on [0, 1].
/// Every bin is reported; empty bins have no mean score or positive rate.
pub fn reliability_table(
    scores: &[f64],
    labels: &[usize],
    bins: usize,
) -> Result<Vec<ReliabilityRow>> {
    check_inputs(scores, labels)?;
    if bins == 0 {
        return Err(Error::arg("need at least one bin"));
    }
    let mut count = vec![0usize; bins];
    let mut score_sum = vec![0.0; bins];
    let mut pos = vec![0usize; bins];
    for (&s, &y) in scores.iter().zip(labels) {
        let b = ((s.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        score_sum[b] += s;
        pos[b] += y;
    }
    Ok((0..bins)
        .map(|b| {
            let c = count[b];
            ReliabilityRow {
                bin_lo: b as f64 / bins as f64,
                bin_hi: (b + 1) as f64 / bins as f64,
                mean_score: (c > 0).then(|| score_sum[b] / c as f64),
                positive_rate: (c > 0).then(|| pos[b] as f64 / c as f64),
                count: c,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0.6, 0.4], &[1, 0], 0.5).unwrap(), 1.0);
        assert_eq!(accuracy(&[0.5], &[1], 0.5).unwrap(), 1.0);
        assert_eq!(
            accuracy(&[0.9, 0.8, 0.2, 0.4], &[1, 0, 0, 1], 0.5).unwrap(),
            0.5
        );
        assert!(accuracy(&[], &[], 0.5).is_err());
        assert!(accuracy(&[0.1], &[2], 0.5).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert_eq!(
            roc_auc(&[0.9, 0.7, 0.7, 0.1], &[1, 1, 0, 0]).unwrap(),
            0.875
        );
        assert!(matches!(
            roc_auc(&[0.2, 0.4], &[1, 1]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn ece_examples() {
        assert_eq!(
            expected_calibration_error(&[1.0, 1.0, 0.0, 0.0], &[1, 1, 0, 0], 10).unwrap(),
            0.0
        );
        let labels = [1, 1, 1, 1, 1, 1, 1, 0, 0, 0];
        let e = expected_calibration_error(&[0.7; 10], &labels, 10).unwrap();
        assert!(e.abs() < 1e-12);
        let labels = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let e = expected_calibration_error(&[0.9; 10], &labels, 10).unwrap();
        assert!((e - 0.4).abs() < 1e-12);
    }

    #[test]
    fn hl_examples() {
        let labels = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0];
        let h = hosmer_lemeshow(&[0.3; 10], &labels, 1).unwrap();
        assert!((h - 9.0 / 2.1).abs() < 1e-12);
        // Two groups of 5 with O = E exactly.
        let scores = [0.2, 0.2, 0.2, 0.2, 0.2, 0.6, 0.6, 0.6, 0.6, 0.6];
        let labels = [1, 0, 0, 0, 0, 1, 1, 1, 0, 0];
        assert!(hosmer_lemeshow(&scores, &labels, 2).unwrap().abs() < 1e-12);
        assert!(hosmer_lemeshow(&[0.5; 3], &[0, 1, 0], 10).is_err());
    }

    #[test]
    fn hl_saturated_group_is_finite() {
        let h = hosmer_lemeshow(&[0.0, 0.0, 1.0, 1.0], &[0, 1, 1, 1], 2).unwrap();
        assert!(h.is_finite());
        assert!(h > 1e5);
    }

    #[test]
    fn reliability_examples() {
        let rows = reliability_table(&[0.31, 0.33, 0.35], &[0, 1, 0], 10).unwrap();
        assert_eq!(rows.len(), 10);
        let populated: Vec<_> = rows.iter().filter(|r| r.count > 0).collect();
        assert_eq!(populated.len(), 1);
        assert_eq!(populated[0].count, 3);
        assert!((populated[0].positive_rate.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rows[9].bin_hi, 1.0);
        let rows = reliability_table(&[1.0, 0.0], &[1, 0], 4).unwrap();
        assert_eq!(rows[3].count, 1);
        assert_eq!(rows[0].count, 1);
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
        prop::collection::vec((0.0f64..=1.0, 0usize..2), 1..60).prop_map(|v| v.into_iter().unzip())
    }

    proptest! {
        #[test]
        fn metric_ranges((s, y) in scored()) {
            let a = accuracy(&s, &y, 0.5).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            let e = expected_calibration_error(&s, &y, 10).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
            if let Ok(auc) = roc_auc(&s, &y) {
                prop_assert!((0.0..=1.0).contains(&auc));
            }
            let h = hosmer_lemeshow(&s, &y, s.len().min(10)).unwrap();
            prop_assert!(h >= 0.0);
            let rows = reliability_table(&s, &y, 10).unwrap();
            prop_assert_eq!(rows.iter().map(|r| r.count).sum::<usize>(), s.len());
        }

        #[test]
        fn auc_invariant_under_monotone_map((s, y) in scored()) {
            if let Ok(a) = roc_auc(&s, &y) {
                let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
                prop_assert!((roc_auc(&t, &y).unwrap() - a).abs() < 1e-12);
            }
        }

        #[test]
        fn accuracy_complement((s, y) in scored()) {
            prop_assume!(s.iter().all(|&v| v != 0.5));
            let flipped: Vec<usize> = y.iter().map(|v| 1 - v).collect();
            let total = accuracy(&s, &y, 0.5).unwrap() + accuracy(&s, &flipped, 0.5).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn hl_ignores_input_order((s, y) in scored(), seed in any::<u64>()) {
            let g = s.len().min(10);
            let base = hosmer_lemeshow(&s, &y, g).unwrap();
            let mut idx: Vec<usize> = (0..s.len()).collect();
            crate::rng::Seed(seed).rng().shuffle(&mut idx);
            let s2: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
            let y2: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
            prop_assert!((hosmer_lemeshow(&s2, &y2, g).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
        }
    }
}
