use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{accuracy, expected_calibration_error, hosmer_lemeshow, reliability_table, roc_auc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub mean_score: Option<f64>,
    pub positive_rate: Option<f64>,
    pub count: usize,
}

impl ReliabilityRow {
    pub const CSV_HEADER: &'static str = "bin_lo,bin_hi,mean_score,positive_rate,count";

    pub fn to_csv_rows(rows: &[ReliabilityRow]) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.bin_lo,
                r.bin_hi,
                opt(r.mean_score),
                opt(r.positive_rate),
                r.count
            ));
        }
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Metrics of one scored binary dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub ece: f64,
    pub hl_statistic: f64,
    pub n: usize,
    pub reliability_rows: Vec<ReliabilityRow>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "accuracy,auc,ece,hl,n";

    /// Threshold 0.5, 10 calibration bins, 10 Hosmer-Lemeshow groups.
    pub fn compute(scores: &[f64], labels: &[usize]) -> Result<Self> {
        Self::compute_with(scores, labels, 10, 10)
    }

    pub fn compute_with(
        scores: &[f64],
        labels: &[usize],
        bins: usize,
        groups: usize,
    ) -> Result<Self> {
        let auc = match roc_auc(scores, labels) {
            Ok(a) => Some(a),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(MetricsReport {
            accuracy: accuracy(scores, labels, 0.5)?,
            auc,
            ece: expected_calibration_error(scores, labels, bins)?,
            hl_statistic: hosmer_lemeshow(scores, labels, groups.min(scores.len()))?,
            n: scores.len(),
            reliability_rows: reliability_table(scores, labels, bins)?,
        })
    }

    /// Header plus one data row; an undefined AUC is written as an empty field.
    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.accuracy,
            opt(self.auc),
            self.ece,
            self.hl_statistic,
            self.n
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
