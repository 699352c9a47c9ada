use serde::{Deserialize, Serialize};

use crate::corpus::Label;

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Confusion counts with `fail` as the positive class, and the derived
/// scores. Any ratio with a zero denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub acc: f64,
    pub prec: f64,
    pub rec: f64,
    pub f: f64,
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Metrics {
        let acc = ratio((tp + tn) as f64, (tp + fp + tn + fn_) as f64);
        let prec = ratio(tp as f64, (tp + fp) as f64);
        let rec = ratio(tp as f64, (tp + fn_) as f64);
        let f = ratio(2.0 * prec * rec, prec + rec);
        Metrics {
            tp,
            fp,
            tn,
            fn_,
            acc,
            prec,
            rec,
            f,
        }
    }

    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Metrics {
        assert_eq!(truth.len(), predicted.len(), "prediction count mismatch");
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Label::Fail, Label::Fail) => tp += 1,
                (Label::Pass, Label::Fail) => fp += 1,
                (Label::Pass, Label::Pass) => tn += 1,
                (Label::Fail, Label::Pass) => fn_ += 1,
            }
        }
        Metrics::from_counts(tp, fp, tn, fn_)
    }
}

/// Arithmetic means of the per-fold scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub acc: f64,
    pub prec: f64,
    pub rec: f64,
    pub f: f64,
}

impl MeanMetrics {
    pub fn of(folds: &[Metrics]) -> MeanMetrics {
        if folds.is_empty() {
            return MeanMetrics::default();
        }
        let n = folds.len() as f64;
        let sum = |g: fn(&Metrics) -> f64| folds.iter().map(g).sum::<f64>() / n;
        MeanMetrics {
            acc: sum(|m| m.acc),
            prec: sum(|m| m.prec),
            rec: sum(|m| m.rec),
            f: sum(|m| m.f),
        }
    }
}

impl From<Metrics> for MeanMetrics {
    fn from(m: Metrics) -> Self {
        MeanMetrics {
            acc: m.acc,
            prec: m.prec,
            rec: m.rec,
            f: m.f,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_denominators() {
        let m = Metrics::from_counts(0, 0, 0, 0);
        assert_eq!((m.acc, m.prec, m.rec, m.f), (0.0, 0.0, 0.0, 0.0));
        let m = Metrics::from_counts(0, 3, 4, 0);
        assert_eq!((m.prec, m.rec, m.f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn predictions_tally() {
        use Label::*;
        let m = Metrics::from_predictions(&[Fail, Fail, Pass, Pass], &[Fail, Pass, Fail, Pass]);
        assert_eq!((m.tp, m.fn_, m.fp, m.tn), (1, 1, 1, 1));
        assert_eq!(m.f, 0.5);
    }
}
