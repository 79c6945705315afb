//! Confusion-matrix metrics with phishing as the positive class.

use serde::{Deserialize, Serialize};

use crate::ingest::Label;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no samples to score")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Phishing, Label::Phishing) => self.tp += 1,
            (Label::Phishing, Label::Legitimate) => self.fp += 1,
            (Label::Legitimate, Label::Legitimate) => self.tn += 1,
            (Label::Legitimate, Label::Phishing) => self.fn_ += 1,
        }
    }
}

pub fn confusion(predictions: &[Label], labels: &[Label]) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &a) in predictions.iter().zip(labels) {
        cm.add(p, a);
    }
    Ok(cm)
}

/// Derived rates. `None` marks a 0/0 ratio (e.g. precision when nothing was
/// predicted phishing).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub const METRIC_NAMES: [&str; 6] = ["accuracy", "f1", "fnr", "fpr", "precision", "recall"];

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Metrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "accuracy" => self.accuracy,
            "fpr" => self.fpr,
            "fnr" => self.fnr,
            "precision" => self.precision,
            "recall" => self.recall,
            "f1" => self.f1,
            _ => None,
        }
    }

    /// (name, value) pairs in `METRIC_NAMES` order.
    pub fn entries(&self) -> [(&'static str, Option<f64>); 6] {
        METRIC_NAMES.map(|n| (n, self.get(n)))
    }

    /// Unweighted mean of each metric over the inputs where it is defined.
    pub fn mean<'a, I: IntoIterator<Item = &'a Metrics>>(items: I) -> Metrics {
        let items: Vec<&Metrics> = items.into_iter().collect();
        let avg = |f: fn(&Metrics) -> Option<f64>| {
            let vals: Vec<f64> = items.iter().filter_map(|m| f(m)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        Metrics {
            accuracy: avg(|m| m.accuracy),
            fpr: avg(|m| m.fpr),
            fnr: avg(|m| m.fnr),
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            f1: avg(|m| m.f1),
        }
    }
}

pub fn derive_metrics(cm: &ConfusionMatrix) -> Metrics {
    let ConfusionMatrix { tp, fp, tn, fn_ } = *cm;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Metrics {
        accuracy: ratio(tp + tn, cm.total()),
        fpr: ratio(fp, fp + tn),
        fnr: ratio(fn_, fn_ + tp),
        precision,
        recall,
        f1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Legitimate as L, Phishing as P};

    #[test]
    fn confusion_cases() {
        assert_eq!(
            confusion(&[P, P, L, L], &[P, P, L, L]).unwrap(),
            ConfusionMatrix {
                tp: 2,
                fp: 0,
                tn: 2,
                fn_: 0
            }
        );
        assert_eq!(
            confusion(&[L, L, L, L], &[P, P, L, L]).unwrap(),
            ConfusionMatrix {
                tp: 0,
                fp: 0,
                tn: 2,
                fn_: 2
            }
        );
        assert_eq!(
            confusion(&[P, L, P, L], &[P, P, L, L]).unwrap(),
            ConfusionMatrix {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
        assert!(matches!(
            confusion(&[P], &[P, L]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn perfect() {
        let m = derive_metrics(&ConfusionMatrix {
            tp: 2,
            fp: 0,
            tn: 2,
            fn_: 0,
        });
        assert_eq!(
            (m.accuracy, m.fpr, m.fnr, m.precision, m.f1),
            (Some(1.0), Some(0.0), Some(0.0), Some(1.0), Some(1.0))
        );
    }

    #[test]
    fn one_of_each() {
        let m = derive_metrics(&ConfusionMatrix {
            tp: 1,
            fp: 1,
            tn: 1,
            fn_: 1,
        });
        for (_, v) in m.entries() {
            assert_eq!(v, Some(0.5));
        }
    }

    #[test]
    fn undefined_precision() {
        let m = derive_metrics(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 2,
            fn_: 2,
        });
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.accuracy, Some(0.5));
        assert_eq!(m.fnr, Some(1.0));
        assert_eq!(m.fpr, Some(0.0));
    }

    #[test]
    fn mean_skips_undefined() {
        let a = Metrics {
            accuracy: Some(1.0),
            precision: None,
            ..Default::default()
        };
        let b = Metrics {
            accuracy: Some(0.5),
            precision: Some(0.25),
            ..Default::default()
        };
        let m = Metrics::mean([&a, &b]);
        assert_eq!(m.accuracy, Some(0.75));
        assert_eq!(m.precision, Some(0.25));
        assert_eq!(m.fpr, None);
    }
}
