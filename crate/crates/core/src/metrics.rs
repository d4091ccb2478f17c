//! Evaluation metrics: accuracy, balanced accuracy, macro-F1 and normalized log distance.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no predictions")]
    Empty,
    #[error("empty class label at index {0}")]
    EmptyLabel(usize),
    #[error("cap must be a positive finite number, got {0}")]
    BadCap(f64),
    #[error("term at index {index} is invalid: {value}")]
    BadTerm { index: usize, value: f64 },
    #[error("term at index {index} ({value}) exceeds the cap {cap}")]
    AboveCap { index: usize, value: f64, cap: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPrediction {
    pub gold: String,
    pub pred: String,
}

impl LabeledPrediction {
    pub fn new(gold: impl Into<String>, pred: impl Into<String>) -> Self {
        Self { gold: gold.into(), pred: pred.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermPrediction {
    pub gold_months: f64,
    pub pred_months: f64,
}

fn check(preds: &[LabeledPrediction]) -> Result<(), MetricError> {
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    match preds.iter().position(|p| p.gold.is_empty() || p.pred.is_empty()) {
        Some(i) => Err(MetricError::EmptyLabel(i)),
        None => Ok(()),
    }
}

pub fn accuracy(preds: &[LabeledPrediction]) -> Result<f64, MetricError> {
    check(preds)?;
    let hits = preds.iter().filter(|p| p.gold == p.pred).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Per-class confusion counts for every class that occurs as gold or prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn confusion(preds: &[LabeledPrediction]) -> BTreeMap<&str, Counts> {
    let mut m: BTreeMap<&str, Counts> = BTreeMap::new();
    for p in preds {
        if p.gold == p.pred {
            m.entry(&p.gold).or_default().tp += 1;
        } else {
            m.entry(&p.gold).or_default().fn_ += 1;
            m.entry(&p.pred).or_default().fp += 1;
        }
    }
    m
}

fn gold_classes(preds: &[LabeledPrediction]) -> BTreeSet<&str> {
    preds.iter().map(|p| p.gold.as_str()).collect()
}

/// Mean per-class recall over the classes that occur in gold.
pub fn balanced_accuracy(preds: &[LabeledPrediction]) -> Result<f64, MetricError> {
    check(preds)?;
    let conf = confusion(preds);
    let classes = gold_classes(preds);
    let sum: f64 = classes
        .iter()
        .map(|c| {
            let k = conf[c];
            k.tp as f64 / (k.tp + k.fn_) as f64
        })
        .sum();
    Ok(sum / classes.len() as f64)
}

/// Mean per-class F1 over the classes that occur in gold. A class whose
/// precision and recall are both zero has F1 zero.
pub fn macro_f1(preds: &[LabeledPrediction]) -> Result<f64, MetricError> {
    check(preds)?;
    let conf = confusion(preds);
    let classes = gold_classes(preds);
    let sum: f64 = classes
        .iter()
        .map(|c| {
            let k = conf[c];
            // F1 = 2TP / (2TP + FP + FN); zero when TP is zero.
            if k.tp == 0 {
                0.0
            } else {
                2.0 * k.tp as f64 / (2 * k.tp + k.fp + k.fn_) as f64
            }
        })
        .sum();
    Ok(sum / classes.len() as f64)
}

/// Mean of `1 - min(1, |ln(1+pred) - ln(1+gold)| / ln(1+cap))`; 1.0 is a perfect match.
pub fn normalized_log_distance(preds: &[TermPrediction], cap_months: f64) -> Result<f64, MetricError> {
    if !(cap_months.is_finite() && cap_months > 0.0) {
        return Err(MetricError::BadCap(cap_months));
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let scale = cap_months.ln_1p();
    let mut total = 0.0;
    for (index, p) in preds.iter().enumerate() {
        for value in [p.gold_months, p.pred_months] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(MetricError::BadTerm { index, value });
            }
            if value > cap_months {
                return Err(MetricError::AboveCap { index, value, cap: cap_months });
            }
        }
        let d = (p.pred_months.ln_1p() - p.gold_months.ln_1p()).abs() / scale;
        total += 1.0 - d.min(1.0);
    }
    Ok(total / preds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(pairs: &[(&str, &str)]) -> Vec<LabeledPrediction> {
        pairs.iter().map(|(g, p)| LabeledPrediction::new(*g, *p)).collect()
    }

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&lp(&[("a", "a"), ("b", "b")])).unwrap(), 1.0);
        assert_eq!(accuracy(&lp(&[("a", "b"), ("b", "a")])).unwrap(), 0.0);
        assert_eq!(accuracy(&lp(&[("a", "a"), ("b", "b"), ("c", "c"), ("a", "b")])).unwrap(), 0.75);
        assert_eq!(accuracy(&[]), Err(MetricError::Empty));
        assert_eq!(accuracy(&lp(&[("a", "")])), Err(MetricError::EmptyLabel(0)));
    }

    #[test]
    fn balanced_accuracy_three_classes() {
        // recalls: x 2/2, y 1/2, z 0/2
        let preds = lp(&[("x", "x"), ("x", "x"), ("y", "y"), ("y", "x"), ("z", "x"), ("z", "y")]);
        assert!((balanced_accuracy(&preds).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(balanced_accuracy(&lp(&[("a", "a"), ("a", "a")])).unwrap(), 1.0);
    }

    #[test]
    fn balanced_accuracy_ignores_pred_only_classes() {
        let preds = lp(&[("a", "a"), ("a", "ghost")]);
        assert_eq!(balanced_accuracy(&preds).unwrap(), 0.5);
    }

    #[test]
    fn f1_two_classes() {
        // X: TP 2, FP 1, FN 1; Y mirrored.
        let preds = lp(&[("X", "X"), ("X", "X"), ("X", "Y"), ("Y", "Y"), ("Y", "Y"), ("Y", "X")]);
        assert!((macro_f1(&preds).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(macro_f1(&lp(&[("a", "a"), ("b", "b")])).unwrap(), 1.0);
        assert_eq!(macro_f1(&lp(&[("a", "b"), ("a", "b")])).unwrap(), 0.0);
    }

    #[test]
    fn nld_values() {
        let t = |g, p| TermPrediction { gold_months: g, pred_months: p };
        assert_eq!(normalized_log_distance(&[t(5.0, 5.0), t(0.0, 0.0)], 300.0).unwrap(), 1.0);
        assert_eq!(normalized_log_distance(&[t(300.0, 0.0)], 300.0).unwrap(), 0.0);
        let v = normalized_log_distance(&[t(1.0, 3.0)], 300.0).unwrap();
        assert!((v - 0.878_546_734_090_401_3).abs() < 1e-12, "{v}");
        assert!(matches!(normalized_log_distance(&[t(1.0, 3.0)], 0.0), Err(MetricError::BadCap(_))));
        assert!(matches!(normalized_log_distance(&[t(-1.0, 3.0)], 10.0), Err(MetricError::BadTerm { .. })));
        assert!(matches!(normalized_log_distance(&[t(1.0, 30.0)], 10.0), Err(MetricError::AboveCap { .. })));
        assert_eq!(normalized_log_distance(&[], 10.0), Err(MetricError::Empty));
    }
}
