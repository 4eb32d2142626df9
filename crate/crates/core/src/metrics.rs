//! Top-1 accuracy, per-class and macro F1, and the confusion matrix.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scene::{Label, NUM_CLASSES};

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Fraction of `class` truths predicted correctly, `None` without support.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let s = self.support(class);
        (s > 0).then(|| self.counts[class][class] as f64 / s as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for l in Label::ALL {
            out.push(',');
            out.push_str(l.as_str());
        }
        out.push('\n');
        for (l, row) in Label::ALL.iter().zip(&self.counts) {
            out.push_str(l.as_str());
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let width = Label::ALL.iter().map(|l| l.as_str().len()).max().unwrap_or(0);
        let mut out = format!("{:>width$}", "true \\ pred");
        for l in Label::ALL {
            let _ = write!(out, " {:>width$}", l.as_str());
        }
        out.push('\n');
        for (l, row) in Label::ALL.iter().zip(&self.counts) {
            let _ = write!(out, "{:>width$}", l.as_str());
            for c in row {
                let _ = write!(out, " {c:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Unweighted mean of per-class F1 over classes present in the truths.
    pub macro_f1: f64,
    /// Equals accuracy for single-label data; reported for completeness.
    pub micro_f1: f64,
    pub per_class_f1: [f64; NUM_CLASSES],
    pub confusion: ConfusionMatrix,
}

impl Evaluation {
    /// CSV with one row per class and summary rows for accuracy, macro and micro F1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,support\n");
        for (k, l) in Label::ALL.iter().enumerate() {
            let _ = writeln!(out, "f1_{},{},{}", l.as_str(), self.per_class_f1[k], self.confusion.support(k));
        }
        let n = self.confusion.total();
        let _ = writeln!(out, "accuracy,{},{n}", self.accuracy);
        let _ = writeln!(out, "macro_f1,{},{n}", self.macro_f1);
        let _ = writeln!(out, "micro_f1,{},{n}", self.micro_f1);
        out
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "accuracy  {:.4}", self.accuracy);
        let _ = writeln!(out, "macro-F1  {:.4}", self.macro_f1);
        let _ = writeln!(out, "micro-F1  {:.4}", self.micro_f1);
        for (k, l) in Label::ALL.iter().enumerate() {
            let _ = writeln!(out, "  F1 {:<16} {:.4}  (n={})", l.as_str(), self.per_class_f1[k], self.confusion.support(k));
        }
        out.push('\n');
        out.push_str(&self.confusion.to_table());
        out
    }
}

/// Scores predicted class indices against true class indices.
pub fn evaluate(predictions: &[usize], truths: &[usize]) -> Result<Evaluation> {
    if predictions.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let mut confusion = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= NUM_CLASSES || t >= NUM_CLASSES {
            return Err(Error::invalid(format!("class index out of range ({t}, {p})")));
        }
        confusion.counts[t][p] += 1;
    }
    let mut per_class_f1 = [0.0; NUM_CLASSES];
    let mut present = 0usize;
    let mut f1_sum = 0.0;
    for (k, f1) in per_class_f1.iter_mut().enumerate() {
        // 2PR/(P+R) written over counts: 2TP / (2TP + FP + FN)
        let tp = confusion.counts[k][k];
        let fp = confusion.predicted(k) - tp;
        let fn_ = confusion.support(k) - tp;
        let denom = 2 * tp + fp + fn_;
        *f1 = if tp == 0 { 0.0 } else { (2 * tp) as f64 / denom as f64 };
        if confusion.support(k) > 0 {
            present += 1;
            f1_sum += *f1;
        }
    }
    let accuracy = confusion.correct() as f64 / confusion.total() as f64;
    Ok(Evaluation {
        accuracy,
        macro_f1: f1_sum / present as f64,
        micro_f1: accuracy,
        per_class_f1,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn perfect_predictions() {
        let truths: Vec<usize> = (0..10).map(|i| i % 5).collect();
        let e = evaluate(&truths, &truths).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert_eq!(e.macro_f1, 1.0);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(e.confusion.counts[i][j] > 0, i == j);
            }
        }
    }

    #[test]
    fn constant_predictor() {
        let truths: Vec<usize> = (0..100).map(|i| i % 5).collect();
        let preds = vec![3; 100];
        let e = evaluate(&preds, &truths).unwrap();
        assert_eq!(e.accuracy, 0.2);
        assert_eq!(e.per_class_f1[3], 1.0 / 3.0);
        assert_eq!(e.macro_f1, 1.0 / 15.0);
    }

    #[test]
    fn hand_tally() {
        let mut rng = Rng::new(21);
        let truths: Vec<usize> = (0..20).map(|_| rng.below(5)).collect();
        let preds: Vec<usize> = (0..20).map(|_| rng.below(5)).collect();
        let e = evaluate(&preds, &truths).unwrap();
        for t in 0..5 {
            for p in 0..5 {
                let n = truths.iter().zip(&preds).filter(|&(&a, &b)| a == t && b == p).count();
                assert_eq!(e.confusion.counts[t][p], n as u64);
            }
        }
    }

    #[test]
    fn absent_classes_excluded_from_macro() {
        let e = evaluate(&[0, 0, 1], &[0, 0, 1]).unwrap();
        assert_eq!(e.macro_f1, 1.0);
        let e = evaluate(&[0, 1, 1], &[0, 0, 1]).unwrap();
        assert!(e.macro_f1 > 0.0 && e.macro_f1 < 1.0);
    }

    #[test]
    fn errors() {
        assert!(evaluate(&[0], &[0, 1]).is_err());
        assert!(evaluate(&[], &[]).is_err());
        assert!(evaluate(&[7], &[0]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_class_plus_summaries() {
        let e = evaluate(&[0, 1], &[0, 1]).unwrap();
        assert_eq!(e.to_csv().lines().count(), 1 + NUM_CLASSES + 3);
        assert_eq!(e.confusion.to_csv().lines().count(), 1 + NUM_CLASSES);
        assert!(e.report().contains("macro-F1"));
    }
}
