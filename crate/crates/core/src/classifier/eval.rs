use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{ClassifierModel, HEADS};
use super::train::Sample;
use crate::datasetgen::{AberrationType, AMPLITUDE_LEVELS};
use crate::error::{Error, Result};

pub const HEAD_NAMES: [&str; 3] = ["category", "type", "amplitude"];

/// Square count matrix, rows = truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth][pred] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let trace: u64 = (0..self.size()).map(|i| self.counts[i][i]).sum();
        trace as f64 / self.total() as f64
    }

    /// Mean per-class precision over all classes; a class never predicted
    /// contributes 0.
    pub fn macro_precision(&self) -> f64 {
        let k = self.size();
        let sum: f64 = (0..k)
            .map(|c| {
                let col: u64 = (0..k).map(|r| self.counts[r][c]).sum();
                if col == 0 {
                    0.0
                } else {
                    self.counts[c][c] as f64 / col as f64
                }
            })
            .sum();
        sum / k as f64
    }

    pub fn to_csv(&self, names: &[String]) -> String {
        let mut s = String::from("truth\\pred");
        for n in names {
            s.push(',');
            s += n;
        }
        s.push('\n');
        for (n, row) in names.iter().zip(&self.counts) {
            s += n;
            for c in row {
                s += &format!(",{c}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn class_names(head: usize) -> Vec<String> {
    match head {
        0 => vec!["Single".into(), "Mixed".into()],
        1 => AberrationType::ALL
            .iter()
            .map(|t| t.name().to_string())
            .collect(),
        _ => AMPLITUDE_LEVELS
            .iter()
            .map(|v| v.to_string())
            .chain(std::iter::once("None".to_string()))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub category: Confusion,
    pub aberration_type: Confusion,
    pub amplitude: Confusion,
    pub accuracy: [f64; 3],
    pub macro_precision: [f64; 3],
    /// Fraction of records whose predicted category disagrees with the
    /// category implied by the predicted type.
    pub head_inconsistency_rate: f64,
    pub records: usize,
}

impl EvalReport {
    pub fn matrices(&self) -> [&Confusion; 3] {
        [&self.category, &self.aberration_type, &self.amplitude]
    }

    pub fn summary_table(&self) -> String {
        let mut s = format!(
            "{:<10} {:>9} {:>16}\n",
            "head", "accuracy", "macro_precision"
        );
        for h in 0..3 {
            s += &format!(
                "{:<10} {:>9.4} {:>16.4}\n",
                HEAD_NAMES[h], self.accuracy[h], self.macro_precision[h]
            );
        }
        s += &format!(
            "head-inconsistency rate: {:.4} over {} records\n",
            self.head_inconsistency_rate, self.records
        );
        s
    }
}

/// Argmax predictions for every sample, in order.
pub fn predict(model: &ClassifierModel, samples: &[Sample]) -> Result<Vec<[usize; 3]>> {
    samples
        .par_iter()
        .map(|s| model.forward(&s.input).map(|l| l.argmax()))
        .collect()
}

pub fn evaluate(model: &ClassifierModel, samples: &[Sample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot evaluate an empty manifest".into(),
        ));
    }
    let preds = predict(model, samples)?;
    Ok(report_from_predictions(
        samples.iter().map(|s| s.label.class_indices()).zip(preds),
    ))
}

pub fn report_from_predictions(
    pairs: impl IntoIterator<Item = ([usize; 3], [usize; 3])>,
) -> EvalReport {
    let mut m = HEADS.map(Confusion::new);
    let (mut n, mut inconsistent) = (0usize, 0usize);
    for (truth, pred) in pairs {
        for h in 0..3 {
            m[h].add(truth[h], pred[h]);
        }
        let type_mixed = AberrationType::from_class_index(pred[1])
            .map(|t| t.category().class_index())
            .unwrap_or(1);
        if type_mixed != pred[0] {
            inconsistent += 1;
        }
        n += 1;
    }
    let accuracy = [0, 1, 2].map(|h| m[h].accuracy());
    let macro_precision = [0, 1, 2].map(|h| m[h].macro_precision());
    let [category, aberration_type, amplitude] = m;
    EvalReport {
        category,
        aberration_type,
        amplitude,
        accuracy,
        macro_precision,
        head_inconsistency_rate: inconsistent as f64 / n.max(1) as f64,
        records: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor() {
        let pairs: Vec<_> = (0..8)
            .map(|t| {
                let l = [usize::from(t >= 4), t, if t >= 4 { 8 } else { t }];
                (l, l)
            })
            .collect();
        let r = report_from_predictions(pairs);
        assert_eq!(r.accuracy, [1.0; 3]);
        for m in r.matrices() {
            assert_eq!(m.total(), 8);
            for (i, row) in m.counts.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    assert!(i == j || c == 0);
                }
            }
        }
        assert_eq!(r.head_inconsistency_rate, 0.0);
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let pairs = (0..10).map(|i| {
            let truth = if i % 2 == 0 { [0, 0, 0] } else { [1, 4, 8] };
            (truth, [0, 0, 0])
        });
        let r = report_from_predictions(pairs);
        assert_eq!(r.accuracy[0], 0.5);
        // Precision 0.5 on the predicted class, 0 on the other.
        assert_eq!(r.category.macro_precision(), 0.25);
        assert_eq!(r.category.total(), 10);
    }

    #[test]
    fn inconsistency_rate() {
        let r = report_from_predictions([([0, 0, 0], [1, 0, 0]), ([0, 0, 0], [0, 0, 0])]);
        assert_eq!(r.head_inconsistency_rate, 0.5);
    }

    #[test]
    fn csv_layout() {
        let mut c = Confusion::new(2);
        c.add(0, 1);
        let csv = c.to_csv(&class_names(0));
        assert_eq!(csv, "truth\\pred,Single,Mixed\nSingle,0,1\nMixed,0,0\n");
        assert_eq!(class_names(2).len(), 9);
        assert_eq!(class_names(2)[8], "None");
    }
}
