//! Classification metrics: accuracy and confusion counts, plus the age
//! protocol pair (mean absolute error and the cumulative score curve).

use std::io::Write;

use serde::Serialize;

use crate::deepmodel::DeepBoostModel;
use crate::error::{Error, Result};
use crate::imagekit::LabeledDataset;
use crate::par;

/// Per-class precision/recall (0 when the denominator is empty).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub class_names: Vec<String>,
    /// mean absolute error in label units, when class names are numeric
    pub mae: Option<f64>,
    /// cumulative score (percent) at integer error levels `0..=l_max`
    pub cum_scores: Option<Vec<f64>>,
}

/// trace / total of a confusion matrix.
pub fn accuracy(confusion: &[Vec<usize>]) -> Result<f64> {
    let total: usize = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::EmptyInput("confusion matrix has no counts"));
    }
    let trace: usize = confusion.iter().enumerate().map(|(i, row)| row[i]).sum();
    Ok(trace as f64 / total as f64)
}

/// K x K counts from 1-based true/predicted labels.
pub fn confusion_matrix(
    true_labels: &[usize],
    predicted: &[usize],
    num_classes: usize,
) -> Result<Vec<Vec<usize>>> {
    if true_labels.len() != predicted.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true labels vs {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        if t == 0 || t > num_classes || p == 0 || p > num_classes {
            return Err(Error::DataFormat(format!(
                "label pair ({t}, {p}) outside 1..={num_classes}"
            )));
        }
        confusion[t - 1][p - 1] += 1;
    }
    Ok(confusion)
}

/// Mean absolute error `(1/N) sum |a_i - predicted_i|`.
pub fn mae(true_values: &[f64], predicted: &[f64]) -> Result<f64> {
    if true_values.len() != predicted.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true values vs {} predictions",
            true_values.len(),
            predicted.len()
        )));
    }
    if true_values.is_empty() {
        return Err(Error::EmptyInput("mae needs >= 1 sample"));
    }
    Ok(true_values
        .iter()
        .zip(predicted)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / true_values.len() as f64)
}

/// Percentage of absolute errors at most `level`.
pub fn cum_score(errors: &[f64], level: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("cumulative score needs >= 1 error"));
    }
    let hits = errors.iter().filter(|&&e| e <= level).count();
    Ok(hits as f64 / errors.len() as f64 * 100.0)
}

/// Cumulative scores at integer levels `0..=l_max`.
pub fn cum_score_curve(errors: &[f64], l_max: usize) -> Result<Vec<f64>> {
    (0..=l_max).map(|l| cum_score(errors, l as f64)).collect()
}

/// Predicts every dataset image and assembles the report. When every class
/// name parses as a number the labels are treated as ages: MAE and the
/// cumulative curve (out to at least error level 10) are filled in.
pub fn evaluate_model(model: &DeepBoostModel, dataset: &LabeledDataset) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("evaluation dataset is empty"));
    }
    let predictions: Result<Vec<usize>> = par::map_slice(&dataset.images, |img| {
        model.predict(img).map(|(class, _)| class)
    })
    .into_iter()
    .collect();
    let predictions = predictions?;
    report_from_predictions(&dataset.labels, &predictions, &model.class_names)
}

/// Builds the report from already-computed predictions.
pub fn report_from_predictions(
    true_labels: &[usize],
    predictions: &[usize],
    class_names: &[String],
) -> Result<EvalReport> {
    let k = class_names.len();
    let confusion = confusion_matrix(true_labels, predictions, k)?;
    let acc = accuracy(&confusion)?;
    let per_class = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let row: usize = confusion[c].iter().sum();
            let col: usize = confusion.iter().map(|r| r[c]).sum();
            ClassMetrics {
                class: class_names[c].clone(),
                precision: if col > 0 { tp as f64 / col as f64 } else { 0.0 },
                recall: if row > 0 { tp as f64 / row as f64 } else { 0.0 },
            }
        })
        .collect();

    let numeric: Option<Vec<f64>> = class_names
        .iter()
        .map(|n| n.trim().parse::<f64>().ok())
        .collect();
    let (mae_value, cum) = if let Some(values) = numeric {
        let truth: Vec<f64> = true_labels.iter().map(|&l| values[l - 1]).collect();
        let predicted: Vec<f64> = predictions.iter().map(|&l| values[l - 1]).collect();
        let errors: Vec<f64> = truth
            .iter()
            .zip(&predicted)
            .map(|(a, b)| (a - b).abs())
            .collect();
        let max_err = errors.iter().cloned().fold(0.0, f64::max);
        let l_max = (max_err.ceil() as usize).max(10);
        (
            Some(mae(&truth, &predicted)?),
            Some(cum_score_curve(&errors, l_max)?),
        )
    } else {
        (None, None)
    };

    Ok(EvalReport {
        accuracy: acc,
        confusion,
        per_class,
        class_names: class_names.to_vec(),
        mae: mae_value,
        cum_scores: cum,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `level,cum_score_percent` rows for the cumulative curve.
    pub fn write_cum_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "level,cum_score_percent")?;
        if let Some(curve) = &self.cum_scores {
            for (level, value) in curve.iter().enumerate() {
                writeln!(out, "{level},{value}")?;
            }
        }
        Ok(())
    }

    pub fn write_confusion_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "true\\predicted,{}", self.class_names.join(","))?;
        for (row, name) in self.confusion.iter().zip(&self.class_names) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{}", name, cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_confusion_is_perfect() {
        let confusion = vec![vec![5, 0], vec![0, 7]];
        assert_eq!(accuracy(&confusion).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_hand_example() {
        let confusion = vec![vec![3, 1], vec![1, 3]];
        assert!((accuracy(&confusion).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn empty_confusion_is_an_error() {
        assert!(accuracy(&[vec![0, 0], vec![0, 0]]).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mae(&[20.0, 30.0], &[22.0, 27.0]).unwrap() - 2.5).abs() < 1e-12);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn mae_translation_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..10).map(|_| rng.gen_range(10.0..60.0)).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.gen_range(10.0..60.0)).collect();
        let base = mae(&a, &b).unwrap();
        let shift = 7.3;
        let a2: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let b2: Vec<f64> = b.iter().map(|v| v + shift).collect();
        assert!((mae(&a2, &b2).unwrap() - base).abs() < 1e-9);
        let a3: Vec<f64> = a.iter().map(|v| v * 2.0).collect();
        let b3: Vec<f64> = b.iter().map(|v| v * 2.0).collect();
        assert!((mae(&a3, &b3).unwrap() - 2.0 * base).abs() < 1e-9);
    }

    #[test]
    fn cum_score_examples() {
        assert_eq!(cum_score(&[0.0, 0.0], 0.0).unwrap(), 100.0);
        assert_eq!(cum_score(&[0.0, 1.0, 3.0, 7.0], 1.0).unwrap(), 50.0);
        assert!(cum_score(&[], 1.0).is_err());
    }

    #[test]
    fn cum_curve_is_monotone_and_ends_at_100() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let errors: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..9.0)).collect();
        let max_err = errors.iter().cloned().fold(0.0, f64::max);
        let curve = cum_score_curve(&errors, max_err.ceil() as usize).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        assert_eq!(*curve.last().unwrap(), 100.0);
    }

    #[test]
    fn accuracy_is_permutation_invariant() {
        let truth = vec![1, 2, 1, 2, 1];
        let pred = vec![1, 2, 2, 2, 1];
        let names = vec!["a".to_string(), "b".to_string()];
        let r1 = report_from_predictions(&truth, &pred, &names).unwrap();
        let perm = [4, 2, 0, 1, 3];
        let truth2: Vec<usize> = perm.iter().map(|&i| truth[i]).collect();
        let pred2: Vec<usize> = perm.iter().map(|&i| pred[i]).collect();
        let r2 = report_from_predictions(&truth2, &pred2, &names).unwrap();
        assert_eq!(r1.accuracy, r2.accuracy);
        assert_eq!(r1.confusion, r2.confusion);
        assert!(r1.accuracy >= 0.0 && r1.accuracy <= 1.0);
    }

    #[test]
    fn numeric_class_names_switch_on_the_age_metrics() {
        let names: Vec<String> = vec!["20".into(), "30".into()];
        let truth = vec![1, 2];
        let pred = vec![2, 2];
        let report = report_from_predictions(&truth, &pred, &names).unwrap();
        assert!((report.mae.unwrap() - 5.0).abs() < 1e-12);
        let curve = report.cum_scores.unwrap();
        assert_eq!(curve.len(), 11); // levels 0..=10
        assert_eq!(curve[9], 50.0);
        assert_eq!(curve[10], 100.0);

        let names: Vec<String> = vec!["cat".into(), "dog".into()];
        let report = report_from_predictions(&truth, &pred, &names).unwrap();
        assert!(report.mae.is_none() && report.cum_scores.is_none());
    }

    #[test]
    fn report_exports() {
        let names = vec!["17".to_string(), "19".to_string()];
        let report = report_from_predictions(&[1, 2, 2], &[1, 2, 1], &names).unwrap();
        let json = report.to_json();
        assert!(json.contains("\"accuracy\""));
        let mut buf = Vec::new();
        report.write_cum_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("level,cum_score_percent"));
        let mut buf = Vec::new();
        report.write_confusion_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("17,"));
    }
}
