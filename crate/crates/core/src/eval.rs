//! Confusion matrices, percentage metrics and error listings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patch::{DatasetConfig, SampleId, SampleRecord};
use crate::road::TruthLabel;
use crate::verdict::{to_prediction, Prediction, PredictionPolicy, Verdict, VerdictLabel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("sample ids differ: {missing_prediction} without prediction, {missing_truth} without truth (first: {first})")]
    IdMismatch {
        missing_prediction: usize,
        missing_truth: usize,
        first: String,
    },
    #[error("no scored samples")]
    EmptyInput,
}

/// Counts with crosswalk as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, truth: TruthLabel, predicted: TruthLabel) {
        match (truth, predicted) {
            (TruthLabel::Crosswalk, TruthLabel::Crosswalk) => self.tp += 1,
            (TruthLabel::NotCrosswalk, TruthLabel::Crosswalk) => self.fp += 1,
            (TruthLabel::NotCrosswalk, TruthLabel::NotCrosswalk) => self.tn += 1,
            (TruthLabel::Crosswalk, TruthLabel::NotCrosswalk) => self.fn_ += 1,
        }
    }
}

/// Tallies predictions against truths. Both maps must cover the same ids;
/// excluded predictions are dropped before counting.
pub fn confusion(
    predictions: &BTreeMap<SampleId, Prediction>,
    truths: &BTreeMap<SampleId, TruthLabel>,
) -> Result<ConfusionMatrix, EvalError> {
    let no_pred: Vec<&SampleId> = truths.keys().filter(|k| !predictions.contains_key(*k)).collect();
    let no_truth: Vec<&SampleId> = predictions.keys().filter(|k| !truths.contains_key(*k)).collect();
    if !no_pred.is_empty() || !no_truth.is_empty() {
        let first = no_pred.first().or(no_truth.first()).map(|s| s.0.clone()).unwrap_or_default();
        return Err(EvalError::IdMismatch {
            missing_prediction: no_pred.len(),
            missing_truth: no_truth.len(),
            first,
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (id, p) in predictions {
        if let Some(label) = p.as_label() {
            cm.add(truths[id], label);
        }
    }
    Ok(cm)
}

/// `num / den` as a percentage rounded half-up to hundredths, in hundredths.
fn hundredths(num: u64, den: u64) -> u64 {
    let n = num as u128 * 10_000;
    let d = den as u128;
    ((2 * n + d) / (2 * d)) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<DatasetConfig>,
    pub matrix: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Metrics whose denominator was zero; they are reported as 0.
    pub undefined: Vec<String>,
    pub excluded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PredictionPolicy>,
}

/// Percentages to two decimals, rounded half-up from exact integer ratios.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyInput);
    }
    let mut undefined = Vec::new();
    let mut pct = |name: &str, num: u64, den: u64| {
        if den == 0 {
            undefined.push(name.to_string());
            0.0
        } else {
            hundredths(num, den) as f64 / 100.0
        }
    };
    let precision = pct("precision", cm.tp, cm.tp + cm.fp);
    let recall = pct("recall", cm.tp, cm.tp + cm.fn_);
    let f1 = pct("f1", 2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_);
    let accuracy = pct("accuracy", cm.tp + cm.tn, cm.total());
    Ok(MetricsReport {
        config: None,
        matrix: *cm,
        precision,
        recall,
        f1,
        accuracy,
        undefined,
        excluded: 0,
        policy: None,
    })
}

/// Plain-text table with the columns of the published results table.
pub fn metrics_table(reports: &[MetricsReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<15} | {:>13} | {:>10} | {:>12} | {:>12} | {:>3} | {:>3} | {:>3} | {:>3} | {:>8}",
        "Configuration", "Precision (%)", "Recall (%)", "F1-Score (%)", "Accuracy (%)", "TP", "FP", "TN", "FN", "Excluded"
    );
    let _ = writeln!(s, "{}", "-".repeat(113));
    for r in reports {
        let name = r.config.map_or("-", |c| c.display_name());
        let _ = writeln!(
            s,
            "{:<15} | {:>13.2} | {:>10.2} | {:>12.2} | {:>12.2} | {:>3} | {:>3} | {:>3} | {:>3} | {:>8}",
            name,
            r.precision,
            r.recall,
            r.f1,
            r.accuracy,
            r.matrix.tp,
            r.matrix.fp,
            r.matrix.tn,
            r.matrix.fn_,
            r.excluded
        );
    }
    s
}

/// One false positive or false negative with the model's rationale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misclassification {
    pub sample_id: SampleId,
    pub config: DatasetConfig,
    pub patch_paths: Vec<String>,
    pub truth: TruthLabel,
    pub prediction: Prediction,
    pub label: VerdictLabel,
    pub positive_signs: String,
    pub negative_signs: String,
    pub risks: String,
    pub crosswalk_line: String,
    pub reason: String,
}

/// Errors sorted by sample id. Samples without a verdict are skipped.
pub fn misclassification_report(
    config: DatasetConfig,
    samples: &[SampleRecord],
    verdicts: &BTreeMap<SampleId, Verdict>,
    policy: PredictionPolicy,
) -> Vec<Misclassification> {
    let mut out: Vec<Misclassification> = samples
        .iter()
        .filter_map(|s| {
            let v = verdicts.get(&s.sample_id)?;
            let prediction = to_prediction(v, policy);
            let wrong = prediction.as_label().is_some_and(|p| p != s.truth_label);
            wrong.then(|| Misclassification {
                sample_id: s.sample_id.clone(),
                config,
                patch_paths: s.images.iter().map(|i| i.path.clone()).collect(),
                truth: s.truth_label,
                prediction,
                label: v.label,
                positive_signs: v.positive_signs.clone(),
                negative_signs: v.negative_signs.clone(),
                risks: v.risks.clone(),
                crosswalk_line: v.crosswalk_line.clone(),
                reason: v.reason.clone(),
            })
        })
        .collect();
    out.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    out
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).expect("report rows serialize"));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn id(i: usize) -> SampleId {
        SampleId(format!("{i:016x}"))
    }

    #[test]
    fn perfect_two_by_two() {
        let truths: BTreeMap<_, _> = [
            (id(0), TruthLabel::Crosswalk),
            (id(1), TruthLabel::Crosswalk),
            (id(2), TruthLabel::NotCrosswalk),
            (id(3), TruthLabel::NotCrosswalk),
        ]
        .into();
        let preds = truths
            .iter()
            .map(|(k, t)| {
                let p = match t {
                    TruthLabel::Crosswalk => Prediction::Crosswalk,
                    TruthLabel::NotCrosswalk => Prediction::NotCrosswalk,
                };
                (k.clone(), p)
            })
            .collect();
        assert_eq!(confusion(&preds, &truths).unwrap(), ConfusionMatrix::new(2, 0, 2, 0));
    }

    #[test]
    fn always_yes_on_balanced_set() {
        let truths: BTreeMap<_, _> = (0..200)
            .map(|i| (id(i), if i < 100 { TruthLabel::Crosswalk } else { TruthLabel::NotCrosswalk }))
            .collect();
        let preds = truths.keys().map(|k| (k.clone(), Prediction::Crosswalk)).collect();
        assert_eq!(confusion(&preds, &truths).unwrap(), ConfusionMatrix::new(100, 100, 0, 0));
    }

    #[test]
    fn random_cases_match_a_direct_tally() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut truths = BTreeMap::new();
            let mut preds = BTreeMap::new();
            let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
            for i in 0..20 {
                let t = rng.random_bool(0.5);
                let p = rng.random_range(0..3);
                truths.insert(id(i), if t { TruthLabel::Crosswalk } else { TruthLabel::NotCrosswalk });
                preds.insert(id(i), [Prediction::Crosswalk, Prediction::NotCrosswalk, Prediction::Excluded][p]);
                match (t, p) {
                    (true, 0) => tp += 1,
                    (false, 0) => fp += 1,
                    (false, 1) => tn += 1,
                    (true, 1) => fn_ += 1,
                    _ => {}
                }
            }
            assert_eq!(confusion(&preds, &truths).unwrap(), ConfusionMatrix::new(tp, fp, tn, fn_));
        }
    }

    #[test]
    fn mismatched_ids() {
        let truths: BTreeMap<_, _> = [(id(0), TruthLabel::Crosswalk)].into();
        let preds: BTreeMap<_, _> = [(id(1), Prediction::Crosswalk)].into();
        assert!(matches!(
            confusion(&preds, &truths),
            Err(EvalError::IdMismatch { missing_prediction: 1, missing_truth: 1, .. })
        ));
    }

    #[test]
    fn published_rows() {
        let rows = [
            ((100, 47, 53, 0), (68.03, 100.0, 80.97, 76.5)),
            ((35, 7, 93, 65), (83.33, 35.0, 49.30, 64.0)),
            ((100, 24, 76, 0), (80.65, 100.0, 89.29, 88.0)),
            ((99, 4, 96, 1), (96.12, 99.0, 97.54, 97.5)),
        ];
        for ((tp, fp, tn, fn_), (p, r, f, a)) in rows {
            let m = metrics(&ConfusionMatrix::new(tp, fp, tn, fn_)).unwrap();
            assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (p, r, f, a));
            assert!(m.undefined.is_empty());
        }
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = metrics(&ConfusionMatrix::new(0, 0, 10, 0)).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.accuracy, 100.0);
        assert_eq!(m.undefined, vec!["precision", "recall", "f1"]);
        assert_eq!(metrics(&ConfusionMatrix::default()), Err(EvalError::EmptyInput));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(hundredths(1, 8), 1250);
        assert_eq!(hundredths(1, 3), 3333);
        assert_eq!(hundredths(2, 3), 6667);
        assert_eq!(hundredths(1, 20_000), 1);
        assert_eq!(hundredths(1, 40_000), 0);
    }

    #[test]
    fn f1_is_the_harmonic_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let cm = ConfusionMatrix::new(
                rng.random_range(1..200),
                rng.random_range(0..200),
                rng.random_range(0..200),
                rng.random_range(0..200),
            );
            let m = metrics(&cm).unwrap();
            let harmonic = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            assert!((harmonic - m.f1).abs() <= 0.05, "{cm:?}");
        }
    }
}
