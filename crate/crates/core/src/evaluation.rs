//! Confusion matrices, precision/recall/F1 and model ranking.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

type MetricGetter = fn(&MetricSet) -> f64;

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<Label>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(classes: Vec<Label>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = classes.len();
        if counts.len() != c || counts.iter().any(|r| r.len() != c) {
            return Err(Error::LengthMismatch(format!("counts are not {c}x{c}")));
        }
        check_unique(&classes)?;
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Samples whose true class is `classes[i]`.
    pub fn support(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    /// Samples predicted as `classes[j]`.
    pub fn predicted(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    /// Micro-averaged precision: Σ TP / Σ (TP + FP).
    pub fn micro_precision(&self) -> f64 {
        let tp = self.trace() as f64;
        let denom: u64 = (0..self.classes.len()).map(|j| self.predicted(j)).sum();
        tp / denom as f64
    }

    /// Micro-averaged recall: Σ TP / Σ (TP + FN).
    pub fn micro_recall(&self) -> f64 {
        let tp = self.trace() as f64;
        let denom: u64 = (0..self.classes.len()).map(|i| self.support(i)).sum();
        tp / denom as f64
    }
}

fn check_unique(classes: &[Label]) -> Result<()> {
    let mut sorted = classes.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParam("duplicate class in class list".into()));
    }
    Ok(())
}

pub fn confusion_matrix(
    y_true: &[Label],
    y_pred: &[Label],
    classes: &[Label],
) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    check_unique(classes)?;
    let index = |l: Label| {
        classes
            .iter()
            .position(|&c| c == l)
            .ok_or(Error::UnknownLabel(l))
    };
    let c = classes.len();
    let mut counts = vec![vec![0u64; c]; c];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

/// Sorted union of the labels seen in either sequence.
pub fn observed_classes(y_true: &[Label], y_pred: &[Label]) -> Vec<Label> {
    let mut classes: Vec<Label> = y_true.iter().chain(y_pred).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    classes
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Weighted,
}

impl Averaging {
    pub fn other(self) -> Averaging {
        match self {
            Averaging::Macro => Averaging::Weighted,
            Averaging::Weighted => Averaging::Macro,
        }
    }
}

impl std::str::FromStr for Averaging {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macro" => Ok(Averaging::Macro),
            "weighted" => Ok(Averaging::Weighted),
            other => Err(Error::InvalidParam(format!("unknown averaging `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
    #[serde(default)]
    pub per_class: Vec<ClassMetrics>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl MetricSet {
    /// Summary figures only, e.g. values quoted from elsewhere.
    pub fn summary(accuracy: f64, precision: f64, recall: f64, f1: f64) -> Self {
        MetricSet {
            accuracy,
            precision,
            recall,
            f1,
            averaging: Averaging::Macro,
            per_class: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

fn ratio(num: u64, den: u64, what: &str, class: Label, warnings: &mut Vec<String>) -> f64 {
    if den == 0 {
        warnings.push(format!(
            "{what} is undefined for class {class}; reported as 0"
        ));
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy plus macro- or support-weighted precision, recall and F1.
///
/// A per-class value with a zero denominator counts as 0 and adds a
/// warning. Macro F1 is the mean of per-class F1 scores.
pub fn metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MetricSet> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidParam("confusion matrix is empty".into()));
    }
    let mut warnings = Vec::new();
    let mut per_class = Vec::with_capacity(cm.classes.len());
    for (i, &class) in cm.classes.iter().enumerate() {
        let tp = cm.counts[i][i];
        let precision = ratio(tp, cm.predicted(i), "precision", class, &mut warnings);
        let recall = ratio(tp, cm.support(i), "recall", class, &mut warnings);
        let f1 = if precision + recall == 0.0 {
            warnings.push(format!("f1 is undefined for class {class}; reported as 0"));
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            class,
            precision,
            recall,
            f1,
            support: cm.support(i),
        });
    }

    let weights: Vec<f64> = match averaging {
        Averaging::Macro => vec![1.0 / per_class.len() as f64; per_class.len()],
        Averaging::Weighted => per_class
            .iter()
            .map(|c| c.support as f64 / total as f64)
            .collect(),
    };
    let avg = |f: fn(&ClassMetrics) -> f64| -> f64 {
        per_class
            .iter()
            .zip(&weights)
            .map(|(c, w)| f(c) * w)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    };

    Ok(MetricSet {
        accuracy: cm.trace() as f64 / total as f64,
        precision: avg(|c| c.precision),
        recall: avg(|c| c.recall),
        f1: avg(|c| c.f1),
        averaging,
        per_class,
        warnings,
    })
}

/// Accuracies closer than this are treated as tied when ranking.
pub const ACCURACY_TIE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub order: Vec<String>,
    pub winner: String,
}

/// Orders models by accuracy, breaking accuracy ties by F1, then
/// precision, then name.
pub fn rank_models(entries: &[(String, MetricSet)]) -> Result<Ranking> {
    if entries.is_empty() {
        return Err(Error::InvalidParam("nothing to rank".into()));
    }
    let mut by_accuracy: Vec<&(String, MetricSet)> = entries.iter().collect();
    by_accuracy.sort_by(|a, b| {
        b.1.accuracy
            .total_cmp(&a.1.accuracy)
            .then_with(|| a.0.cmp(&b.0))
    });

    // Group runs of accuracies within the tolerance of the group's best.
    let mut keyed = Vec::with_capacity(entries.len());
    let mut group = 0usize;
    let mut anchor = by_accuracy[0].1.accuracy;
    for e in by_accuracy {
        if anchor - e.1.accuracy > ACCURACY_TIE_TOLERANCE {
            group += 1;
            anchor = e.1.accuracy;
        }
        keyed.push((group, e));
    }
    keyed.sort_by(|(ga, a), (gb, b)| {
        ga.cmp(gb)
            .then_with(|| b.1.f1.total_cmp(&a.1.f1))
            .then_with(|| b.1.precision.total_cmp(&a.1.precision))
            .then_with(|| a.0.cmp(&b.0))
    });
    let order: Vec<String> = keyed.into_iter().map(|(_, e)| e.0.clone()).collect();
    Ok(Ranking {
        winner: order[0].clone(),
        order,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub name: String,
    pub model_type: String,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    /// The same figures under the other averaging mode.
    pub alternate: MetricSet,
}

/// Run parameters echoed into every report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub data: String,
    pub n_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    pub n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stratified: Option<bool>,
    pub averaging: Averaging,
    pub features: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub echo: RunEcho,
    pub models: Vec<ModelEvaluation>,
    pub ranking: Vec<String>,
    pub winner: String,
}

impl EvaluationReport {
    pub fn build(echo: RunEcho, models: Vec<ModelEvaluation>) -> Result<Self> {
        let entries: Vec<(String, MetricSet)> = models
            .iter()
            .map(|m| (m.name.clone(), m.metrics.clone()))
            .collect();
        let ranking = rank_models(&entries)?;
        Ok(EvaluationReport {
            echo,
            models,
            ranking: ranking.order,
            winner: ranking.winner,
        })
    }

    pub fn model(&self, name: &str) -> Option<&ModelEvaluation> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text tables: one per metric, then confusion matrices.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let e = &self.echo;
        let _ = writeln!(out, "Evaluation report");
        let _ = writeln!(out, "=================");
        if let Some(seed) = e.seed {
            let _ = writeln!(out, "seed:          {seed}");
        }
        if let Some(h) = &e.config_hash {
            let _ = writeln!(out, "config hash:   {h}");
        }
        let _ = writeln!(out, "data:          {}", e.data);
        let _ = writeln!(out, "rows:          {}", e.n_rows);
        if let Some(n) = e.n_train {
            let _ = writeln!(out, "train rows:    {n}");
        }
        let _ = writeln!(out, "test rows:     {}", e.n_test);
        if let Some(f) = e.test_fraction {
            let _ = writeln!(out, "test fraction: {f}");
        }
        if let Some(s) = e.stratified {
            let _ = writeln!(out, "stratified:    {s}");
        }
        let _ = writeln!(out, "averaging:     {}", averaging_name(e.averaging));
        let _ = writeln!(out, "features:      {}", e.features.join(", "));

        let width = self
            .models
            .iter()
            .map(|m| m.name.len())
            .max()
            .unwrap_or(0)
            .max(9);
        let tables: [(&str, MetricGetter); 4] = [
            ("ACCURACY", |m| m.accuracy),
            ("PRECISION", |m| m.precision),
            ("RECALL", |m| m.recall),
            ("F1 SCORE", |m| m.f1),
        ];
        for (title, get) in tables {
            let _ = writeln!(out, "\n{title}");
            let _ = writeln!(out, "{:<width$}  {:>8}", "Algorithm", "Score");
            let _ = writeln!(out, "{}", "-".repeat(width + 10));
            for m in &self.models {
                let _ = writeln!(out, "{:<width$}  {:>7.2}%", m.name, 100.0 * get(&m.metrics));
            }
        }

        let alt = self
            .models
            .first()
            .map(|m| m.alternate.averaging)
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "\nSUMMARY ({} / {})",
            averaging_name(e.averaging),
            averaging_name(alt)
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>17}  {:>17}  {:>17}",
            "Algorithm", "Accuracy", "Precision", "Recall", "F1"
        );
        for m in &self.models {
            let (a, b) = (&m.metrics, &m.alternate);
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.2}%  {:>7.2}% / {:>6.2}%  {:>7.2}% / {:>6.2}%  {:>7.2}% / {:>6.2}%",
                m.name,
                100.0 * a.accuracy,
                100.0 * a.precision,
                100.0 * b.precision,
                100.0 * a.recall,
                100.0 * b.recall,
                100.0 * a.f1,
                100.0 * b.f1,
            );
        }

        for m in &self.models {
            let _ = writeln!(
                out,
                "\nCONFUSION MATRIX: {} (rows = true, columns = predicted)",
                m.name
            );
            out.push_str(&confusion_text(&m.confusion));
            for w in &m.metrics.warnings {
                let _ = writeln!(out, "  warning: {w}");
            }
        }

        let _ = writeln!(out, "\nRANKING (accuracy, then F1, then precision)");
        for (i, name) in self.ranking.iter().enumerate() {
            let _ = writeln!(out, "{}. {name}", i + 1);
        }
        let _ = writeln!(out, "\nwinner: {}", self.winner);
        out
    }

    /// One CSV document per table, keyed by file name.
    pub fn to_csv(&self) -> Vec<(String, String)> {
        let mut files = Vec::new();
        let tables: [(&str, MetricGetter); 4] = [
            ("accuracy", |m| m.accuracy),
            ("precision", |m| m.precision),
            ("recall", |m| m.recall),
            ("f1", |m| m.f1),
        ];
        for (name, get) in tables {
            let mut s = format!("algorithm,{name}\n");
            for m in &self.models {
                let _ = writeln!(s, "{},{}", m.name, get(&m.metrics));
            }
            files.push((format!("{name}.csv"), s));
        }

        let mut s = String::from("algorithm,averaging,accuracy,precision,recall,f1,rank\n");
        for m in &self.models {
            let rank = self
                .ranking
                .iter()
                .position(|n| *n == m.name)
                .map_or(0, |r| r + 1);
            for set in [&m.metrics, &m.alternate] {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{rank}",
                    m.name,
                    averaging_name(set.averaging),
                    set.accuracy,
                    set.precision,
                    set.recall,
                    set.f1
                );
            }
        }
        files.push(("metrics.csv".into(), s));

        for m in &self.models {
            let cm = &m.confusion;
            let mut s = String::from("true\\predicted");
            for c in cm.classes() {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
            for (i, c) in cm.classes().iter().enumerate() {
                let _ = write!(s, "{c}");
                for v in &cm.counts()[i] {
                    let _ = write!(s, ",{v}");
                }
                s.push('\n');
            }
            files.push((format!("confusion_{}.csv", m.model_type), s));
        }
        files
    }
}

fn averaging_name(a: Averaging) -> &'static str {
    match a {
        Averaging::Macro => "macro",
        Averaging::Weighted => "weighted",
    }
}

fn confusion_text(cm: &ConfusionMatrix) -> String {
    let cell = cm
        .counts()
        .iter()
        .flatten()
        .map(|v| v.to_string().len())
        .chain(cm.classes().iter().map(|c| c.to_string().len()))
        .max()
        .unwrap_or(1)
        .max(3);
    let mut s = format!("{:>cell$} |", "");
    for c in cm.classes() {
        let _ = write!(s, " {c:>cell$}");
    }
    s.push('\n');
    let _ = writeln!(
        s,
        "{}",
        "-".repeat((cell + 1) * (cm.classes().len() + 1) + 1)
    );
    for (i, c) in cm.classes().iter().enumerate() {
        let _ = write!(s, "{c:>cell$} |");
        for v in &cm.counts()[i] {
            let _ = write!(s, " {v:>cell$}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> ConfusionMatrix {
        confusion_matrix(&[0, 1, 1], &[0, 1, 0], &[0, 1]).unwrap()
    }

    #[test]
    fn hand_counted_matrix() {
        assert_eq!(worked().counts(), &[vec![1, 0], vec![1, 1]]);
        let perfect = confusion_matrix(&[2, 0, 1, 2], &[2, 0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(perfect.trace(), perfect.total());
        let with_empty = confusion_matrix(&[0, 0], &[0, 0], &[0, 5]).unwrap();
        assert_eq!(with_empty.counts(), &[vec![2, 0], vec![0, 0]]);
    }

    #[test]
    fn matrix_errors() {
        assert!(matches!(
            confusion_matrix(&[0], &[0, 1], &[0, 1]),
            Err(Error::LengthMismatch(_))
        ));
        assert!(matches!(
            confusion_matrix(&[3], &[0], &[0, 1]),
            Err(Error::UnknownLabel(3))
        ));
    }

    #[test]
    fn worked_example_metrics() {
        let cm = worked();
        let m = metrics(&cm, Averaging::Macro).unwrap();
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-9);
        assert!((m.precision - 0.75).abs() < 1e-9);
        assert!((m.recall - 0.75).abs() < 1e-9);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-9);
        // Macro F1 is not the harmonic mean of macro P and R.
        let harmonic = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        assert!((harmonic - 0.75).abs() < 1e-9);
        for c in &m.per_class {
            let h = 2.0 * c.precision * c.recall / (c.precision + c.recall);
            assert!((c.f1 - h).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_and_single_class() {
        let cm = confusion_matrix(&[0, 1, 2], &[0, 1, 2], &[0, 1, 2]).unwrap();
        let m = metrics(&cm, Averaging::Macro).unwrap();
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        let cm = confusion_matrix(&[4, 4], &[4, 4], &[4]).unwrap();
        let m = metrics(&cm, Averaging::Macro).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(
            (
                m.per_class[0].precision,
                m.per_class[0].recall,
                m.per_class[0].f1
            ),
            (1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn undefined_precision_warns() {
        let cm = confusion_matrix(&[0, 1], &[0, 0], &[0, 1]).unwrap();
        let m = metrics(&cm, Averaging::Macro).unwrap();
        assert_eq!(m.per_class[1].precision, 0.0);
        assert!(m.warnings.iter().any(|w| w.contains("precision")));
        let empty = ConfusionMatrix::from_counts(vec![0], vec![vec![0]]).unwrap();
        assert!(metrics(&empty, Averaging::Macro).is_err());
    }

    #[test]
    fn weighted_uses_support() {
        let cm = worked();
        let m = metrics(&cm, Averaging::Weighted).unwrap();
        // class 0: P=0.5 R=1 support 1; class 1: P=1 R=0.5 support 2
        assert!((m.precision - (0.5 / 3.0 + 2.0 / 3.0)).abs() < 1e-12);
        assert!((m.recall - (1.0 / 3.0 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn ranking_breaks_accuracy_tie_with_f1() {
        let entries = vec![
            (
                "Naive Bayes".to_string(),
                MetricSet::summary(0.9085, 0.9170, 0.9524, 0.9219),
            ),
            (
                "Decision Tree".to_string(),
                MetricSet::summary(0.9869, 0.9755, 0.9880, 0.9808),
            ),
            (
                "Random Forest".to_string(),
                MetricSet::summary(0.9869, 0.9910, 0.9795, 0.9848),
            ),
            (
                "K-Nearest Neighbors".to_string(),
                MetricSet::summary(0.9412, 0.9264, 0.9188, 0.9210),
            ),
        ];
        let r = rank_models(&entries).unwrap();
        assert_eq!(r.winner, "Random Forest");
        assert_eq!(
            r.order,
            [
                "Random Forest",
                "Decision Tree",
                "K-Nearest Neighbors",
                "Naive Bayes"
            ]
        );
    }

    #[test]
    fn ranking_edge_cases() {
        let one = vec![("solo".to_string(), MetricSet::summary(0.1, 0.2, 0.3, 0.4))];
        assert_eq!(rank_models(&one).unwrap().winner, "solo");
        let same = MetricSet::summary(0.5, 0.5, 0.5, 0.5);
        let two = vec![
            ("zeta".to_string(), same.clone()),
            ("alpha".to_string(), same),
        ];
        assert_eq!(rank_models(&two).unwrap().winner, "alpha");
        assert!(rank_models(&[]).is_err());
        // Within tolerance counts as a tie, so F1 decides.
        let near = vec![
            (
                "a".to_string(),
                MetricSet::summary(0.9000004, 0.5, 0.5, 0.1),
            ),
            ("b".to_string(), MetricSet::summary(0.9, 0.5, 0.5, 0.9)),
        ];
        assert_eq!(rank_models(&near).unwrap().winner, "b");
    }
}
