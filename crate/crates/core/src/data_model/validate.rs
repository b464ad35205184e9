use serde::Serialize;

use super::Dataset;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub row: usize,
    pub column: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub row_errors: Vec<RowError>,
    pub warnings: Vec<String>,
    pub rows_accepted: usize,
    pub rows_rejected: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.row_errors.is_empty() && self.warnings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        !self.row_errors.is_empty()
    }
}

/// Checks value ranges row by row. A Q-chat score that disagrees with the
/// sum of the answers is only a warning.
pub fn validate(ds: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (i, r) in ds.rows().iter().enumerate() {
        let mut errors = Vec::new();
        let mut err = |column: &str, message: String| {
            errors.push(RowError {
                row: i,
                column: column.to_string(),
                message,
            })
        };
        if r.qchat_score > 10 {
            err(
                super::QCHAT_SCORE,
                format!("score {} outside [0,10]", r.qchat_score),
            );
        }
        if r.age_months == 0 {
            err(super::AGE_MONTHS, "age must be positive".into());
        }
        for (column, value) in [
            (super::JAUNDICE, &r.jaundice),
            (super::FAMILY_ASD, &r.family_asd),
        ] {
            if value != "yes" && value != "no" {
                err(column, format!("expected yes/no, got `{value}`"));
            }
        }
        if r.class_asd != "Yes" && r.class_asd != "No" {
            err(
                super::CLASS_ASD,
                format!("expected Yes/No, got `{}`", r.class_asd),
            );
        }
        for (column, value) in [
            (super::SEX, &r.sex),
            (super::ETHNICITY, &r.ethnicity),
            (super::WHO_COMPLETED, &r.who_completed),
        ] {
            if value.trim().is_empty() {
                err(column, "missing value".into());
            }
        }
        if let Some(t) = r.preferred_education {
            if t > 6 {
                err(
                    super::PREFERRED_EDUCATION,
                    format!("label {t} outside [0,6]"),
                );
            }
        }

        let sum = r.a.score();
        if sum != r.qchat_score {
            report.warnings.push(format!(
                "row {i}: score/answer mismatch (Qchat-10-Score = {}, sum of A1..A10 = {sum})",
                r.qchat_score
            ));
        }
        if errors.is_empty() {
            report.rows_accepted += 1;
        } else {
            report.rows_rejected += 1;
            report.row_errors.extend(errors);
        }
    }
    report
}
