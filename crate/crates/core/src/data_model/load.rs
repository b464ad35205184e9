use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{
    AVector, AgeUnit, ColumnKind, Dataset, DatasetSchema, Record, RowError, ValidationReport,
    AGE_MONTHS, A_COLUMNS, CASE_NO, CLASS_ASD, ETHNICITY, FAMILY_ASD, JAUNDICE,
    PREFERRED_EDUCATION, QCHAT_SCORE, SEX, WHO_COMPLETED,
};
use crate::{Error, Result};

/// Maps a source's header names onto canonical column names.
///
/// The text form is one `source_header = Canonical_Name` pair per line.
/// Blank lines and `#` comments are ignored. The reserved key `age_unit`
/// (`months` or `years`) records the unit of the source's age column.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ColumnAliases {
    map: HashMap<String, String>,
    pub age_unit: Option<AgeUnit>,
}

impl ColumnAliases {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: impl Into<String>, canonical: impl Into<String>) {
        self.map.insert(source.into(), canonical.into());
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut aliases = ColumnAliases::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("alias line {}: expected key=value", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Config(format!(
                    "alias line {}: empty key or value",
                    n + 1
                )));
            }
            if key == "age_unit" {
                aliases.age_unit = Some(value.parse()?);
            } else {
                aliases.insert(key, value);
            }
        }
        Ok(aliases)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn resolve<'a>(&'a self, header: &'a str) -> &'a str {
        self.map.get(header).map(String::as_str).unwrap_or(header)
    }
}

/// Reads a screening CSV into a [`Dataset`].
///
/// Rows that fail to parse are rejected and listed in the returned report
/// (row indices are 0-based over data rows). A `Preferred_Education` column
/// is read when present even if `schema` does not list it.
pub fn load_dataset<R: Read>(
    source: R,
    schema: &DatasetSchema,
    aliases: &ColumnAliases,
    source_name: &str,
) -> Result<(Dataset, ValidationReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput);
    }

    let mut report = ValidationReport::default();
    let mut positions: HashMap<&str, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        let name = aliases.resolve(h);
        match schema.column(name) {
            Some(c) => {
                positions.insert(c.name.as_str(), i);
            }
            None if name == PREFERRED_EDUCATION => {
                positions.insert(PREFERRED_EDUCATION, i);
            }
            None => report.warnings.push(format!("ignored column `{h}`")),
        }
    }
    for c in &schema.columns {
        if !positions.contains_key(c.name.as_str()) {
            return Err(Error::MissingColumn(c.name.clone()));
        }
    }
    let labeled = positions.contains_key(PREFERRED_EDUCATION);

    let mut rows = Vec::new();
    for (index, result) in reader.records().enumerate() {
        let errors_before = report.row_errors.len();
        match result {
            Ok(fields) => {
                let mut parser = RowParser {
                    fields: &fields,
                    positions: &positions,
                    row: index,
                    errors: &mut report.row_errors,
                };
                let record = parser.record(schema.age_unit, labeled);
                match record {
                    Some(r) if report.row_errors.len() == errors_before => rows.push(r),
                    _ => {}
                }
            }
            Err(e) => report.row_errors.push(RowError {
                row: index,
                column: "*".into(),
                message: e.to_string(),
            }),
        }
        if report.row_errors.len() == errors_before {
            report.rows_accepted += 1;
        } else {
            report.rows_rejected += 1;
        }
    }

    if rows.is_empty() {
        if report.rows_rejected == 0 {
            return Err(Error::EmptyInput);
        }
        return Err(Error::NoValidRows {
            rejected: report.rows_rejected,
        });
    }

    let mut out_schema = schema.clone().with_age_unit(AgeUnit::Months);
    if labeled {
        out_schema = out_schema.with_target();
    }
    let ds = Dataset::new(out_schema, rows, vec![source_name.to_string()])?;
    Ok((ds, report))
}

struct RowParser<'a> {
    fields: &'a csv::StringRecord,
    positions: &'a HashMap<&'a str, usize>,
    row: usize,
    errors: &'a mut Vec<RowError>,
}

impl RowParser<'_> {
    fn fail(&mut self, column: &str, message: impl Into<String>) {
        self.errors.push(RowError {
            row: self.row,
            column: column.to_string(),
            message: message.into(),
        });
    }

    fn raw(&mut self, column: &str) -> Option<&str> {
        let pos = self.positions[column];
        match self.fields.get(pos) {
            Some("") => {
                self.fail(column, "missing value");
                None
            }
            Some(v) => Some(v),
            None => {
                self.fail(column, "missing field");
                None
            }
        }
    }

    fn integer<T: std::str::FromStr>(&mut self, column: &str) -> Option<T> {
        let raw = self.raw(column)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                let msg = format!("not an integer: `{raw}`");
                self.fail(column, msg);
                None
            }
        }
    }

    fn text(&mut self, column: &str) -> Option<String> {
        self.raw(column).map(str::to_string)
    }

    fn yes_no(&mut self, column: &str, kind: ColumnKind) -> Option<String> {
        let raw = self.raw(column)?;
        let normalized = match (raw.to_ascii_lowercase().as_str(), kind) {
            ("yes", ColumnKind::ClassFlag) => "Yes",
            ("no", ColumnKind::ClassFlag) => "No",
            ("yes", _) => "yes",
            ("no", _) => "no",
            _ => {
                let msg = format!("expected yes/no, got `{raw}`");
                self.fail(column, msg);
                return None;
            }
        };
        Some(normalized.to_string())
    }

    fn record(&mut self, age_unit: AgeUnit, labeled: bool) -> Option<Record> {
        let case_no = self.integer::<u32>(CASE_NO);

        let mut a = [0u8; 10];
        let mut a_ok = true;
        for (slot, column) in a.iter_mut().zip(A_COLUMNS) {
            match self.raw(column) {
                Some("0") => *slot = 0,
                Some("1") => *slot = 1,
                Some(_) => {
                    self.fail(column, "not binary");
                    a_ok = false;
                }
                None => a_ok = false,
            }
        }

        let age = self.integer::<u32>(AGE_MONTHS).and_then(|v| {
            match v.checked_mul(age_unit.months_per_unit()) {
                Some(m) if m > 0 => Some(m),
                _ => {
                    self.fail(AGE_MONTHS, format!("age {v} out of range"));
                    None
                }
            }
        });
        let qchat = self.integer::<u8>(QCHAT_SCORE).and_then(|q| {
            if q <= 10 {
                Some(q)
            } else {
                self.fail(QCHAT_SCORE, format!("score {q} outside [0,10]"));
                None
            }
        });
        let sex = self.text(SEX);
        let ethnicity = self.text(ETHNICITY);
        let jaundice = self.yes_no(JAUNDICE, ColumnKind::Categorical);
        let family = self.yes_no(FAMILY_ASD, ColumnKind::Categorical);
        let who = self.text(WHO_COMPLETED);
        let class = self.yes_no(CLASS_ASD, ColumnKind::ClassFlag);
        let target = if labeled {
            match self.integer::<u32>(PREFERRED_EDUCATION) {
                Some(t) if t <= 6 => Some(Some(t)),
                Some(t) => {
                    self.fail(PREFERRED_EDUCATION, format!("label {t} outside [0,6]"));
                    None
                }
                None => None,
            }
        } else {
            Some(None)
        };

        if !a_ok {
            return None;
        }
        Some(Record {
            case_no: case_no?,
            a: AVector::new(a).ok()?,
            qchat_score: qchat?,
            age_months: age?,
            sex: sex?,
            ethnicity: ethnicity?,
            jaundice: jaundice?,
            family_asd: family?,
            who_completed: who?,
            class_asd: class?,
            preferred_education: target?,
        })
    }
}

/// Writes `ds` as canonical CSV (ages in months, `Preferred_Education`
/// appended when the dataset is labeled).
pub fn write_csv<W: Write>(ds: &Dataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let columns: Vec<&str> = ds.schema().names().collect();
    w.write_record(&columns)?;
    let mut fields = Vec::with_capacity(columns.len());
    for row in ds.rows() {
        fields.clear();
        for c in &columns {
            let cell = row
                .cell(c)
                .ok_or_else(|| Error::UnknownColumn(c.to_string()))?;
            fields.push(cell.to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv sink>", e))?;
    Ok(())
}
