//! Screening-record schema, CSV loading and dataset merging.
//!
//! Every source is mapped onto one canonical 19-column layout (the Kaggle
//! Q-CHAT-10 toddler header). Sources with different headers are mapped in
//! through a [`ColumnAliases`] table, and ages recorded in years are
//! converted to months on load.

mod load;
mod summary;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

pub use load::{load_dataset, write_csv, ColumnAliases};
pub use summary::{summarize, SummaryStats};
pub use validate::{validate, RowError, ValidationReport};

pub const CASE_NO: &str = "Case_No";
pub const AGE_MONTHS: &str = "Age_Mons";
pub const QCHAT_SCORE: &str = "Qchat-10-Score";
pub const SEX: &str = "Sex";
pub const ETHNICITY: &str = "Ethnicity";
pub const JAUNDICE: &str = "Jaundice";
pub const FAMILY_ASD: &str = "Family_mem_with_ASD";
pub const WHO_COMPLETED: &str = "Who_completed_the_test";
pub const CLASS_ASD: &str = "Class_ASD_Traits";
/// Target column added by rule labeling.
pub const PREFERRED_EDUCATION: &str = "Preferred_Education";

pub const A_COLUMNS: [&str; 10] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Binary,
    Integer,
    Categorical,
    ClassFlag,
}

impl ColumnKind {
    /// Kinds whose values are strings and go through label encoding.
    pub fn is_categorical(self) -> bool {
        matches!(self, ColumnKind::Categorical | ColumnKind::ClassFlag)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeUnit {
    #[default]
    Months,
    Years,
}

impl AgeUnit {
    pub fn months_per_unit(self) -> u32 {
        match self {
            AgeUnit::Months => 1,
            AgeUnit::Years => 12,
        }
    }
}

impl std::str::FromStr for AgeUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "months" | "month" => Ok(AgeUnit::Months),
            "years" | "year" => Ok(AgeUnit::Years),
            other => Err(Error::InvalidParam(format!("unknown age unit `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<Column>,
    pub age_unit: AgeUnit,
}

impl DatasetSchema {
    /// The 19 canonical screening columns, ages in months.
    pub fn canonical() -> Self {
        let mut columns = vec![col(CASE_NO, ColumnKind::Integer)];
        columns.extend(A_COLUMNS.iter().map(|a| col(a, ColumnKind::Binary)));
        columns.extend([
            col(AGE_MONTHS, ColumnKind::Integer),
            col(QCHAT_SCORE, ColumnKind::Integer),
            col(SEX, ColumnKind::Categorical),
            col(ETHNICITY, ColumnKind::Categorical),
            col(JAUNDICE, ColumnKind::Categorical),
            col(FAMILY_ASD, ColumnKind::Categorical),
            col(WHO_COMPLETED, ColumnKind::Categorical),
            col(CLASS_ASD, ColumnKind::ClassFlag),
        ]);
        DatasetSchema {
            columns,
            age_unit: AgeUnit::Months,
        }
    }

    /// Canonical columns plus the `Preferred_Education` target.
    pub fn canonical_labeled() -> Self {
        Self::canonical().with_target()
    }

    pub fn with_age_unit(mut self, unit: AgeUnit) -> Self {
        self.age_unit = unit;
        self
    }

    pub(crate) fn with_target(mut self) -> Self {
        if !self.is_labeled() {
            self.columns
                .push(col(PREFERRED_EDUCATION, ColumnKind::Integer));
        }
        self
    }

    pub fn is_labeled(&self) -> bool {
        self.column(PREFERRED_EDUCATION).is_some()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Checks the structural invariants: unique names, known kinds for the
    /// canonical columns.
    pub fn check(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidParam(format!(
                    "duplicate column `{}` in schema",
                    c.name
                )));
            }
        }
        let canonical = Self::canonical();
        for c in &canonical.columns {
            if self.column(&c.name) != Some(c) {
                return Err(Error::MissingColumn(c.name.clone()));
            }
        }
        Ok(())
    }
}

fn col(name: &str, kind: ColumnKind) -> Column {
    Column {
        name: name.to_string(),
        kind,
    }
}

/// The ten binary screening answers A1..A10.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u8; 10]", into = "[u8; 10]")]
pub struct AVector([u8; 10]);

impl AVector {
    pub fn new(values: [u8; 10]) -> Result<Self> {
        if let Some(pos) = values.iter().position(|&v| v > 1) {
            return Err(Error::InvalidParam(format!(
                "A{} = {} is not binary",
                pos + 1,
                values[pos]
            )));
        }
        Ok(AVector(values))
    }

    pub const fn zeros() -> Self {
        AVector([0; 10])
    }

    /// Bit `i` (0-based) of `bits` becomes A(i+1).
    pub fn from_bits(bits: u16) -> Self {
        let mut v = [0u8; 10];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = ((bits >> i) & 1) as u8;
        }
        AVector(v)
    }

    pub fn bits(&self) -> u16 {
        self.0
            .iter()
            .enumerate()
            .fold(0u16, |acc, (i, &v)| acc | (u16::from(v) << i))
    }

    /// Answer to item `index`, 1-based as in A1..A10.
    ///
    /// Panics if `index` is outside 1..=10.
    pub fn get(&self, index: usize) -> u8 {
        assert!((1..=10).contains(&index), "A-index {index} out of range");
        self.0[index - 1]
    }

    pub fn with(mut self, index: usize, value: u8) -> Result<Self> {
        if !(1..=10).contains(&index) || value > 1 {
            return Err(Error::InvalidParam(format!("A{index} = {value}")));
        }
        self.0[index - 1] = value;
        Ok(self)
    }

    pub fn values(&self) -> &[u8; 10] {
        &self.0
    }

    pub fn score(&self) -> u8 {
        self.0.iter().sum()
    }
}

impl TryFrom<[u8; 10]> for AVector {
    type Error = Error;

    fn try_from(v: [u8; 10]) -> Result<Self> {
        AVector::new(v)
    }
}

impl From<AVector> for [u8; 10] {
    fn from(a: AVector) -> Self {
        a.0
    }
}

/// One screening row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub case_no: u32,
    pub a: AVector,
    pub qchat_score: u8,
    pub age_months: u32,
    pub sex: String,
    pub ethnicity: String,
    pub jaundice: String,
    pub family_asd: String,
    pub who_completed: String,
    pub class_asd: String,
    /// Present once the row has been rule-labeled.
    pub preferred_education: Option<Label>,
}

/// A single cell, borrowed from a [`Record`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell<'a> {
    Int(i64),
    Text(&'a str),
}

impl fmt::Display for Cell<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl Record {
    pub fn cell(&self, column: &str) -> Option<Cell<'_>> {
        if let Some(i) = A_COLUMNS.iter().position(|&c| c == column) {
            return Some(Cell::Int(i64::from(self.a.get(i + 1))));
        }
        Some(match column {
            CASE_NO => Cell::Int(i64::from(self.case_no)),
            AGE_MONTHS => Cell::Int(i64::from(self.age_months)),
            QCHAT_SCORE => Cell::Int(i64::from(self.qchat_score)),
            SEX => Cell::Text(&self.sex),
            ETHNICITY => Cell::Text(&self.ethnicity),
            JAUNDICE => Cell::Text(&self.jaundice),
            FAMILY_ASD => Cell::Text(&self.family_asd),
            WHO_COMPLETED => Cell::Text(&self.who_completed),
            CLASS_ASD => Cell::Text(&self.class_asd),
            PREFERRED_EDUCATION => Cell::Int(i64::from(self.preferred_education?)),
            _ => return None,
        })
    }
}

/// A validated, immutable collection of records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: DatasetSchema,
    rows: Vec<Record>,
    provenance: Vec<String>,
}

impl Dataset {
    /// Rows must be non-empty, and carry a target exactly when the schema
    /// has a `Preferred_Education` column.
    pub fn new(schema: DatasetSchema, rows: Vec<Record>, provenance: Vec<String>) -> Result<Self> {
        schema.check()?;
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let labeled = schema.is_labeled();
        if let Some(i) = rows
            .iter()
            .position(|r| r.preferred_education.is_some() != labeled)
        {
            return Err(Error::InvalidParam(format!(
                "row {i}: target presence disagrees with the schema"
            )));
        }
        Ok(Dataset {
            schema,
            rows,
            provenance,
        })
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Record] {
        &self.rows
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Target labels, if the dataset has been labeled.
    pub fn labels(&self) -> Option<Vec<Label>> {
        self.rows.iter().map(|r| r.preferred_education).collect()
    }

    /// Distinct values of a categorical column, sorted.
    pub fn categorical_domain(&self, column: &str) -> Result<BTreeSet<String>> {
        let kind = self
            .schema
            .column(column)
            .ok_or_else(|| Error::UnknownColumn(column.to_string()))?
            .kind;
        if !kind.is_categorical() {
            return Err(Error::NotCategorical(column.to_string()));
        }
        Ok(self
            .rows
            .iter()
            .filter_map(|r| match r.cell(column) {
                Some(Cell::Text(s)) => Some(s.to_string()),
                _ => None,
            })
            .collect())
    }

    /// Keeps the rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let rows = indices
            .iter()
            .map(|&i| {
                self.rows
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidParam(format!("row index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.schema.clone(), rows, self.provenance.clone())
    }

    pub(crate) fn into_parts(self) -> (DatasetSchema, Vec<Record>, Vec<String>) {
        (self.schema, self.rows, self.provenance)
    }
}

/// Concatenates datasets that share a column set, renumbering `Case_No`
/// from 1 and concatenating provenance.
pub fn merge_datasets(parts: &[Dataset]) -> Result<Dataset> {
    let first = parts.first().ok_or(Error::EmptyInput)?;
    let reference: BTreeSet<&str> = first.schema.names().collect();
    for (i, part) in parts.iter().enumerate().skip(1) {
        let names: BTreeSet<&str> = part.schema.names().collect();
        if names != reference {
            let missing: Vec<_> = reference.difference(&names).collect();
            let extra: Vec<_> = names.difference(&reference).collect();
            return Err(Error::SchemaMismatch(format!(
                "part {} (from {:?}): missing {:?}, extra {:?}",
                i + 1,
                part.provenance,
                missing,
                extra
            )));
        }
    }

    let mut rows = Vec::with_capacity(parts.iter().map(Dataset::len).sum());
    let mut provenance = Vec::new();
    for part in parts {
        rows.extend(part.rows.iter().cloned());
        provenance.extend(part.provenance.iter().cloned());
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row.case_no = i as u32 + 1;
    }
    Dataset::new(first.schema.clone(), rows, provenance)
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn canonical_schema_has_19_unique_columns() {
        let s = DatasetSchema::canonical();
        assert_eq!(s.columns.len(), 19);
        s.check().unwrap();
        assert_eq!(DatasetSchema::canonical_labeled().columns.len(), 20);
    }

    #[test]
    fn avector_rejects_non_binary() {
        let mut v = [0u8; 10];
        v[4] = 2;
        assert!(AVector::new(v).is_err());
        assert_eq!(
            AVector::from_bits(0b10_0000_0001).values(),
            &[1, 0, 0, 0, 0, 0, 0, 0, 0, 1]
        );
        for bits in [0u16, 1, 517, 1023] {
            assert_eq!(AVector::from_bits(bits).bits(), bits);
        }
    }

    #[test]
    fn merge_renumbers_and_concatenates() {
        let mut p1 = vec![record([0; 10]); 2];
        p1[1].case_no = 40;
        let p1 = Dataset::new(DatasetSchema::canonical(), p1, vec!["a".into()]).unwrap();
        let p2 = Dataset::new(
            DatasetSchema::canonical(),
            vec![record([1; 10])],
            vec!["b".into()],
        )
        .unwrap();
        let m = merge_datasets(&[p1.clone(), p2]).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(
            m.rows().iter().map(|r| r.case_no).collect::<Vec<_>>(),
            [1, 2, 3]
        );
        assert_eq!(m.provenance(), ["a", "b"]);

        let single = merge_datasets(std::slice::from_ref(&p1)).unwrap();
        assert_eq!(single.rows()[1].case_no, 2);
        assert_eq!(single.rows()[1].a, p1.rows()[1].a);
    }

    #[test]
    fn merge_reports_schema_delta() {
        let plain = dataset(vec![record([0; 10])]);
        let mut r = record([0; 10]);
        r.preferred_education = Some(0);
        let labeled = Dataset::new(
            DatasetSchema::canonical_labeled(),
            vec![r],
            vec!["l".into()],
        )
        .unwrap();
        let err = merge_datasets(&[plain, labeled]).unwrap_err();
        assert!(err.to_string().contains("Preferred_Education"), "{err}");
    }

    #[test]
    fn merged_categorical_domain_is_union() {
        let mut r1 = record([0; 10]);
        r1.ethnicity = "asian".into();
        let mut r2 = record([0; 10]);
        r2.ethnicity = "black".into();
        let mut r3 = record([0; 10]);
        r3.ethnicity = "white".into();
        let p1 = dataset(vec![r1.clone(), r2.clone()]);
        let p2 = dataset(vec![r2, r3]);
        let merged = merge_datasets(&[p1.clone(), p2.clone()]).unwrap();
        let mut expected = p1.categorical_domain(ETHNICITY).unwrap();
        expected.extend(p2.categorical_domain(ETHNICITY).unwrap());
        assert_eq!(merged.categorical_domain(ETHNICITY).unwrap(), expected);
        assert_eq!(expected.len(), 3);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            Dataset::new(DatasetSchema::canonical(), vec![], vec![]),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(merge_datasets(&[]), Err(Error::EmptyInput)));
    }
}
