//! Teaching-method labels derived from the A1..A10 answers.
//!
//! A [`RuleSet`] is an ordered list of conjunctive conditions over the
//! answers. The first rule whose conditions all hold decides the label;
//! when none holds the label is [`MethodLabel::None`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_model::{AVector, Dataset};
use crate::{Error, Label, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
#[repr(u8)]
pub enum MethodLabel {
    None = 0,
    TechnologyAidedInstruction = 1,
    AntecedentBasedIntervention = 2,
    PivotalResponseTraining = 3,
    PeerMediatedInstruction = 4,
    PictureExchangeCommunication = 5,
    TaskAnalysis = 6,
}

impl MethodLabel {
    pub const ALL: [MethodLabel; 7] = [
        MethodLabel::None,
        MethodLabel::TechnologyAidedInstruction,
        MethodLabel::AntecedentBasedIntervention,
        MethodLabel::PivotalResponseTraining,
        MethodLabel::PeerMediatedInstruction,
        MethodLabel::PictureExchangeCommunication,
        MethodLabel::TaskAnalysis,
    ];

    pub fn code(self) -> Label {
        self as Label
    }

    pub fn from_code(code: Label) -> Result<Self> {
        usize::try_from(code)
            .ok()
            .and_then(|i| Self::ALL.get(i).copied())
            .ok_or(Error::UnknownLabel(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodLabel::None => "None",
            MethodLabel::TechnologyAidedInstruction => "Technology-aided Instruction",
            MethodLabel::AntecedentBasedIntervention => "Antecedent-based Intervention",
            MethodLabel::PivotalResponseTraining => "Pivotal Response Training",
            MethodLabel::PeerMediatedInstruction => "Peer-mediated Instruction and Intervention",
            MethodLabel::PictureExchangeCommunication => "Picture Exchange Communication",
            MethodLabel::TaskAnalysis => "Task Analysis",
        }
    }
}

impl TryFrom<u32> for MethodLabel {
    type Error = Error;

    fn try_from(code: u32) -> Result<Self> {
        Self::from_code(code)
    }
}

impl From<MethodLabel> for u32 {
    fn from(m: MethodLabel) -> u32 {
        m.code()
    }
}

impl fmt::Display for MethodLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A1..A10 index (1-based) and the value it must take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub item: usize,
    pub value: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    label: MethodLabel,
    conditions: Vec<Condition>,
}

impl Rule {
    pub fn new(label: MethodLabel, conditions: Vec<Condition>) -> Result<Self> {
        if label == MethodLabel::None {
            return Err(Error::InvalidRule("a rule cannot assign label 0".into()));
        }
        if conditions.is_empty() {
            return Err(Error::InvalidRule(format!(
                "rule for label {} has no conditions",
                label.code()
            )));
        }
        let mut seen = [false; 11];
        for c in &conditions {
            if !(1..=10).contains(&c.item) || c.value > 1 {
                return Err(Error::InvalidRule(format!(
                    "A{}={} is not a valid clause",
                    c.item, c.value
                )));
            }
            if std::mem::replace(&mut seen[c.item], true) {
                return Err(Error::InvalidRule(format!("A{} appears twice", c.item)));
            }
        }
        Ok(Rule { label, conditions })
    }

    fn of(label: MethodLabel, clauses: &[(usize, u8)]) -> Self {
        let conditions = clauses
            .iter()
            .map(|&(item, value)| Condition { item, value })
            .collect();
        Rule::new(label, conditions).expect("built-in rule is valid")
    }

    pub fn label(&self) -> MethodLabel {
        self.label
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn matches(&self, a: &AVector) -> bool {
        self.conditions.iter().all(|c| a.get(c.item) == c.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::canonical()
    }
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Self {
        RuleSet { rules }
    }

    /// The built-in teaching-method rules, in priority order.
    pub fn canonical() -> Self {
        use MethodLabel::*;
        RuleSet::new(vec![
            Rule::of(TechnologyAidedInstruction, &[(5, 1), (9, 1), (10, 0)]),
            Rule::of(AntecedentBasedIntervention, &[(6, 1)]),
            Rule::of(PivotalResponseTraining, &[(1, 1), (8, 1)]),
            Rule::of(PeerMediatedInstruction, &[(5, 1), (4, 1), (3, 1)]),
            Rule::of(PictureExchangeCommunication, &[(2, 1), (9, 1)]),
            Rule::of(TaskAnalysis, &[(7, 1)]),
        ])
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn default_label(&self) -> MethodLabel {
        MethodLabel::None
    }

    /// Parses the line-oriented rule format: a label code, an optional
    /// colon, then `Ai=v` clauses separated by whitespace, `,` or `&`.
    /// Line order is priority order; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| Error::RuleSyntax {
                line: n + 1,
                message,
            };
            let mut tokens = line
                .split(|c: char| c.is_whitespace() || c == ',' || c == '&')
                .filter(|t| !t.is_empty());
            let head = tokens.next().unwrap_or_default().trim_end_matches(':');
            let code: Label = head
                .parse()
                .map_err(|_| syntax(format!("expected a label code, got `{head}`")))?;
            let label = MethodLabel::from_code(code).map_err(|e| syntax(e.to_string()))?;
            let mut conditions = Vec::new();
            for tok in tokens {
                if tok == ":" {
                    continue;
                }
                let (item, value) = tok
                    .split_once('=')
                    .ok_or_else(|| syntax(format!("expected `Ai=v`, got `{tok}`")))?;
                let item = item
                    .trim()
                    .strip_prefix(['A', 'a'])
                    .and_then(|i| i.parse().ok())
                    .ok_or_else(|| syntax(format!("bad item in `{tok}`")))?;
                let value = value
                    .trim()
                    .parse()
                    .map_err(|_| syntax(format!("bad value in `{tok}`")))?;
                conditions.push(Condition { item, value });
            }
            rules.push(Rule::new(label, conditions).map_err(|e| syntax(e.to_string()))?);
        }
        if rules.is_empty() {
            return Err(Error::InvalidRule("rule file contains no rules".into()));
        }
        Ok(RuleSet::new(rules))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(&format!("{}:", r.label.code()));
            for c in &r.conditions {
                out.push_str(&format!(" A{}={}", c.item, c.value));
            }
            out.push('\n');
        }
        out
    }
}

/// Label of the first matching rule, or the default label.
pub fn assign_label(a: &AVector, rs: &RuleSet) -> MethodLabel {
    rs.rules
        .iter()
        .find(|r| r.matches(a))
        .map(Rule::label)
        .unwrap_or_else(|| rs.default_label())
}

/// Returns a copy of `ds` with `Preferred_Education` set on every row,
/// replacing any existing labels.
pub fn label_dataset(ds: &Dataset, rs: &RuleSet) -> Dataset {
    let (schema, mut rows, provenance) = ds.clone().into_parts();
    for r in &mut rows {
        r.preferred_education = Some(assign_label(&r.a, rs).code());
    }
    Dataset::new(schema.with_target(), rows, provenance)
        .expect("labeling preserves dataset invariants")
}

/// Number of answer vectors mapped to each label 0..=6.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CoverageTable {
    pub counts: [usize; 7],
}

impl CoverageTable {
    pub fn get(&self, label: MethodLabel) -> usize {
        self.counts[label as usize]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Enumerates all 1024 answer vectors.
pub fn rule_coverage(rs: &RuleSet) -> CoverageTable {
    coverage_over(rs, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10])
}

/// Enumerates the vectors whose `free` items (1-based) take every
/// combination of values while all other items are 0.
pub fn coverage_over(rs: &RuleSet, free: &[usize]) -> CoverageTable {
    let mut table = CoverageTable::default();
    for combo in 0u32..(1 << free.len()) {
        let bits = free
            .iter()
            .enumerate()
            .filter(|(j, _)| combo >> j & 1 == 1)
            .fold(0u16, |acc, (_, &item)| acc | 1 << (item - 1));
        table.counts[assign_label(&AVector::from_bits(bits), rs) as usize] += 1;
    }
    table
}
