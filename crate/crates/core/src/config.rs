//! Declarative pipeline configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{ForestParams, KnnParams, ModelKind, NbParams, TreeParams};
use crate::evaluation::Averaging;
use crate::preprocessing::{default_feature_columns, SplitSpec};
use crate::rules::RuleSet;
use crate::synthetic::SynthSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// One input CSV and its optional alias table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aliases: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl SourceSpec {
    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.path.display().to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: SplitSpec::DEFAULT_TEST_FRACTION,
            stratified: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub enabled: Vec<ModelKind>,
    pub naive_bayes: NbParams,
    pub decision_tree: TreeParams,
    pub random_forest: ForestParams,
    pub knn: KnnParams,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            enabled: ModelKind::ALL.to_vec(),
            naive_bayes: NbParams::default(),
            decision_tree: TreeParams::default(),
            random_forest: ForestParams::default(),
            knn: KnnParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Run seed. Has no default: it must come from the file or `--seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    pub features: Vec<String>,
    /// Columns to standardize; `None` means every feature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_columns: Option<Vec<String>>,
    /// `builtin` or a path to a rule file.
    pub rules: String,
    pub split: SplitConfig,
    pub models: ModelsConfig,
    pub averaging: Averaging,
    pub output_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            sources: Vec::new(),
            synth: None,
            features: default_feature_columns(),
            scale_columns: None,
            rules: "builtin".into(),
            split: SplitConfig::default(),
            models: ModelsConfig::default(),
            averaging: Averaging::Macro,
            output_dir: PathBuf::from("runs"),
            formats: vec![ReportFormat::Text, ReportFormat::Json, ReportFormat::Csv],
        }
    }
}

impl PipelineConfig {
    /// Default configuration over a synthetic dataset.
    pub fn synthetic(n: usize, seed: u64) -> Self {
        PipelineConfig {
            seed: Some(seed),
            synth: Some(SynthSpec::new(n, seed)),
            ..PipelineConfig::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut cfg.sources {
            s.path = base.join(&s.path);
            if let Some(a) = &s.aliases {
                s.aliases = Some(base.join(a));
            }
        }
        if cfg.rules != "builtin" {
            cfg.rules = base.join(&cfg.rules).display().to_string();
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<u64> {
        let seed = self.seed.ok_or_else(|| {
            Error::Config("a seed is required (set `seed` or pass --seed)".into())
        })?;
        match (self.sources.is_empty(), self.synth.is_some()) {
            (false, true) => {
                return Err(Error::Config(
                    "give either `sources` or `synth`, not both".into(),
                ))
            }
            (true, false) => {
                return Err(Error::Config("no input: set `sources` or `synth`".into()))
            }
            _ => {}
        }
        if self.features.is_empty() {
            return Err(Error::Config("feature list is empty".into()));
        }
        if let Some(scale) = &self.scale_columns {
            if let Some(c) = scale.iter().find(|c| !self.features.contains(c)) {
                return Err(Error::Config(format!(
                    "scale column `{c}` is not a feature"
                )));
            }
        }
        if self.models.enabled.is_empty() {
            return Err(Error::Config("no models enabled".into()));
        }
        self.split_spec(seed).test_size(2)?;
        Ok(seed)
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            test_fraction: self.split.test_fraction,
            seed,
            stratified: self.split.stratified,
        }
    }

    pub fn scale_columns(&self) -> Vec<String> {
        self.scale_columns
            .clone()
            .unwrap_or_else(|| self.features.clone())
    }

    pub fn rule_set(&self) -> Result<RuleSet> {
        if self.rules == "builtin" {
            Ok(RuleSet::canonical())
        } else {
            RuleSet::from_path(Path::new(&self.rules))
        }
    }

    /// SHA-256 over everything that affects results (output location and
    /// report formats excluded), as 12 hex digits.
    pub fn hash(&self) -> String {
        let mut view = self.clone();
        view.output_dir = PathBuf::new();
        view.formats.clear();
        let canonical = serde_json::to_string(&view).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .take(6)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// `<output_dir>/run-<hash>-seed<seed>`.
    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.output_dir
            .join(format!("run-{}-seed{seed}", self.hash()))
    }
}
