use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Classifier, ForestModel, KnnModel, NbModel, TreeModel};
use crate::data_model::Record;
use crate::preprocessing::{encode_record, EncoderMap, FeatureMatrix, ScalerParams};
use crate::rules::MethodLabel;
use crate::{Error, Label, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    DecisionTree,
    RandomForest,
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::NaiveBayes,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::Knn,
    ];

    /// Identifier used in file names and the model file.
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Knn => "knn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "Naive Bayes",
            ModelKind::DecisionTree => "Decision Tree",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::Knn => "K-Nearest Neighbors",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown model type `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelPayload {
    NaiveBayes(NbModel),
    DecisionTree(TreeModel),
    RandomForest(ForestModel),
    Knn(KnnModel),
}

impl ModelPayload {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelPayload::NaiveBayes(_) => ModelKind::NaiveBayes,
            ModelPayload::DecisionTree(_) => ModelKind::DecisionTree,
            ModelPayload::RandomForest(_) => ModelKind::RandomForest,
            ModelPayload::Knn(_) => ModelKind::Knn,
        }
    }

    fn classifier(&self) -> &dyn Classifier {
        match self {
            ModelPayload::NaiveBayes(m) => m,
            ModelPayload::DecisionTree(m) => m,
            ModelPayload::RandomForest(m) => m,
            ModelPayload::Knn(m) => m,
        }
    }

    fn to_value(&self) -> Result<Value> {
        Ok(match self {
            ModelPayload::NaiveBayes(m) => serde_json::to_value(m)?,
            ModelPayload::DecisionTree(m) => serde_json::to_value(m)?,
            ModelPayload::RandomForest(m) => serde_json::to_value(m)?,
            ModelPayload::Knn(m) => serde_json::to_value(m)?,
        })
    }

    fn from_value(kind: ModelKind, v: Value) -> Result<Self> {
        let bad = |e: serde_json::Error| Error::ModelFormat(format!("{} payload: {e}", kind.id()));
        Ok(match kind {
            ModelKind::NaiveBayes => {
                ModelPayload::NaiveBayes(serde_json::from_value(v).map_err(bad)?)
            }
            ModelKind::DecisionTree => {
                let t: TreeModel = serde_json::from_value(v).map_err(bad)?;
                t.check()?;
                ModelPayload::DecisionTree(t)
            }
            ModelKind::RandomForest => {
                let f: ForestModel = serde_json::from_value(v).map_err(bad)?;
                f.check()?;
                ModelPayload::RandomForest(f)
            }
            ModelKind::Knn => ModelPayload::Knn(serde_json::from_value(v).map_err(bad)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub code: Label,
    pub name: String,
}

/// A fitted model together with everything needed to go from a raw record
/// to a prediction: feature names, label encoders and scaler.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub payload: ModelPayload,
    pub seed: Option<u64>,
    pub feature_names: Vec<String>,
    pub labels: Vec<LabelEntry>,
    pub encoders: EncoderMap,
    pub scaler: ScalerParams,
}

/// On-disk layout. Field order here is the order in the file.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model_type: ModelKind,
    params: Value,
    seed: Option<u64>,
    feature_names: Vec<String>,
    labels: Vec<LabelEntry>,
    encoders: EncoderMap,
    scaler: ScalerParams,
    payload: Value,
}

impl TrainedModel {
    pub fn new(
        payload: ModelPayload,
        feature_names: Vec<String>,
        encoders: EncoderMap,
        scaler: ScalerParams,
        seed: Option<u64>,
    ) -> Result<Self> {
        let model = TrainedModel {
            payload,
            seed,
            feature_names,
            labels: MethodLabel::ALL
                .iter()
                .map(|m| LabelEntry {
                    code: m.code(),
                    name: m.name().to_string(),
                })
                .collect(),
            encoders,
            scaler,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let d = self.feature_names.len();
        let width = self.payload.classifier().n_features();
        if width != d || self.scaler.mean.len() != d || self.scaler.std.len() != d {
            return Err(Error::ModelFormat(format!(
                "{d} feature names, model expects {width}, scaler has {}",
                self.scaler.mean.len()
            )));
        }
        if self.scaler.feature_names != self.feature_names {
            return Err(Error::ModelFormat("scaler feature names differ".into()));
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.payload.kind()
    }

    pub fn label_name(&self, code: Label) -> Option<&str> {
        self.labels
            .iter()
            .find(|l| l.code == code)
            .map(|l| l.name.as_str())
    }

    /// Predicts on already-scaled features.
    pub fn predict_scaled(&self, x: &FeatureMatrix) -> Result<Vec<Label>> {
        self.check_names(x)?;
        self.payload.classifier().predict(x)
    }

    /// Applies the stored scaler, then predicts.
    pub fn predict_encoded(&self, x: &FeatureMatrix) -> Result<Vec<Label>> {
        self.check_names(x)?;
        let scaled = crate::preprocessing::apply_scaler(x, &self.scaler)?;
        self.payload.classifier().predict(&scaled)
    }

    /// Runs the full encode, scale and predict path on one record.
    pub fn predict_record(&self, r: &Record) -> Result<Label> {
        let row = encode_record(r, &self.encoders, &self.feature_names)?;
        let row = self.scaler.scale_row(&row)?;
        Ok(self.payload.classifier().predict_row(&row))
    }

    /// Predicts one raw encoded (unscaled) feature row.
    pub fn predict_encoded_row(&self, row: &[f64]) -> Result<Label> {
        let row = self.scaler.scale_row(row)?;
        Ok(self.payload.classifier().predict_row(&row))
    }

    fn check_names(&self, x: &FeatureMatrix) -> Result<()> {
        x.check_width(self.feature_names.len())?;
        if x.feature_names() != self.feature_names.as_slice() {
            return Err(Error::FeatureNameMismatch);
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, sink: W) -> Result<()> {
        let mut payload = self.payload.to_value()?;
        let params = payload
            .as_object_mut()
            .and_then(|o| o.remove("params"))
            .unwrap_or(Value::Null);
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            model_type: self.kind(),
            params,
            seed: self.seed,
            feature_names: self.feature_names.clone(),
            labels: self.labels.clone(),
            encoders: self.encoders.clone(),
            scaler: self.scaler.clone(),
            payload,
        };
        serde_json::to_writer_pretty(sink, &file)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }

    pub fn load<R: Read>(mut source: R) -> Result<Self> {
        let mut text = String::new();
        source
            .read_to_string(&mut text)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::ModelFormat("missing format_version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::VersionMismatch {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let mut payload = file.payload;
        payload
            .as_object_mut()
            .ok_or_else(|| Error::ModelFormat("payload is not an object".into()))?
            .insert("params".into(), file.params);
        let model = TrainedModel {
            payload: ModelPayload::from_value(file.model_type, payload)?,
            seed: file.seed,
            feature_names: file.feature_names,
            labels: file.labels,
            encoders: file.encoders,
            scaler: file.scaler,
        };
        model.check()?;
        Ok(model)
    }

    pub fn save_to_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.save(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit_decision_tree, fit_gaussian_nb, NbParams, TreeParams};

    fn fixture() -> (FeatureMatrix, Vec<Label>) {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                vec![
                    f64::from(i) * 0.37,
                    f64::from(i % 3),
                    f64::from(i * i % 7) / 3.0,
                ]
            })
            .collect();
        let y = (0..20).map(|i| (i % 4) as Label).collect();
        (FeatureMatrix::unnamed(&rows).unwrap(), y)
    }

    fn wrap(payload: ModelPayload, x: &FeatureMatrix) -> TrainedModel {
        TrainedModel::new(
            payload,
            x.feature_names().to_vec(),
            EncoderMap::default(),
            ScalerParams::identity(x.feature_names()),
            Some(1),
        )
        .unwrap()
    }

    #[test]
    fn nb_round_trip_is_exact() {
        let (x, y) = fixture();
        let m = wrap(
            ModelPayload::NaiveBayes(fit_gaussian_nb(&x, &y, NbParams::default()).unwrap()),
            &x,
        );
        let text = m.to_json().unwrap();
        let back = TrainedModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            back.predict_scaled(&x).unwrap(),
            m.predict_scaled(&x).unwrap()
        );
        let v: Value = serde_json::from_str(&text).unwrap();
        for key in [
            "format_version",
            "model_type",
            "params",
            "seed",
            "feature_names",
            "labels",
            "encoders",
            "scaler",
            "payload",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["model_type"], "naive_bayes");
        assert_eq!(v["params"]["var_smoothing"], 1e-9);
    }

    #[test]
    fn truncated_and_wrong_version_fail() {
        let (x, y) = fixture();
        let m = wrap(
            ModelPayload::DecisionTree(fit_decision_tree(&x, &y, TreeParams::default()).unwrap()),
            &x,
        );
        let text = m.to_json().unwrap();
        assert!(matches!(
            TrainedModel::from_json(&text[..text.len() / 2]),
            Err(Error::ModelFormat(_))
        ));
        let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(
            TrainedModel::from_json(&bumped),
            Err(Error::VersionMismatch {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn corrupted_tree_links_are_rejected() {
        let (x, y) = fixture();
        let m = wrap(
            ModelPayload::DecisionTree(fit_decision_tree(&x, &y, TreeParams::default()).unwrap()),
            &x,
        );
        let mut v: Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        v["payload"]["nodes"][0]["left"] = Value::from(0);
        assert!(TrainedModel::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn feature_names_must_match() {
        let (x, y) = fixture();
        let m = wrap(
            ModelPayload::NaiveBayes(fit_gaussian_nb(&x, &y, NbParams::default()).unwrap()),
            &x,
        );
        let renamed = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            &x.rows().map(<[f64]>::to_vec).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(matches!(
            m.predict_scaled(&renamed),
            Err(Error::FeatureNameMismatch)
        ));
    }
}
