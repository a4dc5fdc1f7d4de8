//! Reference classifiers over order-free review features: bag-of-words counts
//! or averaged word vectors, classified by logistic regression or a random
//! forest.

mod features;
mod forest;
mod logreg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{
    avg_embedding_features, bow_features, feature_matrix, FeatureKind, FeatureVector,
};
pub use forest::{train_forest, ForestModel, Node, MAX_DEPTH};
pub use logreg::{train_logreg, LogRegFit, LogRegModel, LogRegOptions};

/// A persisted baseline of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineModel {
    LogReg(LogRegModel),
    Forest(ForestModel),
}

impl BaselineModel {
    pub fn feature_dim(&self) -> usize {
        match self {
            BaselineModel::LogReg(m) => m.feature_dim(),
            BaselineModel::Forest(m) => m.feature_dim,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl From<LogRegModel> for BaselineModel {
    fn from(m: LogRegModel) -> Self {
        BaselineModel::LogReg(m)
    }
}

impl From<ForestModel> for BaselineModel {
    fn from(m: ForestModel) -> Self {
        BaselineModel::Forest(m)
    }
}

pub fn predict_baseline(model: &BaselineModel, features: &FeatureVector) -> Result<usize> {
    let expected = model.feature_dim();
    if features.values.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: features.values.len(),
        });
    }
    Ok(match model {
        BaselineModel::LogReg(m) => m.predict(&features.values),
        BaselineModel::Forest(m) => m.predict(&features.values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_mismatch() {
        let m = BaselineModel::LogReg(LogRegModel::zeros(2, 3, 0.01));
        let f = FeatureVector {
            values: vec![1.0; 4],
            kind: FeatureKind::BagOfWords,
        };
        assert!(matches!(
            predict_baseline(&m, &f),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 4
            })
        ));
    }

    #[test]
    fn zero_logreg_predicts_class_zero() {
        let m = BaselineModel::LogReg(LogRegModel::zeros(3, 2, 0.01));
        let f = FeatureVector {
            values: vec![5.0, -1.0],
            kind: FeatureKind::AvgEmbedding,
        };
        assert_eq!(predict_baseline(&m, &f).unwrap(), 0);
    }

    #[test]
    fn json_round_trip() {
        let m = BaselineModel::LogReg(LogRegModel::zeros(2, 2, 0.01));
        let text = m.to_json().unwrap();
        assert!(text.contains("\"kind\":\"log_reg\""));
        assert_eq!(BaselineModel::from_json(&text).unwrap(), m);
    }
}
