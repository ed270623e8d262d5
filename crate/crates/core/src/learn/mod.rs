//! Downstream pair classifiers and train/test splitting.

pub mod gbm;
pub mod logreg;
mod split;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use gbm::{GbmConfig, GbmModel};
pub use logreg::{LogRegConfig, LogRegModel};
pub use split::{shuffled_indices, split_indices, subsample, train_test_split, SplitConfig};

use crate::pairs::PairFeatureTable;
use crate::{Error, Result};

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_classes(y: &[u8]) -> Result<()> {
    let pos = y.iter().filter(|&&t| t == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClassTraining);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    LogReg,
    Gbm,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::LogReg => "logreg",
            ClassifierKind::Gbm => "gbm",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logreg" | "lr" => Ok(ClassifierKind::LogReg),
            "gbm" => Ok(ClassifierKind::Gbm),
            other => Err(Error::InvalidConfig(format!("unknown classifier {other:?}"))),
        }
    }
}

/// Hyperparameters for both classifiers; `kind` selects which one is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub gbm: GbmConfig,
    pub logreg: LogRegConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Gbm,
            gbm: GbmConfig::default(),
            logreg: LogRegConfig::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn with_kind(mut self, kind: ClassifierKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ClassifierKind::Gbm => self.gbm.validate(),
            ClassifierKind::LogReg => self.logreg.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    LogReg(LogRegModel),
    Gbm(GbmModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedModel::LogReg(_) => ClassifierKind::LogReg,
            TrainedModel::Gbm(_) => ClassifierKind::Gbm,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            TrainedModel::LogReg(m) => m.width(),
            TrainedModel::Gbm(m) => m.width,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn fit_logreg(train: &PairFeatureTable, cfg: &LogRegConfig) -> Result<TrainedModel> {
    logreg::fit(train.features.view(), &train.labels(), cfg).map(TrainedModel::LogReg)
}

pub fn fit_gbm(train: &PairFeatureTable, cfg: &GbmConfig) -> Result<TrainedModel> {
    gbm::fit(train.features.view(), &train.labels(), cfg).map(TrainedModel::Gbm)
}

pub fn fit(train: &PairFeatureTable, cfg: &ClassifierConfig) -> Result<TrainedModel> {
    match cfg.kind {
        ClassifierKind::LogReg => fit_logreg(train, &cfg.logreg),
        ClassifierKind::Gbm => fit_gbm(train, &cfg.gbm),
    }
}

/// Positive-class probability for every row of `features`.
pub fn predict_proba(model: &TrainedModel, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if features.ncols() != model.width() {
        return Err(Error::WidthMismatch {
            expected: model.width(),
            actual: features.ncols(),
        });
    }
    Ok(match model {
        TrainedModel::LogReg(m) => m.predict_proba(features),
        TrainedModel::Gbm(m) => m.predict_proba(features),
    })
}
