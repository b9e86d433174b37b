//! Crisp base regressors that can also report their own per-prediction spread.

pub(crate) mod knn;
mod ols;
mod tree;

use std::fmt::Debug;
use std::str::FromStr;

pub use knn::{fit_knn, KnnModel, DEFAULT_K};
pub use ols::{fit_ols, LinearModel, SeMode};
pub use tree::{fit_tree, TreeModel, TreeNode, TreeParams};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::normal::NormalPrediction;

/// A fitted crisp regressor. `predict_mean` must return exactly the `mu` of
/// `predict_normal` for the same input.
pub trait Regressor: Debug + Send + Sync {
    fn n_features(&self) -> usize;

    fn predict_mean(&self, x: &[f64]) -> Result<f64>;

    /// The model's own Gaussian belief, with sigma already floored.
    fn predict_normal(&self, x: &[f64]) -> Result<NormalPrediction>;

    fn sigma_floor(&self) -> f64;
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            got: x.len(),
        })
    }
}

/// The three base techniques.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseKind {
    Linear,
    Knn,
    Tree,
}

impl BaseKind {
    pub const ALL: [BaseKind; 3] = [BaseKind::Linear, BaseKind::Knn, BaseKind::Tree];

    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::Linear => "LR",
            BaseKind::Knn => "kNN",
            BaseKind::Tree => "Tree",
        }
    }
}

impl FromStr for BaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "ols" | "linear" => Ok(BaseKind::Linear),
            "knn" => Ok(BaseKind::Knn),
            "tree" | "cart" => Ok(BaseKind::Tree),
            other => Err(Error::Parse(format!(
                "unknown base '{other}' (expected lr | knn | tree)"
            ))),
        }
    }
}

impl std::fmt::Display for BaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hyperparameters for every base technique.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseParams {
    pub k: usize,
    pub tree: TreeParams,
    pub se_mode: SeMode,
}

impl Default for BaseParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            tree: TreeParams::default(),
            se_mode: SeMode::Predictive,
        }
    }
}

/// Any of the three fitted base models.
#[derive(Debug, Clone)]
pub enum BaseModel {
    Linear(LinearModel),
    Knn(KnnModel),
    Tree(TreeModel),
}

pub fn fit_base(kind: BaseKind, train: &Dataset, params: &BaseParams) -> Result<BaseModel> {
    Ok(match kind {
        BaseKind::Linear => BaseModel::Linear(fit_ols(train)?.with_se_mode(params.se_mode)),
        BaseKind::Knn => BaseModel::Knn(fit_knn(train, params.k)?),
        BaseKind::Tree => BaseModel::Tree(fit_tree(train, &params.tree)?),
    })
}

impl BaseModel {
    fn inner(&self) -> &dyn Regressor {
        match self {
            BaseModel::Linear(m) => m,
            BaseModel::Knn(m) => m,
            BaseModel::Tree(m) => m,
        }
    }

    pub fn kind(&self) -> BaseKind {
        match self {
            BaseModel::Linear(_) => BaseKind::Linear,
            BaseModel::Knn(_) => BaseKind::Knn,
            BaseModel::Tree(_) => BaseKind::Tree,
        }
    }
}

impl Regressor for BaseModel {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.inner().predict_mean(x)
    }

    fn predict_normal(&self, x: &[f64]) -> Result<NormalPrediction> {
        self.inner().predict_normal(x)
    }

    fn sigma_floor(&self) -> f64 {
        self.inner().sigma_floor()
    }
}
