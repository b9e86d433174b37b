//! Post-hoc variance attachments: keep a crisp model's mean, add a sigma.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::normal::{sigma_floor_for, NormalPrediction};
use crate::regressors::knn::NeighbourIndex;
use crate::regressors::{fit_knn, fit_tree, BaseModel, Regressor, TreeParams, DEFAULT_K};

/// Error probability whose symmetric conformal region matches `mu +/- sigma`
/// under a Gaussian (1 - 0.6827).
pub const CONFORMAL_EPSILON: f64 = 0.3173;

/// Transformation applied to residuals before they are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Theta {
    /// `t^2`, inverted by `sqrt(max(0, v))`.
    #[default]
    Square,
    /// `|t|`, inverted by `max(0, v)`.
    Abs,
}

impl Theta {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Theta::Square => t * t,
            Theta::Abs => t.abs(),
        }
    }

    pub fn invert(self, v: f64) -> f64 {
        let v = v.max(0.0);
        match self {
            Theta::Square => v.sqrt(),
            Theta::Abs => v,
        }
    }
}

/// Learner used for the residual model of RBE and the two-step estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualLearner {
    Knn,
    Tree,
}

/// How sigma is obtained for a crisp model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMethod {
    Own,
    Rbe(ResidualLearner),
    Bin,
    Uknc,
    Cnk,
    Knc,
    TwoStep(ResidualLearner),
    Conformal,
}

impl VarianceMethod {
    pub const ALL: [VarianceMethod; 10] = [
        VarianceMethod::Own,
        VarianceMethod::Rbe(ResidualLearner::Knn),
        VarianceMethod::Rbe(ResidualLearner::Tree),
        VarianceMethod::Bin,
        VarianceMethod::Uknc,
        VarianceMethod::Cnk,
        VarianceMethod::Knc,
        VarianceMethod::TwoStep(ResidualLearner::Knn),
        VarianceMethod::TwoStep(ResidualLearner::Tree),
        VarianceMethod::Conformal,
    ];

    /// Column label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            VarianceMethod::Own => "Own",
            VarianceMethod::Rbe(ResidualLearner::Knn) => "RBE-kNN",
            VarianceMethod::Rbe(ResidualLearner::Tree) => "RBE-Tree",
            VarianceMethod::Bin => "BIN",
            VarianceMethod::Uknc => "uKNC",
            VarianceMethod::Cnk => "CNK",
            VarianceMethod::Knc => "KNC",
            VarianceMethod::TwoStep(ResidualLearner::Knn) => "2SCVE-kNN",
            VarianceMethod::TwoStep(ResidualLearner::Tree) => "2SCVE-Tree",
            VarianceMethod::Conformal => "Conformal",
        }
    }
}

impl fmt::Display for VarianceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VarianceMethod::Own => "own",
            VarianceMethod::Rbe(ResidualLearner::Knn) => "rbe:knn",
            VarianceMethod::Rbe(ResidualLearner::Tree) => "rbe:tree",
            VarianceMethod::Bin => "bin",
            VarianceMethod::Uknc => "uknc",
            VarianceMethod::Cnk => "cnk",
            VarianceMethod::Knc => "knc",
            VarianceMethod::TwoStep(ResidualLearner::Knn) => "cve:knn",
            VarianceMethod::TwoStep(ResidualLearner::Tree) => "cve:tree",
            VarianceMethod::Conformal => "conformal",
        };
        f.write_str(s)
    }
}

pub const METHOD_GRAMMAR: &str =
    "own | rbe:knn | rbe:tree | bin | uknc | cnk | knc | cve:knn | cve:tree | conformal";

impl FromStr for VarianceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VarianceMethod::ALL
            .into_iter()
            .find(|m| m.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown method '{s}' (expected {METHOD_GRAMMAR})")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrichConfig {
    /// Neighbour count for BIN, uKNC, CNK, KNC and kNN residual models.
    pub k: usize,
    pub theta: Theta,
    pub tree: TreeParams,
    pub conformal_epsilon: f64,
}

impl Default for EnrichConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            theta: Theta::Square,
            tree: TreeParams::default(),
            conformal_epsilon: CONFORMAL_EPSILON,
        }
    }
}

/// Pairs `(y_hat, value)` sorted by `y_hat` (ties by training order).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPairs {
    pairs: Vec<(f64, f64)>,
}

impl ResidualPairs {
    pub fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        // stable sort keeps training order among equal estimates
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { pairs }
    }

    pub fn as_slice(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Up to `k/2` values strictly below `y_hat` and up to `k - k/2` at or
    /// above it; fewer near the ends.
    pub fn window(&self, y_hat: f64, k: usize) -> &[(f64, f64)] {
        let split = self.pairs.partition_point(|p| p.0 < y_hat);
        let below = k / 2;
        let above = k - below;
        let lo = split.saturating_sub(below);
        let hi = (split + above).min(self.pairs.len());
        &self.pairs[lo..hi]
    }
}

#[derive(Debug, Clone)]
enum Attachment {
    Own,
    Residual { model: Box<BaseModel>, theta: Theta },
    Bin { pairs: ResidualPairs, k: usize, theta: Theta },
    Uknc { q: Vec<(f64, f64)>, k: usize },
    Cnk { index: NeighbourIndex, targets: Vec<f64>, k: usize },
    Knc { index: NeighbourIndex, targets: Vec<f64>, k: usize },
    TwoStep { model: Box<BaseModel>, theta: Theta },
    Conformal { half_width: f64 },
}

/// A crisp model plus a fitted variance attachment.
#[derive(Debug, Clone)]
pub struct SoftModel {
    base: Arc<dyn Regressor>,
    method: VarianceMethod,
    attachment: Attachment,
    sigma_floor: f64,
}

fn base_predictions(base: &dyn Regressor, data: &Dataset) -> Result<Vec<f64>> {
    data.features().iter().map(|x| base.predict_mean(x)).collect()
}

fn fit_residual_model(
    learner: ResidualLearner,
    data: Dataset,
    cfg: &EnrichConfig,
) -> Result<Box<BaseModel>> {
    Ok(Box::new(match learner {
        ResidualLearner::Knn => BaseModel::Knn(fit_knn(&data, cfg.k)?),
        ResidualLearner::Tree => BaseModel::Tree(fit_tree(&data, &cfg.tree)?),
    }))
}

/// Smallest score at rank `ceil((1 - eps)(n + 1))`, clamped to the largest
/// score when that rank exceeds `n`.
pub fn conformal_half_width(mut scores: Vec<f64>, epsilon: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InsufficientData("empty calibration set".into()));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config(format!("conformal epsilon {epsilon} outside [0, 1)")));
    }
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    let rank = ((1.0 - epsilon) * (n as f64 + 1.0)).ceil() as usize;
    Ok(scores[rank.clamp(1, n) - 1])
}

/// Attaches `method` to `base` using `train` (the training fold, or a
/// separate calibration set for the conformal method).
pub fn enrich(
    base: Arc<dyn Regressor>,
    train: &Dataset,
    method: VarianceMethod,
    cfg: &EnrichConfig,
) -> Result<SoftModel> {
    if train.is_empty() {
        return Err(Error::InsufficientData("enrichment needs training rows".into()));
    }
    if cfg.k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let sigma_floor = sigma_floor_for(train.targets());
    let attachment = match method {
        VarianceMethod::Own => Attachment::Own,
        VarianceMethod::Rbe(learner) => {
            let y_hat = base_predictions(base.as_ref(), train)?;
            let v: Vec<f64> = y_hat
                .iter()
                .zip(train.targets())
                .map(|(p, y)| cfg.theta.apply(y - p))
                .collect();
            let data = Dataset::from_rows(
                train.name(),
                y_hat.iter().map(|&p| vec![p]).collect(),
                v,
            )?;
            Attachment::Residual {
                model: fit_residual_model(learner, data, cfg)?,
                theta: cfg.theta,
            }
        }
        VarianceMethod::Bin => {
            let y_hat = base_predictions(base.as_ref(), train)?;
            let pairs = y_hat
                .iter()
                .zip(train.targets())
                .map(|(&p, y)| (p, cfg.theta.apply(y - p)))
                .collect();
            Attachment::Bin {
                pairs: ResidualPairs::new(pairs),
                k: cfg.k,
                theta: cfg.theta,
            }
        }
        VarianceMethod::Uknc => {
            let y_hat = base_predictions(base.as_ref(), train)?;
            Attachment::Uknc {
                q: y_hat.into_iter().zip(train.targets().iter().copied()).collect(),
                k: cfg.k.min(train.len()),
            }
        }
        VarianceMethod::Cnk | VarianceMethod::Knc => {
            let index = NeighbourIndex::new(train);
            let targets = train.targets().to_vec();
            let k = cfg.k.min(train.len());
            if method == VarianceMethod::Cnk {
                Attachment::Cnk { index, targets, k }
            } else {
                Attachment::Knc { index, targets, k }
            }
        }
        VarianceMethod::TwoStep(learner) => {
            let y_hat = base_predictions(base.as_ref(), train)?;
            let v: Vec<f64> = y_hat
                .iter()
                .zip(train.targets())
                .map(|(p, y)| cfg.theta.apply(y - p))
                .collect();
            Attachment::TwoStep {
                model: fit_residual_model(learner, train.with_targets(v)?, cfg)?,
                theta: cfg.theta,
            }
        }
        VarianceMethod::Conformal => {
            let y_hat = base_predictions(base.as_ref(), train)?;
            let scores = y_hat
                .iter()
                .zip(train.targets())
                .map(|(p, y)| (y - p).abs())
                .collect();
            Attachment::Conformal {
                half_width: conformal_half_width(scores, cfg.conformal_epsilon)?,
            }
        }
    };
    Ok(SoftModel {
        base,
        method,
        attachment,
        sigma_floor,
    })
}

fn nearest_by_estimate(q: &[(f64, f64)], y_hat: f64, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = q
        .iter()
        .enumerate()
        .map(|(i, &(p, _))| ((p - y_hat).abs(), i))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k, by_key);
        d.truncate(k);
    }
    let mut idx: Vec<usize> = d.into_iter().map(|(_, i)| i).collect();
    idx.sort_unstable();
    idx
}

fn mean_sq_dev(centre: f64, values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), y| (s + (centre - y).powi(2), n + 1));
    sum / n as f64
}

impl SoftModel {
    pub fn method(&self) -> VarianceMethod {
        self.method
    }

    pub fn base(&self) -> &Arc<dyn Regressor> {
        &self.base
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    /// The conformal half-width, for the conformal method.
    pub fn conformal_half_width(&self) -> Option<f64> {
        match self.attachment {
            Attachment::Conformal { half_width } => Some(half_width),
            _ => None,
        }
    }

    /// Indices (training order) of the neighbours used for `x`, for the
    /// neighbour-based attachments.
    pub fn neighbours(&self, x: &[f64]) -> Result<Option<Vec<usize>>> {
        Ok(match &self.attachment {
            Attachment::Uknc { q, k } => Some(nearest_by_estimate(q, self.base.predict_mean(x)?, *k)),
            Attachment::Cnk { index, k, .. } | Attachment::Knc { index, k, .. } => {
                Some(index.nearest(x, *k)?)
            }
            _ => None,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<NormalPrediction> {
        if let Attachment::Own = self.attachment {
            return self.base.predict_normal(x);
        }
        let y_hat = self.base.predict_mean(x)?;
        let sigma = match &self.attachment {
            Attachment::Own => unreachable!(),
            Attachment::Residual { model, theta } => theta.invert(model.predict_mean(&[y_hat])?),
            Attachment::Bin { pairs, k, theta } => {
                let w = pairs.window(y_hat, *k);
                theta.invert(w.iter().map(|p| p.1).sum::<f64>() / w.len() as f64)
            }
            Attachment::Uknc { q, k } => {
                let idx = nearest_by_estimate(q, y_hat, *k);
                mean_sq_dev(y_hat, idx.iter().map(|&i| q[i].1)).sqrt()
            }
            Attachment::Cnk { index, targets, k } => {
                let idx = index.nearest(x, *k)?;
                let c = idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64;
                (c - y_hat).abs()
            }
            Attachment::Knc { index, targets, k } => {
                let idx = index.nearest(x, *k)?;
                mean_sq_dev(y_hat, idx.iter().map(|&i| targets[i])).sqrt()
            }
            Attachment::TwoStep { model, theta } => theta.invert(model.predict_mean(x)?),
            Attachment::Conformal { half_width } => *half_width,
        };
        NormalPrediction::floored(y_hat, sigma, self.sigma_floor)
    }

    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<NormalPrediction>> {
        data.features().iter().map(|x| self.predict(x)).collect()
    }
}

/// Gaussian belief for `x` from an inductive conformal region calibrated on
/// `calibration` with absolute-residual nonconformity.
pub fn conformal_sigma(
    base: &dyn Regressor,
    calibration: &Dataset,
    x: &[f64],
    epsilon: f64,
) -> Result<NormalPrediction> {
    let scores = calibration
        .features()
        .iter()
        .zip(calibration.targets())
        .map(|(xi, y)| Ok((y - base.predict_mean(xi)?).abs()))
        .collect::<Result<Vec<_>>>()?;
    let q = conformal_half_width(scores, epsilon)?;
    NormalPrediction::floored(base.predict_mean(x)?, q, sigma_floor_for(calibration.targets()))
}
