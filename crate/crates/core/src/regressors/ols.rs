use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{check_dim, Regressor};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::normal::{sigma_floor_for, NormalPrediction};

/// Condition-number estimate above which the normal matrix gets a ridge term.
const MAX_CONDITION: f64 = 1e12;
const RIDGE_SCALE: f64 = 1e-8;

/// Which standard error `predict` reports as sigma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeMode {
    /// `s * sqrt(1 + h(x))`: spread of a new observation.
    #[default]
    Predictive,
    /// `s * sqrt(h(x))`: standard error of the fitted mean.
    Fitted,
}

impl std::str::FromStr for SeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predictive" => Ok(SeMode::Predictive),
            "fitted" => Ok(SeMode::Fitted),
            other => Err(Error::Parse(format!(
                "unknown se mode '{other}' (expected predictive | fitted)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearModel {
    /// Intercept first.
    coefficients: Vec<f64>,
    residual_sd: f64,
    normal_matrix_inverse: DMatrix<f64>,
    ridge: Option<f64>,
    se_mode: SeMode,
    sigma_floor: f64,
}

fn augmented(x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len() + 1, std::iter::once(1.0).chain(x.iter().copied()))
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Ordinary least squares with intercept, falling back to a small ridge term
/// when the normal matrix is (near) singular.
pub fn fit_ols(train: &Dataset) -> Result<LinearModel> {
    if train.is_empty() {
        return Err(Error::InsufficientData("OLS needs at least one row".into()));
    }
    let n = train.len();
    let p = train.n_features() + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { train.row(i)[j - 1] });
    let y = DVector::from_column_slice(train.targets());
    let mut gram = design.transpose() * &design;

    let mut ridge = None;
    if condition_estimate(&gram) > MAX_CONDITION {
        let lambda = RIDGE_SCALE * gram.trace() / p as f64;
        // an all-zero design still needs a positive diagonal
        let lambda = if lambda > 0.0 { lambda } else { RIDGE_SCALE };
        for j in 0..p {
            gram[(j, j)] += lambda;
        }
        ridge = Some(lambda);
    }
    let inverse = gram
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| gram.clone().try_inverse())
        .ok_or_else(|| Error::Contract("normal matrix not invertible after ridge".into()))?;
    let inverse = (&inverse + inverse.transpose()) * 0.5;
    let beta = &inverse * (design.transpose() * &y);

    let fitted = &design * &beta;
    let sse: f64 = (&y - fitted).iter().map(|r| r * r).sum();
    let dof = n.saturating_sub(p).max(1);
    Ok(LinearModel {
        coefficients: beta.iter().copied().collect(),
        residual_sd: (sse / dof as f64).sqrt(),
        normal_matrix_inverse: inverse,
        ridge,
        se_mode: SeMode::Predictive,
        sigma_floor: sigma_floor_for(train.targets()),
    })
}

impl LinearModel {
    pub fn with_se_mode(mut self, mode: SeMode) -> Self {
        self.se_mode = mode;
        self
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn residual_sd(&self) -> f64 {
        self.residual_sd
    }

    pub fn normal_matrix_inverse(&self) -> &DMatrix<f64> {
        &self.normal_matrix_inverse
    }

    /// The ridge term added to the normal matrix diagonal, if any.
    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }

    pub fn se_mode(&self) -> SeMode {
        self.se_mode
    }

    /// Leverage `x~' (X'X)^-1 x~` of the intercept-augmented query.
    pub fn leverage(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.coefficients.len() - 1, x)?;
        let v = augmented(x);
        Ok((v.transpose() * &self.normal_matrix_inverse * &v)[(0, 0)].max(0.0))
    }

    pub fn standard_error(&self, x: &[f64], mode: SeMode) -> Result<f64> {
        let h = self.leverage(x)?;
        Ok(match mode {
            SeMode::Predictive => self.residual_sd * (1.0 + h).sqrt(),
            SeMode::Fitted => self.residual_sd * h.sqrt(),
        })
    }
}

impl Regressor for LinearModel {
    fn n_features(&self) -> usize {
        self.coefficients.len() - 1
    }

    fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n_features(), x)?;
        Ok(self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>())
    }

    fn predict_normal(&self, x: &[f64]) -> Result<NormalPrediction> {
        let mu = self.predict_mean(x)?;
        let sigma = self.standard_error(x, self.se_mode)?;
        NormalPrediction::floored(mu, sigma, self.sigma_floor)
    }

    fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }
}
