//! Per-instance loss-optimal decisions from a Gaussian belief.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use crate::loss::{Decision, LossSpec};
use crate::normal::{std_cdf, std_pdf, std_quantile, NormalPrediction};

use super::optimize::{augmented_grid, bisect, golden_section, grid_then_golden};
use super::quadrature::expected_loss_quadrature;
use super::{ExpectedLoss, Method};

/// Asymmetry values are clamped into this range before quantile or root
/// computations.
pub const ALPHA_MIN: f64 = 1e-9;
pub const ALPHA_MAX: f64 = 1.0 - 1e-9;

const GRID_POINTS: usize = 2001;
const SEARCH_SIGMAS: f64 = 8.0;
const REFINE_TOL: f64 = 1e-10;

pub fn clamp_alpha(alpha: f64) -> f64 {
    alpha.clamp(ALPHA_MIN, ALPHA_MAX)
}

/// Minimises the quadrature expected loss over a 2001-point grid on
/// `mu +/- 8 sigma` (plus `beta` and `mu` for bid losses), refined by
/// golden-section. Reject variants abstain when the best predictive expected
/// loss is strictly above the reject cost.
pub fn reframe_numeric(spec: &LossSpec, pred: &NormalPrediction) -> Decision {
    let inner = spec.without_reject();
    let extra: Vec<f64> = match *spec {
        LossSpec::Bid { beta } | LossSpec::BidNonLosing { beta } => vec![beta, pred.mu],
        _ => vec![pred.mu],
    };
    let points = augmented_grid(
        pred.mu - SEARCH_SIGMAS * pred.sigma,
        pred.mu + SEARCH_SIGMAS * pred.sigma,
        GRID_POINTS,
        &extra,
    );
    let objective = |t: f64| expected_loss_quadrature(&inner, Decision::Predict(t), pred).value;
    let (t, best) = grid_then_golden(&objective, &points, REFINE_TOL * pred.sigma);
    match spec.reject_cost() {
        Some(rho) if best > rho => Decision::Reject,
        _ => Decision::Predict(t),
    }
}

/// `(beta - t) * (1 - F(t))`: the bid expected loss.
pub fn bid_objective(beta: f64, t: f64, pred: &NormalPrediction) -> f64 {
    (beta - t) * std_cdf(-pred.standardize(t))
}

fn minimise_on<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, extra: &[f64], sigma: f64) -> f64 {
    let points = augmented_grid(lo, hi, GRID_POINTS, extra);
    grid_then_golden(&f, &points, REFINE_TOL * sigma).0
}

/// Optimal bid: numeric argmin of the closed bid objective.
pub fn reframe_bid(beta: f64, pred: &NormalPrediction) -> f64 {
    minimise_on(
        |t| bid_objective(beta, t, pred),
        pred.mu - SEARCH_SIGMAS * pred.sigma,
        pred.mu + SEARCH_SIGMAS * pred.sigma,
        &[beta, pred.mu],
        pred.sigma,
    )
}

/// Optimal non-losing bid. The search is restricted to `t >= beta`, where the
/// objective equals the true expected loss and attains values `<= 0`.
pub fn reframe_bidneg(beta: f64, pred: &NormalPrediction) -> f64 {
    let lo = beta.max(pred.mu - SEARCH_SIGMAS * pred.sigma);
    let hi = beta.max(pred.mu + SEARCH_SIGMAS * pred.sigma);
    if hi <= lo {
        return beta;
    }
    let t = minimise_on(|t| bid_objective(beta, t, pred), lo, hi, &[beta, pred.mu], pred.sigma);
    t.max(beta)
}

/// `mu + sigma * Phi^-1(alpha)`: the alpha-quantile of the belief.
pub fn reframe_asym_abs(alpha: f64, pred: &NormalPrediction) -> f64 {
    pred.mu + pred.sigma * std_quantile(clamp_alpha(alpha))
}

/// Standardised asymmetric squared expected loss:
/// `alpha (t^2 + 1) + (1 - 2 alpha) ((t^2 + 1) Phi(t) + t phi(t))`.
fn asym_sq_standard(alpha: f64, t: f64) -> f64 {
    let m2 = t * t + 1.0;
    alpha * m2 + (1.0 - 2.0 * alpha) * (m2 * std_cdf(t) + t * std_pdf(t))
}

/// Half the derivative of [`asym_sq_standard`]; increasing in `t`.
fn asym_sq_slope(alpha: f64, t: f64) -> f64 {
    (1.0 - 2.0 * alpha) * (t * std_cdf(t) + std_pdf(t)) + alpha * t
}

/// Stationarity residual `t Phi(t) + phi(t) + t alpha / (1 - 2 alpha)`.
pub fn asym_sq_stationarity(alpha: f64, t: f64) -> f64 {
    t * std_cdf(t) + std_pdf(t) + t * alpha / (1.0 - 2.0 * alpha)
}

fn tprime_memo() -> &'static RwLock<HashMap<i64, f64>> {
    static MEMO: OnceLock<RwLock<HashMap<i64, f64>>> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

fn solve_tprime_uncached(alpha: f64) -> f64 {
    // widen until the slope changes sign
    let mut half = 4.0;
    while asym_sq_slope(alpha, -half) >= 0.0 || asym_sq_slope(alpha, half) <= 0.0 {
        half *= 2.0;
        if half > 1e6 {
            break;
        }
    }
    let (t, _) = golden_section(|t| asym_sq_standard(alpha, t), -half, half, 1e-6);
    // polish on the slope inside a bracket around the golden-section estimate
    let (mut lo, mut hi) = (t - 1e-4, t + 1e-4);
    while asym_sq_slope(alpha, lo) > 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    while asym_sq_slope(alpha, hi) < 0.0 {
        hi += 2.0 * (hi - lo);
    }
    bisect(|t| asym_sq_slope(alpha, t), lo, hi)
}

/// Standardised optimal prediction `t'` for the asymmetric squared loss, so
/// that the optimum is `mu + sigma t'`. Memoised per alpha.
pub fn solve_asym_sq_tprime(alpha: f64) -> f64 {
    let alpha = clamp_alpha(alpha);
    if alpha == 0.5 {
        return 0.0;
    }
    if alpha > 0.5 {
        // mirror symmetry; also avoids cancellation in the slope for alpha near 1
        return -solve_asym_sq_tprime(1.0 - alpha);
    }
    let key = (alpha * 1e12).round() as i64;
    if let Some(&t) = tprime_memo().read().unwrap().get(&key) {
        return t;
    }
    let t = solve_tprime_uncached(alpha);
    debug_assert!(asym_sq_stationarity(alpha, t).abs() < 1e-8);
    tprime_memo().write().unwrap().insert(key, t);
    t
}

pub fn reframe_asym_sq(alpha: f64, pred: &NormalPrediction) -> f64 {
    pred.mu + pred.sigma * solve_asym_sq_tprime(alpha)
}

/// Closed-form asymmetric absolute expected loss
/// `sigma (t' Phi(t') + phi(t') - alpha t')`.
pub fn expected_loss_asym_abs_normal(alpha: f64, t: f64, pred: &NormalPrediction) -> ExpectedLoss {
    let z = pred.standardize(t);
    ExpectedLoss {
        value: pred.sigma * (z * std_cdf(z) + std_pdf(z) - alpha * z),
        method: Method::ClosedForm,
    }
}

/// Closed-form asymmetric squared expected loss
/// `sigma^2 (alpha (t'^2 + 1) + (1 - 2 alpha) ((t'^2 + 1) Phi(t') + t' phi(t')))`.
pub fn expected_loss_asym_sq_normal(alpha: f64, t: f64, pred: &NormalPrediction) -> ExpectedLoss {
    ExpectedLoss {
        value: pred.variance() * asym_sq_standard(alpha, pred.standardize(t)),
        method: Method::ClosedForm,
    }
}

/// Optimal prediction under a reject variant, or `Reject` when its expected
/// loss exceeds the reject cost.
pub fn reject_decision(spec: &LossSpec, pred: &NormalPrediction) -> Decision {
    let (t, loss, rho) = match *spec {
        LossSpec::AsymAbsoluteReject { alpha, rho } => {
            let t = reframe_asym_abs(alpha, pred);
            (t, expected_loss_asym_abs_normal(alpha, t, pred).value, rho)
        }
        LossSpec::AsymSquaredReject { alpha, rho } => {
            let t = reframe_asym_sq(alpha, pred);
            (t, expected_loss_asym_sq_normal(alpha, t, pred).value, rho)
        }
        _ => return reframe_numeric(spec, pred),
    };
    if loss > rho {
        Decision::Reject
    } else {
        Decision::Predict(t)
    }
}

/// Loss-optimal decision using the dedicated solver for each family, and the
/// numeric minimiser for the rest.
pub fn reframe(spec: &LossSpec, pred: &NormalPrediction) -> Decision {
    match *spec {
        LossSpec::Absolute | LossSpec::Squared | LossSpec::BoundedAbsolute { .. } => Decision::Predict(pred.mu),
        LossSpec::Bid { beta } => Decision::Predict(reframe_bid(beta, pred)),
        LossSpec::BidNonLosing { beta } => Decision::Predict(reframe_bidneg(beta, pred)),
        LossSpec::AsymAbsolute { alpha } => Decision::Predict(reframe_asym_abs(alpha, pred)),
        LossSpec::AsymSquared { alpha } => Decision::Predict(reframe_asym_sq(alpha, pred)),
        LossSpec::AsymAbsoluteReject { .. } | LossSpec::AsymSquaredReject { .. } => reject_decision(spec, pred),
        LossSpec::Tolerance { .. } => reframe_numeric(spec, pred),
    }
}

/// Dense-grid argmin used as an independent check in tests.
#[cfg(test)]
pub(crate) fn dense_argmin<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    super::optimize::linspace(lo, hi, n)
        .into_iter()
        .map(|t| (t, f(t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}
