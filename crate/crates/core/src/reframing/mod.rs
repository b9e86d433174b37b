//! Loss-optimal predictions: local (per-instance, from a Gaussian belief)
//! and global (one shift fitted on the training fold).

mod global;
mod local;
pub mod optimize;
mod quadrature;

pub use global::{
    apply_policy, cosh_fit, global_reject_fit, mean_training_loss, posh_fit, ReframePolicy,
};
pub use local::{
    asym_sq_stationarity, bid_objective, clamp_alpha, expected_loss_asym_abs_normal,
    expected_loss_asym_sq_normal, reframe, reframe_asym_abs, reframe_asym_sq, reframe_bid,
    reframe_bidneg, reframe_numeric, reject_decision, solve_asym_sq_tprime, ALPHA_MAX, ALPHA_MIN,
};
pub use quadrature::expected_loss_quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Quadrature,
}

/// An expected loss value and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedLoss {
    pub value: f64,
    pub method: Method,
}
