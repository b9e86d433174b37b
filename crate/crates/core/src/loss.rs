//! Loss families over (prediction, actual) pairs, with an optional abstention.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One loss family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    Absolute,
    Squared,
    BoundedAbsolute { beta: f64 },
    Bid { beta: f64 },
    BidNonLosing { beta: f64 },
    AsymAbsolute { alpha: f64 },
    AsymSquared { alpha: f64 },
    /// `rho` may be `+inf` (never reject).
    AsymAbsoluteReject { alpha: f64, rho: f64 },
    AsymSquaredReject { alpha: f64, rho: f64 },
    Tolerance { alpha: f64, tau_minus: f64, tau_plus: f64 },
}

/// Output of a reframer: a point prediction or an abstention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Predict(f64),
    Reject,
}

impl Decision {
    pub fn value(self) -> Option<f64> {
        match self {
            Decision::Predict(v) => Some(v),
            Decision::Reject => None,
        }
    }

    pub fn is_reject(self) -> bool {
        matches!(self, Decision::Reject)
    }
}

/// Structural facts about a loss, consumed by the quadrature engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossProperties {
    pub symmetric: bool,
    pub commutative: bool,
    pub continuous: bool,
}

fn asym_abs(alpha: f64, t: f64, y: f64) -> f64 {
    if t < y {
        alpha * (y - t)
    } else {
        (1.0 - alpha) * (t - y)
    }
}

fn asym_sq(alpha: f64, t: f64, y: f64) -> f64 {
    if t < y {
        alpha * (y - t) * (y - t)
    } else {
        (1.0 - alpha) * (t - y) * (t - y)
    }
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |a: f64| (0.0..=1.0).contains(&a);
        let ok = match *self {
            LossSpec::Absolute | LossSpec::Squared => true,
            LossSpec::BoundedAbsolute { beta } => beta >= 0.0 && beta.is_finite(),
            LossSpec::Bid { beta } | LossSpec::BidNonLosing { beta } => beta.is_finite(),
            LossSpec::AsymAbsolute { alpha } | LossSpec::AsymSquared { alpha } => unit(alpha),
            LossSpec::AsymAbsoluteReject { alpha, rho } | LossSpec::AsymSquaredReject { alpha, rho } => {
                unit(alpha) && rho >= 0.0
            }
            LossSpec::Tolerance {
                alpha,
                tau_minus,
                tau_plus,
            } => unit(alpha) && tau_minus >= 0.0 && tau_plus >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid loss parameters: {self}")))
        }
    }

    pub fn allows_reject(&self) -> bool {
        matches!(
            self,
            LossSpec::AsymAbsoluteReject { .. } | LossSpec::AsymSquaredReject { .. }
        )
    }

    /// Cost of abstaining, for the reject variants.
    pub fn reject_cost(&self) -> Option<f64> {
        match *self {
            LossSpec::AsymAbsoluteReject { rho, .. } | LossSpec::AsymSquaredReject { rho, .. } => Some(rho),
            _ => None,
        }
    }

    /// The loss applied when a reject variant does predict.
    pub fn without_reject(&self) -> LossSpec {
        match *self {
            LossSpec::AsymAbsoluteReject { alpha, .. } => LossSpec::AsymAbsolute { alpha },
            LossSpec::AsymSquaredReject { alpha, .. } => LossSpec::AsymSquared { alpha },
            other => other,
        }
    }

    /// Loss of predicting `t` when the actual value is `y`.
    pub fn point(&self, t: f64, y: f64) -> f64 {
        match *self {
            LossSpec::Absolute => (t - y).abs(),
            LossSpec::Squared => (t - y) * (t - y),
            LossSpec::BoundedAbsolute { beta } => (t - y).abs().min(beta),
            LossSpec::Bid { beta } => {
                if t <= y {
                    beta - t
                } else {
                    0.0
                }
            }
            LossSpec::BidNonLosing { beta } => {
                if t <= y && beta <= t {
                    beta - t
                } else {
                    0.0
                }
            }
            LossSpec::AsymAbsolute { alpha } | LossSpec::AsymAbsoluteReject { alpha, .. } => {
                asym_abs(alpha, t, y)
            }
            LossSpec::AsymSquared { alpha } | LossSpec::AsymSquaredReject { alpha, .. } => {
                asym_sq(alpha, t, y)
            }
            LossSpec::Tolerance {
                alpha,
                tau_minus,
                tau_plus,
            } => {
                if t + tau_minus < y {
                    alpha
                } else if t - tau_plus > y {
                    1.0 - alpha
                } else {
                    0.0
                }
            }
        }
    }

    pub fn properties(&self) -> LossProperties {
        let half = |a: f64| a == 0.5;
        match *self {
            LossSpec::Absolute | LossSpec::Squared | LossSpec::BoundedAbsolute { .. } => LossProperties {
                symmetric: true,
                commutative: true,
                continuous: true,
            },
            LossSpec::Bid { .. } | LossSpec::BidNonLosing { .. } => LossProperties {
                symmetric: false,
                commutative: false,
                continuous: false,
            },
            LossSpec::AsymAbsolute { alpha }
            | LossSpec::AsymSquared { alpha }
            | LossSpec::AsymAbsoluteReject { alpha, .. }
            | LossSpec::AsymSquaredReject { alpha, .. } => LossProperties {
                symmetric: half(alpha),
                commutative: half(alpha),
                continuous: true,
            },
            LossSpec::Tolerance {
                alpha,
                tau_minus,
                tau_plus,
            } => {
                let sym = half(alpha) && tau_minus == tau_plus;
                LossProperties {
                    symmetric: sym,
                    commutative: sym,
                    continuous: false,
                }
            }
        }
    }

    /// Predictions `t` at which the loss jumps for a fixed actual value `y`.
    pub fn discontinuities_in_prediction(&self, y: f64) -> Vec<f64> {
        match *self {
            LossSpec::Bid { .. } => vec![y],
            LossSpec::BidNonLosing { beta } => vec![beta, y],
            LossSpec::Tolerance {
                tau_minus, tau_plus, ..
            } => vec![y - tau_minus, y + tau_plus],
            _ => Vec::new(),
        }
    }

    /// Actual values `y` at which the loss, for a fixed prediction `t`, jumps
    /// or loses smoothness. Integration ranges are split here.
    pub fn breakpoints_in_actual(&self, t: f64) -> Vec<f64> {
        match *self {
            LossSpec::BoundedAbsolute { beta } => vec![t - beta, t, t + beta],
            LossSpec::Tolerance {
                tau_minus, tau_plus, ..
            } => vec![t - tau_plus, t + tau_minus],
            LossSpec::Squared => Vec::new(),
            _ => vec![t],
        }
    }
}

/// Loss of a decision. Abstaining is only legal under the reject variants.
pub fn eval_loss(spec: &LossSpec, decision: Decision, y: f64) -> Result<f64> {
    match decision {
        Decision::Predict(t) => Ok(spec.point(t, y)),
        Decision::Reject => spec
            .reject_cost()
            .ok_or_else(|| Error::Contract(format!("reject is not allowed under {spec}"))),
    }
}

pub fn loss_properties(spec: &LossSpec) -> LossProperties {
    spec.properties()
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LossSpec::Absolute => write!(f, "abs"),
            LossSpec::Squared => write!(f, "sq"),
            LossSpec::BoundedAbsolute { beta } => write!(f, "bounded_abs:beta={}", fmt_num(beta)),
            LossSpec::Bid { beta } => write!(f, "bid:beta={}", fmt_num(beta)),
            LossSpec::BidNonLosing { beta } => write!(f, "bidneg:beta={}", fmt_num(beta)),
            LossSpec::AsymAbsolute { alpha } => write!(f, "asym_abs:alpha={}", fmt_num(alpha)),
            LossSpec::AsymSquared { alpha } => write!(f, "asym_sq:alpha={}", fmt_num(alpha)),
            LossSpec::AsymAbsoluteReject { alpha, rho } => write!(
                f,
                "asym_abs_reject:alpha={},rho={}",
                fmt_num(alpha),
                fmt_num(rho)
            ),
            LossSpec::AsymSquaredReject { alpha, rho } => write!(
                f,
                "asym_sq_reject:alpha={},rho={}",
                fmt_num(alpha),
                fmt_num(rho)
            ),
            LossSpec::Tolerance {
                alpha,
                tau_minus,
                tau_plus,
            } => write!(
                f,
                "tolerance:alpha={},tau_minus={},tau_plus={}",
                fmt_num(alpha),
                fmt_num(tau_minus),
                fmt_num(tau_plus)
            ),
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    /// Grammar: `family[:key=value[,key=value]*]`, e.g. `bid:beta=3`,
    /// `asym_abs_reject:alpha=0.5,rho=0.3`. `inf` is accepted for `rho`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, args) = s.split_once(':').unwrap_or((s, ""));
        let mut params: Vec<(&str, f64)> = Vec::new();
        for kv in args.split(',').filter(|a| !a.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{kv}'")))?;
            let v: f64 = match v.trim() {
                "inf" | "+inf" => f64::INFINITY,
                other => other
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number '{other}' for {k}")))?,
            };
            params.push((k.trim(), v));
        }
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Parse(format!("loss '{family}' needs {key}=")))
        };
        let spec = match family.trim() {
            "abs" | "absolute" => LossSpec::Absolute,
            "sq" | "squared" => LossSpec::Squared,
            "bounded_abs" => LossSpec::BoundedAbsolute { beta: get("beta")? },
            "bid" => LossSpec::Bid { beta: get("beta")? },
            "bidneg" => LossSpec::BidNonLosing { beta: get("beta")? },
            "asym_abs" => LossSpec::AsymAbsolute { alpha: get("alpha")? },
            "asym_sq" => LossSpec::AsymSquared { alpha: get("alpha")? },
            "asym_abs_reject" => LossSpec::AsymAbsoluteReject {
                alpha: get("alpha")?,
                rho: get("rho")?,
            },
            "asym_sq_reject" => LossSpec::AsymSquaredReject {
                alpha: get("alpha")?,
                rho: get("rho")?,
            },
            "tolerance" => LossSpec::Tolerance {
                alpha: get("alpha")?,
                tau_minus: get("tau_minus")?,
                tau_plus: get("tau_plus")?,
            },
            other => return Err(Error::Parse(format!("unknown loss family '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
