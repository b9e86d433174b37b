use crate::loss::{Decision, LossSpec};
use crate::normal::NormalPrediction;

use super::{ExpectedLoss, Method};

/// Half-width of the integration range, in standard deviations.
const SPAN_SIGMAS: f64 = 10.0;
/// Simpson intervals per smooth piece (2001 points).
const INTERVALS: usize = 2000;

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + h * i as f64;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even)
}

/// Expected loss of a decision under a Gaussian belief by numerical
/// integration of `loss(t, y) * pdf(y)` over `mu +/- 10 sigma`. The range is
/// split at every point where the loss jumps or has a kink in `y`, and each
/// piece is integrated with composite Simpson on 2001 points.
pub fn expected_loss_quadrature(spec: &LossSpec, decision: Decision, pred: &NormalPrediction) -> ExpectedLoss {
    let t = match decision {
        Decision::Reject => {
            return ExpectedLoss {
                value: spec.reject_cost().unwrap_or(f64::NAN),
                method: Method::Quadrature,
            }
        }
        Decision::Predict(t) => t,
    };
    let lo = pred.mu - SPAN_SIGMAS * pred.sigma;
    let hi = pred.mu + SPAN_SIGMAS * pred.sigma;
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = spec
        .breakpoints_in_actual(t)
        .into_iter()
        .filter(|&b| b > lo && b < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(hi);
    cuts.dedup();

    let mut value = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // evaluate the loss on the piece's interior side at its endpoints so
        // that jump points take the limit from within the piece
        let eps = ((b - a) * 1e-12).max(a.abs().max(b.abs()) * 4.0 * f64::EPSILON);
        if b - a <= 4.0 * eps {
            continue;
        }
        let f = |y: f64| {
            let y_loss = y.clamp(a + eps, b - eps);
            spec.point(t, y_loss) * pred.pdf(y)
        };
        value += simpson(&f, a, b, INTERVALS);
    }
    ExpectedLoss {
        value,
        method: Method::Quadrature,
    }
}
