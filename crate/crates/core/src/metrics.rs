//! Logistic-standardised quality scores for soft regression models: 0 is
//! best, 1 is worst.

use serde::Serialize;

use crate::dataset::Dataset;
use crate::enrichment::SoftModel;
use crate::error::{Error, Result};
use crate::normal::NormalPrediction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub mrse: f64,
    pub msll: f64,
    pub msvr: f64,
}

pub fn logistic(t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        0.0
    } else {
        1.0 / (1.0 + (-t).exp())
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Contract(format!("{a} predictions for {b} targets")));
    }
    if a == 0 {
        return Err(Error::InsufficientData("no evaluation rows".into()));
    }
    Ok(())
}

/// Squared error relative to the constant model that always predicts
/// `train_mean`, squashed so that this constant model scores 0.5.
pub fn mrse(predictions: &[f64], targets: &[f64], train_mean: f64) -> Result<f64> {
    check_lengths(predictions.len(), targets.len())?;
    let sse: f64 = predictions.iter().zip(targets).map(|(p, y)| (y - p).powi(2)).sum();
    let baseline: f64 = targets.iter().map(|y| (y - train_mean).powi(2)).sum();
    if baseline <= 0.0 {
        return Err(Error::InsufficientData("constant evaluation targets".into()));
    }
    Ok(2.0 * logistic(sse / baseline * 3f64.ln()) - 1.0)
}

pub fn msll_of(predictions: &[NormalPrediction], targets: &[f64]) -> Result<f64> {
    check_lengths(predictions.len(), targets.len())?;
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, &y)| 1.0 / (1.0 + p.pdf(y)))
        .sum();
    Ok(total / targets.len() as f64)
}

fn variance_ratio(variance: f64, sq_residual: f64) -> f64 {
    match (variance == 0.0, sq_residual == 0.0) {
        (true, true) => 1.0,
        (false, true) => f64::INFINITY,
        _ => variance / sq_residual,
    }
}

pub fn msvr_of(predictions: &[NormalPrediction], targets: &[f64]) -> Result<f64> {
    check_lengths(predictions.len(), targets.len())?;
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, &y)| {
            let vr = variance_ratio(p.variance(), (p.mu - y).powi(2));
            if vr.is_infinite() {
                1.0
            } else {
                (1.0 - 2.0 / (1.0 + vr)).abs()
            }
        })
        .sum();
    Ok(total / targets.len() as f64)
}

pub fn msll(soft: &SoftModel, eval: &Dataset) -> Result<f64> {
    msll_of(&soft.predict_all(eval)?, eval.targets())
}

pub fn msvr(soft: &SoftModel, eval: &Dataset) -> Result<f64> {
    msvr_of(&soft.predict_all(eval)?, eval.targets())
}

/// All three scores for precomputed predictions.
pub fn report(predictions: &[NormalPrediction], targets: &[f64], train_mean: f64) -> Result<MetricReport> {
    let mus: Vec<f64> = predictions.iter().map(|p| p.mu).collect();
    Ok(MetricReport {
        mrse: mrse(&mus, targets, train_mean)?,
        msll: msll_of(predictions, targets)?,
        msvr: msvr_of(predictions, targets)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(3f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(logistic(f64::NEG_INFINITY), 0.0);
        assert_eq!(logistic(f64::INFINITY), 1.0);
    }

    #[test]
    fn mrse_examples() {
        let ys = [1.0, 2.0, 6.0];
        let mean = 3.0;
        assert!((mrse(&[mean; 3], &ys, mean).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(mrse(&ys, &ys, mean).unwrap(), 0.0);
        // sse = 2 * baseline (baseline 14): ratio 2 -> 2 * 9/10 - 1
        let preds = [1.0 + 28f64.sqrt(), 2.0, 6.0];
        assert!((mrse(&preds, &ys, mean).unwrap() - 0.8).abs() < 1e-12);
        assert!(mrse(&[1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn msll_examples() {
        let p = NormalPrediction::new(0.0, 1.0);
        let v = msll_of(&[p], &[0.0]).unwrap();
        assert!((v - 1.0 / (1.0 + 0.398_942_280_401_432_7)).abs() < 1e-12);
        assert!((v - 0.71482).abs() < 1e-5);
        // density 1 at the observation: sigma = 1/sqrt(2 pi)
        let p = NormalPrediction::new(0.0, 0.398_942_280_401_432_7);
        assert!((msll_of(&[p], &[0.0]).unwrap() - 0.5).abs() < 1e-12);
        let tight = NormalPrediction::new(0.0, 1e-12);
        let v = msll_of(&[tight], &[0.0]).unwrap();
        assert!(v > 0.0 && v < 1e-9);
    }

    #[test]
    fn msvr_examples() {
        let ys = [1.0, -2.0, 4.0];
        let preds: Vec<NormalPrediction> = [0.0, 1.0, 2.0]
            .iter()
            .zip(&ys)
            .map(|(&mu, y)| NormalPrediction::new(mu, (mu - y).abs()))
            .collect();
        assert!(msvr_of(&preds, &ys).unwrap() < 1e-12);
        let preds3: Vec<NormalPrediction> = preds
            .iter()
            .map(|p| NormalPrediction::new(p.mu, p.sigma * 3f64.sqrt()))
            .collect();
        assert!((msvr_of(&preds3, &ys).unwrap() - 0.5).abs() < 1e-12);
        // zero residual with positive variance
        let p = NormalPrediction::new(1.0, 1.0);
        assert_eq!(msvr_of(&[p], &[1.0]).unwrap(), 1.0);
        let p = NormalPrediction::new(0.0, 1e6);
        assert!(msvr_of(&[p], &[1.0]).unwrap() > 0.999);
    }

    proptest! {
        #[test]
        fn metric_ranges_and_invariances(
            rows in prop::collection::vec((-10.0..10.0f64, 0.01..5.0f64, -10.0..10.0f64, 0.1..10.0f64), 2..30),
        ) {
            let preds: Vec<NormalPrediction> = rows.iter().map(|r| NormalPrediction::new(r.0, r.1)).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64 + 0.5;
            let rep = report(&preds, &ys, mean).unwrap();
            prop_assert!((0.0..=1.0).contains(&rep.mrse));
            prop_assert!(rep.msll > 0.0 && rep.msll <= 1.0);
            prop_assert!((0.0..=1.0).contains(&rep.msvr));

            // row order
            let mut rp = preds.clone();
            let mut ry = ys.clone();
            rp.reverse();
            ry.reverse();
            let rev = report(&rp, &ry, mean).unwrap();
            prop_assert!((rev.msll - rep.msll).abs() < 1e-12);
            prop_assert!((rev.msvr - rep.msvr).abs() < 1e-12);
            prop_assert!((rev.mrse - rep.mrse).abs() < 1e-12);

            // per-row joint rescaling of sigma and residual
            let scaled: Vec<(NormalPrediction, f64)> = preds.iter().zip(&ys).zip(&rows)
                .map(|((p, y), r)| (NormalPrediction::new(p.mu, p.sigma * r.3), p.mu + (y - p.mu) * r.3))
                .collect();
            let sp: Vec<NormalPrediction> = scaled.iter().map(|s| s.0).collect();
            let sy: Vec<f64> = scaled.iter().map(|s| s.1).collect();
            prop_assert!((msvr_of(&sp, &sy).unwrap() - rep.msvr).abs() < 1e-9);
        }

        #[test]
        fn mrse_increases_with_error(extra in 0.01..5.0f64) {
            let ys = [0.0, 1.0, 2.0, 3.0];
            let base = mrse(&[0.5, 1.0, 2.0, 3.0], &ys, 1.5).unwrap();
            let worse = mrse(&[0.5 + extra, 1.0, 2.0, 3.0], &ys, 1.5).unwrap();
            prop_assert!(worse > base);
        }
    }
}
