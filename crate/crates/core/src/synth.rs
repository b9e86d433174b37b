//! Seeded synthetic regression data with known conditional mean and
//! standard deviation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Dataset;
use crate::normal::NormalPrediction;
use crate::{Error, Result};

/// Features are iid uniform on [0, 1]; `y = mu(x) + sigma(x) * z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// `mu = 1 + 3 x1 - 2 x2`, `sigma = 0.5`.
    LinearHomoscedastic,
    /// Same mean, `sigma = 0.1 + 1.5 x1`.
    LinearHeteroscedastic,
    /// Same mean, `sigma = 0.2` for `x1 < 0.5` and `1.5` otherwise.
    StepHeteroscedastic,
}

pub const N_FEATURES: usize = 2;

impl Generator {
    pub const ALL: [Generator; 3] = [
        Generator::LinearHomoscedastic,
        Generator::LinearHeteroscedastic,
        Generator::StepHeteroscedastic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Generator::LinearHomoscedastic => "linear-homoscedastic",
            Generator::LinearHeteroscedastic => "linear-heteroscedastic",
            Generator::StepHeteroscedastic => "step-heteroscedastic",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Generator::LinearHomoscedastic => "linear-hom",
            Generator::LinearHeteroscedastic => "linear-het",
            Generator::StepHeteroscedastic => "step-het",
        }
    }

    pub fn truth(self, x: &[f64]) -> NormalPrediction {
        let mu = 1.0 + 3.0 * x[0] - 2.0 * x[1];
        let sigma = match self {
            Generator::LinearHomoscedastic => 0.5,
            Generator::LinearHeteroscedastic => 0.1 + 1.5 * x[0],
            Generator::StepHeteroscedastic => {
                if x[0] < 0.5 {
                    0.2
                } else {
                    1.5
                }
            }
        };
        NormalPrediction::new(mu, sigma)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Generator::ALL
            .into_iter()
            .find(|g| g.as_str() == s || g.short() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown generator '{s}' (expected linear-homoscedastic | linear-heteroscedastic | step-heteroscedastic)"
                ))
            })
    }
}

/// A generated dataset and the true conditional distribution of every row.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub dataset: Dataset,
    pub truth: Vec<NormalPrediction>,
}

pub fn generate(generator: Generator, n: usize, seed: u64) -> Result<SynthData> {
    if n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..N_FEATURES).map(|_| rng.random::<f64>()).collect();
        let t = generator.truth(&x);
        let z: f64 = StandardNormal.sample(&mut rng);
        targets.push(t.mu + t.sigma * z);
        truth.push(t);
        features.push(x);
    }
    let names = (1..=N_FEATURES).map(|i| format!("x{i}")).collect();
    Ok(SynthData {
        dataset: Dataset::new(generator.as_str(), names, features, targets)?,
        truth,
    })
}

impl SynthData {
    /// Writes the dataset to `data_path` and the per-row `mu,sigma` to
    /// `truth_path`.
    pub fn write(&self, data_path: &Path, truth_path: &Path) -> Result<()> {
        self.dataset.write_csv(data_path)?;
        let mut w = csv::Writer::from_path(truth_path)?;
        w.write_record(["mu", "sigma"])?;
        for t in &self.truth {
            w.write_record([t.mu.to_string(), t.sigma.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a `mu,sigma` sidecar written by [`SynthData::write`].
pub fn read_truth(path: &Path) -> Result<Vec<NormalPrediction>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let field = |j: usize| -> Result<f64> {
                rec.get(j)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::ingest(path, format!("row {}: bad value in column {}", i + 1, j + 1)))
            };
            Ok(NormalPrediction::new(field(0)?, field(1)?))
        })
        .collect()
}
