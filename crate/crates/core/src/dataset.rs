//! Numeric datasets, the ordered two-fold split and train/test shift statistics.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Immutable numeric dataset: one feature vector and one target per row, in
/// file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    /// Writes the features followed by a `y` column, using the shortest
    /// round-trip float rendering.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.feature_names.clone();
        header.push("y".into());
        w.write_record(&header)?;
        for (x, y) in self.features.iter().zip(&self.targets) {
            w.write_record(x.iter().chain(std::iter::once(y)).map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which column of a CSV file holds the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
    Last,
}

impl TargetColumn {
    /// Interprets a CLI value: a bare integer is a 0-based index, `last` the
    /// final column, anything else a header name.
    pub fn parse(spec: &str) -> Self {
        if spec.eq_ignore_ascii_case("last") {
            TargetColumn::Last
        } else if let Ok(i) = spec.parse::<usize>() {
            TargetColumn::Index(i)
        } else {
            TargetColumn::Name(spec.to_string())
        }
    }
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::Contract(format!(
                "{} feature rows but {} targets",
                features.len(),
                targets.len()
            )));
        }
        let d = feature_names.len();
        if d == 0 {
            return Err(Error::Contract("dataset needs at least one feature".into()));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) || !targets[i].is_finite() {
                return Err(Error::Contract(format!("row {i} has a non-finite value")));
            }
        }
        Ok(Self {
            name: name.into(),
            feature_names,
            features,
            targets,
        })
    }

    /// Convenience constructor with generated feature names `x1..xd`.
    pub fn from_rows(
        name: impl Into<String>,
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let d = features.first().map_or(0, Vec::len);
        let names = (1..=d).map(|j| format!("x{j}")).collect();
        Self::new(name, names, features, targets)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    /// Rows selected by `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    /// Same targets, features replaced (used by the single-feature residual
    /// regressors).
    pub fn with_features(&self, names: Vec<String>, features: Vec<Vec<f64>>) -> Result<Dataset> {
        Dataset::new(self.name.clone(), names, features, self.targets.clone())
    }

    /// Same features, targets replaced.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            self.name.clone(),
            self.feature_names.clone(),
            self.features.clone(),
            targets,
        )
    }
}

/// Reads a headed CSV with numeric cells. Row order is preserved.
pub fn load_csv(path: &Path, target: &TargetColumn, separator: u8) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(separator)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::ingest(path, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::ingest(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::ingest(path, "no rows"));
    }
    let target_idx = match target {
        TargetColumn::Last => headers.len() - 1,
        TargetColumn::Index(i) if *i < headers.len() => *i,
        TargetColumn::Index(i) => {
            return Err(Error::Config(format!(
                "target column index {i} out of range ({} columns)",
                headers.len()
            )))
        }
        TargetColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("target column '{name}' not found")))?,
    };
    if headers.len() < 2 {
        return Err(Error::Config(
            "need at least one feature column besides the target".into(),
        ));
    }
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based data row numbering, header excluded
        let row_no = i + 1;
        if record.len() != headers.len() {
            return Err(Error::ingest(
                path,
                format!(
                    "row {row_no}: expected {} cells, found {}",
                    headers.len(),
                    record.len()
                ),
            ));
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        let mut y = 0.0;
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::ingest(
                    path,
                    format!("row {row_no}, column '{}': non-numeric cell '{cell}'", headers[j]),
                )
            })?;
            if !value.is_finite() {
                return Err(Error::ingest(
                    path,
                    format!("row {row_no}, column '{}': non-finite value", headers[j]),
                ));
            }
            if j == target_idx {
                y = value;
            } else {
                row.push(value);
            }
        }
        features.push(row);
        targets.push(y);
    }
    if targets.is_empty() {
        return Err(Error::ingest(path, "no rows"));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::new(name, feature_names, features, targets)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_id: u8,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Unshuffled two-fold split. Fold 1 trains on the first `ceil(n/2)` rows and
/// tests on the remainder; fold 2 swaps the roles.
pub fn split_two_fold_ordered(d: &Dataset) -> Result<(FoldSplit, FoldSplit)> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "two-fold split needs at least 2 rows, got {n}"
        )));
    }
    let half = n.div_ceil(2);
    let first: Vec<usize> = (0..half).collect();
    let second: Vec<usize> = (half..n).collect();
    Ok((
        FoldSplit {
            fold_id: 1,
            train_indices: first.clone(),
            test_indices: second.clone(),
        },
        FoldSplit {
            fold_id: 2,
            train_indices: second,
            test_indices: first,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftStats {
    /// `None` when the training targets have zero standard deviation.
    pub tr_te_md: Option<f64>,
    pub tr_te_ks: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

pub fn shift_stats(train_targets: &[f64], test_targets: &[f64]) -> Result<ShiftStats> {
    if train_targets.is_empty() || test_targets.is_empty() {
        return Err(Error::InsufficientData(
            "shift statistics need nonempty train and test samples".into(),
        ));
    }
    let sd = sample_sd(train_targets);
    let tr_te_md = (sd > 0.0).then(|| (mean(train_targets) - mean(test_targets)).abs() / sd);
    Ok(ShiftStats {
        tr_te_md,
        tr_te_ks: ks_statistic(train_targets, test_targets),
    })
}

/// One row of the dataset summary table: size and fold-averaged shift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub tr_te_md: Option<f64>,
    pub tr_te_ks: f64,
}

/// Per-fold shift statistics averaged over the two ordered folds.
pub fn summarize(d: &Dataset) -> Result<DatasetSummary> {
    let (f1, f2) = split_two_fold_ordered(d)?;
    let mut md = Some(0.0);
    let mut ks = 0.0;
    for fold in [&f1, &f2] {
        let train: Vec<f64> = fold.train_indices.iter().map(|&i| d.target(i)).collect();
        let test: Vec<f64> = fold.test_indices.iter().map(|&i| d.target(i)).collect();
        let s = shift_stats(&train, &test)?;
        md = md.zip(s.tr_te_md).map(|(a, b)| a + b / 2.0);
        ks += s.tr_te_ks / 2.0;
    }
    Ok(DatasetSummary {
        name: d.name().to_string(),
        n: d.len(),
        d: d.n_features(),
        tr_te_md: md,
        tr_te_ks: ks,
    })
}
