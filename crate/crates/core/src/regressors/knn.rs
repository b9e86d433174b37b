use super::{check_dim, Regressor};
use crate::dataset::{sample_sd, Dataset};
use crate::error::{Error, Result};
use crate::normal::{sigma_floor_for, NormalPrediction};

pub const DEFAULT_K: usize = 10;

/// Training features standardized by their own mean and standard deviation.
/// Zero-spread features are left out of the distance.
#[derive(Debug, Clone)]
pub(crate) struct NeighbourIndex {
    means: Vec<f64>,
    sds: Vec<f64>,
    active: Vec<usize>,
    points: Vec<Vec<f64>>,
}

impl NeighbourIndex {
    pub(crate) fn new(train: &Dataset) -> Self {
        let d = train.n_features();
        let mut means = Vec::with_capacity(d);
        let mut sds = Vec::with_capacity(d);
        for j in 0..d {
            let column: Vec<f64> = train.features().iter().map(|r| r[j]).collect();
            means.push(column.iter().sum::<f64>() / column.len() as f64);
            sds.push(sample_sd(&column));
        }
        let active: Vec<usize> = (0..d).filter(|&j| sds[j] > 0.0).collect();
        let points = train
            .features()
            .iter()
            .map(|row| active.iter().map(|&j| (row[j] - means[j]) / sds[j]).collect())
            .collect();
        Self {
            means,
            sds,
            active,
            points,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.points.len()
    }

    pub(crate) fn n_features(&self) -> usize {
        self.means.len()
    }

    fn distances(&self, x: &[f64]) -> Vec<(f64, usize)> {
        let q: Vec<f64> = self
            .active
            .iter()
            .map(|&j| (x[j] - self.means[j]) / self.sds[j])
            .collect();
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (d2, i)
            })
            .collect()
    }

    /// Indices of the `k` nearest rows (ties by lower index), returned in
    /// ascending index order.
    pub(crate) fn nearest(&self, x: &[f64], k: usize) -> Result<Vec<usize>> {
        check_dim(self.n_features(), x)?;
        let k = k.min(self.len());
        let mut d = self.distances(x);
        let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k, by_key);
            d.truncate(k);
        }
        let mut idx: Vec<usize> = d.into_iter().map(|(_, i)| i).collect();
        idx.sort_unstable();
        Ok(idx)
    }
}

/// Unweighted k-nearest-neighbour regressor on standardized features.
#[derive(Debug, Clone)]
pub struct KnnModel {
    k: usize,
    index: NeighbourIndex,
    targets: Vec<f64>,
    sigma_floor: f64,
}

/// Stores the training fold; `k` is clamped to the number of rows.
pub fn fit_knn(train: &Dataset, k: usize) -> Result<KnnModel> {
    if train.is_empty() {
        return Err(Error::InsufficientData("kNN needs at least one row".into()));
    }
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    Ok(KnnModel {
        k: k.min(train.len()),
        index: NeighbourIndex::new(train),
        targets: train.targets().to_vec(),
        sigma_floor: sigma_floor_for(train.targets()),
    })
}

pub(crate) fn mean_and_population_variance(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

impl KnnModel {
    /// Effective k after clamping.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.index.nearest(x, self.k)
    }

    pub fn training_targets(&self) -> &[f64] {
        &self.targets
    }
}

impl Regressor for KnnModel {
    fn n_features(&self) -> usize {
        self.index.n_features()
    }

    fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_normal(x)?.mu)
    }

    fn predict_normal(&self, x: &[f64]) -> Result<NormalPrediction> {
        let idx = self.neighbours(x)?;
        let (mu, var) = mean_and_population_variance(idx.iter().map(|&i| self.targets[i]));
        NormalPrediction::floored(mu, var.sqrt(), self.sigma_floor)
    }

    fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Dataset {
        Dataset::from_rows("knn", xs, ys).unwrap()
    }

    #[test]
    fn k_is_clamped() {
        let train = ds((0..5).map(|i| vec![i as f64]).collect(), vec![1.0; 5]);
        assert_eq!(fit_knn(&train, 10).unwrap().k(), 5);
        assert_eq!(fit_knn(&train, DEFAULT_K).unwrap().k(), 5);
        assert_eq!(DEFAULT_K, 10);
    }

    #[test]
    fn zero_sd_feature_is_dropped() {
        let train = ds(
            vec![vec![1.0, 0.0], vec![1.0, 10.0], vec![1.0, 20.0]],
            vec![0.0, 1.0, 2.0],
        );
        let m = fit_knn(&train, 1).unwrap();
        // first feature differs wildly but carries no spread in training
        assert_eq!(m.predict_mean(&[1000.0, 9.0]).unwrap(), 1.0);

        let all_const = ds(vec![vec![3.0], vec![3.0], vec![3.0]], vec![0.0, 3.0, 6.0]);
        let m = fit_knn(&all_const, 2).unwrap();
        // all distances 0: ties resolved by index
        assert_eq!(m.neighbours(&[7.0]).unwrap(), vec![0, 1]);
    }

    #[test]
    fn equal_neighbour_targets_floor_sigma() {
        let train = ds((0..6).map(|i| vec![i as f64]).collect(), vec![4.0, 4.0, 4.0, 9.0, 9.0, 9.0]);
        let p = fit_knn(&train, 3).unwrap().predict_normal(&[0.5]).unwrap();
        assert_eq!(p.mu, 4.0);
        assert_eq!(p.sigma, sigma_floor_for(train.targets()));
    }

    #[test]
    fn two_neighbours_mean_and_variance() {
        let train = ds(vec![vec![0.0], vec![1.0], vec![10.0]], vec![0.0, 2.0, 50.0]);
        let p = fit_knn(&train, 2).unwrap().predict_normal(&[0.4]).unwrap();
        assert_eq!(p.mu, 1.0);
        assert!((p.variance() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_with_k1() {
        let train = ds(vec![vec![0.0], vec![1.0], vec![2.0]], vec![5.0, 6.0, 7.0]);
        assert_eq!(fit_knn(&train, 1).unwrap().predict_mean(&[1.0]).unwrap(), 6.0);
    }

    #[test]
    fn k_equal_n_is_global_mean() {
        let ys = vec![0.1, 0.7, 0.3, 1.9, -2.2, 0.05, 3.3];
        let train = ds((0..7).map(|i| vec![(i * 3 % 7) as f64]).collect(), ys.clone());
        let m = fit_knn(&train, 7).unwrap();
        let global = ys.iter().sum::<f64>() / ys.len() as f64;
        assert_eq!(m.predict_mean(&[2.5]).unwrap(), global);
    }
}
