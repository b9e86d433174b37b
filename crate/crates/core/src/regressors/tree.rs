use super::knn::mean_and_population_variance;
use super::{check_dim, Regressor};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::normal::{sigma_floor_for, NormalPrediction};

/// CART growth controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// Smallest node on which a split is attempted.
    pub min_split: usize,
    /// Smallest number of rows allowed in a child.
    pub min_leaf: usize,
    /// Required deviance reduction as a fraction of the root deviance.
    pub min_gain_fraction: f64,
    pub max_depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_split: 10,
            min_leaf: 5,
            min_gain_fraction: 0.01,
            max_depth: 31,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        mean: f64,
        variance: f64,
        count: usize,
    },
}

/// Regression tree; node 0 is the root.
#[derive(Debug, Clone)]
pub struct TreeModel {
    nodes: Vec<TreeNode>,
    n_features: usize,
    sigma_floor: f64,
}

struct Builder<'a> {
    train: &'a Dataset,
    params: TreeParams,
    min_gain: f64,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn deviance(ys: impl Iterator<Item = f64> + Clone) -> f64 {
    let (_, var) = mean_and_population_variance(ys.clone());
    var * ys.count() as f64
}

impl Builder<'_> {
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let (mean, variance) = mean_and_population_variance(rows.iter().map(|&i| self.train.target(i)));
        TreeNode::Leaf {
            mean,
            variance,
            count: rows.len(),
        }
    }

    fn best_split(&self, rows: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        // centre targets on the node mean to keep the running sums well conditioned
        let centre = rows.iter().map(|&i| self.train.target(i)).sum::<f64>() / n as f64;
        let total: f64 = rows.iter().map(|&i| self.train.target(i) - centre).sum();
        let total_sq: f64 = rows
            .iter()
            .map(|&i| (self.train.target(i) - centre).powi(2))
            .sum();
        let parent = total_sq - total * total / n as f64;

        let mut best: Option<BestSplit> = None;
        let mut order = rows.to_vec();
        for feature in 0..self.train.n_features() {
            let value = |i: usize| self.train.row(i)[feature];
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            let (mut s, mut s2) = (0.0, 0.0);
            for pos in 0..n - 1 {
                let y = self.train.target(order[pos]) - centre;
                s += y;
                s2 += y * y;
                let left_n = pos + 1;
                let right_n = n - left_n;
                if left_n < min_leaf || right_n < min_leaf {
                    continue;
                }
                let (lo, hi) = (value(order[pos]), value(order[pos + 1]));
                if lo == hi {
                    continue;
                }
                let left_dev = s2 - s * s / left_n as f64;
                let rs = total - s;
                let right_dev = (total_sq - s2) - rs * rs / right_n as f64;
                let gain = parent - left_dev - right_dev;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        gain,
                        feature,
                        threshold: lo + (hi - lo) / 2.0,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(self.leaf(&rows));
        if rows.len() < self.params.min_split || depth >= self.params.max_depth {
            return id;
        }
        let Some(split) = self.best_split(&rows) else {
            return id;
        };
        if !(split.gain > 0.0 && split.gain >= self.min_gain) {
            return id;
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.train.row(i)[split.feature] <= split.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows a binary regression tree by greedy squared-error reduction. Each
/// leaf keeps the mean, population variance and count of its training rows.
pub fn fit_tree(train: &Dataset, params: &TreeParams) -> Result<TreeModel> {
    if train.is_empty() {
        return Err(Error::InsufficientData("tree needs at least one row".into()));
    }
    let root_dev = deviance(train.targets().iter().copied());
    let mut builder = Builder {
        train,
        params: *params,
        min_gain: params.min_gain_fraction * root_dev,
        nodes: Vec::new(),
    };
    builder.grow((0..train.len()).collect(), 0);
    Ok(TreeModel {
        nodes: builder.nodes,
        n_features: train.n_features(),
        sigma_floor: sigma_floor_for(train.targets()),
    })
}

impl TreeModel {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Index of the leaf node `x` falls into.
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.n_features, x)?;
        let mut id = 0;
        loop {
            match self.nodes[id] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right },
                TreeNode::Leaf { .. } => return Ok(id),
            }
        }
    }
}

impl Regressor for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_normal(x)?.mu)
    }

    fn predict_normal(&self, x: &[f64]) -> Result<NormalPrediction> {
        match self.nodes[self.leaf_index(x)?] {
            TreeNode::Leaf { mean, variance, .. } => {
                NormalPrediction::floored(mean, variance.sqrt(), self.sigma_floor)
            }
            TreeNode::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }
}
