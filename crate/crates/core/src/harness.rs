//! The evaluation protocol: ordered two-fold splits, parameter grids, per-cell
//! deployment losses, aggregation and rank statistics.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{sample_sd, split_two_fold_ordered, Dataset};
use crate::enrichment::{enrich, EnrichConfig, VarianceMethod, METHOD_GRAMMAR};
use crate::loss::{eval_loss, Decision, LossSpec};
use crate::metrics::report;
use crate::reframing::optimize::linspace;
use crate::reframing::{cosh_fit, global_reject_fit, posh_fit, reframe, ReframePolicy};
use crate::regressors::{fit_base, BaseKind, BaseParams, Regressor};
use crate::stats::{rank_summary, RankSummary};
use crate::{Error, Result};

/// Losses are multiplied by this factor when rendered.
pub const DEFAULT_SCALE: f64 = 10.0;

/// A loss family swept over its parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Bid,
    BidNeg,
    AsymAbs,
    AsymSq,
    AsymAbsReject,
    AsymSqReject,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Bid,
        Family::BidNeg,
        Family::AsymAbs,
        Family::AsymSq,
        Family::AsymAbsReject,
        Family::AsymSqReject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Bid => "bid",
            Family::BidNeg => "bidneg",
            Family::AsymAbs => "asym_abs",
            Family::AsymSq => "asym_sq",
            Family::AsymAbsReject => "asym_abs_reject",
            Family::AsymSqReject => "asym_sq_reject",
        }
    }

    pub fn is_reject(self) -> bool {
        matches!(self, Family::AsymAbsReject | Family::AsymSqReject)
    }

    fn is_bid(self) -> bool {
        matches!(self, Family::Bid | Family::BidNeg)
    }

    /// None, Own, uKNC, BIN and CoSh, plus PoSh outside the bid families.
    pub fn default_methods(self) -> Vec<Strategy> {
        let mut m = vec![
            Strategy::None,
            Strategy::Local(VarianceMethod::Own),
            Strategy::Local(VarianceMethod::Uknc),
            Strategy::Local(VarianceMethod::Bin),
            Strategy::CoSh,
        ];
        if !self.is_bid() {
            m.push(Strategy::PoSh);
        }
        m
    }

    pub fn default_alpha_steps(self) -> usize {
        if self.is_reject() {
            5
        } else {
            10
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown family '{s}' (expected bid | bidneg | asym_abs | asym_sq | asym_abs_reject | asym_sq_reject)"
                ))
            })
    }
}

/// How a method turns a fitted base model into deployment decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// The conditional mean as is.
    None,
    /// Enrichment followed by per-instance reframing.
    Local(VarianceMethod),
    CoSh,
    PoSh,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::None => "None",
            Strategy::Local(m) => m.label(),
            Strategy::CoSh => "CoSh",
            Strategy::PoSh => "PoSh",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Strategy::None),
            "cosh" => Ok(Strategy::CoSh),
            "posh" => Ok(Strategy::PoSh),
            other => other.parse().map(Strategy::Local).map_err(|_| {
                Error::Parse(format!("unknown method '{s}' (expected none | cosh | posh | {METHOD_GRAMMAR})"))
            }),
        }
    }
}

/// `steps` evenly spaced values on [0, 1], endpoints included.
pub fn unit_grid(steps: usize) -> Vec<f64> {
    linspace(0.0, 1.0, steps)
}

pub fn alpha_grid(steps: usize) -> Vec<f64> {
    unit_grid(steps)
}

fn target_range(targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::InsufficientData("grid needs targets".into()));
    }
    let lo = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(hi - lo)
}

/// `range * a^2`: squaring makes small bids more frequent.
pub fn beta_for(range: f64, a: f64) -> f64 {
    range * a * a
}

pub fn beta_grid(targets: &[f64], steps: usize) -> Result<Vec<f64>> {
    let range = target_range(targets)?;
    Ok(unit_grid(steps).into_iter().map(|a| beta_for(range, a)).collect())
}

/// `sd / 2 * r / (1 - r)`, infinite at `r = 1`.
pub fn rho_for(sd: f64, r: f64) -> f64 {
    if r >= 1.0 {
        f64::INFINITY
    } else {
        0.5 * sd * r / (1.0 - r)
    }
}

pub fn rho_grid(train_targets: &[f64], steps: usize) -> Result<Vec<f64>> {
    if train_targets.is_empty() {
        return Err(Error::InsufficientData("grid needs targets".into()));
    }
    let sd = sample_sd(train_targets);
    Ok(unit_grid(steps).into_iter().map(|r| rho_for(sd, r)).collect())
}

/// Grid sizes; `alpha_steps = None` uses the family default (10, or 5 for
/// reject families).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grids {
    pub alpha_steps: Option<usize>,
    pub beta_steps: usize,
    pub rho_steps: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            alpha_steps: None,
            beta_steps: 10,
            rho_steps: 10,
        }
    }
}

/// A grid coordinate: `a` for bid families, `alpha`, or `(alpha, r)`. The
/// loss parameters themselves depend on the training fold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamPoint {
    pub index: usize,
    pub coords: Vec<(&'static str, f64)>,
}

impl ParamPoint {
    pub fn coord(&self, name: &str) -> Option<f64> {
        self.coords.iter().find(|c| c.0 == name).map(|c| c.1)
    }
}

pub fn param_points(family: Family, grids: &Grids) -> Result<Vec<ParamPoint>> {
    let alpha_steps = grids.alpha_steps.unwrap_or(family.default_alpha_steps());
    for (name, steps) in [("alpha", alpha_steps), ("beta", grids.beta_steps), ("rho", grids.rho_steps)] {
        if steps == 0 {
            return Err(Error::Config(format!("{name} grid needs at least one step")));
        }
    }
    let coords: Vec<Vec<(&'static str, f64)>> = match family {
        Family::Bid | Family::BidNeg => unit_grid(grids.beta_steps).into_iter().map(|a| vec![("a", a)]).collect(),
        Family::AsymAbs | Family::AsymSq => alpha_grid(alpha_steps).into_iter().map(|a| vec![("alpha", a)]).collect(),
        Family::AsymAbsReject | Family::AsymSqReject => alpha_grid(alpha_steps)
            .into_iter()
            .flat_map(|a| unit_grid(grids.rho_steps).into_iter().map(move |r| vec![("alpha", a), ("r", r)]))
            .collect(),
    };
    Ok(coords
        .into_iter()
        .enumerate()
        .map(|(index, coords)| ParamPoint { index, coords })
        .collect())
}

/// The loss at `point`, with beta and rho scaled by the training targets.
pub fn loss_at(family: Family, point: &ParamPoint, train_targets: &[f64]) -> Result<LossSpec> {
    let get = |name| {
        point
            .coord(name)
            .ok_or_else(|| Error::Config(format!("parameter point lacks '{name}'")))
    };
    Ok(match family {
        Family::Bid => LossSpec::Bid {
            beta: beta_for(target_range(train_targets)?, get("a")?),
        },
        Family::BidNeg => LossSpec::BidNonLosing {
            beta: beta_for(target_range(train_targets)?, get("a")?),
        },
        Family::AsymAbs => LossSpec::AsymAbsolute { alpha: get("alpha")? },
        Family::AsymSq => LossSpec::AsymSquared { alpha: get("alpha")? },
        Family::AsymAbsReject => LossSpec::AsymAbsoluteReject {
            alpha: get("alpha")?,
            rho: rho_for(sample_sd(train_targets), get("r")?),
        },
        Family::AsymSqReject => LossSpec::AsymSquaredReject {
            alpha: get("alpha")?,
            rho: rho_for(sample_sd(train_targets), get("r")?),
        },
    })
}

#[derive(Debug, Clone, Default)]
pub struct HarnessConfig {
    pub grids: Grids,
    pub base_params: BaseParams,
    pub enrich: EnrichConfig,
}

/// Mean test loss of one (dataset, base, method, parameter point, fold).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub dataset: String,
    pub base: &'static str,
    pub method: &'static str,
    pub param_index: usize,
    pub fold: u8,
    pub loss: f64,
}

/// A dataset dropped from the table because one of its cells failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Excluded {
    pub dataset: String,
    pub reason: String,
}

/// All cells of one family run. Cells are unscaled; `scale_factor` only
/// applies when rendering.
#[derive(Debug, Clone)]
pub struct ExperimentTable {
    pub family: Family,
    pub datasets: Vec<String>,
    pub bases: Vec<BaseKind>,
    pub methods: Vec<Strategy>,
    pub params: Vec<ParamPoint>,
    /// Ordered by dataset, base, method, parameter point, fold.
    pub cells: Vec<Cell>,
    pub excluded: Vec<Excluded>,
    pub scale_factor: f64,
}

impl ExperimentTable {
    fn cells_for<'a>(&'a self, dataset: &'a str, base: BaseKind, method: Strategy) -> impl Iterator<Item = &'a Cell> {
        self.cells
            .iter()
            .filter(move |c| c.dataset == dataset && c.base == base.as_str() && c.method == method.label())
    }

    /// Mean over folds and parameter points.
    pub fn aggregated(&self, dataset: &str, base: BaseKind, method: Strategy) -> Option<f64> {
        let (sum, n) = self
            .cells_for(dataset, base, method)
            .fold((0.0, 0usize), |(s, n), c| (s + c.loss, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Datasets-by-methods matrix of aggregated losses for one base.
    pub fn loss_matrix(&self, base: BaseKind) -> Vec<Vec<f64>> {
        self.datasets
            .iter()
            .map(|d| {
                self.methods
                    .iter()
                    .map(|&m| self.aggregated(d, base, m).unwrap_or(f64::NAN))
                    .collect()
            })
            .collect()
    }

    /// Average ranks and tests over datasets, for one base.
    pub fn rank_summary(&self, base: BaseKind) -> Result<RankSummary> {
        rank_summary(&self.loss_matrix(base))
    }

    /// Per parameter point, the fold-mean loss of each method.
    pub fn sweep(&self, dataset: &str, base: BaseKind) -> Vec<(ParamPoint, Vec<f64>)> {
        self.params
            .iter()
            .map(|p| {
                let row = self
                    .methods
                    .iter()
                    .map(|&m| {
                        let losses: Vec<f64> = self
                            .cells_for(dataset, base, m)
                            .filter(|c| c.param_index == p.index)
                            .map(|c| c.loss)
                            .collect();
                        losses.iter().sum::<f64>() / losses.len() as f64
                    })
                    .collect();
                (p.clone(), row)
            })
            .collect()
    }
}

/// Mean loss of `decisions` against `targets`.
pub fn mean_deployment_loss(spec: &LossSpec, decisions: &[Decision], targets: &[f64]) -> Result<f64> {
    if decisions.len() != targets.len() || targets.is_empty() {
        return Err(Error::Dimension {
            expected: targets.len(),
            got: decisions.len(),
        });
    }
    let mut total = 0.0;
    for (&d, &y) in decisions.iter().zip(targets) {
        total += eval_loss(spec, d, y)?;
    }
    Ok(total / targets.len() as f64)
}

fn crisp(model: &dyn Regressor, data: &Dataset) -> Result<Vec<f64>> {
    data.features().iter().map(|x| model.predict_mean(x)).collect()
}

fn fit_global(method: Strategy, spec: &LossSpec, train_hat: &[f64], train_y: &[f64]) -> Result<ReframePolicy> {
    let inner = match method {
        Strategy::CoSh => cosh_fit(spec, train_hat, train_y)?,
        Strategy::PoSh => posh_fit(spec, train_hat, train_y)?,
        _ => unreachable!("not a global method"),
    };
    if spec.allows_reject() {
        global_reject_fit(spec, train_hat, train_y, inner)
    } else {
        Ok(inner)
    }
}

/// Cells of one (dataset, fold, base) job, in method-then-parameter order.
#[allow(clippy::too_many_arguments)]
fn run_job(
    family: Family,
    data: &Dataset,
    fold: u8,
    train: &Dataset,
    test: &Dataset,
    base: BaseKind,
    methods: &[Strategy],
    params: &[ParamPoint],
    cfg: &HarnessConfig,
) -> Result<Vec<Cell>> {
    let model: Arc<dyn Regressor> = Arc::new(fit_base(base, train, &cfg.base_params)?);
    let specs: Vec<LossSpec> = params
        .iter()
        .map(|p| loss_at(family, p, train.targets()))
        .collect::<Result<_>>()?;
    let train_hat = crisp(model.as_ref(), train)?;
    let test_hat = crisp(model.as_ref(), test)?;
    let mut cells = Vec::with_capacity(methods.len() * params.len());
    for &method in methods {
        let soft = match method {
            Strategy::Local(vm) => Some(enrich(model.clone(), train, vm, &cfg.enrich)?.predict_all(test)?),
            _ => None,
        };
        for (p, spec) in params.iter().zip(&specs) {
            let decisions: Vec<Decision> = match method {
                Strategy::None => test_hat.iter().map(|&t| Decision::Predict(t)).collect(),
                Strategy::Local(_) => soft.as_ref().unwrap().iter().map(|pred| reframe(spec, pred)).collect(),
                Strategy::CoSh | Strategy::PoSh => {
                    let policy = fit_global(method, spec, &train_hat, train.targets())?;
                    test_hat
                        .iter()
                        .map(|&t| match &policy {
                            ReframePolicy::GlobalRejectRate { reject_all: true, .. } => Decision::Reject,
                            ReframePolicy::GlobalRejectRate { inner, .. } => Decision::Predict(inner.transform(t).unwrap()),
                            other => Decision::Predict(other.transform(t).unwrap()),
                        })
                        .collect()
                }
            };
            cells.push(Cell {
                dataset: data.name().to_string(),
                base: base.as_str(),
                method: method.label(),
                param_index: p.index,
                fold,
                loss: mean_deployment_loss(spec, &decisions, test.targets())?,
            });
        }
    }
    Ok(cells)
}

fn check_methods(methods: &[Strategy]) -> Result<()> {
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(Error::Config(format!("method {m} listed twice")));
        }
    }
    Ok(())
}

/// Runs every (dataset, base, method, parameter point, fold) cell. Jobs run
/// in parallel; results are merged in input order. A dataset with any failing
/// cell is excluded entirely so the table stays rectangular.
pub fn run_family(
    family: Family,
    datasets: &[Dataset],
    bases: &[BaseKind],
    methods: &[Strategy],
    cfg: &HarnessConfig,
) -> Result<ExperimentTable> {
    if bases.is_empty() || methods.is_empty() {
        return Err(Error::Config("at least one base and one method are required".into()));
    }
    check_methods(methods)?;
    let params = param_points(family, &cfg.grids)?;

    let per_dataset: Vec<Result<Vec<Cell>>> = datasets
        .par_iter()
        .map(|data| {
            let (f1, f2) = split_two_fold_ordered(data)?;
            let folds = [f1, f2];
            let jobs: Vec<(usize, BaseKind)> = (0..2).flat_map(|f| bases.iter().map(move |&b| (f, b))).collect();
            let results: Vec<Result<Vec<Cell>>> = jobs
                .par_iter()
                .map(|&(f, base)| {
                    let split = &folds[f];
                    let train = data.subset(&split.train_indices);
                    let test = data.subset(&split.test_indices);
                    run_job(family, data, split.fold_id, &train, &test, base, methods, &params, cfg)
                })
                .collect();
            let mut cells = Vec::new();
            for r in results {
                cells.extend(r?);
            }
            let base_pos = |b: &str| bases.iter().position(|k| k.as_str() == b);
            let method_pos = |m: &str| methods.iter().position(|k| k.label() == m);
            cells.sort_by_key(|c| (base_pos(c.base), method_pos(c.method), c.param_index, c.fold));
            Ok(cells)
        })
        .collect();

    let mut table = ExperimentTable {
        family,
        datasets: Vec::new(),
        bases: bases.to_vec(),
        methods: methods.to_vec(),
        params,
        cells: Vec::new(),
        excluded: Vec::new(),
        scale_factor: DEFAULT_SCALE,
    };
    for (data, result) in datasets.iter().zip(per_dataset) {
        match result {
            Ok(cells) => {
                table.datasets.push(data.name().to_string());
                table.cells.extend(cells);
            }
            Err(e) => table.excluded.push(Excluded {
                dataset: data.name().to_string(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(table)
}

/// Conditional-density quality of one (dataset, base, enrichment) triple,
/// averaged over the two folds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NcdeRow {
    pub dataset: String,
    pub base: &'static str,
    pub method: String,
    pub mrse: f64,
    pub msll: f64,
    pub msvr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct NcdeConfig {
    pub base_params: BaseParams,
    pub enrich: EnrichConfig,
    /// Fraction of each training fold held out (from its tail) to calibrate
    /// the conformal method; `None` calibrates on the whole training fold.
    pub conformal_holdout: Option<f64>,
}

fn ncde_fold(
    train: &Dataset,
    test: &Dataset,
    base: BaseKind,
    method: VarianceMethod,
    cfg: &NcdeConfig,
) -> Result<[f64; 3]> {
    let (fit_on, calibrate_on) = match (method, cfg.conformal_holdout) {
        (VarianceMethod::Conformal, Some(p)) => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("conformal holdout must be in (0, 1), got {p}")));
            }
            let n = train.len();
            let n_cal = ((n as f64 * p).round() as usize).clamp(1, n.saturating_sub(1).max(1));
            let cut = n - n_cal;
            if cut == 0 {
                return Err(Error::InsufficientData("holdout leaves no rows to fit the base".into()));
            }
            let head: Vec<usize> = (0..cut).collect();
            let tail: Vec<usize> = (cut..n).collect();
            (train.subset(&head), train.subset(&tail))
        }
        _ => (train.clone(), train.clone()),
    };
    let model: Arc<dyn Regressor> = Arc::new(fit_base(base, &fit_on, &cfg.base_params)?);
    let soft = enrich(model, &calibrate_on, method, &cfg.enrich)?;
    let preds = soft.predict_all(test)?;
    let train_mean = train.targets().iter().sum::<f64>() / train.len() as f64;
    let r = report(&preds, test.targets(), train_mean)?;
    Ok([r.mrse, r.msll, r.msvr])
}

/// mrse, msll and msvr per (dataset, base, method) under the two-fold
/// protocol. Datasets with a failing cell are reported as excluded.
pub fn eval_ncde(
    datasets: &[Dataset],
    bases: &[BaseKind],
    methods: &[VarianceMethod],
    cfg: &NcdeConfig,
) -> (Vec<NcdeRow>, Vec<Excluded>) {
    let results: Vec<Result<Vec<NcdeRow>>> = datasets
        .par_iter()
        .map(|data| {
            let (f1, f2) = split_two_fold_ordered(data)?;
            let folds: Vec<(Dataset, Dataset)> = [f1, f2]
                .iter()
                .map(|s| (data.subset(&s.train_indices), data.subset(&s.test_indices)))
                .collect();
            let mut rows = Vec::new();
            for &base in bases {
                for &method in methods {
                    let mut acc = [0.0; 3];
                    for (train, test) in &folds {
                        let m = ncde_fold(train, test, base, method, cfg)?;
                        for (a, v) in acc.iter_mut().zip(m) {
                            *a += v / folds.len() as f64;
                        }
                    }
                    rows.push(NcdeRow {
                        dataset: data.name().to_string(),
                        base: base.as_str(),
                        method: method.to_string(),
                        mrse: acc[0],
                        msll: acc[1],
                        msvr: acc[2],
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (data, r) in datasets.iter().zip(results) {
        match r {
            Ok(r) => rows.extend(r),
            Err(e) => excluded.push(Excluded {
                dataset: data.name().to_string(),
                reason: e.to_string(),
            }),
        }
    }
    (rows, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, Generator};

    #[test]
    fn grids() {
        let targets: Vec<f64> = (0..=9).map(f64::from).collect();
        let b = beta_grid(&targets, 10).unwrap();
        assert_eq!(b.len(), 10);
        assert_eq!(b[0], 0.0);
        assert!((b[3] - 1.0).abs() < 1e-12);
        assert_eq!(b[9], 9.0);
        assert_eq!(alpha_grid(5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(alpha_grid(2), vec![0.0, 1.0]);
        let a10 = alpha_grid(10);
        assert_eq!((a10.len(), a10[0], a10[9]), (10, 0.0, 1.0));
        let rho = rho_grid(&targets, 10).unwrap();
        assert_eq!(rho[0], 0.0);
        assert_eq!(rho[9], f64::INFINITY);
        assert_eq!(rho_for(2.0, 0.5), 1.0);
    }

    #[test]
    fn reject_families_have_fifty_points() {
        let p = param_points(Family::AsymAbsReject, &Grids::default()).unwrap();
        assert_eq!(p.len(), 50);
        assert_eq!(param_points(Family::Bid, &Grids::default()).unwrap().len(), 10);
        assert_eq!(param_points(Family::AsymSq, &Grids::default()).unwrap().len(), 10);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("none".parse::<Strategy>().unwrap(), Strategy::None);
        assert_eq!("uknc".parse::<Strategy>().unwrap(), Strategy::Local(VarianceMethod::Uknc));
        assert_eq!("PoSh".parse::<Strategy>().unwrap(), Strategy::PoSh);
        assert!("foo".parse::<Strategy>().is_err());
        assert_eq!(Family::Bid.default_methods().len(), 5);
        assert_eq!(Family::AsymSq.default_methods().len(), 6);
    }

    fn small_cfg() -> HarnessConfig {
        HarnessConfig {
            grids: Grids {
                alpha_steps: Some(3),
                beta_steps: 3,
                rho_steps: 3,
            },
            ..Default::default()
        }
    }

    #[test]
    fn table_is_rectangular_and_none_is_plain_loss() {
        let d = generate(Generator::LinearHeteroscedastic, 120, 5).unwrap().dataset;
        let methods = [Strategy::None, Strategy::Local(VarianceMethod::Uknc)];
        let t = run_family(Family::AsymAbs, std::slice::from_ref(&d), &[BaseKind::Linear], &methods, &small_cfg()).unwrap();
        assert_eq!(t.cells.len(), 2 * 3 * 2);
        // None at alpha = 0.5 is half the mean absolute error of the base
        let (f1, _) = split_two_fold_ordered(&d).unwrap();
        let train = d.subset(&f1.train_indices);
        let test = d.subset(&f1.test_indices);
        let model = fit_base(BaseKind::Linear, &train, &BaseParams::default()).unwrap();
        let mae: f64 = test
            .features()
            .iter()
            .zip(test.targets())
            .map(|(x, y)| (model.predict_mean(x).unwrap() - y).abs())
            .sum::<f64>()
            / test.len() as f64;
        let cell = t
            .cells
            .iter()
            .find(|c| c.method == "None" && c.param_index == 1 && c.fold == 1)
            .unwrap();
        assert!((cell.loss - 0.5 * mae).abs() < 1e-12);
    }

    #[test]
    fn failing_dataset_is_excluded() {
        let good = generate(Generator::LinearHomoscedastic, 60, 1).unwrap().dataset;
        let bad = Dataset::new("one-row", vec!["x".into()], vec![vec![1.0]], vec![2.0]).unwrap();
        let t = run_family(Family::Bid, &[bad, good], &[BaseKind::Tree], &[Strategy::None, Strategy::CoSh], &small_cfg())
            .unwrap();
        assert_eq!(t.datasets, vec!["linear-homoscedastic".to_string()]);
        assert_eq!(t.excluded.len(), 1);
        assert!(t.cells.iter().all(|c| c.dataset == "linear-homoscedastic"));
    }

    #[test]
    fn ncde_mean_preserving_methods_share_mrse() {
        let d = generate(Generator::StepHeteroscedastic, 200, 4).unwrap().dataset;
        let methods = [VarianceMethod::Own, VarianceMethod::Uknc, VarianceMethod::Bin];
        let (rows, excluded) = eval_ncde(&[d], &[BaseKind::Knn], &methods, &NcdeConfig::default());
        assert!(excluded.is_empty());
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].mrse, rows[1].mrse);
        assert_eq!(rows[0].mrse, rows[2].mrse);
    }

    #[test]
    fn conformal_holdout_runs() {
        let d = generate(Generator::LinearHomoscedastic, 200, 4).unwrap().dataset;
        let cfg = NcdeConfig {
            conformal_holdout: Some(0.3),
            ..Default::default()
        };
        let (rows, excluded) = eval_ncde(std::slice::from_ref(&d), &[BaseKind::Linear], &[VarianceMethod::Conformal], &cfg);
        assert!(excluded.is_empty() && rows.len() == 1);
        let bad = NcdeConfig {
            conformal_holdout: Some(1.5),
            ..Default::default()
        };
        let (_, excluded) = eval_ncde(&[d], &[BaseKind::Linear], &[VarianceMethod::Conformal], &bad);
        assert_eq!(excluded.len(), 1);
    }
}
