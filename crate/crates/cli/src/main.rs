use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand};
use serde_json::{json, Value};

use reframe_core::dataset::{load_csv, summarize, Dataset, TargetColumn};
use reframe_core::enrichment::{EnrichConfig, VarianceMethod};
use reframe_core::harness::{
    eval_ncde, run_family, ExperimentTable, Family, Grids, HarnessConfig, NcdeConfig, Strategy, DEFAULT_SCALE,
};
use reframe_core::regressors::{BaseKind, BaseParams, SeMode, DEFAULT_K};
use reframe_core::report::{
    dataset_summary_csv, family_table_csv, format_sig6, load_loss_matrix, matrix_rank_csv, ncde_csv, rank_summary_csv, sweep_csv,
};
use reframe_core::stats::rank_summary;
use reframe_core::synth::{generate, Generator};

const DEFAULT_SEED: u64 = 20_140_101;

#[derive(Parser, Debug)]
#[command(name = "reframe", version, about = "Conditional density enrichment and loss reframing for regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score variance enrichment methods with mrse, msll and msvr.
    EvalNcde(EvalArgs),
    /// Per-family loss table and rank statistics.
    Reframe(FamilyArgs),
    /// Loss-versus-parameter curves per dataset and base.
    Sweep(FamilyArgs),
    /// Average ranks, Friedman and Nemenyi for a datasets-by-methods loss CSV.
    Report(ReportArgs),
    /// Generate a synthetic dataset with a ground-truth sidecar.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV files (header row required).
    #[arg(long, num_args = 1.., required = true)]
    data: Vec<PathBuf>,
    /// Target column: header name, 0-based index, or `last`.
    #[arg(long, default_value = "last")]
    target_col: String,
    /// Base regressors (repeatable or comma separated).
    #[arg(long, alias = "bases", value_delimiter = ',', default_values = ["lr", "knn", "tree"])]
    base: Vec<BaseKind>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value = "predictive")]
    ols_se_mode: SeMode,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write a JSON mirror of every CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// own | rbe:knn | rbe:tree | bin | uknc | cnk | knc | cve:knn | cve:tree | conformal
    #[arg(long, value_delimiter = ',', default_values = ["own", "uknc", "bin"])]
    method: Vec<VarianceMethod>,
    /// Fraction of each training fold reserved to calibrate `conformal`.
    #[arg(long)]
    conformal_holdout: Option<f64>,
}

#[derive(Args, Debug)]
struct FamilyArgs {
    #[command(flatten)]
    data: DataArgs,
    /// bid | bidneg | asym_abs | asym_sq | asym_abs_reject | asym_sq_reject
    #[arg(long)]
    family: Family,
    /// none | cosh | posh | any enrichment method; defaults to the family's list.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Strategy>,
    #[arg(long)]
    alpha_steps: Option<usize>,
    #[arg(long, default_value_t = 10)]
    beta_steps: usize,
    #[arg(long, default_value_t = 10)]
    rho_steps: usize,
    /// Multiplier applied to rendered losses.
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    scale: f64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// CSV with a dataset column followed by one loss column per method.
    #[arg(long, required = true)]
    data: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// linear-homoscedastic | linear-heteroscedastic | step-heteroscedastic
    #[arg(long)]
    gen: Generator,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Wrong input the user can fix by changing flags; exits with 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            let _ = Cli::command().error(ErrorKind::InvalidValue, e.to_string()).print();
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::EvalNcde(a) => cmd_eval_ncde(a),
        Command::Reframe(a) => cmd_family(a, false),
        Command::Sweep(a) => cmd_family(a, true),
        Command::Report(a) => cmd_report(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn load_all(args: &DataArgs) -> Result<Vec<Dataset>> {
    let target = TargetColumn::parse(&args.target_col);
    let mut out: Vec<Dataset> = Vec::new();
    for path in &args.data {
        let d = load_csv(path, &target, b',')?;
        if out.iter().any(|o| o.name() == d.name()) {
            bail!("two datasets share the name '{}'", d.name());
        }
        out.push(d);
    }
    Ok(out)
}

fn check_common(args: &DataArgs) -> Result<()> {
    if args.k == 0 {
        return Err(usage("--k must be positive"));
    }
    Ok(())
}

fn base_params(args: &DataArgs) -> BaseParams {
    BaseParams {
        k: args.k,
        se_mode: args.ols_se_mode,
        ..Default::default()
    }
}

fn enrich_config(args: &DataArgs) -> EnrichConfig {
    EnrichConfig {
        k: args.k,
        ..Default::default()
    }
}

fn dedup<T: PartialEq + Copy>(items: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for &i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

fn write_output(out: &Path, name: &str, csv: &str, json: Option<Value>) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    if let Some(v) = json {
        let jpath = path.with_extension("json");
        fs::write(&jpath, serde_json::to_string_pretty(&v)? + "\n")
            .with_context(|| format!("writing {}", jpath.display()))?;
        println!("{}", jpath.display());
    }
    Ok(())
}

fn report_excluded(excluded: &[reframe_core::harness::Excluded]) {
    for e in excluded {
        eprintln!("warning: dataset '{}' excluded: {}", e.dataset, e.reason);
    }
}

/// JSON numbers cannot be infinite; those become strings.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(format_sig6(v))
    }
}

fn cmd_eval_ncde(a: EvalArgs) -> Result<()> {
    check_common(&a.data)?;
    if let Some(p) = a.conformal_holdout {
        if !(p > 0.0 && p < 1.0) {
            return Err(usage(format!("--conformal-holdout must be in (0, 1), got {p}")));
        }
    }
    let datasets = load_all(&a.data)?;
    let cfg = NcdeConfig {
        base_params: base_params(&a.data),
        enrich: enrich_config(&a.data),
        conformal_holdout: a.conformal_holdout,
    };
    let (rows, excluded) = eval_ncde(&datasets, &dedup(&a.data.base), &dedup(&a.method), &cfg);
    report_excluded(&excluded);
    if rows.is_empty() {
        bail!("no dataset could be evaluated");
    }
    let json = a.data.json.then(|| json!({ "rows": rows, "excluded": excluded }));
    write_output(&a.data.out, "ncde.csv", &ncde_csv(&rows)?, json)?;
    let summaries: Vec<_> = datasets
        .iter()
        .filter_map(|d| {
            summarize(d)
                .map_err(|e| eprintln!("warning: no summary for dataset '{}': {e}", d.name()))
                .ok()
        })
        .collect();
    let json = a.data.json.then(|| json!(summaries));
    write_output(&a.data.out, "datasets.csv", &dataset_summary_csv(&summaries)?, json)
}

fn table_json(t: &ExperimentTable) -> Value {
    let cells: Vec<Value> = t
        .cells
        .iter()
        .map(|c| {
            json!({
                "dataset": c.dataset, "base": c.base, "method": c.method,
                "param_index": c.param_index, "fold": c.fold, "loss": num(c.loss),
            })
        })
        .collect();
    let params: Vec<Value> = t
        .params
        .iter()
        .map(|p| {
            let coords: serde_json::Map<String, Value> = p.coords.iter().map(|c| (c.0.to_string(), num(c.1))).collect();
            json!({ "index": p.index, "coords": coords })
        })
        .collect();
    let ranks: Vec<Value> = t
        .bases
        .iter()
        .map(|&b| match t.rank_summary(b) {
            Ok(s) => json!({
                "base": b.as_str(), "average_ranks": s.average_ranks, "n_datasets": s.n_datasets,
                "friedman_statistic": s.friedman_statistic, "critical_value": s.critical_value,
                "nemenyi_cd": s.nemenyi_cd, "significant": s.significant,
            }),
            Err(e) => json!({ "base": b.as_str(), "error": e.to_string() }),
        })
        .collect();
    json!({
        "family": t.family.as_str(),
        "scale_factor": t.scale_factor,
        "datasets": t.datasets,
        "bases": t.bases.iter().map(|b| b.as_str()).collect::<Vec<_>>(),
        "methods": t.methods.iter().map(|m| m.label()).collect::<Vec<_>>(),
        "params": params,
        "cells": cells,
        "rank_summaries": ranks,
        "excluded": t.excluded,
    })
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cmd_family(a: FamilyArgs, sweep: bool) -> Result<()> {
    check_common(&a.data)?;
    if !(a.scale.is_finite() && a.scale > 0.0) {
        return Err(usage(format!("--scale must be positive, got {}", a.scale)));
    }
    for (flag, v) in [
        ("--alpha-steps", a.alpha_steps.unwrap_or(1)),
        ("--beta-steps", a.beta_steps),
        ("--rho-steps", a.rho_steps),
    ] {
        if v == 0 {
            return Err(usage(format!("{flag} must be positive")));
        }
    }
    let datasets = load_all(&a.data)?;
    let methods = if a.method.is_empty() {
        a.family.default_methods()
    } else {
        dedup(&a.method)
    };
    let cfg = HarnessConfig {
        grids: Grids {
            alpha_steps: a.alpha_steps,
            beta_steps: a.beta_steps,
            rho_steps: a.rho_steps,
        },
        base_params: base_params(&a.data),
        enrich: enrich_config(&a.data),
    };
    let mut table = run_family(a.family, &datasets, &dedup(&a.data.base), &methods, &cfg)?;
    table.scale_factor = a.scale;
    report_excluded(&table.excluded);
    if table.datasets.is_empty() {
        bail!("every dataset failed; nothing to report");
    }
    let fam = a.family.as_str();
    if sweep {
        for d in &table.datasets {
            for &b in &table.bases {
                let name = format!("sweep_{fam}_{}_{}.csv", file_safe(d), b.as_str());
                let json = a.data.json.then(|| {
                    let rows: Vec<Value> = table
                        .sweep(d, b)
                        .into_iter()
                        .map(|(p, losses)| {
                            let mut m: serde_json::Map<String, Value> =
                                p.coords.iter().map(|c| (c.0.to_string(), num(c.1))).collect();
                            for (method, l) in table.methods.iter().zip(losses) {
                                m.insert(method.label().to_string(), num(l * table.scale_factor));
                            }
                            Value::Object(m)
                        })
                        .collect();
                    json!({ "family": fam, "dataset": d, "base": b.as_str(), "scale_factor": table.scale_factor, "rows": rows })
                });
                write_output(&a.data.out, &name, &sweep_csv(&table, d, b)?, json)?;
            }
        }
    } else {
        let json = a.data.json.then(|| table_json(&table));
        write_output(&a.data.out, &format!("table_{fam}.csv"), &family_table_csv(&table)?, json)?;
        write_output(&a.data.out, &format!("ranks_{fam}.csv"), &rank_summary_csv(&table)?, None)?;
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let m = load_loss_matrix(&a.data)?;
    let csv = matrix_rank_csv(&m.methods, &m.losses)?;
    let json = a.json.then(|| {
        let s = rank_summary(&m.losses).ok();
        json!({
            "methods": m.methods,
            "datasets": m.datasets,
            "summary": s.map(|s| json!({
                "average_ranks": s.average_ranks, "n_datasets": s.n_datasets,
                "friedman_statistic": s.friedman_statistic, "critical_value": s.critical_value,
                "nemenyi_cd": s.nemenyi_cd, "significant": s.significant,
            })),
        })
    });
    write_output(&a.out, "rank_summary.csv", &csv, json)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let data = generate(a.gen, a.n, a.seed)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let stem = format!("{}-{}", a.gen.as_str(), a.seed);
    let data_path = a.out.join(format!("{stem}.csv"));
    let truth_path = a.out.join(format!("{stem}.truth.csv"));
    data.write(&data_path, &truth_path)?;
    println!("{}", data_path.display());
    println!("{}", truth_path.display());
    Ok(())
}
