//! CSV rendering of result tables with six significant digits.

use std::path::Path;

use crate::dataset::DatasetSummary;
use crate::harness::{ExperimentTable, NcdeRow};
use crate::regressors::BaseKind;
use crate::stats::{average_ranks, rank_summary};
use crate::{Error, Result};

/// Six significant digits, `%g` style: fixed notation for exponents in
/// [-5, 6), scientific otherwise, trailing zeros dropped.
pub fn format_sig6(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn to_csv(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

/// Rows are datasets, column blocks are base x method, values are aggregated
/// losses times the scale factor; a final `AR` row holds the average ranks
/// computed within each base block.
pub fn family_table_csv(table: &ExperimentTable) -> Result<String> {
    let mut header = vec!["dataset".to_string()];
    for b in &table.bases {
        for m in &table.methods {
            header.push(format!("{} {}", b.as_str(), m.label()));
        }
    }
    let matrices: Vec<Vec<Vec<f64>>> = table.bases.iter().map(|&b| table.loss_matrix(b)).collect();
    let mut rows = Vec::new();
    for (i, name) in table.datasets.iter().enumerate() {
        let mut row = vec![name.clone()];
        for m in &matrices {
            row.extend(m[i].iter().map(|v| format_sig6(v * table.scale_factor)));
        }
        rows.push(row);
    }
    if !table.datasets.is_empty() {
        let mut ar = vec!["AR".to_string()];
        for m in &matrices {
            ar.extend(average_ranks(m)?.into_iter().map(format_sig6));
        }
        rows.push(ar);
    }
    to_csv(&header, &rows)
}

/// One row per base: Friedman statistic, chi-square critical value, Nemenyi
/// critical difference and average ranks. Statistics are `NA` when they are
/// undefined (fewer than two datasets).
pub fn rank_summary_csv(table: &ExperimentTable) -> Result<String> {
    let mut header: Vec<String> = ["base", "n_datasets", "friedman", "critical_value", "nemenyi_cd", "significant"]
        .map(String::from)
        .to_vec();
    header.extend(table.methods.iter().map(|m| format!("AR {}", m.label())));
    let mut rows = Vec::new();
    for &b in &table.bases {
        let m = table.loss_matrix(b);
        let mut row = vec![b.as_str().to_string(), m.len().to_string()];
        match rank_summary(&m) {
            Ok(s) => {
                row.extend([
                    format_sig6(s.friedman_statistic),
                    format_sig6(s.critical_value),
                    format_sig6(s.nemenyi_cd),
                    s.significant.to_string(),
                ]);
                row.extend(s.average_ranks.into_iter().map(format_sig6));
            }
            Err(_) => {
                row.extend(["NA", "NA", "NA", "NA"].map(String::from));
                match average_ranks(&m) {
                    Ok(r) => row.extend(r.into_iter().map(format_sig6)),
                    Err(_) => row.extend(table.methods.iter().map(|_| "NA".to_string())),
                }
            }
        }
        rows.push(row);
    }
    to_csv(&header, &rows)
}

/// Parameter coordinates followed by one scaled loss column per method.
pub fn sweep_csv(table: &ExperimentTable, dataset: &str, base: BaseKind) -> Result<String> {
    let sweep = table.sweep(dataset, base);
    let mut header: Vec<String> = table
        .params
        .first()
        .map(|p| p.coords.iter().map(|c| c.0.to_string()).collect())
        .unwrap_or_default();
    header.extend(table.methods.iter().map(|m| m.label().to_string()));
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|(p, losses)| {
            p.coords
                .iter()
                .map(|c| format_sig6(c.1))
                .chain(losses.iter().map(|v| format_sig6(v * table.scale_factor)))
                .collect()
        })
        .collect();
    to_csv(&header, &rows)
}

pub fn ncde_csv(rows: &[NcdeRow]) -> Result<String> {
    let header = ["dataset", "base", "method", "mrse", "msll", "msvr"].map(String::from);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.base.to_string(),
                r.method.clone(),
                format_sig6(r.mrse),
                format_sig6(r.msll),
                format_sig6(r.msvr),
            ]
        })
        .collect();
    to_csv(&header, &body)
}

/// Size and fold-averaged train/test shift per dataset; `NA` when the
/// mean-difference statistic is undefined (constant training targets).
pub fn dataset_summary_csv(rows: &[DatasetSummary]) -> Result<String> {
    let header = ["dataset", "n", "d", "tr_te_md", "tr_te_ks"].map(String::from);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.n.to_string(),
                r.d.to_string(),
                r.tr_te_md.map_or_else(|| "NA".to_string(), format_sig6),
                format_sig6(r.tr_te_ks),
            ]
        })
        .collect();
    to_csv(&header, &body)
}

/// Rank summary of an arbitrary datasets-by-methods loss matrix.
pub fn matrix_rank_csv(methods: &[String], losses: &[Vec<f64>]) -> Result<String> {
    let s = rank_summary(losses)?;
    let mut header: Vec<String> = ["n_datasets", "friedman", "critical_value", "nemenyi_cd", "significant"]
        .map(String::from)
        .to_vec();
    header.extend(methods.iter().map(|m| format!("AR {m}")));
    let mut row = vec![
        s.n_datasets.to_string(),
        format_sig6(s.friedman_statistic),
        format_sig6(s.critical_value),
        format_sig6(s.nemenyi_cd),
        s.significant.to_string(),
    ];
    row.extend(s.average_ranks.iter().map(|&r| format_sig6(r)));
    to_csv(&header, &[row])
}

/// A datasets-by-methods loss matrix read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub losses: Vec<Vec<f64>>,
}

/// Reads a CSV whose first column names the dataset and whose remaining
/// columns hold one loss per method. A trailing `AR` row is skipped.
pub fn load_loss_matrix(path: &Path) -> Result<LossMatrix> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::ingest(path, e.to_string()))?;
    let header = r.headers().map_err(|e| Error::ingest(path, e.to_string()))?.clone();
    if header.len() < 3 {
        return Err(Error::ingest(path, "need a dataset column and at least two method columns"));
    }
    let methods = header.iter().skip(1).map(String::from).collect();
    let (mut datasets, mut losses) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let name = rec.get(0).unwrap_or_default();
        if name == "AR" {
            continue;
        }
        let row = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, v)| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::ingest(path, format!("row {}, column {}: '{v}' is not a number", i + 1, j + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        datasets.push(name.to_string());
        losses.push(row);
    }
    if losses.is_empty() {
        return Err(Error::ingest(path, "no rows"));
    }
    Ok(LossMatrix {
        methods,
        datasets,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(1.23456789), "1.23457");
        assert_eq!(format_sig6(-0.000123456789), "-0.000123457");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(999999.7), "1e6");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(1.5e-7), "1.5e-7");
        assert_eq!(format_sig6(f64::INFINITY), "inf");
        assert_eq!(format_sig6(80.0), "80");
    }

    #[test]
    fn sig6_round_trips_to_six_digits() {
        for &v in &[1.23456789, 2.718281828e-3, 6.02214076e23, -1.602e-19, 0.1 + 0.2] {
            let back: f64 = format_sig6(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 5e-6, "{v}");
        }
    }

    #[test]
    fn matrix_report() {
        let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![1.0, 2.0, 3.0, 4.0, 5.0]).collect();
        let names: Vec<String> = (1..=5).map(|i| format!("m{i}")).collect();
        let csv = matrix_rank_csv(&names, &rows).unwrap();
        let line = csv.lines().nth(1).unwrap();
        assert!(line.starts_with("20,80,"), "{line}");
    }

    #[test]
    fn loss_matrix_reads_and_skips_rank_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "dataset,a,b\nd1,1,2\nd2,3,1.5\nAR,1.5,1.5\n").unwrap();
        let m = load_loss_matrix(&p).unwrap();
        assert_eq!(m.methods, vec!["a", "b"]);
        assert_eq!(m.losses, vec![vec![1.0, 2.0], vec![3.0, 1.5]]);
        std::fs::write(&p, "dataset,a,b\nd1,1,x\n").unwrap();
        assert!(load_loss_matrix(&p).unwrap_err().to_string().contains("column 3"));
    }
}
