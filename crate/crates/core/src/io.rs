//! Per-run CSV logs and the per-grid-point summary table.
//!
//! Run files are named `<label>__seed<seed>.csv`. Floats are written with 17
//! significant digits so that parsing a file back reproduces every value.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{RoundDiagnostics, RoundRecord};
use crate::policies::StepType;

pub const CSV_COLUMNS: [&str; 14] = [
    "t",
    "step_type",
    "arm",
    "f_expected",
    "f_star",
    "inst_regret",
    "cum_regret",
    "cum_reward",
    "budget_lhs",
    "budget_rhs",
    "beta",
    "log_det",
    "n_ucb",
    "n_cons",
];

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "label",
    "n_seeds",
    "horizon",
    "mean_cum_regret",
    "ci95_cum_regret",
    "min_cum_regret",
    "max_cum_regret",
    "mean_avg_regret",
    "mean_n_ucb",
    "mean_n_cons",
];

/// Marker written in the `arm` column for baseline rounds.
pub const BASELINE_ARM: &str = "A0";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_csv(records: &[RoundRecord], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(CSV_COLUMNS).map_err(&err)?;
    for r in records {
        let arm = if r.arm.is_empty() {
            BASELINE_ARM.to_string()
        } else {
            r.arm.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";")
        };
        w.write_record([
            r.t.to_string(),
            r.step_type.name().to_string(),
            arm,
            fmt_f64(r.f_expected),
            fmt_f64(r.f_star),
            fmt_f64(r.inst_regret),
            fmt_f64(r.cum_regret),
            fmt_f64(r.cum_reward),
            fmt_f64(r.budget_lhs),
            fmt_f64(r.budget_rhs),
            fmt_f64(r.beta),
            fmt_f64(r.log_det),
            r.n_ucb.to_string(),
            r.n_cons.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse a run file. Diagnostics that are not logged come back empty.
pub fn read_csv(path: &Path) -> Result<Vec<RoundRecord>> {
    let err = csv_err(path);
    let mut reader = csv::ReaderBuilder::new().from_path(path).map_err(&err)?;
    let headers = reader.headers().map_err(&err)?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(&err)?;
        let bad = |col: &str| Error::Parse {
            path: path.to_path_buf(),
            message: format!("row {}: bad {col}", line + 2),
        };
        let float = |i: usize| row[i].parse::<f64>().map_err(|_| bad(CSV_COLUMNS[i]));
        let int = |i: usize| row[i].parse::<u64>().map_err(|_| bad(CSV_COLUMNS[i]));
        let arm = if &row[2] == BASELINE_ARM {
            Vec::new()
        } else {
            row[2]
                .split(';')
                .map(|a| a.parse::<usize>().map_err(|_| bad("arm")))
                .collect::<Result<_>>()?
        };
        out.push(RoundRecord {
            t: int(0)?,
            step_type: row[1].parse::<StepType>().map_err(|_| bad("step_type"))?,
            arm,
            f_expected: float(3)?,
            f_star: float(4)?,
            inst_regret: float(5)?,
            cum_regret: float(6)?,
            cum_reward: float(7)?,
            budget_lhs: float(8)?,
            budget_rhs: float(9)?,
            beta: float(10)?,
            log_det: float(11)?,
            n_ucb: int(12)?,
            n_cons: int(13)?,
            diagnostics: RoundDiagnostics::default(),
        });
    }
    Ok(out)
}

pub fn run_file_name(label: &str, seed: u64) -> String {
    format!("{label}__seed{seed}.csv")
}

/// Split a run file name into `(label, seed)`.
pub fn parse_run_file_name(name: &str) -> Option<(String, u64)> {
    let stem = name.strip_suffix(".csv")?;
    let (label, seed) = stem.rsplit_once("__seed")?;
    Some((label.to_string(), seed.parse().ok()?))
}

/// Aggregate over seeds for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub n_seeds: usize,
    pub horizon: u64,
    pub mean_cum_regret: f64,
    /// Half-width of a normal 95% interval on the mean.
    pub ci95_cum_regret: f64,
    pub min_cum_regret: f64,
    pub max_cum_regret: f64,
    pub mean_avg_regret: f64,
    pub mean_n_ucb: f64,
    pub mean_n_cons: f64,
}

/// Orders labels token by token, comparing `key=value` tokens numerically
/// when both values parse as numbers.
pub fn compare_labels(a: &str, b: &str) -> Ordering {
    fn tokens(s: &str) -> Vec<(&str, Option<f64>, &str)> {
        s.split('_')
            .map(|tok| match tok.split_once('=') {
                Some((k, v)) => (k, v.parse::<f64>().ok(), v),
                None => (tok, None, ""),
            })
            .collect()
    }
    let (ta, tb) = (tokens(a), tokens(b));
    for (x, y) in ta.iter().zip(&tb) {
        let ord = x.0.cmp(y.0).then_with(|| match (x.1, y.1) {
            (Some(p), Some(q)) => p.total_cmp(&q),
            _ => x.2.cmp(y.2),
        });
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ta.len().cmp(&tb.len())
}

/// Summarise every run file in `dir`, one row per label.
pub fn summarize(dir: &Path) -> Result<Vec<SummaryRow>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<(String, u64, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some((label, seed)) = parse_run_file_name(&name) {
            files.push((label, seed, entry.path()));
        }
    }
    if files.is_empty() {
        return Err(Error::Parse {
            path: dir.to_path_buf(),
            message: "no run files (<label>__seed<n>.csv) found".into(),
        });
    }
    files.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut groups: BTreeMap<String, Vec<RoundRecord>> = BTreeMap::new();
    for (label, _, path) in &files {
        let records = read_csv(path)?;
        let last = records.last().cloned().ok_or_else(|| Error::Parse {
            path: path.clone(),
            message: "run file has no rounds".into(),
        })?;
        groups.entry(label.clone()).or_default().push(last);
    }

    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|(label, lasts)| {
            let n = lasts.len() as f64;
            let regrets: Vec<f64> = lasts.iter().map(|r| r.cum_regret).collect();
            let mean = regrets.iter().sum::<f64>() / n;
            let var = if lasts.len() > 1 {
                regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let horizon = lasts.iter().map(|r| r.t).max().unwrap_or(0);
            SummaryRow {
                n_seeds: lasts.len(),
                horizon,
                mean_cum_regret: mean,
                ci95_cum_regret: 1.96 * (var / n).sqrt(),
                min_cum_regret: regrets.iter().copied().fold(f64::INFINITY, f64::min),
                max_cum_regret: regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_avg_regret: lasts.iter().map(|r| r.cum_regret / r.t as f64).sum::<f64>() / n,
                mean_n_ucb: lasts.iter().map(|r| r.n_ucb as f64).sum::<f64>() / n,
                mean_n_cons: lasts.iter().map(|r| r.n_cons as f64).sum::<f64>() / n,
                label,
            }
        })
        .collect();
    rows.sort_by(|a, b| compare_labels(&a.label, &b.label));
    Ok(rows)
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(SUMMARY_COLUMNS).map_err(&err)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.n_seeds.to_string(),
            r.horizon.to_string(),
            fmt_f64(r.mean_cum_regret),
            fmt_f64(r.ci95_cum_regret),
            fmt_f64(r.min_cum_regret),
            fmt_f64(r.max_cum_regret),
            fmt_f64(r.mean_avg_regret),
            fmt_f64(r.mean_n_ucb),
            fmt_f64(r.mean_n_cons),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
