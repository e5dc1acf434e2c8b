//! CSV outputs: the results table, per-run term histories and bound reports.

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use dubrec_core::train::EpochRecord;
use dubrec_core::{BoundReport, MetricsReport, Term};

use crate::error::{CliError, Result};

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub command: String,
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    /// Sweep level, ablation name or grid cell; empty when not applicable.
    pub variant: String,
    pub rank: usize,
    pub gamma: f64,
    pub lambda_c: f64,
    pub lambda_t: f64,
    pub selected: bool,
    pub best_epoch: usize,
    pub best_validation: f64,
    pub metrics: MetricsReport,
}

const RESULT_HEADER: [&str; 19] = [
    "command",
    "method",
    "seed",
    "config_hash",
    "variant",
    "rank",
    "gamma",
    "lambda_c",
    "lambda_t",
    "selected",
    "best_epoch",
    "best_validation",
    "test_auc",
    "test_ndcg",
    "p_at_5",
    "p_at_10",
    "r_at_5",
    "r_at_10",
    "n_users",
];

/// Appends rows to `results.csv`, writing the header when the file is new.
#[derive(Debug)]
pub struct ResultsWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl ResultsWriter {
    pub fn open(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let path = out_dir.join("results.csv");
        let fresh = fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::io(&path, e))?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if fresh {
            inner.write_record(RESULT_HEADER)?;
        }
        Ok(Self { path, inner })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, r: &ResultRow) -> Result<()> {
        let m = &r.metrics;
        let at = |v: &[(usize, f64)], k: usize| {
            v.iter()
                .find(|(kk, _)| *kk == k)
                .map_or(String::new(), |(_, x)| x.to_string())
        };
        self.inner.write_record([
            r.command.clone(),
            r.method.clone(),
            r.seed.to_string(),
            r.config_hash.clone(),
            r.variant.clone(),
            r.rank.to_string(),
            r.gamma.to_string(),
            r.lambda_c.to_string(),
            r.lambda_t.to_string(),
            u8::from(r.selected).to_string(),
            r.best_epoch.to_string(),
            r.best_validation.to_string(),
            m.auc.to_string(),
            m.ndcg.to_string(),
            at(&m.precision_at, 5),
            at(&m.precision_at, 10),
            at(&m.recall_at, 5),
            at(&m.recall_at, 10),
            m.n_users_evaluated.to_string(),
        ])?;
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Writes `history/<name>.csv`: phase, epoch, every term, objective, validation.
pub fn write_history(out_dir: &Path, name: &str, history: &[EpochRecord]) -> Result<PathBuf> {
    let dir = out_dir.join("history");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = dir.join(format!("{name}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["phase".to_owned(), "epoch".to_owned()];
    header.extend(Term::ALL.iter().map(|t| t.name().to_owned()));
    header.extend(["objective".to_owned(), "validation".to_owned()]);
    w.write_record(&header)?;
    for h in history {
        let mut row = vec![h.phase.name().to_owned(), h.epoch.to_string()];
        row.extend(Term::ALL.iter().map(|&t| h.terms.get(t).to_string()));
        row.extend([h.objective.to_string(), h.validation.to_string()]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// One bound-verification trial: index, `|H|` and the report.
pub type BoundRow = (u64, usize, BoundReport);

/// Writes `bounds.csv`, one row per trial.
pub fn write_bounds(out_dir: &Path, rows: &[BoundRow]) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let path = out_dir.join("bounds.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "trial",
        "hypotheses",
        "variant",
        "lhs_ideal",
        "term_a",
        "term_b",
        "term_c",
        "term_d",
        "term_e",
        "bias_term",
        "bias_realized",
        "confidence_term",
        "rhs_total",
        "holds",
        "holds_without_bias",
    ])?;
    for (trial, h, r) in rows {
        w.write_record([
            trial.to_string(),
            h.to_string(),
            r.variant.name().to_owned(),
            r.lhs_ideal.to_string(),
            r.term_a.to_string(),
            r.term_b.to_string(),
            r.term_c.to_string(),
            r.term_d.to_string(),
            r.term_e.to_string(),
            r.bias_term.to_string(),
            r.bias_realized.to_string(),
            r.confidence_term.to_string(),
            r.rhs_total.to_string(),
            u8::from(r.holds).to_string(),
            u8::from(r.holds_without_bias).to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
