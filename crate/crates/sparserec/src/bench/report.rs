//! Report emission and re-parsing: per-sample CSV, a key-value summary and
//! a gnuplot-friendly table.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::run::{MetricsReport, SampleRecord};
use crate::error::{Error, Result};

/// Output formats for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `samples.csv`: one row per test sample.
    Csv,
    /// `summary.txt`: key = value lines with aggregates, confusion matrix
    /// and the full config echo.
    Summary,
    /// `metrics.dat`: whitespace table for gnuplot.
    Table,
}

pub const ALL_FORMATS: [ReportFormat; 3] = [
    ReportFormat::Csv,
    ReportFormat::Summary,
    ReportFormat::Table,
];

/// CSV header for the per-sample file. Columns are stable.
pub const CSV_HEADER: &str = "sample_id,true,pred,time_s,iters,nnz";

/// Writes the requested formats under `out_dir`, returning the paths.
pub fn emit_report(
    report: &MetricsReport,
    out_dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for format in formats {
        let (name, body) = match format {
            ReportFormat::Csv => ("samples.csv", render_csv(report)),
            ReportFormat::Summary => ("summary.txt", render_summary(report)),
            ReportFormat::Table => ("metrics.dat", render_table(report)),
        };
        let path = out_dir.join(name);
        let mut file =
            std::fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(body.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(path);
    }
    Ok(written)
}

fn render_csv(report: &MetricsReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.per_sample {
        out.push_str(&format!(
            "{},{},{},{:.9},{},{}\n",
            r.sample_id, r.true_label, r.predicted, r.coding_seconds, r.iterations, r.nnz
        ));
    }
    out
}

fn render_summary(report: &MetricsReport) -> String {
    let mut out = String::new();
    let rate = if report.per_sample.is_empty() {
        "nan".to_string()
    } else {
        format!("{:.6}", report.recognition_rate)
    };
    out.push_str(&format!("recognition_rate = {rate}\n"));
    out.push_str(&format!("samples = {}\n", report.per_sample.len()));
    out.push_str(&format!(
        "total_coding_time_s = {:.6}\n",
        report.total_coding_time
    ));
    out.push_str(&format!(
        "mean_iterations = {:.3}\n",
        report.mean_iterations
    ));
    out.push_str(&format!("mean_nnz = {:.3}\n", report.mean_nnz));
    out.push_str(&format!(
        "feature_seconds = {:.6}\n",
        report.feature_seconds
    ));
    out.push_str(&format!("train_seconds = {:.6}\n", report.train_seconds));
    for (i, row) in report.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("confusion.{i} = {}\n", cells.join(" ")));
    }
    for line in report.config_echo.lines() {
        out.push_str(&format!("config.{line}\n"));
    }
    out
}

fn render_table(report: &MetricsReport) -> String {
    let mut out = String::from("# sample_id time_s iters nnz\n");
    for r in &report.per_sample {
        out.push_str(&format!(
            "{} {:.9} {} {}\n",
            r.sample_id, r.coding_seconds, r.iterations, r.nnz
        ));
    }
    out
}

/// Writes a solver objective trace as CSV rows (`iteration,objective`).
pub fn write_trace_csv(code: &crate::sparse::SparseCode, path: &Path) -> Result<()> {
    let mut out = String::from("iteration,objective\n");
    for (i, obj) in code.objective_trace.iter().enumerate() {
        out.push_str(&format!("{i},{obj:.12e}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parses a `samples.csv` back into records.
pub fn parse_samples_csv(path: &Path) -> Result<Vec<SampleRecord>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::Data(format!(
                "{}: unexpected csv header {:?}",
                path.display(),
                other
            )))
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(Error::Data(format!(
                "{}: row {} has {} cells, expected 6",
                path.display(),
                i + 2,
                cells.len()
            )));
        }
        let parse_err =
            |what: &str| Error::Data(format!("{}: row {}: bad {what}", path.display(), i + 2));
        records.push(SampleRecord {
            sample_id: cells[0].parse().map_err(|_| parse_err("sample_id"))?,
            true_label: cells[1].parse().map_err(|_| parse_err("true"))?,
            predicted: cells[2].parse().map_err(|_| parse_err("pred"))?,
            coding_seconds: cells[3].parse().map_err(|_| parse_err("time_s"))?,
            iterations: cells[4].parse().map_err(|_| parse_err("iters"))?,
            nnz: cells[5].parse().map_err(|_| parse_err("nnz"))?,
        });
    }
    Ok(records)
}

/// Recomputes rate and confusion counts from parsed records.
pub fn summarize_records(records: &[SampleRecord]) -> (f64, Vec<Vec<usize>>) {
    let num_classes = records
        .iter()
        .map(|r| r.true_label.max(r.predicted) + 1)
        .max()
        .unwrap_or(0);
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for r in records {
        confusion[r.true_label][r.predicted] += 1;
    }
    let hits: usize = (0..num_classes).map(|i| confusion[i][i]).sum();
    let rate = if records.is_empty() {
        f64::NAN
    } else {
        hits as f64 / records.len() as f64
    };
    (rate, confusion)
}
