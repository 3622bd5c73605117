//! Serialization of experiment results: a fixed-column CSV table, a JSON
//! document with the full nested detail, and bare two-column series for
//! plotting tools.
//!
//! CSV floats go through `format!("{}")`, which prints the shortest string
//! that round-trips, so identical runs produce byte-identical files.

use std::path::Path;

use crate::verify::{ConvergenceReport, ExperimentRow};
use crate::{Error, Result};

/// Column order of the CSV table. Rows that failed carry NaN in every
/// numeric column and the error text lives in the JSON report instead.
pub const CSV_COLUMNS: [&str; 17] = [
    "family",
    "n",
    "params",
    "j",
    "vol",
    "vol_err",
    "area",
    "diam_lo",
    "diam_hi",
    "C_j",
    "sup_excess",
    "frac_excess",
    "delta_hat",
    "V_j_hat",
    "h_j",
    "flat_bound",
    "status",
];

fn csv_row(report: &ConvergenceReport, row: &ExperimentRow) -> String {
    let family = report.inputs.family.family.name();
    let n = report.inputs.family.dim;
    let params = report.inputs.family.params_label();
    let nan = f64::NAN;
    let m = row.metrics.as_ref();
    let num = |f: fn(&crate::verify::RowMetrics) -> f64| m.map_or(nan, f);
    let cells: Vec<String> = vec![
        family.to_string(),
        format!("{n}"),
        params,
        format!("{}", row.j),
        format!("{}", num(|m| m.vol)),
        format!("{}", num(|m| m.vol_err)),
        format!("{}", num(|m| m.area)),
        format!("{}", num(|m| m.diam_lo)),
        format!("{}", num(|m| m.diam_hi)),
        format!("{}", num(|m| m.c_j)),
        format!("{}", num(|m| m.sup_excess)),
        format!("{}", num(|m| m.frac_excess)),
        format!("{}", num(|m| m.delta_hat)),
        format!("{}", num(|m| m.v_j_hat)),
        format!("{}", num(|m| m.h_j)),
        format!("{}", num(|m| m.flat_bound)),
        row.status.clone(),
    ];
    cells.join(",")
}

/// Renders the whole run as CSV, one row per family member.
pub fn to_csv(report: &ConvergenceReport) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for row in &report.rows {
        out.push_str(&csv_row(report, row));
        out.push('\n');
    }
    out
}

/// Renders the whole run as pretty JSON, config echo included.
pub fn to_json(report: &ConvergenceReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Per-column `j value` series for plotting, keyed by column name. Error
/// rows are dropped rather than emitted as NaN points.
pub fn plot_series(report: &ConvergenceReport) -> Vec<(String, String)> {
    let columns: [(&str, fn(&crate::verify::RowMetrics) -> f64); 11] = [
        ("vol", |m| m.vol),
        ("area", |m| m.area),
        ("diam_lo", |m| m.diam_lo),
        ("diam_hi", |m| m.diam_hi),
        ("C_j", |m| m.c_j),
        ("sup_excess", |m| m.sup_excess),
        ("frac_excess", |m| m.frac_excess),
        ("delta_hat", |m| m.delta_hat),
        ("V_j_hat", |m| m.v_j_hat),
        ("h_j", |m| m.h_j),
        ("flat_bound", |m| m.flat_bound),
    ];
    columns
        .iter()
        .map(|(name, get)| {
            let mut body = String::new();
            for row in &report.rows {
                if let Some(m) = &row.metrics {
                    body.push_str(&format!("{} {}\n", row.j, get(m)));
                }
            }
            (name.to_string(), body)
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes the CSV table to a file.
pub fn write_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_text(path, &to_csv(report))
}

/// Writes the JSON document to a file.
pub fn write_json(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_text(path, &to_json(report)?)
}

/// Writes one `<stem>_<column>.dat` series file per numeric column next to
/// the given stem path, returning the paths written.
pub fn write_plot_series(report: &ConvergenceReport, stem: &Path) -> Result<Vec<std::path::PathBuf>> {
    let dir = stem.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = stem
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Input("plot stem needs a file name".into()))?;
    let mut written = Vec::new();
    for (name, body) in plot_series(report) {
        let path = dir.join(format!("{base}_{name}.dat"));
        write_text(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}
