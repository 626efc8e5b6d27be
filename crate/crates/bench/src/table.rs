//! CSV and Markdown rendering of benchmark records.

use std::fmt;
use std::str::FromStr;

use crate::suite::BenchRecord;
use crate::BenchError;

pub const COLUMNS: [&str; 18] = [
    "suite",
    "dataset",
    "n",
    "d",
    "m",
    "grid",
    "strategy",
    "kernel",
    "seed",
    "runs",
    "warmup",
    "rmse",
    "nll",
    "coverage95",
    "times_ms",
    "median_ms",
    "peak_bytes",
    "status",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "markdown",
        })
    }
}

impl FromStr for TableFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(BenchError::InvalidSpec(format!("unknown format `{other}`"))),
        }
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

/// Field values in [`COLUMNS`] order. Floats use the shortest round-trip form.
pub fn record_fields(r: &BenchRecord) -> Vec<String> {
    let times = r.times_ms.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
    vec![
        r.suite.to_string(),
        r.dataset.clone(),
        r.n.to_string(),
        r.d.to_string(),
        opt(&r.m),
        opt(&r.grid),
        opt(&r.strategy),
        r.kernel.clone(),
        r.seed.to_string(),
        r.runs.to_string(),
        r.warmup.to_string(),
        opt(&r.rmse),
        opt(&r.nll),
        opt(&r.coverage95),
        times,
        opt(&r.median_ms),
        opt(&r.peak_bytes),
        r.status.clone(),
    ]
}

/// Renders `records` with a header row.
pub fn emit_table(records: &[BenchRecord], format: TableFormat) -> Result<String, BenchError> {
    if records.is_empty() {
        return Err(BenchError::InvalidSpec("no records to emit".into()));
    }
    let rows: Vec<Vec<String>> = records.iter().map(record_fields).collect();
    match format {
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
            w.write_record(COLUMNS)?;
            for row in &rows {
                w.write_record(row)?;
            }
            let bytes = w.into_inner().map_err(|e| BenchError::Io(e.into_error()))?;
            String::from_utf8(bytes).map_err(|e| BenchError::InvalidSpec(e.to_string()))
        }
        TableFormat::Markdown => Ok(markdown(&rows)),
    }
}

fn markdown(rows: &[Vec<String>]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| r.iter().map(|c| c.replace('|', "\\|")).collect())
        .collect();
    let widths: Vec<usize> = (0..COLUMNS.len())
        .map(|j| cells.iter().map(|r| r[j].chars().count()).chain([COLUMNS[j].len(), 3]).max().unwrap_or(3))
        .collect();
    let line = |vals: &mut dyn Iterator<Item = String>| {
        let parts: Vec<String> = vals.zip(&widths).map(|(v, &w)| format!(" {v:<w$} ")).collect();
        format!("|{}|\n", parts.join("|"))
    };
    let mut out = line(&mut COLUMNS.iter().map(|c| c.to_string()));
    out.push_str(&line(&mut widths.iter().map(|&w| "-".repeat(w))));
    for r in cells {
        out.push_str(&line(&mut r.into_iter()));
    }
    out
}
