//! Result tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bench::AggregateResult;
use crate::config::OutputFormat;

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub rho: f64,
    pub filter: String,
    pub mean_rmse: f64,
    pub mean_loss_time: f64,
    pub runs: usize,
    pub seed: u64,
}

pub fn rows(result: &AggregateResult) -> Vec<ResultRow> {
    result
        .densities
        .iter()
        .flat_map(|d| {
            d.filters.iter().map(move |f| ResultRow {
                rho: d.rho,
                filter: f.filter.name().to_string(),
                mean_rmse: f.mean_rmse,
                mean_loss_time: f.mean_loss_time,
                runs: f.runs,
                seed: result.seed,
            })
        })
        .collect()
}

pub fn write_rows<W: Write>(
    rows: &[ResultRow],
    format: OutputFormat,
    mut out: W,
) -> anyhow::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            if rows.is_empty() {
                w.write_record([
                    "rho",
                    "filter",
                    "mean_rmse",
                    "mean_loss_time",
                    "runs",
                    "seed",
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn read_csv_rows(text: &str) -> anyhow::Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
