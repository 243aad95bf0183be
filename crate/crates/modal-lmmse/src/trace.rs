//! Step-by-step record of a single run.

use std::io::Write;

use crate::bench::{drive_run, BenchError, ExperimentConfig, StepView};
use crate::config::OutputFormat;

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn columns(config: &ExperimentConfig) -> Vec<String> {
    let n = config.x0_mean.len();
    let mut cols = vec!["k".to_string()];
    cols.extend((0..n).map(|i| format!("x{i}")));
    for f in &config.filters {
        cols.extend((0..n).map(|i| format!("{f}_x{i}")));
        for suffix in ["n", "lo", "hi", "gain", "lost"] {
            cols.push(format!("{f}_{suffix}"));
        }
    }
    cols
}

fn row(view: &StepView) -> Vec<f64> {
    let mut r = vec![view.step as f64];
    r.extend(view.truth.iter());
    for f in &view.filters {
        r.extend(f.estimate.iter());
        r.push(f.detections as f64);
        r.push(f.window.lower());
        r.push(f.window.upper());
        r.push(f.gain_norm);
        r.push(if f.lost { 1.0 } else { 0.0 });
    }
    r
}

/// Traces run `run_index` at the first density. Filters keep running past
/// their loss step so that every row is complete.
pub fn trace(config: &ExperimentConfig, run_index: usize) -> Result<Trace, BenchError> {
    config.validate()?;
    if run_index >= config.runs {
        return Err(BenchError::InvalidConfig(format!(
            "trace run index {run_index} is not below runs = {}",
            config.runs
        )));
    }
    let mut rows = Vec::with_capacity(config.horizon);
    drive_run(config, 0, run_index, false, |v| rows.push(row(v)))?;
    Ok(Trace {
        columns: columns(config),
        rows,
    })
}

pub fn write_trace<W: Write>(
    trace: &Trace,
    format: OutputFormat,
    mut out: W,
) -> anyhow::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            w.write_record(&trace.columns)?;
            for r in &trace.rows {
                w.write_record(r.iter().map(|v| v.to_string()))?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let records: Vec<serde_json::Map<String, serde_json::Value>> = trace
                .rows
                .iter()
                .map(|r| {
                    trace
                        .columns
                        .iter()
                        .cloned()
                        .zip(r.iter().map(|v| serde_json::json!(v)))
                        .collect()
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &records)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}
