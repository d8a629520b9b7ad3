use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const METRICS_HEADER: [&str; 7] = [
    "env_step",
    "episodic_return",
    "steps_to_target",
    "td_loss",
    "reg_loss",
    "hc_variance",
    "monolithic_variance",
];

/// One evaluation point. Loss and variance columns average everything since the previous
/// row; they are empty when nothing was measured.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub env_step: usize,
    pub episodic_return: f64,
    pub steps_to_target: f64,
    pub td_loss: Option<f64>,
    pub reg_loss: Option<f64>,
    pub hc_variance: Option<f64>,
    pub monolithic_variance: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| Error::Parse(format!("bad number `{s}`")))
    }
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.env_step.to_string(),
            r.episodic_return.to_string(),
            r.steps_to_target.to_string(),
            opt(r.td_loss),
            opt(r.reg_loss),
            opt(r.hc_variance),
            opt(r.monolithic_variance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a metrics file, checking the header and that `env_step` increases.
pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(METRICS_HEADER) {
        return Err(Error::Parse("unexpected metrics header".into()));
    }
    let mut rows: Vec<MetricsRow> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Parse(format!("bad number `{}`", &rec[i])))
        };
        let row = MetricsRow {
            env_step: rec[0].parse().map_err(|_| Error::Parse(format!("bad step `{}`", &rec[0])))?,
            episodic_return: num(1)?,
            steps_to_target: num(2)?,
            td_loss: parse_opt(&rec[3])?,
            reg_loss: parse_opt(&rec[4])?,
            hc_variance: parse_opt(&rec[5])?,
            monolithic_variance: parse_opt(&rec[6])?,
        };
        if rows.last().is_some_and(|p| p.env_step >= row.env_step) {
            return Err(Error::Parse("env_step column is not increasing".into()));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Mean of `(return + offset) / (oracle + offset)` over tasks; `offset_tasks[i]` adds 50.
pub fn rap(returns: &[f64], oracle_returns: &[f64], offset_tasks: &[bool]) -> Result<f64> {
    if returns.is_empty() || returns.len() != oracle_returns.len() || returns.len() != offset_tasks.len() {
        return Err(Error::InvalidInput("rap needs matching, nonempty task lists".into()));
    }
    let mut total = 0.0;
    for ((&r, &o), &off) in returns.iter().zip(oracle_returns).zip(offset_tasks) {
        let offset = if off { 50.0 } else { 0.0 };
        let den = o + offset;
        if den == 0.0 {
            return Err(Error::InvalidInput("oracle return plus offset is zero".into()));
        }
        total += (r + offset) / den;
    }
    Ok(total / returns.len() as f64)
}
