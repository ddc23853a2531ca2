use std::cmp::Ordering;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::harness::experiment::{ResultRecord, CSV_HEADER};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub df: f64,
    pub kappa: f64,
    pub k: usize,
    pub q: f64,
    pub n: usize,
    /// Mean of the estimate (OPE) or regret (OPO) column.
    pub mean: f64,
    /// Standard error of that mean, n − 1 divisor; 0 for a single row.
    pub stderr: f64,
    pub mse: f64,
    pub log_mse: f64,
}

pub const SUMMARY_HEADER: &str = "method,df,kappa,K,q,n,mean,stderr,mse,log_mse";

fn grid_cmp(a: (&str, f64, f64, usize, f64), b: (&str, f64, f64, usize, f64)) -> Ordering {
    a.0.cmp(b.0)
        .then(a.1.total_cmp(&b.1))
        .then(a.2.total_cmp(&b.2))
        .then(a.3.cmp(&b.3))
        .then(a.4.total_cmp(&b.4))
}

/// Groups records by (method, df, κ, K, q), ordered by method name, then
/// df, κ, K, q ascending.
pub fn summarize(records: &[ResultRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Empty("no records to summarize"));
    }
    let key = |r: &ResultRecord| (r.method.clone(), r.df, r.kappa, r.k, r.q);
    let mut sorted: Vec<&ResultRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        grid_cmp(
            (&a.method, a.df, a.kappa, a.k, a.q),
            (&b.method, b.df, b.kappa, b.k, b.q),
        )
    });
    let mut rows = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let head = key(sorted[start]);
        let end = start + sorted[start..].iter().take_while(|r| key(r) == head).count();
        let group = &sorted[start..end];
        let n = group.len() as f64;
        let mean = group.iter().map(|r| r.value).sum::<f64>() / n;
        let stderr = if group.len() > 1 {
            let var = group.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        let mse = group.iter().map(|r| r.squared_error).sum::<f64>() / n;
        let (method, df, kappa, k, q) = head;
        rows.push(SummaryRow {
            method,
            df,
            kappa,
            k,
            q,
            n: group.len(),
            mean,
            stderr,
            mse,
            log_mse: mse.ln(),
        });
        start = end;
    }
    Ok(rows)
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method, r.df, r.kappa, r.k, r.q, r.n, r.mean, r.stderr, r.mse, r.log_mse
        )?;
    }
    Ok(())
}

/// Reads a results CSV written by `write_csv`.
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<ResultRecord>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?;
    match header {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing or unexpected header".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 2;
        let err = |message: String| Error::Parse { line: line_no, message };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(err(format!("expected 12 fields, got {}", f.len())));
        }
        let num = |j: usize| f[j].parse::<f64>().map_err(|e| err(format!("field {j}: {e}")));
        let int = |j: usize| f[j].parse::<u64>().map_err(|e| err(format!("field {j}: {e}")));
        records.push(ResultRecord {
            replicate: int(0)? as usize,
            method: f[1].to_string(),
            env: f[2].to_string(),
            df: num(3)?,
            kappa: num(4)?,
            k: int(5)? as usize,
            q: num(6)?,
            seed: int(7)?,
            value: num(8)?,
            truth: num(9)?,
            squared_error: num(10)?,
            wall_time_ms: num(11)?,
            dataset_fingerprint: 0,
        });
    }
    Ok(records)
}
