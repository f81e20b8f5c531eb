//! Trajectory tables and `key = value` reports.

use std::fmt::Write as _;
use std::path::Path;

use spn_core::sim::{SampleRow, Trajectory};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Tsv,
}

impl Format {
    pub fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Tsv => "tsv",
        }
    }

    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => Format::Tsv,
            _ => Format::Csv,
        }
    }
}

/// Floats with 17 significant digits.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn header(buffers: usize, lglo: bool) -> Vec<String> {
    let mut h = vec!["t".to_string(), "norm".to_string()];
    h.extend((1..=buffers).map(|i| format!("Q_{i}")));
    h.extend((1..=buffers).map(|i| format!("V_{i}")));
    if lglo {
        h.push("Lglo".into());
    }
    h
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, buffers: usize, format: Format) -> Result<(), CliError> {
    let lglo = traj.rows.first().is_some_and(|r| r.probe.is_some());
    let mut w = csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    w.write_record(header(buffers, lglo)).map_err(|e| CliError::io(path, e))?;
    for r in &traj.rows {
        let mut rec = vec![float(r.t), float(r.norm)];
        rec.extend(r.queues.iter().map(u64::to_string));
        rec.extend(r.remaining.iter().map(|&v| float(v)));
        if lglo {
            rec.push(float(r.probe.unwrap_or(f64::NAN)));
        }
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a trajectory table written by [`write_trajectory`].
pub fn read_trajectory(path: &Path, seed: u64) -> Result<Trajectory, CliError> {
    let format = Format::for_path(path);
    let bad = |msg: String| CliError::input("cli::BadTrajectory", format!("{}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let head: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    let lglo = head.last().is_some_and(|h| h == "Lglo");
    let cols = head.len() - usize::from(lglo);
    if cols < 2 || !(cols - 2).is_multiple_of(2) || head[0] != "t" || head[1] != "norm" {
        return Err(bad("expected header t,norm,Q_1..,V_1..[,Lglo]".into()));
    }
    let buffers = (cols - 2) / 2;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| -> Result<f64, CliError> {
            rec.get(k).unwrap_or("").trim().parse::<f64>().map_err(|e| bad(format!("column {}: {e}", k + 1)))
        };
        let mut queues = Vec::with_capacity(buffers);
        let mut remaining = Vec::with_capacity(buffers);
        for i in 0..buffers {
            queues.push(num(2 + i)? as u64);
            remaining.push(num(2 + buffers + i)?);
        }
        rows.push(SampleRow {
            t: num(0)?,
            norm: num(1)?,
            queues,
            remaining,
            counters: Vec::new(),
            probe: if lglo { Some(num(cols)?) } else { None },
        });
    }
    let final_norm = rows.last().map_or(0.0, |r| r.norm);
    Ok(Trajectory {
        seed,
        rows,
        events_processed: 0,
        final_norm,
        final_jobs: 0,
        visits: Vec::new(),
        audit: None,
    })
}

/// Ordered `key = value` lines with optional `[section]` headers.
#[derive(Debug, Default)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {value}");
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.kv(key, float(value))
    }

    pub fn str(&mut self, key: &str, value: &str) -> &mut Self {
        self.kv(key, format!("\"{}\"", value.replace('\\', "\\\\").replace('"', "\\\"")))
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        let _ = writeln!(self.text, "\n[{name}]");
        self
    }

    pub fn array_section(&mut self, name: &str) -> &mut Self {
        let _ = writeln!(self.text, "\n[[{name}]]");
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, &self.text).map_err(|e| CliError::io(path, e))
    }
}

pub fn list<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let inner: Vec<String> = items.into_iter().map(|x| x.to_string()).collect();
    format!("[{}]", inner.join(", "))
}
