//! Test-episode metrics as CSV, and the per-checkpoint curve statistics.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: [&str; 5] = [
    "run_id",
    "checkpoint_pct",
    "test_episode",
    "episode_return",
    "final_mass",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run_id: usize,
    pub checkpoint_pct: u32,
    pub test_episode: usize,
    pub episode_return: f64,
    /// Agar only; written as an empty field otherwise.
    pub final_mass: Option<f64>,
}

pub fn write_metrics(w: impl Write, records: &[MetricsRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if records.is_empty() {
        out.write_record(METRICS_HEADER).map_err(csv_err)?;
    }
    for r in records {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn metrics_to_string(records: &[MetricsRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_metrics(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn save_metrics(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    write_metrics(std::fs::File::create(path)?, records)
}

/// Reads metrics, rejecting a wrong header or any malformed row with the
/// 1-based line it appeared on.
pub fn read_metrics(r: impl Read) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = reader.headers().map_err(|e| parse_err(&e, 1))?.clone();
    if header.iter().ne(METRICS_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", METRICS_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<MetricsRecord>().enumerate() {
        let record = row.map_err(|e| parse_err(&e, i + 2))?;
        if !record.episode_return.is_finite() || record.final_mass.is_some_and(|m| !m.is_finite()) {
            return Err(Error::Parse {
                line: i + 2,
                message: "non-finite metric".into(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let path = path.as_ref();
    read_metrics(std::fs::File::open(path)?).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn parse_err(e: &csv::Error, fallback_line: usize) -> Error {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Which column a curve plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    EpisodeReturn,
    FinalMass,
}

impl Metric {
    /// Final mass when every record carries it, else the episode return.
    pub fn natural(records: &[MetricsRecord]) -> Metric {
        if !records.is_empty() && records.iter().all(|r| r.final_mass.is_some()) {
            Metric::FinalMass
        } else {
            Metric::EpisodeReturn
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::EpisodeReturn => "test episode return",
            Metric::FinalMass => "final mass",
        }
    }

    fn of(self, r: &MetricsRecord) -> Result<f64> {
        match self {
            Metric::EpisodeReturn => Ok(r.episode_return),
            Metric::FinalMass => r
                .final_mass
                .ok_or_else(|| Error::Config("record has no final_mass".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub checkpoint_pct: u32,
    /// Mean over runs of each run's mean test score.
    pub mean: f64,
    /// Sample SD across runs; 0 when there is a single run.
    pub sd: f64,
    pub runs: usize,
}

pub fn curve_points(records: &[MetricsRecord], metric: Metric) -> Result<Vec<CurvePoint>> {
    let mut grouped: BTreeMap<u32, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in records {
        let cell = grouped
            .entry(r.checkpoint_pct)
            .or_default()
            .entry(r.run_id)
            .or_insert((0.0, 0));
        cell.0 += metric.of(r)?;
        cell.1 += 1;
    }
    Ok(grouped
        .into_iter()
        .map(|(pct, runs)| {
            let means: Vec<f64> = runs.values().map(|(s, n)| s / *n as f64).collect();
            let (mean, sd) = mean_and_sample_sd(&means);
            CurvePoint {
                checkpoint_pct: pct,
                mean,
                sd,
                runs: means.len(),
            }
        })
        .collect())
}

/// Mean and sample (n - 1) SD; the SD is 0 for fewer than two values.
pub fn mean_and_sample_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean of the metric over every record at one checkpoint.
pub fn checkpoint_mean(records: &[MetricsRecord], pct: u32, metric: Metric) -> Result<f64> {
    let xs = records
        .iter()
        .filter(|r| r.checkpoint_pct == pct)
        .map(|r| metric.of(r))
        .collect::<Result<Vec<_>>>()?;
    if xs.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}
