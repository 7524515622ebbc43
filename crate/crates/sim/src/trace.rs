//! Per-tick trace records, stored as JSON lines behind a header record,
//! with a CSV projection for spreadsheets.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::scenario::Thresholds;

pub const TRACE_FORMAT: &str = "waveshot-trace";
pub const TRACE_VERSION: u32 = 1;

/// One row per control tick. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
    pub surge_mps: f64,
    pub yaw_rate_radps: f64,
    pub thrust_left: f64,
    pub thrust_right: f64,
    pub throttle: f64,
    pub steering: f64,
    pub mode: String,
    pub failsafe: bool,
    pub desired_heading_rad: Option<f64>,
    pub desired_speed_mps: Option<f64>,
    pub desired_rate_radps: f64,
    pub rate_target_radps: f64,
    pub heading_err_rad: f64,
    pub xte_m: Option<f64>,
    pub waypoints_reached: u32,
    pub target_x_m: Option<f64>,
    pub target_y_m: Option<f64>,
    pub target_distance_m: Option<f64>,
    pub in_frame: Option<bool>,
    pub uplink_sent: u64,
    pub uplink_delivered: u64,
    pub uplink_dropped: u64,
    pub downlink_sent: u64,
    pub downlink_delivered: u64,
}

/// Everything besides the rows that metric computation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricContext {
    pub dt_s: f64,
    pub rat_max_radps: f64,
    pub acc_max_radps2: f64,
    pub standoff_m: Option<f64>,
    pub waypoints_total: u32,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub seed: u64,
    pub context: MetricContext,
}

impl TraceHeader {
    pub fn new(scenario: &str, seed: u64, context: MetricContext) -> Self {
        Self {
            format: TRACE_FORMAT.to_owned(),
            version: TRACE_VERSION,
            scenario: scenario.to_owned(),
            seed,
            context,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("trace is empty")]
    MissingHeader,
    #[error("unsupported trace format `{format}` version {version}")]
    Unsupported { format: String, version: u32 },
}

pub fn write_jsonl<W: Write>(mut out: W, header: &TraceHeader, rows: &[TraceRecord]) -> Result<(), TraceError> {
    let json = |line: usize, e| TraceError::Json { line, source: e };
    serde_json::to_writer(&mut out, header).map_err(|e| json(1, e))?;
    out.write_all(b"\n")?;
    for (i, row) in rows.iter().enumerate() {
        serde_json::to_writer(&mut out, row).map_err(|e| json(i + 2, e))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<(TraceHeader, Vec<TraceRecord>), TraceError> {
    let mut lines = input.lines().enumerate();
    let header: TraceHeader = loop {
        match lines.next() {
            None => return Err(TraceError::MissingHeader),
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| TraceError::Json { line: i + 1, source: e })?;
            }
        }
    };
    if header.format != TRACE_FORMAT || header.version != TRACE_VERSION {
        return Err(TraceError::Unsupported {
            format: header.format,
            version: header.version,
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| TraceError::Json { line: i + 1, source: e })?);
    }
    Ok((header, rows))
}

pub fn write_csv<W: Write>(out: W, rows: &[TraceRecord]) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
