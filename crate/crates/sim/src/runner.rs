use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::metrics::{self, MetricsReport};
use crate::scenario::Scenario;
use crate::simulation::{SimError, Simulation};
use crate::trace::{self, TraceError, TraceHeader, TraceRecord};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub header: TraceHeader,
    pub rows: Vec<TraceRecord>,
    pub metrics: MetricsReport,
}

impl RunOutput {
    pub fn write_trace(&self, path: &Path) -> Result<(), TraceError> {
        trace::write_jsonl(BufWriter::new(File::create(path)?), &self.header, &self.rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TraceError> {
        trace::write_csv(BufWriter::new(File::create(path)?), &self.rows)
    }

    pub fn trace_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        trace::write_jsonl(&mut buf, &self.header, &self.rows).expect("writing to memory");
        buf
    }
}

/// Runs a scenario headless with the scripted ground station.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(scenario, true);
    let mut rows = Vec::with_capacity(scenario.tick_count() as usize);
    while !sim.is_finished() {
        rows.push(sim.step()?.record);
    }
    let ctx = sim.metric_context();
    let metrics = metrics::compute(&rows, &ctx);
    Ok(RunOutput {
        header: TraceHeader::new(&scenario.name, scenario.seed, ctx),
        rows,
        metrics,
    })
}

/// Recomputes the report of a saved trace.
pub fn report_from_trace(path: &Path) -> Result<MetricsReport, TraceError> {
    let (header, rows) = trace::read_jsonl(std::io::BufReader::new(File::open(path)?))?;
    Ok(metrics::compute(&rows, &header.context))
}
