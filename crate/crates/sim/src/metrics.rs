//! Scenario metrics, computed only from trace rows and their context so a
//! saved trace reproduces the report exactly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::trace::{MetricContext, TraceRecord};

/// Slack on the controller limit checks.
const LIMIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub limit: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ticks: usize,
    pub duration_s: f64,
    pub xte_rms_m: Option<f64>,
    pub waypoints_reached: u32,
    pub waypoints_total: u32,
    pub mission_complete_s: Option<f64>,
    /// First tick with the target in frame.
    pub acquisition_s: Option<f64>,
    pub pct_time_in_frame: Option<f64>,
    /// First tick within tolerance of the standoff distance.
    pub settle_time_s: Option<f64>,
    pub standoff_err_mean_m: Option<f64>,
    pub standoff_err_max_m: Option<f64>,
    /// Longest continuous stretch within tolerance.
    pub standoff_hold_s: Option<f64>,
    pub final_distance_m: Option<f64>,
    pub max_abs_desired_rate_radps: f64,
    pub max_rate_step_radps: f64,
    pub checks: Vec<Check>,
}

impl MetricsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check_max(name: &str, value: Option<f64>, max: f64) -> Check {
    Check {
        name: name.into(),
        value,
        limit: format!("<= {max}"),
        pass: value.is_some_and(|v| v <= max),
    }
}

fn check_min(name: &str, value: Option<f64>, min: f64) -> Check {
    Check {
        name: name.into(),
        value,
        limit: format!(">= {min}"),
        pass: value.is_some_and(|v| v >= min),
    }
}

pub fn compute(rows: &[TraceRecord], ctx: &MetricContext) -> MetricsReport {
    let th = &ctx.thresholds;
    let duration_s = rows.len() as f64 * ctx.dt_s;

    let xtes: Vec<f64> = rows.iter().filter_map(|r| r.xte_m).collect();
    let xte_rms_m = (!xtes.is_empty()).then(|| (xtes.iter().map(|e| e * e).sum::<f64>() / xtes.len() as f64).sqrt());

    let waypoints_reached = rows.last().map_or(0, |r| r.waypoints_reached);
    let mission_complete_s = (ctx.waypoints_total > 0)
        .then(|| rows.iter().find(|r| r.waypoints_reached >= ctx.waypoints_total).map(|r| r.t_s))
        .flatten();

    let acq = rows.iter().position(|r| r.in_frame == Some(true));
    let acquisition_s = acq.map(|i| rows[i].t_s);
    let pct_time_in_frame = acq.map(|i| {
        let (seen, inside) = rows[i..].iter().fold((0usize, 0usize), |(n, k), r| match r.in_frame {
            Some(f) => (n + 1, k + usize::from(f)),
            None => (n, k),
        });
        100.0 * inside as f64 / seen as f64
    });

    let (mut settle_time_s, mut standoff_err_mean_m, mut standoff_err_max_m, mut standoff_hold_s) = (None, None, None, None);
    if let Some(standoff) = ctx.standoff_m {
        let errs: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.target_distance_m.map(|d| (r.t_s, (d - standoff).abs())))
            .collect();
        if let Some(k) = errs.iter().position(|&(_, e)| e <= th.standoff_tolerance_m) {
            settle_time_s = Some(errs[k].0);
            let after = &errs[k..];
            standoff_err_mean_m = Some(after.iter().map(|&(_, e)| e).sum::<f64>() / after.len() as f64);
            standoff_err_max_m = Some(after.iter().map(|&(_, e)| e).fold(0.0, f64::max));
        }
        if !errs.is_empty() {
            let (mut run, mut best) = (0usize, 0usize);
            for &(_, e) in &errs {
                run = if e <= th.standoff_tolerance_m { run + 1 } else { 0 };
                best = best.max(run);
            }
            standoff_hold_s = Some(best as f64 * ctx.dt_s);
        }
    }
    let final_distance_m = rows.last().and_then(|r| r.target_distance_m);

    let max_abs_desired_rate_radps = rows.iter().map(|r| r.desired_rate_radps.abs()).fold(0.0, f64::max);
    let max_rate_step_radps = rows
        .windows(2)
        .map(|w| (w[1].rate_target_radps - w[0].rate_target_radps).abs())
        .fold(0.0, f64::max);

    let mut checks = vec![
        check_max("rate_limit", Some(max_abs_desired_rate_radps), ctx.rat_max_radps + LIMIT_EPS),
        check_max("slew_limit", Some(max_rate_step_radps), ctx.acc_max_radps2 * ctx.dt_s + LIMIT_EPS),
    ];
    if let Some(max) = th.xte_rms_max_m {
        checks.push(check_max("xte_rms", xte_rms_m, max));
    }
    if let Some(min) = th.waypoints_reached_min {
        checks.push(check_min("waypoints_reached", Some(f64::from(waypoints_reached)), f64::from(min)));
    }
    if let Some(max) = th.mission_time_max_s {
        checks.push(check_max("mission_time", mission_complete_s, max));
    }
    if let Some(min) = th.in_frame_pct_min {
        checks.push(check_min("in_frame_pct", pct_time_in_frame, min));
    }
    if let Some(min) = th.standoff_hold_min_s {
        checks.push(check_min("standoff_hold", standoff_hold_s, min));
    }
    if let Some(min) = th.final_distance_min_m {
        checks.push(check_min("final_distance_min", final_distance_m, min));
    }
    if let Some(max) = th.final_distance_max_m {
        checks.push(check_max("final_distance_max", final_distance_m, max));
    }

    MetricsReport {
        ticks: rows.len(),
        duration_s,
        xte_rms_m,
        waypoints_reached,
        waypoints_total: ctx.waypoints_total,
        mission_complete_s,
        acquisition_s,
        pct_time_in_frame,
        settle_time_s,
        standoff_err_mean_m,
        standoff_err_max_m,
        standoff_hold_s,
        final_distance_m,
        max_abs_desired_rate_radps,
        max_rate_step_radps,
        checks,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"))
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ticks               {}", self.ticks)?;
        writeln!(f, "duration_s          {:.3}", self.duration_s)?;
        writeln!(f, "xte_rms_m           {}", opt(self.xte_rms_m))?;
        writeln!(f, "waypoints           {}/{}", self.waypoints_reached, self.waypoints_total)?;
        writeln!(f, "mission_complete_s  {}", opt(self.mission_complete_s))?;
        writeln!(f, "acquisition_s       {}", opt(self.acquisition_s))?;
        writeln!(f, "pct_time_in_frame   {}", opt(self.pct_time_in_frame))?;
        writeln!(f, "settle_time_s       {}", opt(self.settle_time_s))?;
        writeln!(f, "standoff_err_mean_m {}", opt(self.standoff_err_mean_m))?;
        writeln!(f, "standoff_err_max_m  {}", opt(self.standoff_err_max_m))?;
        writeln!(f, "standoff_hold_s     {}", opt(self.standoff_hold_s))?;
        writeln!(f, "final_distance_m    {}", opt(self.final_distance_m))?;
        writeln!(f, "max_desired_rate    {:.6} rad/s", self.max_abs_desired_rate_radps)?;
        writeln!(f, "max_rate_step       {:.6} rad/s", self.max_rate_step_radps)?;
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {} = {} ({})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                opt(c.value),
                c.limit
            )?;
        }
        Ok(())
    }
}
