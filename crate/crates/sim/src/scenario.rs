use std::path::Path;

use serde::{Deserialize, Serialize};

use waveshot_core::guidance::{GuidanceConfig, Mode, Waypoint};
use waveshot_core::telemetry::LinkModel;
use waveshot_core::vessel::{EnvironmentModel, VesselParams, VesselState};

use crate::config::{load_scenario, parse_scenario, ConfigError};

/// Piecewise-linear target trajectory through `(t_s, x_m, y_m)` knots.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetScript {
    pub knots: Vec<(f64, f64, f64)>,
    pub report_period_s: f64,
    pub noise_std_m: f64,
}

impl TargetScript {
    fn segment(&self, t_s: f64) -> Option<usize> {
        self.knots.windows(2).position(|w| t_s >= w[0].0 && t_s < w[1].0)
    }

    pub fn position(&self, t_s: f64) -> (f64, f64) {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if t_s <= first.0 {
            return (first.1, first.2);
        }
        match self.segment(t_s) {
            Some(i) => {
                let (a, b) = (self.knots[i], self.knots[i + 1]);
                let u = (t_s - a.0) / (b.0 - a.0);
                (a.1 + (b.1 - a.1) * u, a.2 + (b.2 - a.2) * u)
            }
            None => (last.1, last.2),
        }
    }

    pub fn velocity(&self, t_s: f64) -> (f64, f64) {
        match self.segment(t_s) {
            Some(i) => {
                let (a, b) = (self.knots[i], self.knots[i + 1]);
                let span = b.0 - a.0;
                ((b.1 - a.1) / span, (b.2 - a.2) / span)
            }
            None => (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventAction {
    SetMode(Mode),
    Manual { throttle: f64, steering: f64 },
    Heartbeat(bool),
    UploadMission,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptEvent {
    pub t_s: f64,
    pub action: EventAction,
}

/// Pass/fail limits; unset limits are not checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub xte_rms_max_m: Option<f64>,
    pub waypoints_reached_min: Option<u32>,
    pub mission_time_max_s: Option<f64>,
    pub in_frame_pct_min: Option<f64>,
    pub standoff_tolerance_m: f64,
    pub standoff_hold_min_s: Option<f64>,
    pub final_distance_min_m: Option<f64>,
    pub final_distance_max_m: Option<f64>,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub duration_s: f64,
    pub dt_s: f64,
    pub seed: u64,
    pub vessel: VesselParams,
    pub environment: EnvironmentModel,
    pub link: LinkModel,
    pub gcs_position: (f64, f64),
    pub heartbeat_period_s: f64,
    pub report_period_s: f64,
    pub failsafe_timeout_s: f64,
    pub guidance: GuidanceConfig,
    pub initial_state: VesselState,
    pub initial_mode: Mode,
    pub mission: Vec<Waypoint>,
    pub preload_mission: bool,
    pub target: Option<TargetScript>,
    pub events: Vec<ScriptEvent>,
    pub thresholds: Thresholds,
}

impl Scenario {
    /// Reseeds every random stream: environment `seed`, uplink `seed + 1`,
    /// downlink `seed + 2`, target detector `seed + 3`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.environment.seed = seed;
        self.link.seed = seed.wrapping_add(1);
        self
    }

    pub fn tick_count(&self) -> u64 {
        (self.duration_s / self.dt_s).round() as u64
    }
}

const BUILTIN: [(&str, &str); 4] = [
    ("static_approach", include_str!("../scenarios/static_approach.toml")),
    ("follow_approach", include_str!("../scenarios/follow_approach.toml")),
    ("follow_recede", include_str!("../scenarios/follow_recede.toml")),
    ("waypoint_square", include_str!("../scenarios/waypoint_square.toml")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin(name: &str) -> Option<Scenario> {
    let text = builtin_source(name)?;
    Some(parse_scenario(text, name, None).expect("bundled scenarios are valid"))
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    builtin_names().filter_map(builtin).collect()
}

/// Loads `spec` as a file path, falling back to a bundled scenario name.
pub fn resolve(spec: &str) -> Result<Scenario, ConfigError> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(s) = builtin(spec) {
            return Ok(s);
        }
    }
    load_scenario(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_builtins_parse() {
        let all = builtin_scenarios();
        let names: Vec<_> = all.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["static_approach", "follow_approach", "follow_recede", "waypoint_square"]);
    }

    #[test]
    fn target_script_interpolates() {
        let t = TargetScript {
            knots: vec![(0.0, 0.0, 0.0), (10.0, 10.0, 0.0), (20.0, 10.0, 20.0)],
            report_period_s: 0.2,
            noise_std_m: 0.0,
        };
        assert_eq!(t.position(-1.0), (0.0, 0.0));
        assert_eq!(t.position(5.0), (5.0, 0.0));
        assert_eq!(t.position(15.0), (10.0, 10.0));
        assert_eq!(t.position(99.0), (10.0, 20.0));
        assert_eq!(t.velocity(5.0), (1.0, 0.0));
        assert_eq!(t.velocity(15.0), (0.0, 2.0));
        assert_eq!(t.velocity(20.0), (0.0, 0.0));
    }

    #[test]
    fn with_seed_reseeds_streams() {
        let s = builtin("waypoint_square").unwrap().with_seed(7);
        assert_eq!(s.environment.seed, 7);
        assert_eq!(s.link.seed, 8);
    }
}
