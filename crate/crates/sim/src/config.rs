//! Scenario files: TOML with one table per subsystem.
//!
//! Any top-level table may carry `include = "other.toml"`; the referenced
//! file supplies defaults for that table and inline keys override it. Paths
//! are resolved relative to the including file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use waveshot_core::angle::{deg_to_rad, rad_to_deg};
use waveshot_core::guidance::{FollowPolicy, GuidanceConfig, Mode, Waypoint};
use waveshot_core::steering::{PidGains, SpeedConfig, SteeringConfig};
use waveshot_core::telemetry::{LinkModel, FAILSAFE_TIMEOUT_S};
use waveshot_core::vessel::{EnvironmentModel, VesselParams, VesselState};

use crate::scenario::{EventAction, Scenario, ScriptEvent, TargetScript, Thresholds};

const MAX_INCLUDE_DEPTH: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: line {line}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}: {message}")]
    Schema { origin: String, message: String },
    #[error("{origin}: [{section}] {message}")]
    Invalid {
        origin: String,
        section: String,
        message: String,
    },
    #[error("{origin}: [{section}] include nesting deeper than {MAX_INCLUDE_DEPTH}")]
    IncludeDepth { origin: String, section: String },
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn toml_error(origin: &str, text: &str, err: toml::de::Error) -> ConfigError {
    match err.span() {
        Some(span) => ConfigError::Syntax {
            origin: origin.to_owned(),
            line: line_of(text, span.start),
            message: err.message().to_owned(),
        },
        None => ConfigError::Schema {
            origin: origin.to_owned(),
            message: err.message().to_owned(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VesselSection {
    pub mass_kg: f64,
    pub yaw_inertia_kgm2: f64,
    pub max_thrust_n: f64,
    pub thruster_offset_m: f64,
    pub drag_lin_surge: f64,
    pub drag_quad_surge: f64,
    pub drag_lin_yaw: f64,
    pub drag_quad_yaw: f64,
    pub motor_lag_s: f64,
}

impl Default for VesselSection {
    fn default() -> Self {
        let p = VesselParams::default();
        Self {
            mass_kg: p.mass_kg,
            yaw_inertia_kgm2: p.yaw_inertia_kgm2,
            max_thrust_n: p.max_thrust_n,
            thruster_offset_m: p.thruster_offset_m,
            drag_lin_surge: p.drag_lin_surge,
            drag_quad_surge: p.drag_quad_surge,
            drag_lin_yaw: p.drag_lin_yaw,
            drag_quad_yaw: p.drag_quad_yaw,
            motor_lag_s: p.motor_lag_s,
        }
    }
}

impl VesselSection {
    fn resolve(&self) -> VesselParams {
        VesselParams {
            mass_kg: self.mass_kg,
            yaw_inertia_kgm2: self.yaw_inertia_kgm2,
            max_thrust_n: self.max_thrust_n,
            thruster_offset_m: self.thruster_offset_m,
            drag_lin_surge: self.drag_lin_surge,
            drag_quad_surge: self.drag_quad_surge,
            drag_lin_yaw: self.drag_lin_yaw,
            drag_quad_yaw: self.drag_quad_yaw,
            motor_lag_s: self.motor_lag_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSection {
    pub current_east_mps: f64,
    pub current_north_mps: f64,
    pub yaw_disturbance_std: f64,
    pub surge_disturbance_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub max_range_m: f64,
    pub base_loss_prob: f64,
    pub latency_s: f64,
    pub gcs_x_m: f64,
    pub gcs_y_m: f64,
    /// Scripted ground-station heartbeat in headless runs; 0 disables it.
    pub heartbeat_period_s: f64,
    pub report_period_s: f64,
    pub failsafe_timeout_s: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let m = LinkModel::default();
        Self {
            max_range_m: m.max_range_m,
            base_loss_prob: m.base_loss_prob,
            latency_s: m.latency_s,
            gcs_x_m: 0.0,
            gcs_y_m: 0.0,
            heartbeat_period_s: 1.0,
            report_period_s: 0.1,
            failsafe_timeout_s: FAILSAFE_TIMEOUT_S,
        }
    }
}

/// Steering cascade gains under the autopilot's parameter names; angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringSection {
    pub ang_p: f64,
    pub rat_p: f64,
    pub rat_i: f64,
    pub rat_d: f64,
    pub rat_max_degps: f64,
    pub acc_max_degps2: f64,
    pub integ_limit: f64,
}

impl From<&SteeringConfig> for SteeringSection {
    fn from(c: &SteeringConfig) -> Self {
        Self {
            ang_p: c.ang_p,
            rat_p: c.rat_gains.kp,
            rat_i: c.rat_gains.ki,
            rat_d: c.rat_gains.kd,
            rat_max_degps: rad_to_deg(c.rat_max_radps),
            acc_max_degps2: rad_to_deg(c.acc_max_radps2),
            integ_limit: c.integ_limit,
        }
    }
}

impl Default for SteeringSection {
    fn default() -> Self {
        Self::from(&SteeringConfig::default())
    }
}

impl SteeringSection {
    pub fn resolve(&self) -> SteeringConfig {
        SteeringConfig {
            ang_p: self.ang_p,
            rat_gains: PidGains::new(self.rat_p, self.rat_i, self.rat_d),
            rat_max_radps: deg_to_rad(self.rat_max_degps),
            acc_max_radps2: deg_to_rad(self.acc_max_degps2),
            integ_limit: self.integ_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedSection {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integ_limit: f64,
}

impl Default for SpeedSection {
    fn default() -> Self {
        let s = SpeedConfig::default();
        Self {
            kp: s.gains.kp,
            ki: s.gains.ki,
            kd: s.gains.kd,
            integ_limit: s.integ_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceSection {
    pub lookahead_m: f64,
    pub max_track_age_s: f64,
}

impl Default for GuidanceSection {
    fn default() -> Self {
        let g = GuidanceConfig::default();
        Self {
            lookahead_m: g.lookahead_m,
            max_track_age_s: g.max_track_age_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowSection {
    pub standoff_m: f64,
    pub approach_gain: f64,
    pub max_speed_mps: f64,
    pub fov_deg: f64,
}

impl Default for FollowSection {
    fn default() -> Self {
        let f = FollowPolicy::default();
        Self {
            standoff_m: f.standoff_m,
            approach_gain: f.approach_gain,
            max_speed_mps: f.max_speed_mps,
            fov_deg: rad_to_deg(f.fov_rad),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub x_m: f64,
    pub y_m: f64,
    /// Compass heading, clockwise from north.
    pub heading_deg: f64,
    pub surge_mps: f64,
    pub mode: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointEntry {
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default = "default_wp_speed")]
    pub speed_mps: f64,
    #[serde(default = "default_accept_radius")]
    pub accept_radius_m: f64,
}

fn default_wp_speed() -> f64 {
    1.5
}

fn default_accept_radius() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    /// `[t_s, x_m, y_m]` knots; the target moves linearly between them and
    /// stays at the last one.
    pub path: Vec<[f64; 3]>,
    #[serde(default = "default_detect_period")]
    pub report_period_s: f64,
    #[serde(default)]
    pub noise_std_m: f64,
}

fn default_detect_period() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventEntry {
    pub t_s: f64,
    pub set_mode: Option<String>,
    /// `[throttle, steering]`.
    pub manual: Option<[f64; 2]>,
    /// Turns the scripted ground-station heartbeat on or off.
    pub heartbeat: Option<bool>,
    /// Sends the scenario's `[[mission]]` over the link.
    pub upload_mission: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub xte_rms_max_m: Option<f64>,
    pub waypoints_reached_min: Option<u32>,
    pub mission_time_max_s: Option<f64>,
    pub in_frame_pct_min: Option<f64>,
    pub standoff_tolerance_m: f64,
    pub standoff_hold_min_s: Option<f64>,
    pub final_distance_min_m: Option<f64>,
    pub final_distance_max_m: Option<f64>,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            xte_rms_max_m: None,
            waypoints_reached_min: None,
            mission_time_max_s: None,
            in_frame_pct_min: None,
            standoff_tolerance_m: 2.0,
            standoff_hold_min_s: None,
            final_distance_min_m: None,
            final_distance_max_m: None,
        }
    }
}

/// Raw file layout, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Load `[[mission]]` into the autopilot before the first tick.
    #[serde(default = "default_true")]
    pub preload_mission: bool,
    #[serde(default)]
    pub vessel: VesselSection,
    #[serde(default)]
    pub environment: EnvironmentSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub steering: SteeringSection,
    #[serde(default)]
    pub speed: SpeedSection,
    #[serde(default)]
    pub guidance: GuidanceSection,
    #[serde(default)]
    pub follow: FollowSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub mission: Vec<WaypointEntry>,
    pub target: Option<TargetSection>,
    #[serde(default)]
    pub events: Vec<EventEntry>,
    #[serde(default)]
    pub thresholds: ThresholdSection,
}

fn default_dt() -> f64 {
    0.02
}

fn default_true() -> bool {
    true
}

/// Parses a scenario from text. `base` resolves includes; without it any
/// include is an error.
pub fn parse_scenario(text: &str, origin: &str, base: Option<&Path>) -> Result<Scenario, ConfigError> {
    let table: Table = toml::from_str(text).map_err(|e| toml_error(origin, text, e))?;
    let has_include = table
        .values()
        .any(|v| v.as_table().is_some_and(|t| t.contains_key("include")));
    let file: ScenarioFile = if has_include {
        let merged = resolve_includes(table, origin, base, 0)?;
        Value::Table(merged).try_into().map_err(|e| toml_error(origin, text, e))?
    } else {
        // Direct parse keeps span information for schema errors.
        toml::from_str(text).map_err(|e| toml_error(origin, text, e))?
    };
    file.validate(origin)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string(), path.parent())
}

fn resolve_includes(mut table: Table, origin: &str, base: Option<&Path>, depth: usize) -> Result<Table, ConfigError> {
    for (section, value) in table.iter_mut() {
        let Some(inner) = value.as_table_mut() else { continue };
        let Some(include) = inner.remove("include") else { continue };
        if depth >= MAX_INCLUDE_DEPTH {
            return Err(ConfigError::IncludeDepth {
                origin: origin.to_owned(),
                section: section.clone(),
            });
        }
        let invalid = |message: String| ConfigError::Invalid {
            origin: origin.to_owned(),
            section: section.clone(),
            message,
        };
        let rel = include
            .as_str()
            .ok_or_else(|| invalid("include must be a string path".into()))?;
        let dir = base.ok_or_else(|| invalid(format!("cannot resolve include `{rel}` without a base directory")))?;
        let path = dir.join(rel);
        let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        let inc_origin = path.display().to_string();
        let parsed: Table = toml::from_str(&text).map_err(|e| toml_error(&inc_origin, &text, e))?;
        // The included file is either the bare section or wraps it under the same name.
        let body = match parsed.get(section.as_str()) {
            Some(Value::Table(t)) if parsed.len() == 1 => t.clone(),
            _ => parsed,
        };
        let mut wrapper = Table::new();
        wrapper.insert(section.clone(), Value::Table(body));
        let resolved = resolve_includes(wrapper, &inc_origin, path.parent(), depth + 1)?;
        let mut merged = match resolved.get(section.as_str()) {
            Some(Value::Table(t)) => t.clone(),
            _ => Table::new(),
        };
        for (k, v) in inner.iter() {
            merged.insert(k.clone(), v.clone());
        }
        *inner = merged;
    }
    Ok(table)
}

fn check(cond: bool, origin: &str, section: &str, message: impl Into<String>) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            origin: origin.to_owned(),
            section: section.to_owned(),
            message: message.into(),
        })
    }
}

fn parse_mode(s: &str, origin: &str, section: &str) -> Result<Mode, ConfigError> {
    Mode::parse(s).ok_or_else(|| ConfigError::Invalid {
        origin: origin.to_owned(),
        section: section.to_owned(),
        message: format!("unknown mode `{s}`"),
    })
}

impl ScenarioFile {
    pub fn validate(&self, origin: &str) -> Result<Scenario, ConfigError> {
        check(self.dt_s.is_finite() && self.dt_s > 0.0, origin, "scenario", "dt_s must be > 0")?;
        check(
            self.dt_s <= waveshot_core::vessel::MAX_DT_S,
            origin,
            "scenario",
            format!("dt_s must be ≤ {} s", waveshot_core::vessel::MAX_DT_S),
        )?;
        check(
            self.duration_s.is_finite() && self.duration_s >= 0.0,
            origin,
            "scenario",
            "duration_s must be ≥ 0",
        )?;

        let vessel = self.vessel.resolve();
        vessel
            .validate()
            .map_err(|e| ConfigError::Invalid { origin: origin.to_owned(), section: "vessel".into(), message: e.to_string() })?;

        let environment = EnvironmentModel {
            current_mps: (self.environment.current_east_mps, self.environment.current_north_mps),
            yaw_disturbance_std: self.environment.yaw_disturbance_std,
            surge_disturbance_std: self.environment.surge_disturbance_std,
            seed: self.seed,
        };
        environment.validate().map_err(|e| ConfigError::Invalid {
            origin: origin.to_owned(),
            section: "environment".into(),
            message: e.to_string(),
        })?;

        let l = &self.link;
        let link_model = LinkModel {
            max_range_m: l.max_range_m,
            base_loss_prob: l.base_loss_prob,
            latency_s: l.latency_s,
            seed: self.seed.wrapping_add(1),
        };
        check(link_model.is_valid(), origin, "link", "range, loss probability or latency out of bounds")?;
        check(
            l.heartbeat_period_s.is_finite() && l.heartbeat_period_s >= 0.0,
            origin,
            "link",
            "heartbeat_period_s must be ≥ 0",
        )?;
        check(
            l.report_period_s.is_finite() && l.report_period_s > 0.0,
            origin,
            "link",
            "report_period_s must be > 0",
        )?;
        check(
            l.failsafe_timeout_s.is_finite() && l.failsafe_timeout_s > 0.0,
            origin,
            "link",
            "failsafe_timeout_s must be > 0",
        )?;
        check(l.gcs_x_m.is_finite() && l.gcs_y_m.is_finite(), origin, "link", "GCS position must be finite")?;

        let steering = self.steering.resolve();
        steering
            .validate()
            .map_err(|e| ConfigError::Invalid { origin: origin.to_owned(), section: "steering".into(), message: e.to_string() })?;
        let speed = SpeedConfig {
            gains: PidGains::new(self.speed.kp, self.speed.ki, self.speed.kd),
            integ_limit: self.speed.integ_limit,
        };
        speed
            .validate()
            .map_err(|e| ConfigError::Invalid { origin: origin.to_owned(), section: "speed".into(), message: e.to_string() })?;
        let follow = FollowPolicy {
            standoff_m: self.follow.standoff_m,
            approach_gain: self.follow.approach_gain,
            max_speed_mps: self.follow.max_speed_mps,
            fov_rad: deg_to_rad(self.follow.fov_deg),
        };
        check(follow.is_valid(), origin, "follow", "standoff, gain, speed or field of view out of bounds")?;
        let g = &self.guidance;
        check(g.lookahead_m.is_finite() && g.lookahead_m > 0.0, origin, "guidance", "lookahead_m must be > 0")?;
        check(
            g.max_track_age_s.is_finite() && g.max_track_age_s > 0.0,
            origin,
            "guidance",
            "max_track_age_s must be > 0",
        )?;
        let guidance = GuidanceConfig {
            steering,
            speed,
            follow,
            lookahead_m: g.lookahead_m,
            max_track_age_s: g.max_track_age_s,
        };

        let i = &self.initial;
        let mut initial_state = VesselState::at(i.x_m, i.y_m, deg_to_rad(i.heading_deg));
        initial_state.surge_mps = i.surge_mps;
        check(initial_state.is_finite(), origin, "initial", "state must be finite")?;
        let initial_mode = match &i.mode {
            Some(m) => parse_mode(m, origin, "initial")?,
            None => Mode::Manual,
        };

        let mut mission = Vec::with_capacity(self.mission.len());
        for (k, w) in self.mission.iter().enumerate() {
            let wp = Waypoint::new(w.x_m, w.y_m, w.speed_mps, w.accept_radius_m);
            check(
                wp.is_valid(),
                origin,
                &format!("mission.{k}"),
                "waypoint needs finite position, speed ≥ 0 and accept radius > 0",
            )?;
            mission.push(wp);
        }
        if initial_mode == Mode::Auto {
            check(
                self.preload_mission && !mission.is_empty(),
                origin,
                "initial",
                "mode auto needs a preloaded mission",
            )?;
        }

        let target = match &self.target {
            None => None,
            Some(t) => {
                check(!t.path.is_empty(), origin, "target", "path needs at least one knot")?;
                check(
                    t.path.iter().flatten().all(|v| v.is_finite()),
                    origin,
                    "target",
                    "path values must be finite",
                )?;
                check(
                    t.path.windows(2).all(|w| w[1][0] > w[0][0]),
                    origin,
                    "target",
                    "path times must be strictly increasing",
                )?;
                check(
                    t.report_period_s.is_finite() && t.report_period_s > 0.0,
                    origin,
                    "target",
                    "report_period_s must be > 0",
                )?;
                check(
                    t.noise_std_m.is_finite() && t.noise_std_m >= 0.0,
                    origin,
                    "target",
                    "noise_std_m must be ≥ 0",
                )?;
                Some(TargetScript {
                    knots: t.path.iter().map(|k| (k[0], k[1], k[2])).collect(),
                    report_period_s: t.report_period_s,
                    noise_std_m: t.noise_std_m,
                })
            }
        };

        let mut events = Vec::with_capacity(self.events.len());
        for (k, e) in self.events.iter().enumerate() {
            let section = format!("events.{k}");
            check(e.t_s.is_finite() && e.t_s >= 0.0, origin, &section, "t_s must be ≥ 0")?;
            let mut actions = Vec::new();
            if let Some(m) = &e.set_mode {
                actions.push(EventAction::SetMode(parse_mode(m, origin, &section)?));
            }
            if let Some([throttle, steering]) = e.manual {
                check(
                    (-1.0..=1.0).contains(&throttle) && (-1.0..=1.0).contains(&steering),
                    origin,
                    &section,
                    "manual throttle and steering must lie in [-1, 1]",
                )?;
                actions.push(EventAction::Manual { throttle, steering });
            }
            if let Some(on) = e.heartbeat {
                actions.push(EventAction::Heartbeat(on));
            }
            if e.upload_mission == Some(true) {
                check(!mission.is_empty(), origin, &section, "upload_mission needs [[mission]] entries")?;
                actions.push(EventAction::UploadMission);
            }
            check(actions.len() == 1, origin, &section, "each event needs exactly one action")?;
            events.push(ScriptEvent {
                t_s: e.t_s,
                action: actions.remove(0),
            });
        }
        events.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));

        let th = &self.thresholds;
        check(
            th.standoff_tolerance_m.is_finite() && th.standoff_tolerance_m > 0.0,
            origin,
            "thresholds",
            "standoff_tolerance_m must be > 0",
        )?;
        let thresholds = Thresholds {
            xte_rms_max_m: th.xte_rms_max_m,
            waypoints_reached_min: th.waypoints_reached_min,
            mission_time_max_s: th.mission_time_max_s,
            in_frame_pct_min: th.in_frame_pct_min,
            standoff_tolerance_m: th.standoff_tolerance_m,
            standoff_hold_min_s: th.standoff_hold_min_s,
            final_distance_min_m: th.final_distance_min_m,
            final_distance_max_m: th.final_distance_max_m,
        };

        Ok(Scenario {
            name: self.name.clone(),
            description: self.description.clone(),
            duration_s: self.duration_s,
            dt_s: self.dt_s,
            seed: self.seed,
            vessel,
            environment,
            link: link_model,
            gcs_position: (l.gcs_x_m, l.gcs_y_m),
            heartbeat_period_s: l.heartbeat_period_s,
            report_period_s: l.report_period_s,
            failsafe_timeout_s: l.failsafe_timeout_s,
            guidance,
            initial_state,
            initial_mode,
            mission,
            preload_mission: self.preload_mission,
            target,
            events,
            thresholds,
        })
    }
}
