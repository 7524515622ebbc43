//! Setpoint generation and the vessel mode state machine.
//!
//! Guidance turns a waypoint route or a tracked target into a desired heading
//! and speed, then runs them through the steering and speed cascades. All
//! positions are in the local east/north frame, headings are compass angles.

use alloc::vec::Vec;

use crate::angle::{bearing, wrap_angle};
use crate::steering::{
    CascadeOutput, SpeedConfig, SpeedController, SteeringConfig, SteeringController,
};
use crate::vessel::VesselState;

pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GuidanceError {
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("target track is {age_s:.2} s old")]
    StaleTrack { age_s: f64 },
    #[error("vessel and target positions coincide")]
    CoincidentPositions,
    #[error("invalid waypoint {0}")]
    InvalidWaypoint(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub x_m: f64,
    pub y_m: f64,
    pub speed_mps: f64,
    pub accept_radius_m: f64,
}

impl Waypoint {
    pub fn new(x_m: f64, y_m: f64, speed_mps: f64, accept_radius_m: f64) -> Self {
        Self {
            x_m,
            y_m,
            speed_mps,
            accept_radius_m,
        }
    }

    /// A bare point used as a segment start.
    pub fn point(x_m: f64, y_m: f64) -> Self {
        Self::new(x_m, y_m, 0.0, 1.0)
    }

    pub fn position(&self) -> Point {
        (self.x_m, self.y_m)
    }

    pub fn is_valid(&self) -> bool {
        self.x_m.is_finite()
            && self.y_m.is_finite()
            && self.speed_mps.is_finite()
            && self.speed_mps >= 0.0
            && self.accept_radius_m.is_finite()
            && self.accept_radius_m > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mission {
    pub waypoints: Vec<Waypoint>,
    pub current_index: usize,
}

impl Mission {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, GuidanceError> {
        if let Some(i) = waypoints.iter().position(|w| !w.is_valid()) {
            return Err(GuidanceError::InvalidWaypoint(i));
        }
        Ok(Self {
            waypoints,
            current_index: 0,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.current_index >= self.waypoints.len()
    }

    pub fn current(&self) -> Option<&Waypoint> {
        self.waypoints.get(self.current_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTrack {
    pub x_m: f64,
    pub y_m: f64,
    pub vx_mps: f64,
    pub vy_mps: f64,
    /// Observation time.
    pub t_s: f64,
}

impl TargetTrack {
    pub fn age(&self, now_s: f64) -> f64 {
        (now_s - self.t_s).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowPolicy {
    pub standoff_m: f64,
    /// Commanded speed per meter of standoff error.
    pub approach_gain: f64,
    pub max_speed_mps: f64,
    /// Horizontal field of view of the hull-fixed camera.
    pub fov_rad: f64,
}

impl Default for FollowPolicy {
    fn default() -> Self {
        Self {
            standoff_m: 10.0,
            approach_gain: 0.3,
            max_speed_mps: 1.8,
            fov_rad: crate::angle::deg_to_rad(60.0),
        }
    }
}

impl FollowPolicy {
    pub fn is_valid(&self) -> bool {
        self.standoff_m.is_finite()
            && self.standoff_m > 0.0
            && self.approach_gain.is_finite()
            && self.approach_gain >= 0.0
            && self.max_speed_mps.is_finite()
            && self.max_speed_mps >= 0.0
            && self.fov_rad > 0.0
            && self.fov_rad < core::f64::consts::PI
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Manual,
    Hold,
    Auto,
    Follow,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Manual, Mode::Hold, Mode::Auto, Mode::Follow];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Manual => "manual",
            Mode::Hold => "hold",
            Mode::Auto => "auto",
            Mode::Follow => "follow",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "manual" => Some(Mode::Manual),
            "hold" => Some(Mode::Hold),
            "auto" => Some(Mode::Auto),
            "follow" => Some(Mode::Follow),
            _ => None,
        }
    }
}

impl core::fmt::Display for Mode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn segment_frame(seg_start: &Waypoint, seg_end: &Waypoint) -> Result<(f64, f64, f64), GuidanceError> {
    let dx = seg_end.x_m - seg_start.x_m;
    let dy = seg_end.y_m - seg_start.y_m;
    let len = libm::hypot(dx, dy);
    if len.is_nan() || len <= 0.0 {
        return Err(GuidanceError::DegenerateSegment);
    }
    Ok((dx / len, dy / len, len))
}

/// Signed perpendicular distance from `pos` to the line through the segment,
/// positive when `pos` lies to the right of the start → end direction.
pub fn cross_track_error(seg_start: &Waypoint, seg_end: &Waypoint, pos: Point) -> Result<f64, GuidanceError> {
    let (ux, uy, _) = segment_frame(seg_start, seg_end)?;
    let rx = pos.0 - seg_start.x_m;
    let ry = pos.1 - seg_start.y_m;
    Ok(rx * uy - ry * ux)
}

/// Pure pursuit: heading toward the carrot point `lookahead_m` beyond the
/// projection of `pos` onto the segment, clamped to the segment end.
pub fn pursuit_heading(
    pos: Point,
    seg_start: &Waypoint,
    seg_end: &Waypoint,
    lookahead_m: f64,
) -> Result<f64, GuidanceError> {
    let (ux, uy, len) = segment_frame(seg_start, seg_end)?;
    let along = (pos.0 - seg_start.x_m) * ux + (pos.1 - seg_start.y_m) * uy;
    let s = (along + lookahead_m).clamp(0.0, len);
    let carrot = (seg_start.x_m + ux * s, seg_start.y_m + uy * s);
    Ok(bearing(carrot.0 - pos.0, carrot.1 - pos.1))
}

/// Moves the cursor past every consecutive waypoint whose acceptance circle
/// contains `pos`.
pub fn advance_mission(mut m: Mission, pos: Point) -> Mission {
    while let Some(wp) = m.current() {
        if libm::hypot(pos.0 - wp.x_m, pos.1 - wp.y_m) <= wp.accept_radius_m {
            m.current_index += 1;
        } else {
            break;
        }
    }
    m
}

/// Constant-velocity extrapolation of a target track.
pub fn predict_target(track: &TargetTrack, now_s: f64, max_age_s: f64) -> Result<Point, GuidanceError> {
    let age = track.age(now_s);
    if age > max_age_s {
        return Err(GuidanceError::StaleTrack { age_s: age });
    }
    Ok((track.x_m + track.vx_mps * age, track.y_m + track.vy_mps * age))
}

/// Desired heading and speed for following a tracked target at a standoff.
///
/// Speed is `approach_gain · (distance − standoff)` plus the target's speed
/// along the line of sight, clamped to `[0, max_speed]`.
pub fn follow_setpoints(
    state: &VesselState,
    track: &TargetTrack,
    policy: &FollowPolicy,
    now_s: f64,
    max_age_s: f64,
) -> Result<(f64, f64), GuidanceError> {
    let (tx, ty) = predict_target(track, now_s, max_age_s)?;
    let dx = tx - state.x_m;
    let dy = ty - state.y_m;
    let dist = libm::hypot(dx, dy);
    if dist.is_nan() || dist <= 0.0 {
        return Ok((state.heading_rad, 0.0));
    }
    let los_speed = (track.vx_mps * dx + track.vy_mps * dy) / dist;
    let speed = (policy.approach_gain * (dist - policy.standoff_m) + los_speed)
        .clamp(0.0, policy.max_speed_mps);
    Ok((bearing(dx, dy), speed))
}

/// Whether the target bearing lies within half the field of view of `heading`.
pub fn in_frame(heading: f64, vessel_pos: Point, target_pos: Point, fov_rad: f64) -> Result<bool, GuidanceError> {
    let dx = target_pos.0 - vessel_pos.0;
    let dy = target_pos.1 - vessel_pos.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(GuidanceError::CoincidentPositions);
    }
    let off = wrap_angle(bearing(dx, dy) - wrap_angle(heading));
    Ok(off.abs() <= fov_rad / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionReason {
    Command,
    LinkFailsafe,
    LossOfTrack,
    MissionComplete,
    GuidanceFault,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTransition {
    pub t_s: f64,
    pub from: Mode,
    pub to: Mode,
    pub reason: TransitionReason,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ModeRequestError {
    #[error("no active mission")]
    NoMission,
    #[error("link failsafe active")]
    FailsafeActive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceConfig {
    pub steering: SteeringConfig,
    pub speed: SpeedConfig,
    pub follow: FollowPolicy,
    pub lookahead_m: f64,
    /// Tracks older than this trigger loss-of-track.
    pub max_track_age_s: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            steering: SteeringConfig::default(),
            speed: SpeedConfig::default(),
            follow: FollowPolicy::default(),
            lookahead_m: 5.0,
            max_track_age_s: 2.0,
        }
    }
}

/// Operator throttle/steering pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ManualCommand {
    pub throttle: f64,
    pub steering: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub xte_m: Option<f64>,
    pub heading_err_rad: f64,
    pub in_frame: Option<bool>,
    pub target_distance_m: Option<f64>,
    pub desired_heading_rad: Option<f64>,
    pub desired_speed_mps: Option<f64>,
    /// Angle-loop output after the RAT_MAX clamp.
    pub desired_rate_radps: f64,
    /// Slewed rate target fed to the rate loop.
    pub rate_target_radps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub throttle: f64,
    pub steering: f64,
    pub mode: Mode,
    pub diagnostics: Diagnostics,
}

/// Mode state machine plus the controller cascades it drives.
#[derive(Debug, Clone)]
pub struct Autopilot {
    cfg: GuidanceConfig,
    mode: Mode,
    mission: Option<Mission>,
    segment_origin: Point,
    track: Option<TargetTrack>,
    hold_heading: f64,
    steer: SteeringController,
    speed: SpeedController,
    transitions: Vec<ModeTransition>,
}

impl Autopilot {
    pub fn new(cfg: GuidanceConfig, initial_mode: Mode, state: &VesselState) -> Self {
        Self {
            mode: initial_mode,
            mission: None,
            segment_origin: state.position(),
            track: None,
            hold_heading: state.heading_rad,
            steer: SteeringController::new(cfg.steering),
            speed: SpeedController::new(cfg.speed),
            transitions: Vec::new(),
            cfg,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &GuidanceConfig {
        &self.cfg
    }

    pub fn mission(&self) -> Option<&Mission> {
        self.mission.as_ref()
    }

    pub fn track(&self) -> Option<&TargetTrack> {
        self.track.as_ref()
    }

    pub fn transitions(&self) -> &[ModeTransition] {
        &self.transitions
    }

    /// Current slewed rate target of the steering cascade.
    pub fn rate_target(&self) -> f64 {
        self.steer.rate_target
    }

    pub fn set_track(&mut self, track: TargetTrack) {
        self.track = Some(track);
    }

    /// Replaces the active mission; the first leg starts from `state`.
    pub fn load_mission(&mut self, mission: Mission, state: &VesselState) {
        self.segment_origin = state.position();
        self.mission = Some(mission);
    }

    /// Operator-requested mode change.
    pub fn request_mode(
        &mut self,
        mode: Mode,
        state: &VesselState,
        failsafe_active: bool,
    ) -> Result<(), ModeRequestError> {
        if failsafe_active && mode != Mode::Hold {
            return Err(ModeRequestError::FailsafeActive);
        }
        if mode == Mode::Auto && self.mission.as_ref().is_none_or(Mission::is_complete) {
            return Err(ModeRequestError::NoMission);
        }
        if mode == Mode::Auto {
            self.segment_origin = state.position();
        }
        self.transition(mode, TransitionReason::Command, state);
        Ok(())
    }

    fn transition(&mut self, to: Mode, reason: TransitionReason, state: &VesselState) {
        if to == self.mode {
            return;
        }
        self.transitions.push(ModeTransition {
            t_s: state.t_s,
            from: self.mode,
            to,
            reason,
        });
        match to {
            Mode::Hold => self.hold_heading = state.heading_rad,
            Mode::Manual => {}
            Mode::Auto | Mode::Follow => {}
        }
        self.steer.rate_pid = Default::default();
        self.speed.reset();
        self.mode = to;
    }

    fn track_diagnostics(&self, state: &VesselState, diag: &mut Diagnostics) {
        let Some(track) = &self.track else { return };
        let Ok(p) = predict_target(track, state.t_s, self.cfg.max_track_age_s) else {
            return;
        };
        diag.target_distance_m = Some(libm::hypot(p.0 - state.x_m, p.1 - state.y_m));
        diag.in_frame = in_frame(state.heading_rad, state.position(), p, self.cfg.follow.fov_rad).ok();
    }

    /// One guidance tick. `failsafe_active` forces Hold.
    pub fn step(
        &mut self,
        manual: ManualCommand,
        state: &VesselState,
        failsafe_active: bool,
        dt_s: f64,
    ) -> ControlOutput {
        if failsafe_active && self.mode != Mode::Hold {
            self.transition(Mode::Hold, TransitionReason::LinkFailsafe, state);
        }
        let mut diag = Diagnostics::default();
        self.track_diagnostics(state, &mut diag);

        // Resolve setpoints; guidance faults fall back to Hold for this tick.
        let setpoint = match self.mode {
            Mode::Manual => None,
            Mode::Hold => Some((self.hold_heading, 0.0, true)),
            Mode::Auto => match self.auto_setpoint(state, &mut diag) {
                Ok(Some((h, v))) => Some((h, v, false)),
                Ok(None) => {
                    self.transition(Mode::Hold, TransitionReason::MissionComplete, state);
                    Some((self.hold_heading, 0.0, true))
                }
                Err(_) => {
                    self.transition(Mode::Hold, TransitionReason::GuidanceFault, state);
                    Some((self.hold_heading, 0.0, true))
                }
            },
            Mode::Follow => {
                let sp = self.track.as_ref().ok_or(GuidanceError::StaleTrack { age_s: f64::INFINITY }).and_then(|t| {
                    follow_setpoints(state, t, &self.cfg.follow, state.t_s, self.cfg.max_track_age_s)
                });
                match sp {
                    Ok((h, v)) => Some((h, v, false)),
                    Err(_) => {
                        self.transition(Mode::Hold, TransitionReason::LossOfTrack, state);
                        Some((self.hold_heading, 0.0, true))
                    }
                }
            }
        };

        let (throttle, steering) = match setpoint {
            None => {
                // Keep the slew state continuous with what the hull is doing.
                let measured = state.yaw_rate_radps;
                let cfg = self.steer.cfg;
                let desired = measured.clamp(-cfg.rat_max_radps, cfg.rat_max_radps);
                self.steer.rate_target = crate::steering::slew_limit(
                    desired,
                    self.steer.rate_target,
                    cfg.acc_max_radps2,
                    dt_s,
                );
                diag.rate_target_radps = self.steer.rate_target;
                diag.desired_rate_radps = desired;
                (manual.throttle.clamp(-1.0, 1.0), manual.steering.clamp(-1.0, 1.0))
            }
            Some((heading_sp, speed_sp, allow_reverse)) => {
                let out: CascadeOutput =
                    self.steer
                        .update(heading_sp, state.heading_rad, state.yaw_rate_radps, dt_s);
                let mut throttle = self.speed.update(speed_sp, state.surge_mps, dt_s);
                if !allow_reverse {
                    throttle = throttle.max(0.0);
                }
                diag.heading_err_rad = out.heading_err_rad;
                diag.desired_rate_radps = out.desired_rate_radps;
                diag.rate_target_radps = out.rate_target_radps;
                diag.desired_heading_rad = Some(heading_sp);
                diag.desired_speed_mps = Some(speed_sp);
                (throttle, out.steering)
            }
        };

        ControlOutput {
            throttle,
            steering,
            mode: self.mode,
            diagnostics: diag,
        }
    }

    fn auto_setpoint(
        &mut self,
        state: &VesselState,
        diag: &mut Diagnostics,
    ) -> Result<Option<(f64, f64)>, GuidanceError> {
        let Some(mission) = self.mission.take() else {
            return Ok(None);
        };
        let before = mission.current_index;
        let mission = advance_mission(mission, state.position());
        if mission.current_index != before && mission.current_index > 0 {
            let prev = &mission.waypoints[mission.current_index - 1];
            self.segment_origin = prev.position();
        }
        let result = match mission.current() {
            None => Ok(None),
            Some(target) => {
                let start = Waypoint::point(self.segment_origin.0, self.segment_origin.1);
                let pos = state.position();
                match cross_track_error(&start, target, pos) {
                    Ok(xte) => {
                        diag.xte_m = Some(xte);
                        let h = pursuit_heading(pos, &start, target, self.cfg.lookahead_m)?;
                        Ok(Some((h, target.speed_mps)))
                    }
                    // Leg origin on top of the waypoint: steer straight at it.
                    Err(GuidanceError::DegenerateSegment) => Ok(Some((
                        bearing(target.x_m - pos.0, target.y_m - pos.1),
                        target.speed_mps,
                    ))),
                    Err(e) => Err(e),
                }
            }
        };
        self.mission = Some(mission);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::deg_to_rad;
    use crate::vessel::{mix_thrust, step, Environment, EnvironmentModel, VesselParams};
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn wp(x: f64, y: f64) -> Waypoint {
        Waypoint::new(x, y, 1.5, 3.0)
    }

    #[test]
    fn xte_examples() {
        let (a, b) = (wp(0.0, 0.0), wp(10.0, 0.0));
        assert_eq!(cross_track_error(&a, &b, (4.0, 0.0)).unwrap(), 0.0);
        assert_eq!(cross_track_error(&a, &b, (5.0, 3.0)).unwrap(), -3.0);
        assert_eq!(cross_track_error(&a, &b, (5.0, -3.0)).unwrap(), 3.0);
        assert_eq!(
            cross_track_error(&a, &a, (1.0, 1.0)),
            Err(GuidanceError::DegenerateSegment)
        );
    }

    #[test]
    fn pursuit_examples() {
        let (a, b) = (wp(0.0, 0.0), wp(10.0, 0.0));
        assert!((pursuit_heading((0.0, 0.0), &a, &b, 5.0).unwrap() - PI / 2.0).abs() < 1e-15);

        let far = wp(100.0, 0.0);
        let h = pursuit_heading((5.0, -3.0), &a, &far, 10.0).unwrap();
        assert_eq!(h, libm::atan2(10.0, 3.0));
        assert!((h.to_degrees() - 73.3).abs() < 0.05);

        let h = pursuit_heading((20.0, 5.0), &a, &b, 5.0).unwrap();
        assert_eq!(h, libm::atan2(10.0 - 20.0, 0.0 - 5.0));
        assert!(pursuit_heading((1.0, 1.0), &a, &a, 5.0).is_err());
    }

    #[test]
    fn advance_examples() {
        let m = Mission::new(vec![wp(50.0, 0.0), wp(52.0, 0.0), wp(100.0, 0.0)]).unwrap();
        assert_eq!(advance_mission(m.clone(), (0.0, 0.0)).current_index, 0);
        let on = advance_mission(
            Mission::new(vec![wp(50.0, 0.0), wp(100.0, 0.0)]).unwrap(),
            (50.0, 0.0),
        );
        assert_eq!(on.current_index, 1);
        // (51, 0) is within 3 m of both the first and the second waypoint.
        assert_eq!(advance_mission(m.clone(), (51.0, 0.0)).current_index, 2);
        let done = Mission {
            current_index: 3,
            ..m
        };
        assert_eq!(advance_mission(done, (100.0, 0.0)).current_index, 3);
    }

    #[test]
    fn mission_rejects_bad_waypoints() {
        let bad = Waypoint::new(0.0, 0.0, 1.0, 0.0);
        assert_eq!(
            Mission::new(vec![wp(1.0, 1.0), bad]),
            Err(GuidanceError::InvalidWaypoint(1))
        );
    }

    #[test]
    fn predict_examples() {
        let t = TargetTrack {
            x_m: 0.0,
            y_m: 0.0,
            vx_mps: 1.0,
            vy_mps: 0.0,
            t_s: 10.0,
        };
        assert_eq!(predict_target(&t, 10.0, 2.0).unwrap(), (0.0, 0.0));
        assert_eq!(predict_target(&t, 13.0, 5.0).unwrap(), (3.0, 0.0));
        assert!(matches!(
            predict_target(&t, 12.5, 2.0),
            Err(GuidanceError::StaleTrack { .. })
        ));
    }

    #[test]
    fn follow_examples() {
        let policy = FollowPolicy {
            standoff_m: 10.0,
            approach_gain: 0.3,
            max_speed_mps: 3.0,
            ..FollowPolicy::default()
        };
        let s = VesselState::default();
        let still = |x, y| TargetTrack {
            x_m: x,
            y_m: y,
            vx_mps: 0.0,
            vy_mps: 0.0,
            t_s: 0.0,
        };
        assert_eq!(
            follow_setpoints(&s, &still(0.0, 10.0), &policy, 0.0, 2.0).unwrap(),
            (0.0, 0.0)
        );
        let (_, v) = follow_setpoints(&s, &still(0.0, 20.0), &policy, 0.0, 2.0).unwrap();
        assert_eq!(v, 3.0);
        let receding = TargetTrack {
            vy_mps: 1.0,
            ..still(0.0, 10.0)
        };
        let (h, v) = follow_setpoints(&s, &receding, &policy, 0.0, 2.0).unwrap();
        assert_eq!((h, v), (0.0, 1.0));
        assert!(follow_setpoints(&s, &still(0.0, 10.0), &policy, 5.0, 2.0).is_err());
    }

    #[test]
    fn in_frame_examples() {
        let fov = deg_to_rad(60.0);
        assert!(in_frame(0.3, (0.0, 0.0), (libm::sin(0.3), libm::cos(0.3)), 0.01).unwrap());
        assert!(!in_frame(0.0, (0.0, 0.0), (5.0, 0.0), fov).unwrap());
        let at = |deg: f64| {
            let a = deg_to_rad(deg);
            (100.0 * libm::sin(a), 100.0 * libm::cos(a))
        };
        assert!(in_frame(0.0, (0.0, 0.0), at(29.9), fov).unwrap());
        assert!(!in_frame(0.0, (0.0, 0.0), at(30.1), fov).unwrap());
        assert!(in_frame(0.0, (0.0, 0.0), at(-29.9), fov).unwrap());
        assert!(!in_frame(0.0, (0.0, 0.0), at(-30.1), fov).unwrap());
        assert_eq!(
            in_frame(0.0, (1.0, 1.0), (1.0, 1.0), fov),
            Err(GuidanceError::CoincidentPositions)
        );
    }

    #[test]
    fn manual_is_passthrough() {
        let s = VesselState::default();
        let mut ap = Autopilot::new(GuidanceConfig::default(), Mode::Manual, &s);
        let cmd = ManualCommand {
            throttle: 0.3,
            steering: -0.1,
        };
        let out = ap.step(cmd, &s, false, 0.02);
        assert_eq!((out.throttle, out.steering), (0.3, -0.1));
        assert_eq!(out.mode, Mode::Manual);
    }

    #[test]
    fn follow_with_stale_track_holds() {
        let s = VesselState {
            t_s: 10.0,
            ..VesselState::default()
        };
        let mut ap = Autopilot::new(GuidanceConfig::default(), Mode::Follow, &s);
        ap.set_track(TargetTrack {
            x_m: 0.0,
            y_m: 30.0,
            vx_mps: 0.0,
            vy_mps: 0.0,
            t_s: 5.0,
        });
        let out = ap.step(ManualCommand::default(), &s, false, 0.02);
        assert_eq!(out.mode, Mode::Hold);
        assert_eq!(ap.transitions()[0].reason, TransitionReason::LossOfTrack);

        let mut no_track = Autopilot::new(GuidanceConfig::default(), Mode::Follow, &s);
        assert_eq!(no_track.step(ManualCommand::default(), &s, false, 0.02).mode, Mode::Hold);
    }

    #[test]
    fn failsafe_forces_hold_and_blocks_requests() {
        let s = VesselState::default();
        let mut ap = Autopilot::new(GuidanceConfig::default(), Mode::Manual, &s);
        let out = ap.step(ManualCommand::default(), &s, true, 0.02);
        assert_eq!(out.mode, Mode::Hold);
        assert_eq!(ap.transitions()[0].reason, TransitionReason::LinkFailsafe);
        assert_eq!(
            ap.request_mode(Mode::Manual, &s, true),
            Err(ModeRequestError::FailsafeActive)
        );
        assert!(ap.request_mode(Mode::Manual, &s, false).is_ok());
        assert_eq!(ap.mode(), Mode::Manual);
    }

    #[test]
    fn auto_requires_mission_and_completes_to_hold() {
        let s = VesselState::default();
        let mut ap = Autopilot::new(GuidanceConfig::default(), Mode::Hold, &s);
        assert_eq!(ap.request_mode(Mode::Auto, &s, false), Err(ModeRequestError::NoMission));
        ap.load_mission(Mission::new(vec![wp(0.0, 1.0)]).unwrap(), &s);
        ap.request_mode(Mode::Auto, &s, false).unwrap();
        let out = ap.step(ManualCommand::default(), &s, false, 0.02);
        assert_eq!(out.mode, Mode::Hold);
        assert_eq!(ap.transitions().last().unwrap().reason, TransitionReason::MissionComplete);
    }

    #[test]
    fn every_mode_pair_is_a_defined_transition() {
        let s = VesselState::default();
        for from in Mode::ALL {
            for to in Mode::ALL {
                let mut ap = Autopilot::new(GuidanceConfig::default(), from, &s);
                ap.load_mission(Mission::new(vec![wp(0.0, 50.0)]).unwrap(), &s);
                ap.request_mode(to, &s, false).unwrap();
                assert_eq!(ap.mode(), to);
                assert_eq!(ap.transitions().len(), usize::from(from != to));
            }
        }
    }

    fn run_auto_leg(offset: f64, secs: f64) -> (f64, f64, f64) {
        let params = VesselParams::default();
        let mut env = Environment::new(EnvironmentModel::calm());
        let mut s = VesselState::at(offset, 0.0, 0.0);
        let mut ap = Autopilot::new(GuidanceConfig::default(), Mode::Hold, &s);
        let start = Waypoint::point(0.0, -1.0);
        let end = Waypoint::new(0.0, 1000.0, 1.5, 3.0);
        ap.load_mission(Mission::new(vec![end]).unwrap(), &s);
        ap.request_mode(Mode::Auto, &s, false).unwrap();
        // Pin the leg to the x = 0 line regardless of the start offset.
        ap.segment_origin = start.position();
        let xte0 = cross_track_error(&start, &end, s.position()).unwrap();
        let mut last_steer = 0.0;
        for _ in 0..(secs / 0.02) as usize {
            let out = ap.step(ManualCommand::default(), &s, false, 0.02);
            last_steer = out.steering;
            s = step(&s, mix_thrust(out.throttle, out.steering), &params, &mut env, 0.02).unwrap();
        }
        (xte0, cross_track_error(&start, &end, s.position()).unwrap(), last_steer)
    }

    #[test]
    fn auto_on_path_settles_with_small_steering() {
        let (_, xte, steer) = run_auto_leg(0.0, 30.0);
        assert!(xte.abs() < 0.05);
        assert!(steer.abs() < 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn auto_cross_track_converges(offset in -10.0f64..10.0) {
            prop_assume!(offset.abs() > 1e-3);
            let (xte0, xte60, _) = run_auto_leg(offset, 60.0);
            prop_assert!(xte60.abs() < xte0.abs());
        }
    }

    proptest! {
        #[test]
        fn advance_is_monotone(points in proptest::collection::vec((-60.0f64..60.0, -60.0f64..60.0), 1..50)) {
            let mut m = Mission::new(vec![wp(0.0, 0.0), wp(10.0, 0.0), wp(10.0, 10.0), wp(0.0, 10.0)]).unwrap();
            for p in points {
                let before = m.current_index;
                m = advance_mission(m, p);
                prop_assert!(m.current_index >= before);
                prop_assert!(m.current_index <= m.waypoints.len());
            }
        }

        #[test]
        fn in_frame_ignores_full_turns(h in -PI..PI, tx in -50.0f64..50.0, ty in -50.0f64..50.0, k in -3i32..3) {
            prop_assume!(tx.abs() + ty.abs() > 1e-6);
            let fov = deg_to_rad(60.0);
            let base = in_frame(h, (0.0, 0.0), (tx, ty), fov).unwrap();
            let off = wrap_angle(bearing(tx, ty) - h).abs();
            // Skip the measure-zero band where rounding of h + 2πk can flip the boundary test.
            prop_assume!((off - fov / 2.0).abs() > 1e-9);
            let turned = in_frame(h + core::f64::consts::TAU * f64::from(k), (0.0, 0.0), (tx, ty), fov).unwrap();
            prop_assert_eq!(base, turned);
        }

        #[test]
        fn follow_speed_stays_in_bounds(
            vx in -3.0f64..3.0, vy in -3.0f64..3.0,
            tx in -100.0f64..100.0, ty in -100.0f64..100.0,
            h in -PI..PI,
        ) {
            let policy = FollowPolicy::default();
            let s = VesselState::at(1.0, -2.0, h);
            let t = TargetTrack { x_m: tx, y_m: ty, vx_mps: vx, vy_mps: vy, t_s: 0.0 };
            let (_, v) = follow_setpoints(&s, &t, &policy, 0.5, 2.0).unwrap();
            prop_assert!((0.0..=policy.max_speed_mps).contains(&v));
        }
    }
}
