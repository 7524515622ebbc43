//! The fixed-step loop shared by headless runs and the live server.
//!
//! Per tick at `t = k·dt`: detector update from the target script, scripted
//! ground-station traffic, uplink delivery, failsafe check, autopilot step,
//! thrust mixing and motor lag, trace row, dynamics step, downlink reports.

use log::{debug, warn};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use waveshot_core::guidance::{in_frame, Autopilot, ManualCommand, Mission, Mode, TargetTrack};
use waveshot_core::telemetry::{
    failsafe_check, LinkModel, LinkQueue, Payload, ReportDiagnostics, StateReport, TelemetryMessage,
};
use waveshot_core::vessel::{self, mix_thrust, DynamicsError, Environment, ThrusterPair, VesselState};

use crate::scenario::{EventAction, Scenario};
use crate::trace::{MetricContext, TraceRecord};

/// Battery drain in percent per second: idle draw plus full-thrust draw.
const BATTERY_IDLE_PCT_PER_S: f64 = 0.002;
const BATTERY_THRUST_PCT_PER_S: f64 = 0.02;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("dynamics failed at t = {t_s:.3} s: {source}")]
    Dynamics { t_s: f64, source: DynamicsError },
}

/// Result of one tick.
#[derive(Debug, Clone)]
pub struct Tick {
    pub record: TraceRecord,
    /// Downlink messages that reached the ground station during the tick.
    pub to_gcs: Vec<TelemetryMessage>,
}

fn period_ticks(period_s: f64, dt_s: f64) -> u64 {
    ((period_s / dt_s).round() as u64).max(1)
}

pub struct Simulation {
    scenario: Scenario,
    state: VesselState,
    env: Environment,
    autopilot: Autopilot,
    thrusters: ThrusterPair,
    manual: ManualCommand,
    uplink: LinkQueue<TelemetryMessage>,
    downlink: LinkQueue<TelemetryMessage>,
    detector: ChaCha8Rng,
    tick: u64,
    next_event: usize,
    scripted_gcs: bool,
    scripted_heartbeat: bool,
    last_heartbeat_s: Option<f64>,
    uplink_seq: u64,
    downlink_seq: u64,
    battery_pct: f64,
}

impl Simulation {
    /// `scripted_gcs` enables the scenario's own heartbeat generator; the
    /// live server leaves heartbeats to connected clients.
    pub fn new(scenario: &Scenario, scripted_gcs: bool) -> Self {
        let state = scenario.initial_state;
        let mut autopilot = Autopilot::new(scenario.guidance, Mode::Manual, &state);
        if scenario.preload_mission && !scenario.mission.is_empty() {
            let mission = Mission::new(scenario.mission.clone()).expect("validated at load");
            autopilot.load_mission(mission, &state);
        }
        if scenario.initial_mode != Mode::Manual {
            if let Err(e) = autopilot.request_mode(scenario.initial_mode, &state, false) {
                warn!("initial mode {} refused: {e}", scenario.initial_mode.as_str());
            }
        }
        let downlink_model = LinkModel {
            seed: scenario.seed.wrapping_add(2),
            ..scenario.link
        };
        Self {
            state,
            env: Environment::new(scenario.environment),
            autopilot,
            thrusters: ThrusterPair::default(),
            manual: ManualCommand::default(),
            uplink: LinkQueue::new(scenario.link),
            downlink: LinkQueue::new(downlink_model),
            detector: ChaCha8Rng::seed_from_u64(scenario.seed.wrapping_add(3)),
            tick: 0,
            next_event: 0,
            scripted_gcs,
            scripted_heartbeat: scripted_gcs && scenario.heartbeat_period_s > 0.0,
            last_heartbeat_s: None,
            uplink_seq: 0,
            downlink_seq: 0,
            battery_pct: 100.0,
            scenario: scenario.clone(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &VesselState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.autopilot.mode()
    }

    pub fn autopilot(&self) -> &Autopilot {
        &self.autopilot
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.scenario.dt_s
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.scenario.tick_count()
    }

    /// Metric context for this run; the waypoint total follows the mission
    /// currently loaded, which may have been uploaded mid-run.
    pub fn metric_context(&self) -> MetricContext {
        let mut ctx = metric_context(&self.scenario);
        if let Some(m) = self.autopilot.mission() {
            ctx.waypoints_total = u32::try_from(m.waypoints.len()).unwrap_or(u32::MAX);
        }
        ctx
    }

    /// Queues a ground-station message on the uplink; it reaches the vessel
    /// after the link latency, or never if dropped.
    pub fn send_uplink(&mut self, payload: Payload) {
        self.uplink_seq += 1;
        let msg = TelemetryMessage::new(self.uplink_seq, payload);
        let now = self.time();
        let d = self.uplink.send(msg, self.scenario.gcs_position, self.state.position(), now);
        debug!("uplink at {now:.2}: {d:?}");
    }

    fn send_downlink(&mut self, payload: Payload, now_s: f64) {
        self.downlink_seq += 1;
        let msg = TelemetryMessage::new(self.downlink_seq, payload);
        self.downlink.send(msg, self.state.position(), self.scenario.gcs_position, now_s);
    }

    fn failsafe_active(&self, now_s: f64) -> bool {
        self.last_heartbeat_s
            .is_some_and(|last| failsafe_check(last, now_s, self.scenario.failsafe_timeout_s))
    }

    fn update_detector(&mut self, t: f64) {
        let Some(script) = &self.scenario.target else { return };
        if !self.tick.is_multiple_of(period_ticks(script.report_period_s, self.scenario.dt_s)) {
            return;
        }
        let (x, y) = script.position(t);
        let (vx, vy) = script.velocity(t);
        let sigma = script.noise_std_m;
        let (nx, ny) = if sigma > 0.0 {
            let a: f64 = StandardNormal.sample(&mut self.detector);
            let b: f64 = StandardNormal.sample(&mut self.detector);
            (sigma * a, sigma * b)
        } else {
            (0.0, 0.0)
        };
        self.autopilot.set_track(TargetTrack {
            x_m: x + nx,
            y_m: y + ny,
            vx_mps: vx,
            vy_mps: vy,
            t_s: t,
        });
    }

    fn run_script(&mut self, t: f64) {
        if self.scripted_heartbeat && self.tick.is_multiple_of(period_ticks(self.scenario.heartbeat_period_s, self.scenario.dt_s)) {
            self.send_uplink(Payload::heartbeat(t));
        }
        while let Some(ev) = self.scenario.events.get(self.next_event).copied() {
            if ev.t_s > t + 1e-9 {
                break;
            }
            self.next_event += 1;
            match ev.action {
                EventAction::SetMode(mode) => self.send_uplink(Payload::SetMode { mode }),
                EventAction::Manual { throttle, steering } => {
                    self.send_uplink(Payload::CommandManual { throttle, steering })
                }
                EventAction::Heartbeat(on) => {
                    self.scripted_heartbeat = on && self.scripted_gcs && self.scenario.heartbeat_period_s > 0.0;
                    if self.scripted_heartbeat {
                        self.send_uplink(Payload::heartbeat(t));
                    }
                }
                EventAction::UploadMission => self.send_uplink(Payload::MissionUpload {
                    waypoints: self.scenario.mission.clone(),
                }),
            }
        }
    }

    fn handle_uplink(&mut self, msg: TelemetryMessage, t: f64) {
        match msg.payload {
            Payload::Heartbeat { .. } => self.last_heartbeat_s = Some(t),
            Payload::CommandManual { throttle, steering } => {
                self.manual = ManualCommand {
                    throttle: throttle.clamp(-1.0, 1.0),
                    steering: steering.clamp(-1.0, 1.0),
                }
            }
            Payload::SetMode { mode } => {
                let failsafe = self.failsafe_active(t);
                if let Err(e) = self.autopilot.request_mode(mode, &self.state, failsafe) {
                    warn!("t = {t:.2}: set_mode {} refused: {e}", mode.as_str());
                }
            }
            Payload::MissionUpload { waypoints } => {
                let count = u32::try_from(waypoints.len()).unwrap_or(u32::MAX);
                let result = if waypoints.is_empty() {
                    Err("mission is empty".to_owned())
                } else {
                    Mission::new(waypoints).map_err(|e| e.to_string())
                };
                let ack = match result {
                    Ok(mission) => {
                        self.autopilot.load_mission(mission, &self.state);
                        Payload::MissionAck {
                            count,
                            ok: true,
                            reason: None,
                        }
                    }
                    Err(reason) => Payload::MissionAck {
                        count,
                        ok: false,
                        reason: Some(reason),
                    },
                };
                self.send_downlink(ack, t);
            }
            Payload::TargetReport(track) => self.autopilot.set_track(track),
            other => debug!("ignoring uplink {}", other.tag()),
        }
    }

    /// Advances one control tick.
    pub fn step(&mut self) -> Result<Tick, SimError> {
        let dt = self.scenario.dt_s;
        let t = self.time();
        self.state.t_s = t;

        self.update_detector(t);
        self.run_script(t);
        for msg in self.uplink.poll(t) {
            self.handle_uplink(msg, t);
        }

        let failsafe = self.failsafe_active(t);
        let out = self.autopilot.step(self.manual, &self.state, failsafe, dt);
        let cmd = mix_thrust(out.throttle, out.steering);
        self.thrusters = self.thrusters.lag_toward(cmd, self.scenario.vessel.motor_lag_s, dt);

        let target = self.scenario.target.as_ref().map(|s| s.position(t));
        let pos = self.state.position();
        let fov = self.scenario.guidance.follow.fov_rad;
        let d = out.diagnostics;
        let up = self.uplink.stats();
        let down = self.downlink.stats();
        let record = TraceRecord {
            t_s: t,
            x_m: self.state.x_m,
            y_m: self.state.y_m,
            heading_rad: self.state.heading_rad,
            surge_mps: self.state.surge_mps,
            yaw_rate_radps: self.state.yaw_rate_radps,
            thrust_left: self.thrusters.left,
            thrust_right: self.thrusters.right,
            throttle: out.throttle,
            steering: out.steering,
            mode: out.mode.as_str().to_owned(),
            failsafe,
            desired_heading_rad: d.desired_heading_rad,
            desired_speed_mps: d.desired_speed_mps,
            desired_rate_radps: d.desired_rate_radps,
            rate_target_radps: d.rate_target_radps,
            heading_err_rad: d.heading_err_rad,
            xte_m: d.xte_m,
            waypoints_reached: self
                .autopilot
                .mission()
                .map_or(0, |m| u32::try_from(m.current_index).unwrap_or(u32::MAX)),
            target_x_m: target.map(|p| p.0),
            target_y_m: target.map(|p| p.1),
            target_distance_m: target.map(|p| (p.0 - pos.0).hypot(p.1 - pos.1)),
            in_frame: target.and_then(|p| in_frame(self.state.heading_rad, pos, p, fov).ok()),
            uplink_sent: up.sent,
            uplink_delivered: up.delivered,
            uplink_dropped: up.dropped_range + up.dropped_loss,
            downlink_sent: down.sent,
            downlink_delivered: down.delivered,
        };

        let next = vessel::step(&self.state, self.thrusters, &self.scenario.vessel, &mut self.env, dt)
            .map_err(|source| SimError::Dynamics { t_s: t, source })?;
        let load = (self.thrusters.left.abs() + self.thrusters.right.abs()) / 2.0;
        self.battery_pct =
            (self.battery_pct - (BATTERY_IDLE_PCT_PER_S + BATTERY_THRUST_PCT_PER_S * load) * dt).max(0.0);
        self.tick += 1;
        self.state = next;
        let t_next = self.time();
        self.state.t_s = t_next;

        if (self.tick - 1).is_multiple_of(period_ticks(self.scenario.report_period_s, dt)) {
            let report = StateReport {
                t_s: t_next,
                x_m: self.state.x_m,
                y_m: self.state.y_m,
                heading_rad: self.state.heading_rad,
                surge_mps: self.state.surge_mps,
                yaw_rate_radps: self.state.yaw_rate_radps,
                mode: self.autopilot.mode(),
                battery_pct: self.battery_pct,
                diagnostics: ReportDiagnostics {
                    xte_m: d.xte_m.unwrap_or(0.0),
                    in_frame: d.in_frame.unwrap_or(false),
                },
            };
            self.send_downlink(Payload::StateReport(report), t_next);
        }
        let to_gcs = self.downlink.poll(t_next);
        Ok(Tick { record, to_gcs })
    }
}

pub fn metric_context(s: &Scenario) -> MetricContext {
    MetricContext {
        dt_s: s.dt_s,
        rat_max_radps: s.guidance.steering.rat_max_radps,
        acc_max_radps2: s.guidance.steering.acc_max_radps2,
        standoff_m: s.target.as_ref().map(|_| s.guidance.follow.standoff_m),
        waypoints_total: u32::try_from(s.mission.len()).unwrap_or(u32::MAX),
        thresholds: s.thresholds,
    }
}
