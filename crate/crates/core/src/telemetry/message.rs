use alloc::string::String;
use alloc::vec::Vec;

use crate::guidance::{Mode, TargetTrack, Waypoint};

/// Protocol revision carried by heartbeats.
pub const PROTO_VERSION: u32 = 1;

/// One framed message: a per-sender sequence number plus the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryMessage {
    pub seq: u64,
    pub payload: Payload,
}

impl TelemetryMessage {
    pub fn new(seq: u64, payload: Payload) -> Self {
        Self { seq, payload }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Heartbeat { t_s: f64, proto_version: u32 },
    StateReport(StateReport),
    CommandManual { throttle: f64, steering: f64 },
    SetMode { mode: Mode },
    MissionUpload { waypoints: Vec<Waypoint> },
    MissionAck { count: u32, ok: bool, reason: Option<String> },
    TargetReport(TargetTrack),
    /// Server → client: whether this connection holds command authority.
    Authority { granted: bool },
}

impl Payload {
    pub fn heartbeat(t_s: f64) -> Self {
        Payload::Heartbeat {
            t_s,
            proto_version: PROTO_VERSION,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Payload::Heartbeat { .. } => "heartbeat",
            Payload::StateReport(_) => "state_report",
            Payload::CommandManual { .. } => "command_manual",
            Payload::SetMode { .. } => "set_mode",
            Payload::MissionUpload { .. } => "mission_upload",
            Payload::MissionAck { .. } => "mission_ack",
            Payload::TargetReport(_) => "target_report",
            Payload::Authority { .. } => "authority",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportDiagnostics {
    pub xte_m: f64,
    pub in_frame: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateReport {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
    pub surge_mps: f64,
    pub yaw_rate_radps: f64,
    pub mode: Mode,
    /// Remaining charge, drained by elapsed time and thrust.
    pub battery_pct: f64,
    pub diagnostics: ReportDiagnostics,
}
