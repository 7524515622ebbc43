//! Line codec: one JSON object per `\n`-terminated line.
//!
//! Field order is fixed per message type and every real number is written
//! with exactly six fractional digits, so encoded lines are byte-stable.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde_json::{Map, Value};

use super::message::{Payload, ReportDiagnostics, StateReport, TelemetryMessage, PROTO_VERSION};
use crate::guidance::{Mode, TargetTrack, Waypoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("field `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("field `{0}` is out of range")]
    OutOfRange(&'static str),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("malformed line: {0}")]
    Syntax(String),
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{0}` has the wrong type")]
    InvalidField(&'static str),
    #[error("field `{0}` is out of range")]
    OutOfRange(&'static str),
}

/// Formats a finite number with six fractional digits.
pub fn format_fixed(v: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{v:.6}");
    s
}

struct Obj {
    buf: String,
    first: bool,
}

impl Obj {
    fn new() -> Self {
        Self {
            buf: String::from("{"),
            first: true,
        }
    }

    fn key(&mut self, k: &str) {
        if !self.first {
            self.buf.push(',');
        }
        self.first = false;
        self.buf.push('"');
        self.buf.push_str(k);
        self.buf.push_str("\":");
    }

    fn num(&mut self, k: &'static str, v: f64) -> Result<(), EncodeError> {
        if !v.is_finite() {
            return Err(EncodeError::NonFinite(k));
        }
        self.key(k);
        let _ = write!(self.buf, "{v:.6}");
        Ok(())
    }

    fn int(&mut self, k: &str, v: u64) {
        self.key(k);
        let _ = write!(self.buf, "{v}");
    }

    fn boolean(&mut self, k: &str, v: bool) {
        self.key(k);
        self.buf.push_str(if v { "true" } else { "false" });
    }

    fn string(&mut self, k: &str, v: &str) {
        self.key(k);
        // Serializing a str cannot fail.
        self.buf
            .push_str(&serde_json::to_string(v).unwrap_or_else(|_| "\"\"".to_owned()));
    }

    fn raw(&mut self, k: &str, v: &str) {
        self.key(k);
        self.buf.push_str(v);
    }

    fn finish(mut self) -> String {
        self.buf.push('}');
        self.buf
    }
}

fn unit(field: &'static str, v: f64) -> Result<(), EncodeError> {
    if !v.is_finite() {
        Err(EncodeError::NonFinite(field))
    } else if !(-1.0..=1.0).contains(&v) {
        Err(EncodeError::OutOfRange(field))
    } else {
        Ok(())
    }
}

fn encode_waypoint(w: &Waypoint) -> Result<String, EncodeError> {
    let mut o = Obj::new();
    o.num("x_m", w.x_m)?;
    o.num("y_m", w.y_m)?;
    o.num("speed_mps", w.speed_mps)?;
    o.num("accept_radius_m", w.accept_radius_m)?;
    Ok(o.finish())
}

/// Encodes a message as a single newline-terminated line.
pub fn encode(msg: &TelemetryMessage) -> Result<String, EncodeError> {
    let mut o = Obj::new();
    o.string("type", msg.payload.tag());
    o.int("seq", msg.seq);
    match &msg.payload {
        Payload::Heartbeat { t_s, proto_version } => {
            o.num("t_s", *t_s)?;
            // Omitted at the current revision; decoders default it.
            if *proto_version != PROTO_VERSION {
                o.int("proto_version", u64::from(*proto_version));
            }
        }
        Payload::StateReport(r) => {
            o.num("t_s", r.t_s)?;
            o.num("x_m", r.x_m)?;
            o.num("y_m", r.y_m)?;
            o.num("heading_rad", r.heading_rad)?;
            o.num("surge_mps", r.surge_mps)?;
            o.num("yaw_rate_radps", r.yaw_rate_radps)?;
            o.string("mode", r.mode.as_str());
            o.num("battery_pct", r.battery_pct)?;
            let mut d = Obj::new();
            d.num("xte_m", r.diagnostics.xte_m)?;
            d.boolean("in_frame", r.diagnostics.in_frame);
            o.raw("diagnostics", &d.finish());
        }
        Payload::CommandManual { throttle, steering } => {
            unit("throttle", *throttle)?;
            unit("steering", *steering)?;
            o.num("throttle", *throttle)?;
            o.num("steering", *steering)?;
        }
        Payload::SetMode { mode } => o.string("mode", mode.as_str()),
        Payload::MissionUpload { waypoints } => {
            let mut arr = String::from("[");
            for (i, w) in waypoints.iter().enumerate() {
                if i > 0 {
                    arr.push(',');
                }
                arr.push_str(&encode_waypoint(w)?);
            }
            arr.push(']');
            o.raw("waypoints", &arr);
        }
        Payload::MissionAck { count, ok, reason } => {
            o.int("count", u64::from(*count));
            o.boolean("ok", *ok);
            if let Some(r) = reason {
                o.string("reason", r);
            }
        }
        Payload::TargetReport(t) => {
            o.num("x_m", t.x_m)?;
            o.num("y_m", t.y_m)?;
            o.num("vx_mps", t.vx_mps)?;
            o.num("vy_mps", t.vy_mps)?;
            o.num("t_s", t.t_s)?;
        }
        Payload::Authority { granted } => o.boolean("granted", *granted),
    }
    let mut line = o.finish();
    line.push('\n');
    Ok(line)
}

fn field<'a>(obj: &'a Map<String, Value>, k: &'static str) -> Result<&'a Value, DecodeError> {
    obj.get(k).ok_or(DecodeError::MissingField(k))
}

fn num(obj: &Map<String, Value>, k: &'static str) -> Result<f64, DecodeError> {
    field(obj, k)?.as_f64().ok_or(DecodeError::InvalidField(k))
}

fn uint(obj: &Map<String, Value>, k: &'static str) -> Result<u64, DecodeError> {
    field(obj, k)?.as_u64().ok_or(DecodeError::InvalidField(k))
}

fn boolean(obj: &Map<String, Value>, k: &'static str) -> Result<bool, DecodeError> {
    field(obj, k)?.as_bool().ok_or(DecodeError::InvalidField(k))
}

fn object<'a>(v: &'a Value, k: &'static str) -> Result<&'a Map<String, Value>, DecodeError> {
    v.as_object().ok_or(DecodeError::InvalidField(k))
}

fn mode(obj: &Map<String, Value>) -> Result<Mode, DecodeError> {
    let s = field(obj, "mode")?
        .as_str()
        .ok_or(DecodeError::InvalidField("mode"))?;
    Mode::parse(s).ok_or(DecodeError::OutOfRange("mode"))
}

fn unit_range(obj: &Map<String, Value>, k: &'static str) -> Result<f64, DecodeError> {
    let v = num(obj, k)?;
    if (-1.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(DecodeError::OutOfRange(k))
    }
}

/// Parses one line (a trailing `\n` or `\r\n` is accepted). Unknown fields
/// are ignored.
pub fn decode(line: &[u8]) -> Result<TelemetryMessage, DecodeError> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    let value: Value =
        serde_json::from_slice(line).map_err(|e| DecodeError::Syntax(alloc::format!("{e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| DecodeError::Syntax("expected a JSON object".to_owned()))?;
    let tag = field(obj, "type")?
        .as_str()
        .ok_or(DecodeError::InvalidField("type"))?;
    let known = [
        "heartbeat",
        "state_report",
        "command_manual",
        "set_mode",
        "mission_upload",
        "mission_ack",
        "target_report",
        "authority",
    ];
    if !known.contains(&tag) {
        return Err(DecodeError::UnknownType(tag.to_owned()));
    }
    let seq = uint(obj, "seq")?;
    let payload = match tag {
        "heartbeat" => {
            let proto_version = match obj.get("proto_version") {
                None => PROTO_VERSION,
                Some(v) => v
                    .as_u64()
                    .and_then(|v| u32::try_from(v).ok())
                    .ok_or(DecodeError::InvalidField("proto_version"))?,
            };
            Payload::Heartbeat {
                t_s: num(obj, "t_s")?,
                proto_version,
            }
        }
        "state_report" => {
            let d = object(field(obj, "diagnostics")?, "diagnostics")?;
            Payload::StateReport(StateReport {
                t_s: num(obj, "t_s")?,
                x_m: num(obj, "x_m")?,
                y_m: num(obj, "y_m")?,
                heading_rad: num(obj, "heading_rad")?,
                surge_mps: num(obj, "surge_mps")?,
                yaw_rate_radps: num(obj, "yaw_rate_radps")?,
                mode: mode(obj)?,
                battery_pct: num(obj, "battery_pct")?,
                diagnostics: ReportDiagnostics {
                    xte_m: num(d, "xte_m")?,
                    in_frame: boolean(d, "in_frame")?,
                },
            })
        }
        "command_manual" => Payload::CommandManual {
            throttle: unit_range(obj, "throttle")?,
            steering: unit_range(obj, "steering")?,
        },
        "set_mode" => Payload::SetMode { mode: mode(obj)? },
        "mission_upload" => {
            let arr = field(obj, "waypoints")?
                .as_array()
                .ok_or(DecodeError::InvalidField("waypoints"))?;
            let waypoints = arr
                .iter()
                .map(|w| {
                    let w = object(w, "waypoints")?;
                    Ok(Waypoint {
                        x_m: num(w, "x_m")?,
                        y_m: num(w, "y_m")?,
                        speed_mps: num(w, "speed_mps")?,
                        accept_radius_m: num(w, "accept_radius_m")?,
                    })
                })
                .collect::<Result<Vec<_>, DecodeError>>()?;
            Payload::MissionUpload { waypoints }
        }
        "mission_ack" => Payload::MissionAck {
            count: u32::try_from(uint(obj, "count")?).map_err(|_| DecodeError::OutOfRange("count"))?,
            ok: boolean(obj, "ok")?,
            reason: match obj.get("reason") {
                None => None,
                Some(v) => Some(v.as_str().ok_or(DecodeError::InvalidField("reason"))?.to_owned()),
            },
        },
        "target_report" => Payload::TargetReport(TargetTrack {
            x_m: num(obj, "x_m")?,
            y_m: num(obj, "y_m")?,
            vx_mps: num(obj, "vx_mps")?,
            vy_mps: num(obj, "vy_mps")?,
            t_s: num(obj, "t_s")?,
        }),
        "authority" => Payload::Authority {
            granted: boolean(obj, "granted")?,
        },
        _ => unreachable!("tag checked against the known list"),
    };
    Ok(TelemetryMessage { seq, payload })
}
