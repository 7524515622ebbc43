//! Vessel ↔ ground-station line protocol and the simulated radio link.

mod codec;
mod link;
mod message;

pub use codec::{decode, encode, format_fixed, DecodeError, EncodeError};
pub use link::{failsafe_check, DropReason, Delivery, Link, LinkModel, LinkQueue, LinkStats};
pub use message::{Payload, ReportDiagnostics, StateReport, TelemetryMessage, PROTO_VERSION};

/// Default heartbeat-loss timeout before the vessel falls back to Hold.
pub const FAILSAFE_TIMEOUT_S: f64 = 2.0;
