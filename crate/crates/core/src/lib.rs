//! Platform-independent core of the WaveShot software-in-the-loop stack.
//!
//! Everything here is `no_std` (with `alloc`) so the same control and
//! guidance code can be compiled for an embedded autopilot target:
//!
//! * [`vessel`]: planar twin-thruster hull dynamics and thrust mixing.
//! * [`steering`]: the PID primitive and the heading → rate → steering cascade.
//! * [`guidance`]: pure pursuit, target following and the mode state machine.
//! * [`telemetry`]: line protocol codec and the range-limited radio link model.
//! * [`depth`]: depth-map preprocessing, training losses, affine alignment and colorization.
//!
//! IO, configuration files, the scenario runner and the network server live in
//! the `waveshot-sim` crate.
#![no_std]

extern crate alloc;

pub mod angle;
pub mod depth;
pub mod guidance;
pub mod steering;
pub mod telemetry;
pub mod vessel;

pub use angle::wrap_angle;
