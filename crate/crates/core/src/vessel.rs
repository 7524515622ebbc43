//! Planar hull dynamics for a twin-thruster differential-drive surface vessel.
//!
//! The model keeps three degrees of freedom: east/north position, compass
//! heading, body surge speed and yaw rate. Sway is neglected. Heading is a
//! compass angle, increasing clockwise from north, so a positive yaw moment
//! turns the bow to starboard.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::angle::wrap_angle;

/// Largest integration step the simulator accepts.
pub const MAX_DT_S: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("time step {0} s outside (0, {MAX_DT_S}]")]
    InvalidTimeStep(f64),
    #[error("vessel parameter `{0}` is invalid")]
    InvalidParam(&'static str),
    #[error("environment parameter `{0}` is invalid")]
    InvalidEnvironment(&'static str),
    #[error("integration produced a non-finite state")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VesselState {
    /// East position, meters.
    pub x_m: f64,
    /// North position, meters.
    pub y_m: f64,
    /// Compass heading in `[-π, π)`, clockwise from north.
    pub heading_rad: f64,
    pub surge_mps: f64,
    pub yaw_rate_radps: f64,
    pub t_s: f64,
}

impl VesselState {
    pub fn at(x_m: f64, y_m: f64, heading_rad: f64) -> Self {
        Self {
            x_m,
            y_m,
            heading_rad: wrap_angle(heading_rad),
            ..Self::default()
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x_m, self.y_m)
    }

    pub fn is_finite(&self) -> bool {
        self.x_m.is_finite()
            && self.y_m.is_finite()
            && self.heading_rad.is_finite()
            && self.surge_mps.is_finite()
            && self.yaw_rate_radps.is_finite()
            && self.t_s.is_finite()
    }
}

/// Normalized per-thruster commands, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThrusterPair {
    pub left: f64,
    pub right: f64,
}

impl ThrusterPair {
    pub fn new(left: f64, right: f64) -> Self {
        Self {
            left: clamp_unit(left),
            right: clamp_unit(right),
        }
    }

    /// First-order actuator response toward `cmd` with time constant `tau_s`.
    /// A non-positive time constant is an instantaneous response.
    pub fn lag_toward(self, cmd: ThrusterPair, tau_s: f64, dt_s: f64) -> ThrusterPair {
        if tau_s <= 0.0 {
            return cmd;
        }
        let k = (dt_s / (tau_s + dt_s)).clamp(0.0, 1.0);
        ThrusterPair::new(
            self.left + k * (cmd.left - self.left),
            self.right + k * (cmd.right - self.right),
        )
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

/// Differential mixing of a throttle/steering pair into thruster commands.
///
/// Positive steering turns the boat to starboard: it speeds up the left
/// thruster and slows the right one. Inputs are clamped to `[-1, 1]` before
/// mixing and each output is clamped again afterwards.
pub fn mix_thrust(throttle: f64, steering: f64) -> ThrusterPair {
    let throttle = clamp_unit(throttle);
    let steering = clamp_unit(steering);
    ThrusterPair::new(throttle + steering, throttle - steering)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VesselParams {
    pub mass_kg: f64,
    pub yaw_inertia_kgm2: f64,
    /// Force produced by one thruster at command 1.0.
    pub max_thrust_n: f64,
    /// Lateral distance of each thruster from the centerline.
    pub thruster_offset_m: f64,
    pub drag_lin_surge: f64,
    pub drag_quad_surge: f64,
    pub drag_lin_yaw: f64,
    pub drag_quad_yaw: f64,
    /// First-order thruster lag; 0 disables it.
    pub motor_lag_s: f64,
}

impl Default for VesselParams {
    fn default() -> Self {
        Self {
            mass_kg: 6.0,
            yaw_inertia_kgm2: 0.5,
            max_thrust_n: 25.0,
            thruster_offset_m: 0.25,
            drag_lin_surge: 0.5,
            drag_quad_surge: 3.0,
            drag_lin_yaw: 1.0,
            drag_quad_yaw: 0.5,
            motor_lag_s: 0.0,
        }
    }
}

impl VesselParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("mass_kg", self.mass_kg),
            ("yaw_inertia_kgm2", self.yaw_inertia_kgm2),
            ("max_thrust_n", self.max_thrust_n),
            ("thruster_offset_m", self.thruster_offset_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(DynamicsError::InvalidParam(name));
            }
        }
        let non_negative = [
            ("drag_lin_surge", self.drag_lin_surge),
            ("drag_quad_surge", self.drag_quad_surge),
            ("drag_lin_yaw", self.drag_lin_yaw),
            ("drag_quad_yaw", self.drag_quad_yaw),
            ("motor_lag_s", self.motor_lag_s),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DynamicsError::InvalidParam(name));
            }
        }
        // Unbounded speed otherwise.
        if self.drag_lin_surge + self.drag_quad_surge <= 0.0 {
            return Err(DynamicsError::InvalidParam("drag_quad_surge"));
        }
        if self.drag_lin_yaw + self.drag_quad_yaw <= 0.0 {
            return Err(DynamicsError::InvalidParam("drag_quad_yaw"));
        }
        Ok(())
    }

    /// Steady surge speed at a symmetric command, where thrust balances drag.
    pub fn terminal_speed_mps(&self, cmd: f64) -> f64 {
        let force = 2.0 * self.max_thrust_n * cmd.abs().min(1.0);
        let (a, b) = (self.drag_quad_surge, self.drag_lin_surge);
        let v = if a > 0.0 {
            (-b + libm::sqrt(b * b + 4.0 * a * force)) / (2.0 * a)
        } else {
            force / b
        };
        if cmd < 0.0 {
            -v
        } else {
            v
        }
    }

    /// Cap used for sanity checks: terminal speed at full command.
    pub fn max_speed_mps(&self) -> f64 {
        self.terminal_speed_mps(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvironmentModel {
    /// Ambient water current, (east, north) in m/s.
    pub current_mps: (f64, f64),
    /// Std. dev. of the random yaw moment, N·m.
    pub yaw_disturbance_std: f64,
    /// Std. dev. of the random surge force, N.
    pub surge_disturbance_std: f64,
    pub seed: u64,
}

impl EnvironmentModel {
    pub fn calm() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.current_mps.0.is_finite() && self.current_mps.1.is_finite()) {
            return Err(DynamicsError::InvalidEnvironment("current_mps"));
        }
        if !(self.yaw_disturbance_std.is_finite() && self.yaw_disturbance_std >= 0.0) {
            return Err(DynamicsError::InvalidEnvironment("yaw_disturbance_std"));
        }
        if !(self.surge_disturbance_std.is_finite() && self.surge_disturbance_std >= 0.0) {
            return Err(DynamicsError::InvalidEnvironment("surge_disturbance_std"));
        }
        Ok(())
    }
}

/// One draw of the environmental disturbance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    pub surge_force_n: f64,
    pub yaw_moment_nm: f64,
}

/// Seeded disturbance generator.
///
/// Each step draws a zero-mean Gaussian force and moment whose standard
/// deviation is scaled by `1/√dt`, so the accumulated impulse has a variance
/// proportional to elapsed time independent of the step size.
#[derive(Debug, Clone)]
pub struct Environment {
    model: EnvironmentModel,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(model: EnvironmentModel) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            model,
        }
    }

    pub fn model(&self) -> &EnvironmentModel {
        &self.model
    }

    pub fn sample(&mut self, dt_s: f64) -> Disturbance {
        // Both draws happen every step so the stream stays aligned whatever the std values are.
        let n_surge: f64 = StandardNormal.sample(&mut self.rng);
        let n_yaw: f64 = StandardNormal.sample(&mut self.rng);
        let scale = 1.0 / libm::sqrt(dt_s);
        Disturbance {
            surge_force_n: self.model.surge_disturbance_std * n_surge * scale,
            yaw_moment_nm: self.model.yaw_disturbance_std * n_yaw * scale,
        }
    }
}

/// Surge force (N) and yaw moment (N·m) acting on the hull.
pub fn forces_and_moments(
    state: &VesselState,
    thr: ThrusterPair,
    params: &VesselParams,
    dist: Disturbance,
) -> (f64, f64) {
    let v = state.surge_mps;
    let r = state.yaw_rate_radps;
    let surge = (thr.left + thr.right) * params.max_thrust_n
        - params.drag_lin_surge * v
        - params.drag_quad_surge * v * v.abs()
        + dist.surge_force_n;
    let yaw = (thr.left - thr.right) * params.max_thrust_n * params.thruster_offset_m
        - params.drag_lin_yaw * r
        - params.drag_quad_yaw * r * r.abs()
        + dist.yaw_moment_nm;
    (surge, yaw)
}

/// Advances the vessel by one semi-implicit Euler step using an explicit
/// disturbance draw and ambient current.
pub fn step_with(
    state: &VesselState,
    thr: ThrusterPair,
    params: &VesselParams,
    current_mps: (f64, f64),
    dist: Disturbance,
    dt_s: f64,
) -> Result<VesselState, DynamicsError> {
    if !(dt_s > 0.0 && dt_s <= MAX_DT_S) {
        return Err(DynamicsError::InvalidTimeStep(dt_s));
    }
    let (fx, mz) = forces_and_moments(state, thr, params, dist);
    let surge = state.surge_mps + fx / params.mass_kg * dt_s;
    let yaw_rate = state.yaw_rate_radps + mz / params.yaw_inertia_kgm2 * dt_s;
    let heading = wrap_angle(state.heading_rad + yaw_rate * dt_s);
    let (s, c) = libm::sincos(heading);
    let next = VesselState {
        x_m: state.x_m + (surge * s + current_mps.0) * dt_s,
        y_m: state.y_m + (surge * c + current_mps.1) * dt_s,
        heading_rad: heading,
        surge_mps: surge,
        yaw_rate_radps: yaw_rate,
        t_s: state.t_s + dt_s,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::NonFinite)
    }
}

/// Advances the vessel one step, drawing the disturbance from `env`.
pub fn step(
    state: &VesselState,
    thr: ThrusterPair,
    params: &VesselParams,
    env: &mut Environment,
    dt_s: f64,
) -> Result<VesselState, DynamicsError> {
    if !(dt_s > 0.0 && dt_s <= MAX_DT_S) {
        return Err(DynamicsError::InvalidTimeStep(dt_s));
    }
    let dist = env.sample(dt_s);
    step_with(state, thr, params, env.model.current_mps, dist, dt_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    const DT: f64 = 0.02;

    #[test]
    fn mix_examples() {
        assert_eq!(mix_thrust(1.0, 0.0), ThrusterPair { left: 1.0, right: 1.0 });
        assert_eq!(mix_thrust(0.0, 0.0), ThrusterPair { left: 0.0, right: 0.0 });
        let t = mix_thrust(0.5, -0.3);
        assert!((t.left - 0.2).abs() < 1e-15);
        assert!((t.right - 0.8).abs() < 1e-15);
        assert!(t.right > t.left);
    }

    #[test]
    fn mix_clamps_inputs_and_outputs() {
        assert_eq!(mix_thrust(3.0, 0.0), ThrusterPair { left: 1.0, right: 1.0 });
        assert_eq!(mix_thrust(1.0, 1.0), ThrusterPair { left: 1.0, right: 0.0 });
        assert_eq!(mix_thrust(-1.0, 5.0), ThrusterPair { left: 0.0, right: -1.0 });
    }

    #[test]
    fn force_examples() {
        let p = VesselParams {
            max_thrust_n: 10.0,
            thruster_offset_m: 0.2,
            ..VesselParams::default()
        };
        let s = VesselState::default();
        let zero = Disturbance::default();
        let (_, yaw) = forces_and_moments(&s, ThrusterPair::new(0.7, 0.7), &p, zero);
        assert_eq!(yaw, 0.0);
        assert_eq!(forces_and_moments(&s, ThrusterPair::default(), &p, zero), (0.0, 0.0));
        let (surge, yaw) = forces_and_moments(&s, ThrusterPair::new(1.0, 0.0), &p, zero);
        assert!((yaw - 2.0).abs() < 1e-12);
        assert!((surge - 10.0).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_bad_dt() {
        let mut env = Environment::new(EnvironmentModel::calm());
        let p = VesselParams::default();
        let s = VesselState::default();
        for dt in [0.0, -0.01, 0.2, f64::NAN] {
            assert!(matches!(
                step(&s, ThrusterPair::default(), &p, &mut env, dt),
                Err(DynamicsError::InvalidTimeStep(_))
            ));
        }
    }

    #[test]
    fn zero_input_only_advances_time() {
        let mut env = Environment::new(EnvironmentModel::calm());
        let p = VesselParams::default();
        let s = VesselState::at(3.0, -2.0, 1.0);
        let n = step(&s, ThrusterPair::default(), &p, &mut env, 0.05).unwrap();
        assert_eq!(n, VesselState { t_s: 0.05, ..s });
    }

    #[test]
    fn terminal_speed_matches_closed_form() {
        let p = VesselParams {
            drag_lin_surge: 0.0,
            ..VesselParams::default()
        };
        let cmd = 0.6;
        let expected = libm::sqrt(2.0 * p.max_thrust_n * cmd / p.drag_quad_surge);
        let mut env = Environment::new(EnvironmentModel::calm());
        let mut s = VesselState::default();
        let mut prev = 0.0;
        for _ in 0..(120.0 / DT) as usize {
            s = step(&s, mix_thrust(cmd, 0.0), &p, &mut env, DT).unwrap();
            assert!(s.surge_mps >= prev, "surge must rise monotonically");
            assert_eq!(s.yaw_rate_radps, 0.0);
            prev = s.surge_mps;
        }
        assert!((s.surge_mps - expected).abs() < 1e-9, "{} vs {expected}", s.surge_mps);
        assert!((p.terminal_speed_mps(cmd) - expected).abs() < 1e-12);
    }

    #[test]
    fn default_terminal_speed_is_about_4() {
        let v = VesselParams::default().max_speed_mps();
        assert!((3.9..4.1).contains(&v), "{v}");
    }

    #[test]
    fn positive_steering_turns_right_negative_left() {
        let p = VesselParams::default();
        for (steer, sign) in [(0.3, 1.0), (-0.3, -1.0)] {
            let mut env = Environment::new(EnvironmentModel::calm());
            let mut s = VesselState::default();
            for _ in 0..50 {
                s = step(&s, mix_thrust(0.5, steer), &p, &mut env, DT).unwrap();
            }
            assert!(s.heading_rad * sign > 0.0);
            assert!(s.x_m * sign > 0.0);
        }
    }

    #[test]
    fn mirrored_steering_gives_mirrored_trajectories() {
        let p = VesselParams::default();
        let h0 = 0.4;
        let mut a = VesselState::at(1.0, 2.0, h0);
        let mut b = a;
        let mut env_a = Environment::new(EnvironmentModel::calm());
        let mut env_b = Environment::new(EnvironmentModel::calm());
        let (ux, uy) = (libm::sin(h0), libm::cos(h0));
        for i in 0..500 {
            let steer = 0.4 * libm::sin(i as f64 * 0.01);
            a = step(&a, mix_thrust(0.7, steer), &p, &mut env_a, DT).unwrap();
            b = step(&b, mix_thrust(0.7, -steer), &p, &mut env_b, DT).unwrap();
            // Decompose the displacement along and across the initial heading axis.
            let (dax, day) = (a.x_m - 1.0, a.y_m - 2.0);
            let (dbx, dby) = (b.x_m - 1.0, b.y_m - 2.0);
            let along_a = dax * ux + day * uy;
            let along_b = dbx * ux + dby * uy;
            let cross_a = dax * uy - day * ux;
            let cross_b = dbx * uy - dby * ux;
            assert!((along_a - along_b).abs() < 1e-9);
            assert!((cross_a + cross_b).abs() < 1e-9);
            assert!((wrap_angle(a.heading_rad - h0) + wrap_angle(b.heading_rad - h0)).abs() < 1e-9);
            assert!((a.yaw_rate_radps + b.yaw_rate_radps).abs() < 1e-12);
        }
    }

    #[test]
    fn disturbance_stream_is_deterministic() {
        let model = EnvironmentModel {
            current_mps: (0.1, -0.05),
            yaw_disturbance_std: 0.3,
            surge_disturbance_std: 1.0,
            seed: 7,
        };
        let run = || {
            let mut env = Environment::new(model);
            let mut s = VesselState::default();
            let mut out = Vec::new();
            for _ in 0..300 {
                s = step(&s, mix_thrust(0.5, 0.1), &VesselParams::default(), &mut env, DT).unwrap();
                out.push(s);
            }
            out
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.x_m.to_bits(), y.x_m.to_bits());
        }
        let mut other = Environment::new(EnvironmentModel { seed: 8, ..model });
        let mut same = Environment::new(model);
        assert_ne!(other.sample(DT), same.sample(DT));
    }

    #[test]
    fn lag_hook_converges() {
        let mut t = ThrusterPair::default();
        let target = ThrusterPair::new(1.0, -1.0);
        assert_eq!(t.lag_toward(target, 0.0, DT), target);
        for _ in 0..1000 {
            t = t.lag_toward(target, 0.2, DT);
        }
        assert!((t.left - 1.0).abs() < 1e-9 && (t.right + 1.0).abs() < 1e-9);
    }

    #[test]
    fn param_validation() {
        assert!(VesselParams::default().validate().is_ok());
        let bad = VesselParams {
            mass_kg: 0.0,
            ..VesselParams::default()
        };
        assert_eq!(bad.validate(), Err(DynamicsError::InvalidParam("mass_kg")));
        let no_drag = VesselParams {
            drag_lin_surge: 0.0,
            drag_quad_surge: 0.0,
            ..VesselParams::default()
        };
        assert!(no_drag.validate().is_err());
        let env = EnvironmentModel {
            yaw_disturbance_std: -1.0,
            ..EnvironmentModel::default()
        };
        assert!(env.validate().is_err());
    }

    proptest! {
        #[test]
        fn mix_symmetry(t in -2.0f64..2.0, s in -2.0f64..2.0) {
            prop_assert_eq!(mix_thrust(t, s).left, mix_thrust(t, -s).right);
            let m = mix_thrust(t, s);
            prop_assert!((-1.0..=1.0).contains(&m.left) && (-1.0..=1.0).contains(&m.right));
        }

        #[test]
        fn coasting_dissipates(v in -3.0f64..3.0, r in -2.0f64..2.0, h in -3.0f64..3.0) {
            let p = VesselParams::default();
            let mut s = VesselState { surge_mps: v, yaw_rate_radps: r, ..VesselState::at(0.0, 0.0, h) };
            for _ in 0..200 {
                let n = step_with(&s, ThrusterPair::default(), &p, (0.0, 0.0), Disturbance::default(), DT).unwrap();
                prop_assert!(n.surge_mps.abs() <= s.surge_mps.abs());
                prop_assert!(n.yaw_rate_radps.abs() <= s.yaw_rate_radps.abs());
                prop_assert!((-core::f64::consts::PI..core::f64::consts::PI).contains(&n.heading_rad));
                s = n;
            }
        }

        #[test]
        fn calm_water_never_exceeds_terminal_speed(
            cmds in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40)
        ) {
            let p = VesselParams::default();
            let cap = p.max_speed_mps() * 1.01;
            let mut env = Environment::new(EnvironmentModel::calm());
            let mut s = VesselState::default();
            for (t, st) in cmds {
                for _ in 0..50 {
                    s = step(&s, mix_thrust(t, st), &p, &mut env, DT).unwrap();
                    prop_assert!(s.surge_mps.abs() <= cap);
                    prop_assert!(s.is_finite());
                }
            }
        }
    }
}
