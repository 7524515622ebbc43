//! PID primitive and the cascaded heading controller.
//!
//! The cascade mirrors the ArduPilot rover steering parameters:
//!
//! ```text
//! heading error ──ATC_STR_ANG_P──▶ desired rate ──clamp RAT_MAX──▶ slew ACC_MAX
//!        ──▶ rate error ──PID(RAT_P, RAT_I, RAT_D)──▶ steering ∈ [-1, 1]
//! ```

use crate::angle::{deg_to_rad, wrap_angle};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn is_valid(&self) -> bool {
        [self.kp, self.ki, self.kd]
            .iter()
            .all(|g| g.is_finite() && *g >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    /// Accumulated ∫e dτ, kept within the anti-windup bound.
    pub integral: f64,
    pub prev_error: f64,
    /// False until the first update; suppresses the derivative kick.
    pub initialized: bool,
}

/// One discrete PID update.
///
/// `output = kp·e + ki·I' + kd·(e − e_prev)/dt` with
/// `I' = clamp(I + e·dt, ±integ_limit)`. The derivative term is zero on the
/// first call.
pub fn pid_step(
    gains: &PidGains,
    state: &PidState,
    error: f64,
    dt_s: f64,
    integ_limit: f64,
) -> (f64, PidState) {
    let limit = integ_limit.abs();
    let integral = (state.integral + error * dt_s).clamp(-limit, limit);
    let derivative = if state.initialized {
        (error - state.prev_error) / dt_s
    } else {
        0.0
    };
    let output = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    (
        output,
        PidState {
            integral,
            prev_error: error,
            initialized: true,
        },
    )
}

/// PID update with conditional integration: if the output would saturate
/// the actuator range `[-1, 1]`, the integral is held at its previous value.
fn saturating_pid(
    gains: &PidGains,
    state: &PidState,
    error: f64,
    dt_s: f64,
    integ_limit: f64,
) -> (f64, PidState) {
    let (raw, next) = pid_step(gains, state, error, dt_s, integ_limit);
    if raw.abs() <= 1.0 {
        return (raw, next);
    }
    let limit = integ_limit.abs();
    let held = state.integral.clamp(-limit, limit);
    let derivative = if state.initialized {
        (error - state.prev_error) / dt_s
    } else {
        0.0
    };
    let frozen = gains.kp * error + gains.ki * held + gains.kd * derivative;
    (
        frozen.clamp(-1.0, 1.0),
        PidState {
            integral: held,
            ..next
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ControlConfigError {
    #[error("controller parameter `{0}` is invalid")]
    Invalid(&'static str),
}

/// Steering cascade parameters, stored in SI units (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringConfig {
    /// ATC_STR_ANG_P: heading error (rad) to desired rate (rad/s).
    pub ang_p: f64,
    /// ATC_STR_RAT_P / RAT_I / RAT_D.
    pub rat_gains: PidGains,
    /// ATC_STR_RAT_MAX in rad/s.
    pub rat_max_radps: f64,
    /// ATC_STR_ACC_MAX in rad/s².
    pub acc_max_radps2: f64,
    /// Bound on the rate-loop integral.
    pub integ_limit: f64,
}

impl Default for SteeringConfig {
    fn default() -> Self {
        Self {
            ang_p: 1.0,
            rat_gains: PidGains::new(0.2, 0.2, 0.02),
            rat_max_radps: deg_to_rad(30.0),
            acc_max_radps2: deg_to_rad(120.0),
            integ_limit: 0.3,
        }
    }
}

impl SteeringConfig {
    pub fn validate(&self) -> Result<(), ControlConfigError> {
        if !(self.ang_p.is_finite() && self.ang_p > 0.0) {
            return Err(ControlConfigError::Invalid("ang_p"));
        }
        if !self.rat_gains.is_valid() {
            return Err(ControlConfigError::Invalid("rat_gains"));
        }
        if !(self.rat_max_radps.is_finite() && self.rat_max_radps > 0.0) {
            return Err(ControlConfigError::Invalid("rat_max"));
        }
        if !(self.acc_max_radps2.is_finite() && self.acc_max_radps2 > 0.0) {
            return Err(ControlConfigError::Invalid("acc_max"));
        }
        if !(self.integ_limit.is_finite() && self.integ_limit >= 0.0) {
            return Err(ControlConfigError::Invalid("integ_limit"));
        }
        Ok(())
    }
}

/// Proportional heading loop: `clamp(ang_p · err, ±rat_max)`.
pub fn heading_to_rate(heading_err: f64, cfg: &SteeringConfig) -> f64 {
    (cfg.ang_p * heading_err).clamp(-cfg.rat_max_radps, cfg.rat_max_radps)
}

/// Moves `prev_target` toward `desired_rate` by at most `acc_max · dt`.
pub fn slew_limit(desired_rate: f64, prev_target: f64, acc_max_radps2: f64, dt_s: f64) -> f64 {
    let max_delta = acc_max_radps2 * dt_s;
    prev_target + (desired_rate - prev_target).clamp(-max_delta, max_delta)
}

/// Rate loop: PID on `target − measured`, clamped to `[-1, 1]`.
pub fn rate_to_steering(
    target_rate: f64,
    measured_rate: f64,
    cfg: &SteeringConfig,
    pid: &PidState,
    dt_s: f64,
) -> (f64, PidState) {
    saturating_pid(
        &cfg.rat_gains,
        pid,
        target_rate - measured_rate,
        dt_s,
        cfg.integ_limit,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedConfig {
    pub gains: PidGains,
    pub integ_limit: f64,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        Self {
            gains: PidGains::new(1.0, 0.3, 0.0),
            integ_limit: 4.0,
        }
    }
}

impl SpeedConfig {
    pub fn validate(&self) -> Result<(), ControlConfigError> {
        if !self.gains.is_valid() {
            return Err(ControlConfigError::Invalid("speed gains"));
        }
        if !(self.integ_limit.is_finite() && self.integ_limit >= 0.0) {
            return Err(ControlConfigError::Invalid("speed integ_limit"));
        }
        Ok(())
    }
}

/// Speed loop: PI(D) on surge speed error, clamped to `[-1, 1]`.
pub fn speed_to_throttle(
    target_speed: f64,
    measured_speed: f64,
    cfg: &SpeedConfig,
    pid: &PidState,
    dt_s: f64,
) -> (f64, PidState) {
    saturating_pid(
        &cfg.gains,
        pid,
        target_speed - measured_speed,
        dt_s,
        cfg.integ_limit,
    )
}

/// Per-tick outputs of the heading cascade, kept for tracing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CascadeOutput {
    pub steering: f64,
    pub heading_err_rad: f64,
    /// Angle-loop output after the RAT_MAX clamp, before slewing.
    pub desired_rate_radps: f64,
    /// Rate actually commanded to the inner loop after slewing.
    pub rate_target_radps: f64,
}

/// Stateful heading cascade: angle P, rate limit, slew limit, rate PID.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringController {
    pub cfg: SteeringConfig,
    pub rate_pid: PidState,
    /// Last slewed rate target.
    pub rate_target: f64,
}

impl SteeringController {
    pub fn new(cfg: SteeringConfig) -> Self {
        Self {
            cfg,
            rate_pid: PidState::default(),
            rate_target: 0.0,
        }
    }

    pub fn update(
        &mut self,
        heading_target: f64,
        heading: f64,
        yaw_rate: f64,
        dt_s: f64,
    ) -> CascadeOutput {
        let heading_err = wrap_angle(heading_target - heading);
        let desired = heading_to_rate(heading_err, &self.cfg);
        self.update_rate(desired, heading_err, yaw_rate, dt_s)
    }

    /// Runs only the rate stage (used when a rate is commanded directly).
    pub fn update_rate(
        &mut self,
        desired_rate: f64,
        heading_err: f64,
        yaw_rate: f64,
        dt_s: f64,
    ) -> CascadeOutput {
        let desired = desired_rate.clamp(-self.cfg.rat_max_radps, self.cfg.rat_max_radps);
        self.rate_target = slew_limit(desired, self.rate_target, self.cfg.acc_max_radps2, dt_s);
        let (steering, pid) =
            rate_to_steering(self.rate_target, yaw_rate, &self.cfg, &self.rate_pid, dt_s);
        self.rate_pid = pid;
        CascadeOutput {
            steering,
            heading_err_rad: heading_err,
            desired_rate_radps: desired,
            rate_target_radps: self.rate_target,
        }
    }

    /// Clears the PID memory and re-seeds the slew state from the measured rate.
    pub fn reset(&mut self, measured_rate: f64) {
        self.rate_pid = PidState::default();
        self.rate_target = measured_rate.clamp(-self.cfg.rat_max_radps, self.cfg.rat_max_radps);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedController {
    pub cfg: SpeedConfig,
    pub pid: PidState,
}

impl SpeedController {
    pub fn new(cfg: SpeedConfig) -> Self {
        Self {
            cfg,
            pid: PidState::default(),
        }
    }

    pub fn update(&mut self, target_speed: f64, measured_speed: f64, dt_s: f64) -> f64 {
        let (throttle, pid) =
            speed_to_throttle(target_speed, measured_speed, &self.cfg, &self.pid, dt_s);
        self.pid = pid;
        throttle
    }

    pub fn reset(&mut self) {
        self.pid = PidState::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Independent discrete-sum / backward-difference reference.
    fn pid_oracle(gains: &PidGains, errors: &[f64], dt: f64, limit: f64) -> Vec<f64> {
        let mut sum = 0.0;
        let mut out = Vec::with_capacity(errors.len());
        for (i, &e) in errors.iter().enumerate() {
            sum += e * dt;
            if sum > limit {
                sum = limit;
            }
            if sum < -limit {
                sum = -limit;
            }
            let d = if i == 0 { 0.0 } else { (e - errors[i - 1]) / dt };
            out.push(gains.kp * e + gains.ki * sum + gains.kd * d);
        }
        out
    }

    #[test]
    fn pid_examples() {
        let p = PidGains::new(1.0, 0.0, 0.0);
        assert_eq!(pid_step(&p, &PidState::default(), 0.5, 0.1, 1.0).0, 0.5);
        let any = PidGains::new(0.3, 0.2, 0.1);
        assert_eq!(pid_step(&any, &PidState::default(), 0.0, 0.1, 1.0).0, 0.0);

        let i = PidGains::new(0.0, 1.0, 0.0);
        let mut st = PidState::default();
        let oracle = pid_oracle(&i, &[1.0; 10], 0.1, 10.0);
        for (k, expected) in oracle.iter().enumerate() {
            let (out, next) = pid_step(&i, &st, 1.0, 0.1, 10.0);
            st = next;
            assert!((out - expected).abs() < 1e-12);
            assert!((out - 0.1 * (k + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn pid_matches_oracle_on_random_sequences() {
        let gains = PidGains::new(0.7, 0.4, 0.05);
        for seed in 0..10u64 {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let errors: Vec<f64> = (0..1000).map(|_| rng.random_range(-2.0..2.0)).collect();
            let expected = pid_oracle(&gains, &errors, 0.02, 0.5);
            let mut st = PidState::default();
            for (e, want) in errors.iter().zip(&expected) {
                let (out, next) = pid_step(&gains, &st, *e, 0.02, 0.5);
                st = next;
                assert!((out - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn heading_to_rate_examples() {
        let cfg = SteeringConfig::default();
        assert_eq!(heading_to_rate(0.0, &cfg), 0.0);
        let r = heading_to_rate(deg_to_rad(60.0), &cfg);
        assert!((r - core::f64::consts::FRAC_PI_6).abs() < 1e-12);
        assert_eq!(r, cfg.rat_max_radps);
        let r = heading_to_rate(deg_to_rad(-10.0), &cfg);
        assert!((r - deg_to_rad(-10.0)).abs() < 1e-15);
    }

    #[test]
    fn slew_examples() {
        assert_eq!(slew_limit(0.3, 0.3, 1.0, 0.02), 0.3);
        // 30 deg/s requested from rest under a 120 deg/s^2 slew cap.
        let s = slew_limit(deg_to_rad(30.0), 0.0, deg_to_rad(120.0), 0.02);
        assert!((s - deg_to_rad(2.4)).abs() < 1e-15);
        assert!((s - 0.0419).abs() < 1e-4);
        assert_eq!(slew_limit(-0.5, 0.5, 1000.0, 0.02), -0.5);
    }

    #[test]
    fn rate_loop_examples() {
        let cfg = SteeringConfig::default();
        let (s, _) = rate_to_steering(0.2, 0.2, &cfg, &PidState::default(), 0.02);
        assert_eq!(s, 0.0);

        let dt = 0.02;
        let (s, st) = rate_to_steering(0.5, 0.0, &cfg, &PidState::default(), dt);
        assert!((s - (0.1 + 0.5 * dt * 0.2)).abs() < 1e-15);
        assert!((st.integral - 0.5 * dt).abs() < 1e-15);

        let primed = PidState {
            integral: 0.1,
            prev_error: 50.0,
            initialized: true,
        };
        let (s, st) = rate_to_steering(100.0, 0.0, &cfg, &primed, dt);
        assert_eq!(s, 1.0);
        assert_eq!(st.integral, 0.1);
    }

    #[test]
    fn speed_loop_examples() {
        let cfg = SpeedConfig {
            gains: PidGains::new(0.5, 0.1, 0.0),
            integ_limit: 4.0,
        };
        let dt = 0.02;
        assert_eq!(speed_to_throttle(1.2, 1.2, &cfg, &PidState::default(), dt).0, 0.0);
        let (t, _) = speed_to_throttle(1.0, 0.0, &cfg, &PidState::default(), dt);
        assert!((t - (0.5 + 0.1 * 1.0 * dt)).abs() < 1e-15);
        let (t, _) = speed_to_throttle(-1.0, 0.0, &cfg, &PidState::default(), dt);
        assert!(t < 0.0);
    }

    #[test]
    fn cascade_turns_toward_target() {
        let mut c = SteeringController::new(SteeringConfig::default());
        let out = c.update(PI / 2.0, 0.0, 0.0, 0.02);
        assert!(out.steering > 0.0);
        assert_eq!(out.desired_rate_radps, c.cfg.rat_max_radps);
        assert!(out.rate_target_radps <= c.cfg.acc_max_radps2 * 0.02 + 1e-15);
        let out = c.update(-PI / 2.0, 0.0, 0.0, 0.02);
        assert!(out.heading_err_rad < 0.0);
    }

    #[test]
    fn default_constants_match_autopilot_parameters() {
        let cfg = SteeringConfig::default();
        assert_eq!(cfg.ang_p, 1.0);
        assert_eq!(cfg.rat_gains.ki, 0.2);
        assert_eq!(cfg.rat_gains.kd, 0.02);
        assert!((cfg.rat_max_radps - 30.0 * PI / 180.0).abs() < 1e-15);
        assert!((cfg.acc_max_radps2 - 120.0 * PI / 180.0).abs() < 1e-15);
        assert!(cfg.validate().is_ok());
    }

    proptest! {
        #[test]
        fn angle_loop_respects_rate_max(errs in proptest::collection::vec(-10.0f64..10.0, 1..100)) {
            let cfg = SteeringConfig::default();
            for e in errs {
                prop_assert!(heading_to_rate(e, &cfg).abs() <= cfg.rat_max_radps);
            }
        }

        #[test]
        fn slew_bounds_consecutive_outputs(
            desired in proptest::collection::vec(-5.0f64..5.0, 1..200),
            acc in 0.01f64..10.0,
        ) {
            let dt = 0.02;
            let mut prev = 0.0;
            for d in desired {
                let next = slew_limit(d, prev, acc, dt);
                prop_assert!((next - prev).abs() <= acc * dt + 1e-12);
                prev = next;
            }
        }

        #[test]
        fn pure_p_is_memoryless(errs in proptest::collection::vec(-5.0f64..5.0, 1..50), kp in 0.0f64..3.0) {
            let g = PidGains::new(kp, 0.0, 0.0);
            let mut st = PidState::default();
            for e in errs {
                let (out, next) = pid_step(&g, &st, e, 0.05, 1.0);
                prop_assert_eq!(out, kp * e);
                st = next;
            }
        }

        #[test]
        fn integral_bounded_when_saturated(targets in proptest::collection::vec(-50.0f64..50.0, 1..300)) {
            let cfg = SteeringConfig::default();
            let mut st = PidState::default();
            for t in targets {
                let (s, next) = rate_to_steering(t, 0.0, &cfg, &st, 0.02);
                prop_assert!(s.abs() <= 1.0);
                prop_assert!(next.integral.abs() <= cfg.integ_limit);
                st = next;
            }
        }
    }
}
