use core::f64::consts::{PI, TAU};

/// Normalizes an angle in radians to the half-open interval `[-π, π)`.
///
/// Values already inside the interval are returned untouched, which makes the
/// function exactly idempotent.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let mut r = libm::fmod(a + PI, TAU);
    if r < 0.0 {
        r += TAU;
    }
    let w = r - PI;
    if w >= PI {
        w - TAU
    } else if w < -PI {
        -PI
    } else {
        w
    }
}

/// Compass bearing (clockwise from north) of the vector `(dx east, dy north)`.
pub fn bearing(dx: f64, dy: f64) -> f64 {
    wrap_angle(libm::atan2(dx, dy))
}

pub fn deg_to_rad(d: f64) -> f64 {
    d * PI / 180.0
}

pub fn rad_to_deg(r: f64) -> f64 {
    r * 180.0 / PI
}
