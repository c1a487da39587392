//! Conversions at the file/CLI boundary. Internally everything is rad/s.

use std::f64::consts::TAU;

#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    f * TAU
}

#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TAU
}

/// Reduce an angle to (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > std::f64::consts::PI {
        y -= TAU;
    }
    y
}
