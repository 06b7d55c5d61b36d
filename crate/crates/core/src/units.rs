//! Unit conversions. Internally everything is rad/s and seconds.

use core::f64::consts::PI;

/// Frequency quoted as `ν/2π` in GHz, converted to rad/s.
pub fn ghz(value: f64) -> f64 {
    2.0 * PI * value * 1e9
}

/// Frequency quoted as `ν/2π` in MHz, converted to rad/s.
pub fn mhz(value: f64) -> f64 {
    2.0 * PI * value * 1e6
}

pub fn ns(value: f64) -> f64 {
    value * 1e-9
}

pub fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e9)
}

pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

pub fn to_ns(t: f64) -> f64 {
    t * 1e9
}
