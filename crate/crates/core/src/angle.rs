//! Circular helpers. All angles handed out by this crate live in `[0, 2π)`.

use std::f64::consts::{PI, TAU};

/// Reduces an angle to `[0, 2π)`.
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed shortest rotation from `from` to `to`, in `(-π, π]`.
pub fn signed_diff(to: f64, from: f64) -> f64 {
    let d = wrap(to - from);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Unsigned circular distance in `[0, π]`.
pub fn dist(a: f64, b: f64) -> f64 {
    signed_diff(a, b).abs()
}

/// Counterclockwise offset of `x` measured from `origin`, in `[0, 2π)`.
pub fn ccw_offset(x: f64, origin: f64) -> f64 {
    wrap(x - origin)
}
