//! Angle arithmetic conventions used across the crate.
//!
//! Minutia orientations live in [0, 2pi). Ridge tangents are undirected, so
//! they live modulo pi. Differences are wrapped to half-open intervals chosen
//! so that the boundary value is always representable exactly once.

use std::f64::consts::{PI, TAU};

/// Normalizes an angle to [0, 2pi).
pub fn normalize_tau(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid of a tiny negative can round up to the period itself.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Normalizes an undirected angle to [0, pi).
pub fn normalize_pi(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Wraps a directed angle difference into (-pi, pi].
pub fn wrap_tau(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wraps an undirected angle difference into (-pi/2, pi/2].
pub fn wrap_pi(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r > PI / 2.0 {
        r - PI
    } else {
        r
    }
}

/// Magnitude of the undirected difference between two tangents, in [0, pi/2].
pub fn undirected_diff(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalize_tau_range() {
        assert_abs_diff_eq!(normalize_tau(TAU + 0.25), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_tau(-0.25), TAU - 0.25, epsilon = 1e-12);
        assert_eq!(normalize_tau(0.0), 0.0);
        let r = normalize_tau(-1e-18);
        assert!((0.0..TAU).contains(&r));
    }

    #[test]
    fn wrap_tau_half_open() {
        assert_abs_diff_eq!(wrap_tau(PI), PI);
        assert_abs_diff_eq!(wrap_tau(-PI), PI);
        assert_abs_diff_eq!(wrap_tau(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_tau(0.3), 0.3);
    }

    #[test]
    fn wrap_pi_half_open() {
        assert_abs_diff_eq!(wrap_pi(PI / 2.0), PI / 2.0);
        assert_abs_diff_eq!(wrap_pi(-PI / 2.0), PI / 2.0);
        assert_abs_diff_eq!(wrap_pi(0.6 * PI), -0.4 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_pi(PI + 0.1), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn undirected_diff_symmetric() {
        // tangents 5 degrees apart across the 0/pi seam
        let a = 0.02;
        let b = PI - 0.05;
        assert_abs_diff_eq!(undirected_diff(a, b), 0.07, epsilon = 1e-12);
        assert_abs_diff_eq!(undirected_diff(b, a), 0.07, epsilon = 1e-12);
    }
}
