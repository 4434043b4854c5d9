//! Planar primitives shared by every module.
//!
//! Angles are radians. Signed angles live in `[0, 2π)` and are measured
//! counterclockwise.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Rays shorter than this are treated as degenerate.
pub const COINCIDENCE_EPS: f64 = 1e-12;

pub fn point(x: f64, y: f64) -> Point {
    Vector2::new(x, y)
}

/// Rotates `v` counterclockwise by a quarter turn.
pub fn perp(v: &Point) -> Point {
    Vector2::new(-v.y, v.x)
}

pub fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn rotate(v: &Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Maps any real angle into `[0, 2π)`.
pub fn wrap_two_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Maps any real angle into `(-π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_two_pi(x);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Shortest arc length between two angles on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

/// Counterclockwise angle at `pj` from ray `pj→pi` to ray `pj→pk`.
pub fn signed_angle(pi: &Point, pj: &Point, pk: &Point) -> Result<f64> {
    let a = pi - pj;
    let b = pk - pj;
    if a.norm() < COINCIDENCE_EPS || b.norm() < COINCIDENCE_EPS {
        return Err(Error::CoincidentPoints);
    }
    Ok(wrap_two_pi(b.y.atan2(b.x) - a.y.atan2(a.x)))
}

/// Unsigned angle at `pj` between the rays to `pi` and `pk`, in `[0, π]`.
pub fn interior_angle(pi: &Point, pj: &Point, pk: &Point) -> Result<f64> {
    let r = signed_angle(pi, pj, pk)?;
    Ok(if r > PI { TAU - r } else { r })
}

/// Reduces a signed angle to the interior value in `[0, π]`.
pub fn to_interior(signed: f64) -> f64 {
    let r = wrap_two_pi(signed);
    if r > PI {
        TAU - r
    } else {
        r
    }
}

/// |sin| of the angle at `pj`; zero for collinear triples.
pub fn corner_sine(pi: &Point, pj: &Point, pk: &Point) -> Result<f64> {
    let a = pi - pj;
    let b = pk - pj;
    let (na, nb) = (a.norm(), b.norm());
    if na < COINCIDENCE_EPS || nb < COINCIDENCE_EPS {
        return Err(Error::CoincidentPoints);
    }
    Ok((cross(&a, &b) / (na * nb)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn signed_angle_examples() {
        let o = point(0.0, 0.0);
        let r = signed_angle(&point(1.0, 0.0), &o, &point(0.5, 3f64.sqrt() / 2.0)).unwrap();
        assert_abs_diff_eq!(r, PI / 3.0, epsilon = 1e-12);
        let r = signed_angle(&point(-1.0, 0.0), &o, &point(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r, PI, epsilon = 1e-12);
        let r = signed_angle(&point(1.0, 0.0), &o, &point(0.0, -1.0)).unwrap();
        assert_abs_diff_eq!(r, 3.0 * PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_ray_is_rejected() {
        let o = point(1.0, 1.0);
        assert!(matches!(
            signed_angle(&o, &o, &point(2.0, 0.0)),
            Err(Error::CoincidentPoints)
        ));
        assert!(matches!(
            signed_angle(&point(2.0, 0.0), &o, &o),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn wrap_stays_in_range() {
        for x in [-1e-18, -TAU, TAU, 3.0 * TAU + 0.5, -0.25] {
            let w = wrap_two_pi(x);
            assert!((0.0..TAU).contains(&w), "{x} -> {w}");
        }
        assert_abs_diff_eq!(circular_distance(TAU - 1e-3, 1e-3), 2e-3, epsilon = 1e-12);
    }

    #[test]
    fn perp_is_ccw_quarter_turn() {
        let v = point(1.0, 0.0);
        assert_eq!(perp(&v), point(0.0, 1.0));
        assert_abs_diff_eq!(
            (rotate(&v, PI / 2.0) - perp(&v)).norm(),
            0.0,
            epsilon = 1e-15
        );
    }
}
