//! Small planar geometry helpers shared across modules.

use std::f64::consts::PI;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Wraps an angle into `[-pi, pi]` using the three-branch rule
/// (add or subtract one full turn when outside the interval).
///
/// Values already in `[-pi, pi]` are returned unchanged. Inputs further
/// than one turn away are reduced first.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a;
    if !(-3.0 * PI..=3.0 * PI).contains(&a) {
        a = a.rem_euclid(2.0 * PI);
    }
    if a < -PI {
        a + 2.0 * PI
    } else if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Counter-clockwise rotation of `v` by `angle`.
pub fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

pub fn heading(v: Vec2) -> f64 {
    v.y.atan2(v.x)
}

pub fn unit_from_heading(h: f64) -> Vec2 {
    let (s, c) = h.sin_cos();
    Vec2::new(c, s)
}

/// Unsigned angle between two nonzero vectors, in `[0, pi]`.
pub fn angle_between(a: Vec2, b: Vec2) -> f64 {
    let cross = a.x * b.y - a.y * b.x;
    cross.abs().atan2(a.dot(&b))
}

/// Scalar 2D cross product `a x b`.
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_branches() {
        assert!((wrap_angle(6.0) - (6.0 - 2.0 * PI)).abs() < 1e-15);
        assert!((wrap_angle(-6.0) - (-6.0 + 2.0 * PI)).abs() < 1e-15);
        assert_eq!(wrap_angle(1.0), 1.0);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), -PI);
    }

    #[test]
    fn wrap_far_values() {
        let w = wrap_angle(20.0);
        assert!((-PI..=PI).contains(&w));
        assert!(((20.0 - w) / (2.0 * PI)).fract().abs() < 1e-12 || ((20.0 - w) / (2.0 * PI)).fract() > 1.0 - 1e-12);
    }

    #[test]
    fn angle_between_is_symmetric() {
        let a = Vec2::new(1.0, 0.0);
        let b = Vec2::new(0.0, 2.0);
        assert!((angle_between(a, b) - PI / 2.0).abs() < 1e-15);
        assert!((angle_between(b, a) - PI / 2.0).abs() < 1e-15);
    }
}
