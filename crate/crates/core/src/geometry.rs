//! Planar vector math shared by every planner: `Vec2`, `Pose`, the
//! quarter-turn operator used for tangential steering, and angle
//! normalization.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use thiserror::Error;

/// Norms below this are treated as directionless (coincident points).
pub const EPS_NORM: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    /// The vector is too short to carry a direction. Raised when two robots
    /// (or a robot and its goal) coincide; callers that need a direction
    /// anyway should use [`normalize_or_fallback`].
    #[error("cannot normalize a near-zero vector")]
    NearZeroVector,
}

/// A 2D vector. Doubles as position (m), velocity (m/s) and force,
/// depending on context.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };
    /// Deterministic fallback direction when geometry degenerates.
    pub const UNIT_X: Vec2 = Vec2 { x: 1.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Angle of the vector in `[0, 2π)`. The zero vector maps to 0.
    pub fn angle(self) -> f64 {
        normalize_angle(self.y.atan2(self.x))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        *self = *self + rhs;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x / k, self.y / k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Rotate a vector by -90° (quarter turn), the operator that converts a
/// radial repulsion into a tangential one: `(x, y) -> (y, -x)`.
///
/// Norm-preserving; applying it four times is the identity.
pub fn rotate90(v: Vec2) -> Vec2 {
    Vec2::new(v.y, -v.x)
}

/// Standard counter-clockwise rotation by `angle` radians.
pub fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (sin, cos) = angle.sin_cos();
    Vec2::new(v.x * cos - v.y * sin, v.x * sin + v.y * cos)
}

/// Unit vector in the direction of `v`, or [`GeometryError::NearZeroVector`]
/// when `‖v‖ ≤ EPS_NORM`.
pub fn normalize(v: Vec2) -> Result<Vec2, GeometryError> {
    let n = v.norm();
    if n <= EPS_NORM {
        Err(GeometryError::NearZeroVector)
    } else {
        Ok(v / n)
    }
}

/// Like [`normalize`], but degenerate inputs map to the unit x-axis so that
/// downstream math stays finite and deterministic.
pub fn normalize_or_fallback(v: Vec2) -> Vec2 {
    normalize(v).unwrap_or(Vec2::UNIT_X)
}

/// Wrap an angle into `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r < 0.0 {
        r += TAU;
    }
    // `-1e-17 % TAU` rounds to TAU after the correction above.
    if r >= TAU {
        r = 0.0;
    }
    r
}

/// Position plus heading, heading normalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Pose {
            position,
            heading: normalize_angle(heading),
        }
    }
}
