//! Rigid transformations and the interpolation machinery that generates the
//! query poses for open-loop objective sweeps.
//!
//! Rotations are stored as unit quaternions; translation and rotation are
//! interpolated independently (LERP for the vector part, SLERP for the
//! quaternion part), which keeps the sample spacing homogeneous along the
//! path and allows extrapolation for interpolation parameters outside [0, 1].

use nalgebra::{Matrix4, Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Quaternion dot products above `1 - NLERP_DOT_THRESHOLD` fall back to
/// normalized linear interpolation: the spherical formula divides by the sine
/// of a vanishing angle there.
const NLERP_DOT_THRESHOLD: f64 = 1e-9;

/// Below this |dot| the two rotations are half a turn apart and the shortest
/// great circle is ambiguous; the sign of the target quaternion is then
/// canonicalized so the choice is deterministic.
const ANTIPODAL_DOT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("interpolation path needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("interpolation range is empty: u_min {u_min} must be less than u_max {u_max}")]
    EmptyRange { u_min: f64, u_max: f64 },
}

/// An element of SE(3): a rotation followed by a translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: renormalize(rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_axis_angle(
        axis: &Unit<Vector3<f64>>,
        angle: f64,
        translation: Vector3<f64>,
    ) -> Self {
        Self::new(UnitQuaternion::from_axis_angle(axis, angle), translation)
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Maps a point: `R * p + t`.
    pub fn apply(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    pub fn inverse(&self) -> Self {
        let inv_rotation = self.rotation.inverse();
        Self {
            rotation: renormalize(inv_rotation),
            translation: -(inv_rotation * self.translation),
        }
    }

    /// `self.compose(other)` applies `other` first: `(self ∘ other)(p) = self(other(p))`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: renormalize(self.rotation * other.rotation),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Homogeneous 4x4 matrix form.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.to_rotation_matrix().matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation angle (radians) separating the rotation parts.
    pub fn rotation_angle_to(&self, other: &Self) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(q.into_inner())
}

/// Linear interpolation of translation vectors: `(1 - u) * a + u * b`.
///
/// Values of `u` outside [0, 1] extrapolate.
pub fn lerp(a: &Vector3<f64>, b: &Vector3<f64>, u: f64) -> Vector3<f64> {
    a * (1.0 - u) + b * u
}

/// Spherical linear interpolation between unit quaternions, at constant
/// rotational speed: `q_i (q_i^-1 q_j)^u`.
///
/// The target is sign-aligned with the start before interpolating so the
/// shorter of the two great-circle arcs is taken. Values of `u` outside
/// [0, 1] extrapolate along the same arc. When the rotations are half a turn
/// apart both arcs have equal length; the arc is then chosen by flipping the
/// target's sign so that its largest-magnitude component is positive.
pub fn slerp(
    start: &UnitQuaternion<f64>,
    end: &UnitQuaternion<f64>,
    u: f64,
) -> UnitQuaternion<f64> {
    let from = start.into_inner().coords;
    let mut to = end.into_inner().coords;
    let mut dot = from.dot(&to);
    if dot < 0.0 {
        to = -to;
        dot = -dot;
    }
    if dot < ANTIPODAL_DOT_THRESHOLD {
        let widest = to.iter().map(|c| c.abs()).fold(0.0, f64::max);
        let flip = to
            .iter()
            .find(|c| c.abs() == widest)
            .is_some_and(|c| *c < 0.0);
        if flip {
            to = -to;
        }
    }
    let blended = if dot > 1.0 - NLERP_DOT_THRESHOLD {
        from * (1.0 - u) + to * u
    } else {
        let omega = dot.clamp(-1.0, 1.0).acos();
        let sin_omega = omega.sin();
        from * (((1.0 - u) * omega).sin() / sin_omega) + to * ((u * omega).sin() / sin_omega)
    };
    UnitQuaternion::from_quaternion(Quaternion::from_vector(blended))
}

/// Transform at parameter `u` on the path from `start` (u = 0) to `end`
/// (u = 1); translation and rotation are interpolated separately.
pub fn interpolate(start: &RigidTransform, end: &RigidTransform, u: f64) -> RigidTransform {
    RigidTransform::new(
        slerp(start.rotation(), end.rotation(), u),
        lerp(start.translation(), end.translation(), u),
    )
}

/// A sampled interpolation path between two transforms.
#[derive(Clone, Debug)]
pub struct InterpolationPath {
    start: RigidTransform,
    end: RigidTransform,
    samples: Vec<(f64, RigidTransform)>,
}

impl InterpolationPath {
    pub fn start(&self) -> &RigidTransform {
        &self.start
    }

    pub fn end(&self) -> &RigidTransform {
        &self.end
    }

    /// `(u, transform)` pairs, with strictly increasing `u`.
    pub fn samples(&self) -> &[(f64, RigidTransform)] {
        &self.samples
    }
}

/// Samples `n` equally spaced parameters over `[u_min, u_max]` and builds the
/// interpolated transform at each.
pub fn make_path(
    start: &RigidTransform,
    end: &RigidTransform,
    u_min: f64,
    u_max: f64,
    n: usize,
) -> Result<InterpolationPath, GeometryError> {
    if n < 2 {
        return Err(GeometryError::TooFewSamples(n));
    }
    if u_min >= u_max || !u_min.is_finite() || !u_max.is_finite() {
        return Err(GeometryError::EmptyRange { u_min, u_max });
    }
    let span = u_max - u_min;
    let denom = (n - 1) as f64;
    let samples = (0..n)
        .map(|i| {
            // Multiply before dividing so grid points like u = 0 and u = 1
            // come out exact for ranges such as [-1, 2] with 100 samples.
            let u = u_min + (i as f64 * span) / denom;
            (u, interpolate(start, end, u))
        })
        .collect();
    Ok(InterpolationPath {
        start: *start,
        end: *end,
        samples,
    })
}
