//! Poincaré-sphere geometry for polarization measurements.
//!
//! Polarization analyzers live in the lab frame; the states they select live
//! on the Poincaré sphere, where lab angles double. The axis convention is
//! fixed once here and used everywhere else:
//!
//! * `z`: horizontal/vertical linear polarization,
//! * `x`: ±45° linear polarization,
//! * `y`: right/left circular polarization.
//!
//! A linear analyzer at lab angle θ measures along `(sin 2θ, 0, cos 2θ)`
//! (the x–z great circle). With a quarter-wave plate in front, the same
//! analyzer angle measures along `(0, sin 2θ, cos 2θ)` (the y–z great
//! circle). The angle doubling is confined to [`polarizer_to_poincare`];
//! every other function works with sphere vectors and sphere angles.

use std::f64::consts::PI;
use std::ops::Neg;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for geometric predicates (orthogonality, collinearity,
/// unit-norm checks).
pub const GEOMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    /// A direction could not be normalized (zero or non-finite components).
    #[error("cannot normalize a degenerate vector ({x}, {y}, {z})")]
    DegenerateVector { x: f64, y: f64, z: f64 },
    /// Both setting pairs of a [`PlanePair`] are collinear, so neither spans
    /// a plane and orthogonality is undetermined.
    #[error("both setting pairs are collinear; no plane orientation is determined")]
    DegeneratePlane,
    /// Plane-dependent quantities were requested for planes that are not
    /// orthogonal within tolerance.
    #[error("planes are not orthogonal (normal dot product {0:.3e})")]
    PlanesNotOrthogonal(f64),
}

/// A unit vector on the Poincaré sphere.
///
/// Construction normalizes, so the invariant `‖self‖ = 1` (within 1e-12)
/// holds for every reachable value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareVector {
    x: f64,
    y: f64,
    z: f64,
}

impl PoincareVector {
    pub const X: PoincareVector = PoincareVector {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const Y: PoincareVector = PoincareVector {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const Z: PoincareVector = PoincareVector {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    /// Normalizes `(x, y, z)` onto the unit sphere.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < GEOMETRY_TOLERANCE {
            return Err(GeometryError::DegenerateVector { x, y, z });
        }
        Ok(PoincareVector {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Components that are already unit-normalized (trigonometric images,
    /// cross products of the unit sphere, …). Debug builds verify the norm.
    pub(crate) fn from_unit_components(x: f64, y: f64, z: f64) -> Self {
        debug_assert!((x * x + y * y + z * z - 1.0).abs() < 1e-9);
        PoincareVector { x, y, z }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    #[inline]
    pub fn dot(&self, other: &PoincareVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Cross product; the result is *not* renormalized (its length is the
    /// sine of the enclosed angle, which callers use for collinearity tests).
    pub fn cross(&self, other: &PoincareVector) -> (f64, f64, f64) {
        (
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    /// Unit normal of the plane spanned with `other`, or an error when the
    /// two directions are collinear within [`GEOMETRY_TOLERANCE`].
    pub fn plane_normal(&self, other: &PoincareVector) -> Result<PoincareVector, GeometryError> {
        let (cx, cy, cz) = self.cross(other);
        PoincareVector::new(cx, cy, cz).map_err(|_| GeometryError::DegeneratePlane)
    }

    /// Angle to `other` in radians, in `[0, π]`.
    pub fn angle_to(&self, other: &PoincareVector) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos()
    }

    /// Euclidean norm (1 by construction; exposed for invariant tests).
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl Neg for PoincareVector {
    type Output = PoincareVector;

    fn neg(self) -> PoincareVector {
        PoincareVector {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Which great circle a polarizer setting addresses: plain polarization
/// analysis (`Linear`, x–z circle) or analysis behind a quarter-wave plate
/// (`Rotated`, y–z circle).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementPlane {
    Linear,
    Rotated,
}

/// A lab-frame polarizer orientation: an angle in degrees plus the great
/// circle selected by the optional wave plate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizerSetting {
    angle_deg: f64,
    plane: MeasurementPlane,
}

impl PolarizerSetting {
    /// Creates a setting, normalizing the angle into `[0°, 360°)`.
    /// A polarizer is π-periodic, so the normalization never changes the
    /// measured direction; keeping one representative simplifies reporting.
    pub fn new(angle_deg: f64, plane: MeasurementPlane) -> Self {
        debug_assert!(angle_deg.is_finite());
        PolarizerSetting {
            angle_deg: angle_deg.rem_euclid(360.0),
            plane,
        }
    }

    #[inline]
    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }

    #[inline]
    pub fn plane(&self) -> MeasurementPlane {
        self.plane
    }
}

/// Maps a lab polarizer setting to its Poincaré-sphere direction.
///
/// This is the only place where the lab angle doubles: θ degrees in the lab
/// becomes 2θ on the sphere.
pub fn polarizer_to_poincare(setting: PolarizerSetting) -> PoincareVector {
    let sphere_angle = 2.0 * setting.angle_deg.to_radians();
    let (sin2t, cos2t) = sphere_angle.sin_cos();
    match setting.plane {
        MeasurementPlane::Linear => PoincareVector::from_unit_components(sin2t, 0.0, cos2t),
        MeasurementPlane::Rotated => PoincareVector::from_unit_components(0.0, sin2t, cos2t),
    }
}

/// Sphere angle between two polarizer settings, in radians in `[0, π]`.
pub fn sphere_angle(s1: PolarizerSetting, s2: PolarizerSetting) -> f64 {
    polarizer_to_poincare(s1).angle_to(&polarizer_to_poincare(s2))
}

/// Two measurement-direction pairs, each intended to span a great-circle
/// plane of the sphere.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PlanePair {
    pub first: (PoincareVector, PoincareVector),
    pub second: (PoincareVector, PoincareVector),
}

impl PlanePair {
    pub fn new(
        first: (PoincareVector, PoincareVector),
        second: (PoincareVector, PoincareVector),
    ) -> Self {
        PlanePair { first, second }
    }
}

fn pair_normal(pair: &(PoincareVector, PoincareVector)) -> Option<PoincareVector> {
    pair.0.plane_normal(&pair.1).ok()
}

/// Whether the two planes spanned by the pairs are orthogonal within
/// [`GEOMETRY_TOLERANCE`].
///
/// A collinear pair does not span a plane by itself; it is then required to
/// lie *in* the other pair's plane (direction orthogonal to that plane's
/// normal), which is the configuration where the degenerate pair sits on the
/// intersection line of the other plane with some plane orthogonal to it.
/// If both pairs are collinear the orientation is undetermined and the
/// function fails with [`GeometryError::DegeneratePlane`].
pub fn planes_orthogonal(planes: &PlanePair) -> Result<bool, GeometryError> {
    match (pair_normal(&planes.first), pair_normal(&planes.second)) {
        (Some(n1), Some(n2)) => Ok(n1.dot(&n2).abs() < GEOMETRY_TOLERANCE),
        (Some(n1), None) => Ok(planes.second.0.dot(&n1).abs() < GEOMETRY_TOLERANCE),
        (None, Some(n2)) => Ok(planes.first.0.dot(&n2).abs() < GEOMETRY_TOLERANCE),
        (None, None) => Err(GeometryError::DegeneratePlane),
    }
}

/// Normals of both planes of an orthogonal [`PlanePair`].
///
/// Fails when a pair is collinear (no unique normal) or when the planes are
/// not orthogonal within tolerance.
pub fn orthogonal_plane_normals(
    planes: &PlanePair,
) -> Result<(PoincareVector, PoincareVector), GeometryError> {
    let n1 = planes.first.0.plane_normal(&planes.first.1)?;
    let n2 = planes.second.0.plane_normal(&planes.second.1)?;
    let overlap = n1.dot(&n2);
    if overlap.abs() >= GEOMETRY_TOLERANCE {
        return Err(GeometryError::PlanesNotOrthogonal(overlap));
    }
    Ok((n1, n2))
}

/// Draws a direction uniformly distributed on the sphere: the z component is
/// uniform on `[-1, 1]` and the azimuth uniform on `[0, 2π)`.
pub fn uniform_sphere_sample<R: Rng + ?Sized>(rng: &mut R) -> PoincareVector {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let azimuth: f64 = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (sin_a, cos_a) = azimuth.sin_cos();
    PoincareVector::from_unit_components(r * cos_a, r * sin_a, z)
}
