//! Sequential geometric ray tracing through rotationally symmetric lens
//! prescriptions.
//!
//! Geometry is in millimetres with the optical axis along +z. The vertex of
//! the first surface sits at z = 0 and each surface's `thickness` is the
//! axial distance to the next vertex. Wavelengths are in nanometres.

mod aim;
mod prescription;
mod surface;
mod trace;

pub use aim::{aim_jacobian, aim_ray, find_chief_ray, launch_ray, LaunchTarget};
pub use prescription::{
    IndexRecord, LensPrescription, PrescriptionFile, SurfaceRecord, WavelengthRecord,
    WavelengthSpec, DEFAULT_PIXEL_PITCH_MM,
};
pub use surface::{IndexTable, Surface, SurfaceKind, MAX_ASPHERIC_ORDER};
pub use trace::{
    intersect_asphere, intersect_sphere, refract, trace_backward, trace_ray, trace_ray_with,
    RayFailure, TraceOptions, TraceResult, Vignetting,
};

use nalgebra::Vector3;
use thiserror::Error;

use crate::error::ErrorClass;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("sag undefined at s = {s} mm for curvature {curvature} (c²s² ≥ 1)")]
    SagDomain { curvature: f64, s: f64 },
    #[error("invalid prescription: {field}: {message}")]
    InvalidPrescription { field: String, message: String },
    #[error("prescription parse error: {0}")]
    Parse(String),
    #[error(
        "ray aiming did not converge after {iterations} iterations (residual {residual:e} mm)"
    )]
    AimNoConvergence { iterations: usize, residual: f64 },
    #[error("ray aiming failed: {0}")]
    AimFailed(RayFailure),
}

impl OpticsError {
    pub fn class(&self) -> ErrorClass {
        match self {
            OpticsError::InvalidPrescription { .. } | OpticsError::Parse(_) => {
                ErrorClass::Validation
            }
            _ => ErrorClass::Numeric,
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        OpticsError::InvalidPrescription {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// A ray segment start: origin, unit direction and the optical path length
/// accumulated so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub opl: f64,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Self {
            origin,
            direction: direction.normalize(),
            opl: 0.0,
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}
