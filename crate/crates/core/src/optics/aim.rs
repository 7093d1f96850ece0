use nalgebra::{Matrix2, Vector2};

use super::prescription::LensPrescription;
use super::trace::{trace_ray_with, RayFailure, TraceOptions};
use super::{OpticsError, Ray, Vec3};

const AIM_MAX_ITER: usize = 50;
const AIM_TOL: f64 = 1e-10;

/// Launch rays are parameterized by the point where they cross the plane of
/// the first vertex (z = 0).
pub type LaunchTarget = [f64; 2];

pub fn launch_ray(object: &Vec3, target: LaunchTarget) -> Ray {
    Ray::new(
        *object,
        Vec3::new(target[0] - object.x, target[1] - object.y, -object.z),
    )
}

fn stop_hit(
    prescription: &LensPrescription,
    object: &Vec3,
    target: LaunchTarget,
    nm: f64,
) -> Result<Vector2<f64>, RayFailure> {
    let opts = TraceOptions {
        clip_apertures: false,
        first_surface: 0,
        last_surface: Some(prescription.stop_index()),
    };
    let result = trace_ray_with(prescription, &launch_ray(object, target), nm, opts);
    if let Some(v) = result.vignetted {
        return Err(v.cause);
    }
    let p = result.last_point().expect("stop was reached");
    Ok(Vector2::new(p.x, p.y))
}

/// Straight-line guess through the requested stop point, ignoring the
/// surfaces in front of the stop.
fn initial_target(
    prescription: &LensPrescription,
    object: &Vec3,
    stop_point: [f64; 2],
) -> Vector2<f64> {
    let zs = prescription.stop_z();
    let frac = -object.z / (zs - object.z);
    Vector2::new(
        object.x + (stop_point[0] - object.x) * frac,
        object.y + (stop_point[1] - object.y) * frac,
    )
}

fn fd_jacobian(
    prescription: &LensPrescription,
    object: &Vec3,
    at: Vector2<f64>,
    nm: f64,
) -> Result<Matrix2<f64>, RayFailure> {
    let h = 1e-6 * (1.0 + at.norm());
    let mut jac = Matrix2::zeros();
    for k in 0..2 {
        let mut plus = at;
        let mut minus = at;
        plus[k] += h;
        minus[k] -= h;
        let gp = stop_hit(prescription, object, [plus.x, plus.y], nm)?;
        let gm = stop_hit(prescription, object, [minus.x, minus.y], nm)?;
        jac.set_column(k, &((gp - gm) / (2.0 * h)));
    }
    Ok(jac)
}

/// ∂(stop hit)/∂(launch target) at `launch`, apertures ignored.
pub fn aim_jacobian(
    prescription: &LensPrescription,
    object: &Vec3,
    launch: LaunchTarget,
    nm: f64,
) -> Result<[[f64; 2]; 2], OpticsError> {
    let j = fd_jacobian(prescription, object, Vector2::new(launch[0], launch[1]), nm)
        .map_err(OpticsError::AimFailed)?;
    Ok([[j[(0, 0)], j[(0, 1)]], [j[(1, 0)], j[(1, 1)]]])
}

/// Finds the ray from `object` that crosses the stop surface at
/// `stop_point`, by Broyden (multi-dimensional secant) iteration on the
/// launch target. Apertures are ignored while aiming.
pub fn aim_ray(
    prescription: &LensPrescription,
    object: &Vec3,
    stop_point: [f64; 2],
    nm: f64,
) -> Result<(Ray, LaunchTarget), OpticsError> {
    let goal = Vector2::new(stop_point[0], stop_point[1]);
    let mut x = if object.x == 0.0 && object.y == 0.0 && stop_point == [0.0, 0.0] {
        Vector2::zeros()
    } else {
        initial_target(prescription, object, stop_point)
    };
    let mut g =
        stop_hit(prescription, object, [x.x, x.y], nm).map_err(OpticsError::AimFailed)? - goal;
    let mut jac: Option<Matrix2<f64>> = None;
    for _ in 0..AIM_MAX_ITER {
        if g.norm() < AIM_TOL {
            return Ok((launch_ray(object, [x.x, x.y]), [x.x, x.y]));
        }
        let j = match jac {
            Some(j) => j,
            None => fd_jacobian(prescription, object, x, nm).map_err(OpticsError::AimFailed)?,
        };
        let Some(inv) = j.try_inverse() else {
            return Err(OpticsError::AimNoConvergence {
                iterations: 0,
                residual: g.norm(),
            });
        };
        let full = -(inv * g);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = x + full * scale;
            if let Ok(gt) = stop_hit(prescription, object, [trial.x, trial.y], nm) {
                let gt = gt - goal;
                if gt.norm() < g.norm() || scale < 1e-6 {
                    accepted = Some((trial, gt));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((xn, gn)) = accepted else {
            return Err(OpticsError::AimFailed(RayFailure::Miss));
        };
        let dx = xn - x;
        let dg = gn - g;
        let denom = dx.dot(&dx);
        jac = if denom > 0.0 {
            Some(j + (dg - j * dx) * dx.transpose() / denom)
        } else {
            None
        };
        x = xn;
        g = gn;
    }
    if g.norm() < AIM_TOL {
        return Ok((launch_ray(object, [x.x, x.y]), [x.x, x.y]));
    }
    Err(OpticsError::AimNoConvergence {
        iterations: AIM_MAX_ITER,
        residual: g.norm(),
    })
}

/// The ray from `object` through the centre of the aperture stop.
pub fn find_chief_ray(
    prescription: &LensPrescription,
    object: &Vec3,
    nm: f64,
) -> Result<Ray, OpticsError> {
    aim_ray(prescription, object, [0.0, 0.0], nm).map(|(ray, _)| ray)
}
