use std::fmt;

use serde::Serialize;

use super::prescription::LensPrescription;
use super::surface::{Surface, SurfaceKind};
use super::{Ray, Vec3};

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;
const ASPHERE_RESIDUAL_MAX: f64 = 1e-10;
const BISECTION_SCAN: usize = 256;
/// Rays may start a hair behind a surface they sit on.
const T_BACKSTEP: f64 = 1e-9;

/// Why a ray stopped before reaching the image plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RayFailure {
    Miss,
    Aperture,
    TotalInternalReflection,
    NoConvergence,
}

impl fmt::Display for RayFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RayFailure::Miss => "ray misses surface",
            RayFailure::Aperture => "ray clipped by aperture",
            RayFailure::TotalInternalReflection => "total internal reflection",
            RayFailure::NoConvergence => "surface intersection did not converge",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Vignetting {
    pub surface: usize,
    pub cause: RayFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    /// One point per surface traversed; the clipping surface is not included.
    pub hit_points: Vec<Vec3>,
    pub exit_direction: Vec3,
    pub opl: f64,
    pub vignetted: Option<Vignetting>,
}

impl TraceResult {
    pub fn is_transmitted(&self) -> bool {
        self.vignetted.is_none()
    }

    pub fn last_point(&self) -> Option<&Vec3> {
        self.hit_points.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub clip_apertures: bool,
    /// Start at this surface; the ray must already be past the ones before.
    pub first_surface: usize,
    /// Stop after this surface (inclusive) instead of the image plane.
    pub last_surface: Option<usize>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            clip_apertures: true,
            first_surface: 0,
            last_surface: None,
        }
    }
}

fn plane_t(ray: &Ray, vertex_z: f64) -> Result<f64, RayFailure> {
    if ray.direction.z == 0.0 {
        return Err(RayFailure::Miss);
    }
    let t = (vertex_z - ray.origin.z) / ray.direction.z;
    if t < -T_BACKSTEP {
        return Err(RayFailure::Miss);
    }
    Ok(t)
}

/// Vertex-branch root of `c|P|² − 2 P_z = 0` along the ray, in the
/// cancellation-free form that degrades to the plane solution as c → 0.
fn sphere_t(ray: &Ray, curvature: f64, vertex_z: f64) -> Result<f64, RayFailure> {
    if curvature == 0.0 {
        return plane_t(ray, vertex_z);
    }
    let o = ray.origin - Vec3::new(0.0, 0.0, vertex_z);
    let d = ray.direction;
    let a = curvature;
    let b = curvature * o.dot(&d) - d.z;
    let c = curvature * o.norm_squared() - 2.0 * o.z;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return Err(RayFailure::Miss);
    }
    let q = -b - b.signum() * disc.sqrt();
    if q == 0.0 {
        return Err(RayFailure::Miss);
    }
    let t = c / q;
    if t < -T_BACKSTEP || !t.is_finite() {
        return Err(RayFailure::Miss);
    }
    Ok(t)
}

fn check_aperture(ray: &Ray, t: f64, surface: &Surface) -> Result<f64, RayFailure> {
    let p = ray.at(t);
    if surface.has_aperture() && p.x.hypot(p.y) > surface.semi_diameter {
        Err(RayFailure::Aperture)
    } else {
        Ok(t)
    }
}

/// Closed-form intersection with the spherical (or, for zero curvature,
/// planar) part of `surface`, whose vertex sits at `vertex_z`.
pub fn intersect_sphere(ray: &Ray, surface: &Surface, vertex_z: f64) -> Result<f64, RayFailure> {
    let t = sphere_t(ray, surface.curvature, vertex_z)?;
    check_aperture(ray, t, surface)
}

/// Intersection with the full aspheric sag by Newton iteration seeded at
/// the spherical solution, falling back to bracketed bisection.
pub fn intersect_asphere(ray: &Ray, surface: &Surface, vertex_z: f64) -> Result<f64, RayFailure> {
    let t = asphere_t(ray, surface, vertex_z)?;
    check_aperture(ray, t, surface)
}

fn sag_residual(ray: &Ray, surface: &Surface, vertex_z: f64, t: f64) -> Option<f64> {
    let p = ray.at(t);
    let s = p.x.hypot(p.y);
    surface.sag(s).ok().map(|z| p.z - vertex_z - z)
}

fn asphere_t(ray: &Ray, surface: &Surface, vertex_z: f64) -> Result<f64, RayFailure> {
    let seed = sphere_t(ray, surface.curvature, vertex_z).or_else(|_| plane_t(ray, vertex_z))?;
    if let Some(t) = newton(ray, surface, vertex_z, seed) {
        return Ok(t);
    }
    bisect(ray, surface, vertex_z)
}

fn newton(ray: &Ray, surface: &Surface, vertex_z: f64, seed: f64) -> Option<f64> {
    let d = ray.direction;
    let mut t = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let p = ray.at(t);
        let s = p.x.hypot(p.y);
        let f = p.z - vertex_z - surface.sag(s).ok()?;
        if f.abs() < NEWTON_TOL {
            return Some(t);
        }
        let ds_dt = if s > 0.0 {
            (p.x * d.x + p.y * d.y) / s
        } else {
            0.0
        };
        let fp = d.z - surface.sag_slope(s).ok()? * ds_dt;
        if fp == 0.0 || !fp.is_finite() {
            return None;
        }
        let step = f / fp;
        t -= step;
        if step.abs() < 1e-15 * t.abs().max(1.0) {
            return (sag_residual(ray, surface, vertex_z, t)?.abs() < ASPHERE_RESIDUAL_MAX)
                .then_some(t);
        }
    }
    None
}

fn bisect(ray: &Ray, surface: &Surface, vertex_z: f64) -> Result<f64, RayFailure> {
    let t_plane = plane_t(ray, vertex_z).map_err(|_| RayFailure::NoConvergence)?;
    let dz = ray.direction.z.abs();
    let reach = surface
        .semi_diameter
        .min(1.0 / surface.curvature.abs().max(1e-300));
    let sag_range = (0..=64)
        .filter_map(|k| surface.sag(reach * k as f64 / 64.0).ok())
        .fold(0.0_f64, |acc, z| acc.max(z.abs()));
    let half = (sag_range + 1.0) / dz.max(1e-12);
    let lo = (t_plane - half).max(-T_BACKSTEP);
    let hi = t_plane + half;
    let step = (hi - lo) / BISECTION_SCAN as f64;
    let mut a = lo;
    let mut fa = sag_residual(ray, surface, vertex_z, a);
    for k in 1..=BISECTION_SCAN {
        let b = lo + step * k as f64;
        let fb = sag_residual(ray, surface, vertex_z, b);
        if let (Some(ya), Some(yb)) = (fa, fb) {
            if ya == 0.0 {
                return Ok(a);
            }
            if ya.signum() != yb.signum() {
                return refine(ray, surface, vertex_z, a, b, ya);
            }
        }
        a = b;
        fa = fb;
    }
    Err(RayFailure::NoConvergence)
}

fn refine(
    ray: &Ray,
    surface: &Surface,
    vertex_z: f64,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
) -> Result<f64, RayFailure> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = sag_residual(ray, surface, vertex_z, m).ok_or(RayFailure::NoConvergence)?;
        if fm.abs() < NEWTON_TOL || (b - a) < 1e-15 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Err(RayFailure::NoConvergence)
}

fn intersect_raw(ray: &Ray, surface: &Surface, vertex_z: f64) -> Result<f64, RayFailure> {
    if surface.is_plane() {
        plane_t(ray, vertex_z)
    } else if surface.kind == SurfaceKind::Aspheric {
        asphere_t(ray, surface, vertex_z)
    } else {
        sphere_t(ray, surface.curvature, vertex_z)
    }
}

/// Vector form of Snell's law. `normal` may point either way.
pub fn refract(direction: &Vec3, normal: &Vec3, n1: f64, n2: f64) -> Result<Vec3, RayFailure> {
    if n1 == n2 {
        return Ok(*direction);
    }
    let mut n = *normal;
    let mut cos_i = direction.dot(&n);
    if cos_i < 0.0 {
        n = -n;
        cos_i = -cos_i;
    }
    let eta = n1 / n2;
    let k = 1.0 - eta * eta * (1.0 - cos_i * cos_i);
    if k < 0.0 {
        return Err(RayFailure::TotalInternalReflection);
    }
    let out = direction * eta + n * (k.sqrt() - eta * cos_i);
    Ok(out.normalize())
}

/// Traces `ray` from object space to the image plane at wavelength `nm`.
pub fn trace_ray(prescription: &LensPrescription, ray: &Ray, nm: f64) -> TraceResult {
    trace_ray_with(prescription, ray, nm, TraceOptions::default())
}

pub fn trace_ray_with(
    prescription: &LensPrescription,
    ray: &Ray,
    nm: f64,
    opts: TraceOptions,
) -> TraceResult {
    let surfaces = prescription.surfaces();
    let last = opts
        .last_surface
        .unwrap_or(surfaces.len() - 1)
        .min(surfaces.len() - 1);
    let order: Vec<(usize, f64, f64)> = (opts.first_surface..=last)
        .map(|i| {
            (
                i,
                prescription.index_before(i, nm),
                prescription.index_after(i, nm),
            )
        })
        .collect();
    walk(
        prescription,
        ray,
        &order,
        opts.clip_apertures,
        surfaces.len() - 1,
    )
}

/// Traces a ray travelling toward −z, e.g. a reversed image-space ray,
/// back through every surface before the image plane and on to the plane
/// `to_z` in object space.
pub fn trace_backward(
    prescription: &LensPrescription,
    ray: &Ray,
    nm: f64,
    to_z: f64,
) -> TraceResult {
    let n = prescription.surfaces().len();
    let order: Vec<(usize, f64, f64)> = (0..n - 1)
        .rev()
        .map(|i| {
            (
                i,
                prescription.index_after(i, nm),
                prescription.index_before(i, nm),
            )
        })
        .collect();
    let mut result = walk(prescription, ray, &order, true, usize::MAX);
    if result.vignetted.is_none() {
        let start = *result.hit_points.last().unwrap_or(&ray.origin);
        let seg = Ray {
            origin: start,
            direction: result.exit_direction,
            opl: result.opl,
        };
        match plane_t(&seg, to_z) {
            Ok(t) => {
                result.hit_points.push(seg.at(t));
                result.opl += t;
            }
            Err(cause) => result.vignetted = Some(Vignetting { surface: 0, cause }),
        }
    }
    result
}

/// `order` lists (surface, index before, index after) in travel order.
fn walk(
    prescription: &LensPrescription,
    ray: &Ray,
    order: &[(usize, f64, f64)],
    clip: bool,
    image_index: usize,
) -> TraceResult {
    let surfaces = prescription.surfaces();
    let mut pos = ray.origin;
    let mut dir = ray.direction;
    let mut opl = ray.opl;
    let mut hits = Vec::with_capacity(order.len());
    let mut vignetted = None;
    for &(i, n1, n2) in order {
        let surface = &surfaces[i];
        let vz = prescription.vertex_z(i);
        let seg = Ray {
            origin: pos,
            direction: dir,
            opl,
        };
        let step = intersect_raw(&seg, surface, vz).and_then(|t| {
            if clip {
                check_aperture(&seg, t, surface)
            } else {
                Ok(t)
            }
        });
        let t = match step {
            Ok(t) => t,
            Err(cause) => {
                vignetted = Some(Vignetting { surface: i, cause });
                break;
            }
        };
        let point = seg.at(t);
        if i != image_index && n1 != n2 {
            let local = point - Vec3::new(0.0, 0.0, vz);
            let refracted = surface
                .normal(&local)
                .map_err(|_| RayFailure::Miss)
                .and_then(|normal| refract(&dir, &normal, n1, n2));
            match refracted {
                Ok(d) => dir = d,
                Err(cause) => {
                    vignetted = Some(Vignetting { surface: i, cause });
                    break;
                }
            }
        }
        opl += n1 * t;
        hits.push(point);
        pos = point;
    }
    TraceResult {
        hit_points: hits,
        exit_direction: dir,
        opl,
        vignetted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::Surface;

    fn axial(z: f64) -> Ray {
        Ray::new(Vec3::new(0.0, 0.0, z), Vec3::z())
    }

    #[test]
    fn axial_ray_to_plane() {
        let s = Surface::spherical(0.0, 5.0, 0.0, 1.0);
        assert_eq!(intersect_sphere(&axial(-10.0), &s, 0.0).unwrap(), 10.0);
    }

    #[test]
    fn axial_ray_hits_sphere_vertex() {
        let s = Surface::spherical(0.1, 5.0, 0.0, 1.0);
        assert!((intersect_sphere(&axial(-10.0), &s, 0.0).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn off_axis_ray_matches_quadratic_oracle() {
        // Sphere centred at (0,0,10) with radius 10: z = 10 − √(100 − 1).
        let s = Surface::spherical(0.1, 5.0, 0.0, 1.0);
        let ray = Ray::new(Vec3::new(1.0, 0.0, -10.0), Vec3::z());
        let expect = 10.0 + (10.0 - 99.0_f64.sqrt());
        let t = intersect_sphere(&ray, &s, 0.0).unwrap();
        assert!((t - expect).abs() < 1e-12);
        assert!((t - 10.050_125_6).abs() < 1e-7);
    }

    #[test]
    fn miss_and_vignetting_are_signalled() {
        let s = Surface::spherical(0.5, 1.5, 0.0, 1.0);
        let far = Ray::new(Vec3::new(3.0, 0.0, -10.0), Vec3::z());
        assert_eq!(intersect_sphere(&far, &s, 0.0), Err(RayFailure::Miss));
        let edge = Ray::new(Vec3::new(1.8, 0.0, -10.0), Vec3::z());
        assert_eq!(intersect_sphere(&edge, &s, 0.0), Err(RayFailure::Aperture));
    }

    #[test]
    fn degenerate_asphere_equals_sphere() {
        let sph = Surface::spherical(0.07, 6.0, 0.0, 1.0);
        let asp = Surface::aspheric(0.07, vec![(4, 0.0), (6, 0.0)], 6.0, 0.0, 1.0);
        let ray = Ray::new(Vec3::new(2.0, -1.0, -5.0), Vec3::new(0.1, 0.05, 1.0));
        let a = intersect_sphere(&ray, &sph, 1.0).unwrap();
        let b = intersect_asphere(&ray, &asp, 1.0).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn refract_normal_incidence() {
        let d = refract(&Vec3::z(), &Vec3::z(), 1.0, 1.5).unwrap();
        assert!((d - Vec3::z()).norm() < 1e-15);
    }

    #[test]
    fn refract_same_index_is_identity() {
        let d = Vec3::new(0.3, -0.2, 0.9).normalize();
        let n = Vec3::new(0.1, 0.0, 1.0).normalize();
        assert_eq!(refract(&d, &n, 1.3, 1.3).unwrap(), d);
    }

    #[test]
    fn refract_45_degrees_into_glass() {
        let d = Vec3::new(1.0, 0.0, 1.0).normalize();
        let out = refract(&d, &Vec3::z(), 1.0, 1.5).unwrap();
        let sin2 = std::f64::consts::FRAC_1_SQRT_2 / 1.5;
        assert!((out.x - sin2).abs() < 1e-12);
        assert!((out.z - (1.0 - sin2 * sin2).sqrt()).abs() < 1e-12);
        assert!((out.x - 0.471_40).abs() < 1e-5 && (out.z - 0.881_92).abs() < 1e-5);
    }

    #[test]
    fn total_internal_reflection() {
        let d = Vec3::new(0.8, 0.0, 0.6);
        assert_eq!(
            refract(&d, &Vec3::z(), 1.5, 1.0),
            Err(RayFailure::TotalInternalReflection)
        );
    }
}
