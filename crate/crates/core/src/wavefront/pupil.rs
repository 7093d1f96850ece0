use num_complex::Complex64;

use super::PsfError;
use crate::fft;
use crate::optics::{
    aim_jacobian, aim_ray, launch_ray, trace_ray, trace_ray_with, LensPrescription, Ray,
    TraceOptions, Vec3,
};

/// Lateral object position (mm) on the object plane displaced by
/// `defocus` mm from the in-focus object plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub x: f64,
    pub y: f64,
    pub defocus: f64,
}

impl FieldPoint {
    pub fn new(x: f64, y: f64, defocus: f64) -> Self {
        Self { x, y, defocus }
    }

    pub fn on_axis(defocus: f64) -> Self {
        Self::new(0.0, 0.0, defocus)
    }

    pub fn object_point(&self, prescription: &LensPrescription) -> Result<Vec3, PsfError> {
        let z = prescription.object_z(self.defocus);
        if !(z < 0.0) {
            return Err(PsfError::InvalidConfig(format!(
                "object plane at z = {z} mm is not in front of the first surface"
            )));
        }
        Ok(Vec3::new(self.x, self.y, z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PupilConfig {
    /// Samples per side of the pupil grid (even).
    pub samples: usize,
    /// Grid half-width relative to the stop radius; the real stop clips the
    /// corners.
    pub overfill: f64,
}

impl Default for PupilConfig {
    fn default() -> Self {
        Self {
            samples: 128,
            overfill: 1.05,
        }
    }
}

/// Sampled exit-pupil wavefront for one field point and wavelength.
///
/// Row `j` and column `i` index stop-plane coordinates; `direction_step`
/// gives the change per sample of the transverse direction cosines from
/// the reference-sphere centre to the sphere point, which fixes the image
/// plane sampling of the Fourier transform.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilMap {
    pub n: usize,
    pub wavelength_nm: f64,
    /// Optical path difference to the chief ray, mm.
    pub opd: Vec<f64>,
    /// 1 for transmitted rays, 0 for vignetted ones.
    pub amplitude: Vec<f64>,
    pub direction_step: [f64; 2],
    pub image_index: f64,
    pub chief_image_point: [f64; 2],
    pub reference_radius: f64,
    pub transmitted: usize,
    /// Angle of the chief ray to the axis in object space, radians.
    pub chief_angle: f64,
}

impl PupilMap {
    pub fn transmitted_fraction(&self) -> f64 {
        self.transmitted as f64 / (self.n * self.n) as f64
    }

    /// Image-plane spacing (mm) of a DFT of size `m` of this pupil.
    pub fn image_step(&self, m: usize) -> [f64; 2] {
        let lambda = self.wavelength_nm * 1e-6;
        [
            lambda / (self.image_index * m as f64 * self.direction_step[0]),
            lambda / (self.image_index * m as f64 * self.direction_step[1]),
        ]
    }
}

/// Axial position of the paraxial exit pupil: the image of the stop centre
/// through the surfaces behind the stop.
pub fn exit_pupil_z(prescription: &LensPrescription, nm: f64) -> f64 {
    let stop = prescription.stop_index();
    let zs = prescription.stop_z();
    let slope = 1e-4;
    let ray = Ray::new(Vec3::new(0.0, 0.0, zs), Vec3::new(0.0, slope, 1.0));
    let opts = TraceOptions {
        clip_apertures: false,
        first_surface: stop + 1,
        last_surface: None,
    };
    let result = trace_ray_with(prescription, &ray, nm, opts);
    match (result.vignetted, result.last_point()) {
        (None, Some(p)) if result.exit_direction.y.abs() > 1e-15 => {
            p.z - p.y * result.exit_direction.z / result.exit_direction.y
        }
        _ => zs,
    }
}

/// Traces an `n × n` grid of rays through the stop and records the OPD on
/// the exit-pupil reference sphere centred on the chief-ray image point.
pub fn sample_exit_pupil(
    prescription: &LensPrescription,
    field: FieldPoint,
    nm: f64,
    config: PupilConfig,
) -> Result<PupilMap, PsfError> {
    let n = config.samples;
    if n < 4 || !n.is_multiple_of(2) {
        return Err(PsfError::InvalidConfig(format!(
            "pupil samples must be even and >= 4, got {n}"
        )));
    }
    let object = field.object_point(prescription)?;
    let (chief_launch_ray, chief_launch) = aim_ray(prescription, &object, [0.0, 0.0], nm)?;
    let chief = trace_ray_with(
        prescription,
        &chief_launch_ray,
        nm,
        TraceOptions {
            clip_apertures: false,
            ..TraceOptions::default()
        },
    );
    if let Some(v) = chief.vignetted {
        return Err(PsfError::DegenerateField(format!(
            "chief ray failed at surface {}: {}",
            v.surface, v.cause
        )));
    }
    let last = prescription.surfaces().len() - 1;
    let image_index = prescription.index_before(last, nm);
    let pc = *chief.last_point().expect("chief reached the image plane");
    let dc = chief.exit_direction;
    let z_xp = exit_pupil_z(prescription, nm);
    let s_chief = (pc.z - z_xp) / dc.z;
    let radius = s_chief.abs();
    if !(radius.is_finite() && radius > 0.0) {
        return Err(PsfError::DegenerateField(
            "exit pupil coincides with the image plane".into(),
        ));
    }
    let opl_chief = chief.opl - image_index * s_chief;

    let jac = aim_jacobian(prescription, &object, chief_launch, nm)?;
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if det.abs() < 1e-300 {
        return Err(PsfError::DegenerateField("singular aiming Jacobian".into()));
    }
    let inv = [
        [jac[1][1] / det, -jac[0][1] / det],
        [-jac[1][0] / det, jac[0][0] / det],
    ];
    let r_stop = prescription.surfaces()[prescription.stop_index()].semi_diameter;
    let step = 2.0 * config.overfill / n as f64;
    let half = n as f64 / 2.0;

    let mut opd = vec![0.0; n * n];
    let mut amplitude = vec![0.0; n * n];
    let mut fit = SlopeFit::default();
    let mut transmitted = 0;
    for j in 0..n {
        let eta = (j as f64 + 0.5 - half) * step * r_stop;
        for i in 0..n {
            let xi = (i as f64 + 0.5 - half) * step * r_stop;
            let launch = [
                chief_launch[0] + inv[0][0] * xi + inv[0][1] * eta,
                chief_launch[1] + inv[1][0] * xi + inv[1][1] * eta,
            ];
            let result = trace_ray(prescription, &launch_ray(&object, launch), nm);
            if result.vignetted.is_some() {
                continue;
            }
            let pi = *result
                .last_point()
                .expect("transmitted rays reach the image plane");
            let d = result.exit_direction;
            let v = pi - pc;
            let vd = v.dot(&d);
            let disc = vd * vd - v.norm_squared() + radius * radius;
            if disc < 0.0 {
                continue;
            }
            let estimate = (pi.z - z_xp) / d.z;
            let roots = [vd + disc.sqrt(), vd - disc.sqrt()];
            let t = if (roots[0] - estimate).abs() <= (roots[1] - estimate).abs() {
                roots[0]
            } else {
                roots[1]
            };
            let q = pi - d * t;
            let idx = j * n + i;
            opd[idx] = result.opl - image_index * t - opl_chief;
            amplitude[idx] = 1.0;
            transmitted += 1;
            fit.add(
                i as f64,
                j as f64,
                (q.x - pc.x) / radius,
                (q.y - pc.y) / radius,
            );
        }
    }
    let direction_step = fit
        .slopes()
        .ok_or_else(|| PsfError::DegenerateField("too few transmitted pupil rays".into()))?;
    Ok(PupilMap {
        n,
        wavelength_nm: nm,
        opd,
        amplitude,
        direction_step,
        image_index,
        chief_image_point: [pc.x, pc.y],
        reference_radius: radius,
        transmitted,
        chief_angle: chief_launch_ray.direction.z.clamp(-1.0, 1.0).acos(),
    })
}

/// Least-squares slopes of direction cosine x against column and y against
/// row.
#[derive(Default)]
struct SlopeFit {
    n: f64,
    si: f64,
    sii: f64,
    sx: f64,
    six: f64,
    sj: f64,
    sjj: f64,
    sy: f64,
    sjy: f64,
}

impl SlopeFit {
    fn add(&mut self, i: f64, j: f64, x: f64, y: f64) {
        self.n += 1.0;
        self.si += i;
        self.sii += i * i;
        self.sx += x;
        self.six += i * x;
        self.sj += j;
        self.sjj += j * j;
        self.sy += y;
        self.sjy += j * y;
    }

    fn slopes(&self) -> Option<[f64; 2]> {
        if self.n < 3.0 {
            return None;
        }
        let dx = self.n * self.sii - self.si * self.si;
        let dy = self.n * self.sjj - self.sj * self.sj;
        if dx <= 0.0 || dy <= 0.0 {
            return None;
        }
        let a = (self.n * self.six - self.si * self.sx) / dx;
        let b = (self.n * self.sjy - self.sj * self.sy) / dy;
        (a != 0.0 && b != 0.0).then_some([a, b])
    }
}

/// `P = A · exp(j 2π/λ · OPD)`, row-major `n × n`.
pub fn pupil_function(map: &PupilMap) -> Vec<Complex64> {
    let k = 2.0 * std::f64::consts::PI / (map.wavelength_nm * 1e-6);
    map.amplitude
        .iter()
        .zip(&map.opd)
        .map(|(&a, &w)| {
            if a == 0.0 {
                Complex64::default()
            } else {
                Complex64::from_polar(a, k * w)
            }
        })
        .collect()
}

/// Square complex field with its origin at index `size / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub size: usize,
    pub data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Centred DFT of the pupil function zero-padded to `padding · n` per side.
pub fn amplitude_spread(
    pupil: &[Complex64],
    n: usize,
    padding: usize,
) -> Result<ComplexGrid, PsfError> {
    if pupil.len() != n * n {
        return Err(PsfError::InvalidConfig(format!(
            "pupil has {} samples, expected {n}²",
            pupil.len()
        )));
    }
    if padding < 2 {
        return Err(PsfError::InvalidConfig(format!(
            "padding must be >= 2, got {padding}"
        )));
    }
    let m = n * padding;
    let offset = (m - n) / 2;
    let mut field = vec![Complex64::default(); m * m];
    for j in 0..n {
        let row = (j + offset) * m + offset;
        field[row..row + n].copy_from_slice(&pupil[j * n..(j + 1) * n]);
    }
    let mut shifted = fft::ifftshift(&field, m, m);
    fft::fft2(&mut shifted, m, m, false);
    Ok(ComplexGrid {
        size: m,
        data: fft::fftshift(&shifted, m, m),
    })
}
