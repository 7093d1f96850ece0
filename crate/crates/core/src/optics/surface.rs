use serde::{Deserialize, Serialize};

use super::{OpticsError, Vec3};

/// Highest even polynomial order accepted for aspheric terms.
pub const MAX_ASPHERIC_ORDER: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    Spherical,
    Aspheric,
    Stop,
    ImagePlane,
}

/// Refractive index tabulated against wavelength, linearly interpolated and
/// held constant beyond the tabulated range.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTable {
    points: Vec<(f64, f64)>,
}

impl IndexTable {
    pub fn constant(n: f64) -> Self {
        Self {
            points: vec![(0.0, n)],
        }
    }

    /// `points` are `(wavelength nm, index)` pairs in any order.
    pub fn new(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, nm: f64) -> f64 {
        let pts = &self.points;
        if pts.len() == 1 || nm <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if nm >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|p| p.0 <= nm);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (nm - x0) / (x1 - x0)
    }
}

/// One surface of a sequential prescription.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub kind: SurfaceKind,
    /// Vertex curvature in 1/mm; zero for planes.
    pub curvature: f64,
    /// `(order, coefficient)` pairs with even orders in `2..=12`.
    pub aspheric: Vec<(u32, f64)>,
    pub semi_diameter: f64,
    pub thickness: f64,
    pub index: IndexTable,
}

impl Surface {
    pub fn spherical(curvature: f64, semi_diameter: f64, thickness: f64, index: f64) -> Self {
        Self {
            kind: SurfaceKind::Spherical,
            curvature,
            aspheric: Vec::new(),
            semi_diameter,
            thickness,
            index: IndexTable::constant(index),
        }
    }

    pub fn aspheric(
        curvature: f64,
        coeffs: Vec<(u32, f64)>,
        semi_diameter: f64,
        thickness: f64,
        index: f64,
    ) -> Self {
        Self {
            kind: SurfaceKind::Aspheric,
            curvature,
            aspheric: coeffs,
            semi_diameter,
            thickness,
            index: IndexTable::constant(index),
        }
    }

    pub fn stop(semi_diameter: f64, thickness: f64) -> Self {
        Self {
            kind: SurfaceKind::Stop,
            curvature: 0.0,
            aspheric: Vec::new(),
            semi_diameter,
            thickness,
            index: IndexTable::constant(1.0),
        }
    }

    pub fn image_plane() -> Self {
        Self {
            kind: SurfaceKind::ImagePlane,
            curvature: 0.0,
            aspheric: Vec::new(),
            semi_diameter: f64::INFINITY,
            thickness: 0.0,
            index: IndexTable::constant(1.0),
        }
    }

    pub fn with_index(mut self, index: IndexTable) -> Self {
        self.index = index;
        self
    }

    /// Planes are intersected in closed form and need no Newton iteration.
    pub fn is_plane(&self) -> bool {
        self.curvature == 0.0 && self.aspheric.iter().all(|&(_, m)| m == 0.0)
    }

    pub fn has_aperture(&self) -> bool {
        self.kind != SurfaceKind::ImagePlane
    }

    /// Sagittal height `c s² / (1 + √(1 − c² s²)) + Σ M_j s^j`.
    pub fn sag(&self, s: f64) -> Result<f64, OpticsError> {
        let c = self.curvature;
        let s2 = s * s;
        let arg = 1.0 - c * c * s2;
        if arg <= 0.0 {
            return Err(OpticsError::SagDomain { curvature: c, s });
        }
        let conic = c * s2 / (1.0 + arg.sqrt());
        Ok(conic + self.poly(s2))
    }

    /// dz/ds.
    pub fn sag_slope(&self, s: f64) -> Result<f64, OpticsError> {
        let c = self.curvature;
        let arg = 1.0 - c * c * s * s;
        if arg <= 0.0 {
            return Err(OpticsError::SagDomain { curvature: c, s });
        }
        let mut slope = c * s / arg.sqrt();
        for &(j, m) in &self.aspheric {
            slope += m * f64::from(j) * s.powi(j as i32 - 1);
        }
        Ok(slope)
    }

    fn poly(&self, s2: f64) -> f64 {
        self.aspheric
            .iter()
            .map(|&(j, m)| m * s2.powi((j / 2) as i32))
            .sum()
    }

    /// Unit normal at a point given in vertex-local coordinates, oriented
    /// toward +z.
    pub fn normal(&self, local: &Vec3) -> Result<Vec3, OpticsError> {
        let s = local.x.hypot(local.y);
        if s == 0.0 {
            return Ok(Vec3::z());
        }
        let slope = self.sag_slope(s)?;
        Ok(Vec3::new(-slope * local.x / s, -slope * local.y / s, 1.0).normalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sag_at_vertex_is_zero() {
        let s = Surface::aspheric(0.3, vec![(4, 1e-3), (6, -2e-5)], 3.0, 1.0, 1.5);
        assert_eq!(s.sag(0.0).unwrap(), 0.0);
    }

    #[test]
    fn spherical_sag_matches_closed_form() {
        let s = Surface::spherical(0.1, 5.0, 1.0, 1.5);
        // 10 - sqrt(99)
        assert!((s.sag(1.0).unwrap() - 0.050_125_628_9).abs() < 1e-9);
    }

    #[test]
    fn polynomial_only_sag() {
        let s = Surface::aspheric(0.0, vec![(2, 0.01)], 5.0, 1.0, 1.5);
        assert!((s.sag(2.0).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn sag_domain_error_beyond_hemisphere() {
        let s = Surface::spherical(0.5, 5.0, 1.0, 1.5);
        assert!(matches!(s.sag(2.5), Err(OpticsError::SagDomain { .. })));
    }

    #[test]
    fn slope_matches_finite_difference() {
        let s = Surface::aspheric(0.05, vec![(4, 1e-5), (6, 3e-7)], 8.0, 1.0, 1.5);
        for &r in &[0.5, 2.0, 5.5] {
            let h = 1e-6;
            let fd = (s.sag(r + h).unwrap() - s.sag(r - h).unwrap()) / (2.0 * h);
            assert!((fd - s.sag_slope(r).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn index_table_interpolates_linearly() {
        let t = IndexTable::new(vec![(656.3, 1.514), (486.1, 1.522), (587.6, 1.5168)]);
        assert_eq!(t.at(587.6), 1.5168);
        let mid = t.at((587.6 + 656.3) / 2.0);
        assert!((mid - (1.5168 + 1.514) / 2.0).abs() < 1e-12);
        assert_eq!(t.at(300.0), 1.522);
        assert_eq!(t.at(900.0), 1.514);
    }
}
