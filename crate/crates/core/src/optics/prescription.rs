use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::surface::{IndexTable, Surface, SurfaceKind, MAX_ASPHERIC_ORDER};
use super::OpticsError;
use crate::error::{Error, Result};

pub const DEFAULT_PIXEL_PITCH_MM: f64 = 0.005;

const CHANNEL_WEIGHT_TOL: f64 = 1e-9;

/// On-disk surface record. Map keys are strings so the document stays plain
/// JSON: aspheric orders (`"4"`) and wavelengths in nm (`"587.6"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceRecord {
    #[serde(rename = "type")]
    pub kind: SurfaceKind,
    #[serde(default)]
    pub curvature: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aspheric: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_diameter: Option<f64>,
    #[serde(default)]
    pub thickness: f64,
    /// Medium after the surface; air when absent.
    #[serde(default, skip_serializing_if = "IndexRecord::is_air")]
    pub index: IndexRecord,
}

/// Refractive index as a single number or a `{nm: n}` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexRecord {
    Constant(f64),
    Table(BTreeMap<String, f64>),
}

impl Default for IndexRecord {
    fn default() -> Self {
        IndexRecord::Constant(1.0)
    }
}

impl IndexRecord {
    fn is_air(&self) -> bool {
        *self == IndexRecord::Constant(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavelengthRecord {
    pub nm: f64,
    pub channel: usize,
    pub weight: f64,
}

/// Lens prescription document as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrescriptionFile {
    pub surfaces: Vec<SurfaceRecord>,
    pub stop_index: usize,
    #[serde(default = "default_wavelengths")]
    pub wavelengths: Vec<WavelengthRecord>,
    /// Object plane to first vertex, in mm, for the in-focus configuration.
    pub object_distance: f64,
    #[serde(default = "default_pixel_pitch")]
    pub pixel_pitch: f64,
}

fn default_pixel_pitch() -> f64 {
    DEFAULT_PIXEL_PITCH_MM
}

fn default_wavelengths() -> Vec<WavelengthRecord> {
    [(656.3, 0), (587.6, 1), (486.1, 2)]
        .into_iter()
        .map(|(nm, channel)| WavelengthRecord {
            nm,
            channel,
            weight: 1.0,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthSpec {
    pub nm: f64,
    pub channel: usize,
    pub weight: f64,
}

/// A validated sequential prescription, object space to image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LensPrescription {
    surfaces: Vec<Surface>,
    stop_index: usize,
    wavelengths: Vec<WavelengthSpec>,
    object_distance: f64,
    pixel_pitch: f64,
    vertex_z: Vec<f64>,
}

const TOY_JSON: &str = include_str!("../../data/toy_double_gauss.json");

impl LensPrescription {
    pub fn new(
        surfaces: Vec<Surface>,
        stop_index: usize,
        wavelengths: Vec<WavelengthSpec>,
        object_distance: f64,
        pixel_pitch: f64,
    ) -> Result<Self, OpticsError> {
        validate_surfaces(&surfaces, stop_index)?;
        validate_wavelengths(&wavelengths)?;
        if !(object_distance.is_finite() && object_distance > 0.0) {
            return Err(OpticsError::invalid(
                "object_distance",
                "must be a positive finite length",
            ));
        }
        if !(pixel_pitch.is_finite() && pixel_pitch > 0.0) {
            return Err(OpticsError::invalid(
                "pixel_pitch",
                "must be a positive finite length",
            ));
        }
        let mut vertex_z = Vec::with_capacity(surfaces.len());
        let mut z = 0.0;
        for s in &surfaces {
            vertex_z.push(z);
            z += s.thickness;
        }
        Ok(Self {
            surfaces,
            stop_index,
            wavelengths,
            object_distance,
            pixel_pitch,
            vertex_z,
        })
    }

    /// Single-wavelength convenience constructor used mostly by tests.
    pub fn monochromatic(
        surfaces: Vec<Surface>,
        stop_index: usize,
        nm: f64,
        object_distance: f64,
    ) -> Result<Self, OpticsError> {
        Self::new(
            surfaces,
            stop_index,
            vec![WavelengthSpec {
                nm,
                channel: 0,
                weight: 1.0,
            }],
            object_distance,
            DEFAULT_PIXEL_PITCH_MM,
        )
    }

    /// The bundled double-Gauss stand-in lens.
    pub fn toy() -> Self {
        Self::from_json_str(TOY_JSON).expect("bundled prescription is valid")
    }

    pub fn toy_json() -> &'static str {
        TOY_JSON
    }

    pub fn from_json_str(text: &str) -> Result<Self, OpticsError> {
        let file: PrescriptionFile =
            serde_json::from_str(text).map_err(|e| OpticsError::Parse(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_json_str(&text)?)
    }

    pub fn from_file(file: &PrescriptionFile) -> Result<Self, OpticsError> {
        let mut surfaces = Vec::with_capacity(file.surfaces.len());
        for (i, rec) in file.surfaces.iter().enumerate() {
            surfaces.push(surface_from_record(i, rec)?);
        }
        let wavelengths = file
            .wavelengths
            .iter()
            .map(|w| WavelengthSpec {
                nm: w.nm,
                channel: w.channel,
                weight: w.weight,
            })
            .collect();
        Self::new(
            surfaces,
            file.stop_index,
            wavelengths,
            file.object_distance,
            file.pixel_pitch,
        )
    }

    pub fn to_file(&self) -> PrescriptionFile {
        let surfaces = self
            .surfaces
            .iter()
            .map(|s| SurfaceRecord {
                kind: s.kind,
                curvature: s.curvature,
                aspheric: s
                    .aspheric
                    .iter()
                    .map(|&(j, m)| (j.to_string(), m))
                    .collect(),
                semi_diameter: s.semi_diameter.is_finite().then_some(s.semi_diameter),
                thickness: s.thickness,
                index: match s.index.points() {
                    [(nm, n)] if *nm == 0.0 => IndexRecord::Constant(*n),
                    points => IndexRecord::Table(
                        points.iter().map(|&(nm, n)| (format!("{nm}"), n)).collect(),
                    ),
                },
            })
            .collect();
        PrescriptionFile {
            surfaces,
            stop_index: self.stop_index,
            wavelengths: self
                .wavelengths
                .iter()
                .map(|w| WavelengthRecord {
                    nm: w.nm,
                    channel: w.channel,
                    weight: w.weight,
                })
                .collect(),
            object_distance: self.object_distance,
            pixel_pitch: self.pixel_pitch,
        }
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_file()).expect("prescription serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn stop_index(&self) -> usize {
        self.stop_index
    }

    pub fn wavelengths(&self) -> &[WavelengthSpec] {
        &self.wavelengths
    }

    pub fn object_distance(&self) -> f64 {
        self.object_distance
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn with_pixel_pitch(mut self, pitch: f64) -> Self {
        self.pixel_pitch = pitch;
        self
    }

    pub fn vertex_z(&self, i: usize) -> f64 {
        self.vertex_z[i]
    }

    pub fn image_z(&self) -> f64 {
        self.vertex_z[self.surfaces.len() - 1]
    }

    pub fn stop_z(&self) -> f64 {
        self.vertex_z[self.stop_index]
    }

    /// Axial position of the object plane for a displacement `d` (mm) from
    /// the in-focus object plane; positive `d` moves the object away.
    pub fn object_z(&self, d: f64) -> f64 {
        -(self.object_distance + d)
    }

    /// Medium after surface `i`.
    pub fn index_after(&self, i: usize, nm: f64) -> f64 {
        self.surfaces[i].index.at(nm)
    }

    /// Medium before surface `i`; object space is air.
    pub fn index_before(&self, i: usize, nm: f64) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.surfaces[i - 1].index.at(nm)
        }
    }

    pub fn channel_count(&self) -> usize {
        self.wavelengths
            .iter()
            .map(|w| w.channel + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn channel_wavelengths(&self, channel: usize) -> impl Iterator<Item = &WavelengthSpec> {
        self.wavelengths
            .iter()
            .filter(move |w| w.channel == channel)
    }

    /// Median design wavelength; kernels of every channel are centred on the
    /// chief-ray image point at this wavelength.
    pub fn primary_wavelength(&self) -> f64 {
        let mut nms: Vec<f64> = self.wavelengths.iter().map(|w| w.nm).collect();
        nms.sort_by(f64::total_cmp);
        nms.dedup();
        nms[(nms.len() - 1) / 2]
    }
}

fn surface_from_record(i: usize, rec: &SurfaceRecord) -> Result<Surface, OpticsError> {
    let field = |name: &str| format!("surfaces[{i}].{name}");
    let mut aspheric = Vec::with_capacity(rec.aspheric.len());
    for (key, &m) in &rec.aspheric {
        let order: u32 = key.parse().map_err(|_| {
            OpticsError::invalid(
                field("aspheric"),
                format!("order `{key}` is not an integer"),
            )
        })?;
        aspheric.push((order, m));
    }
    aspheric.sort_by_key(|&(j, _)| j);
    let index = match &rec.index {
        IndexRecord::Constant(n) => IndexTable::constant(*n),
        IndexRecord::Table(table) if table.is_empty() => IndexTable::constant(1.0),
        IndexRecord::Table(table) => {
            let mut points = Vec::with_capacity(table.len());
            for (key, &n) in table {
                let nm: f64 = key.parse().map_err(|_| {
                    OpticsError::invalid(
                        field("index"),
                        format!("wavelength key `{key}` is not a number"),
                    )
                })?;
                if !(nm.is_finite() && nm > 0.0) {
                    return Err(OpticsError::invalid(
                        field("index"),
                        format!("wavelength {key} must be positive"),
                    ));
                }
                points.push((nm, n));
            }
            IndexTable::new(points)
        }
    };
    let semi_diameter = match (rec.kind, rec.semi_diameter) {
        (SurfaceKind::ImagePlane, sd) => sd.unwrap_or(f64::INFINITY),
        (_, Some(sd)) => sd,
        (_, None) => return Err(OpticsError::invalid(field("semi_diameter"), "required")),
    };
    Ok(Surface {
        kind: rec.kind,
        curvature: rec.curvature,
        aspheric,
        semi_diameter,
        thickness: rec.thickness,
        index,
    })
}

fn validate_surfaces(surfaces: &[Surface], stop_index: usize) -> Result<(), OpticsError> {
    if surfaces.len() < 2 {
        return Err(OpticsError::invalid(
            "surfaces",
            "need at least a stop and an image plane",
        ));
    }
    let stops: Vec<usize> = surfaces
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == SurfaceKind::Stop)
        .map(|(i, _)| i)
        .collect();
    if stops.len() != 1 {
        return Err(OpticsError::invalid(
            "surfaces",
            format!("exactly one stop surface required, found {}", stops.len()),
        ));
    }
    if stops[0] != stop_index {
        return Err(OpticsError::invalid(
            "stop_index",
            format!(
                "points at surface {stop_index} but the stop is surface {}",
                stops[0]
            ),
        ));
    }
    let last = surfaces.len() - 1;
    for (i, s) in surfaces.iter().enumerate() {
        let field = |name: &str| format!("surfaces[{i}].{name}");
        let is_image = s.kind == SurfaceKind::ImagePlane;
        if is_image != (i == last) {
            return Err(OpticsError::invalid(
                field("type"),
                "the last surface, and only the last, must be the image plane",
            ));
        }
        if !s.curvature.is_finite() {
            return Err(OpticsError::invalid(field("curvature"), "must be finite"));
        }
        if matches!(s.kind, SurfaceKind::Stop | SurfaceKind::ImagePlane) && s.curvature != 0.0 {
            return Err(OpticsError::invalid(
                field("curvature"),
                "stop and image plane must be flat",
            ));
        }
        if s.kind != SurfaceKind::Aspheric && !s.aspheric.is_empty() {
            return Err(OpticsError::invalid(
                field("aspheric"),
                "only aspheric surfaces take polynomial terms",
            ));
        }
        for &(j, m) in &s.aspheric {
            if !(2..=MAX_ASPHERIC_ORDER).contains(&j) || j % 2 != 0 {
                return Err(OpticsError::invalid(
                    field("aspheric"),
                    format!("order {j} must be even and within 2..={MAX_ASPHERIC_ORDER}"),
                ));
            }
            if !m.is_finite() {
                return Err(OpticsError::invalid(
                    field("aspheric"),
                    "coefficients must be finite",
                ));
            }
        }
        if !is_image {
            if !(s.semi_diameter.is_finite() && s.semi_diameter > 0.0) {
                return Err(OpticsError::invalid(field("semi_diameter"), "must be > 0"));
            }
            if s.curvature.abs() * s.semi_diameter >= 1.0 {
                return Err(OpticsError::invalid(
                    field("semi_diameter"),
                    "exceeds the hemisphere of the vertex curvature",
                ));
            }
            if !(s.thickness.is_finite()) {
                return Err(OpticsError::invalid(field("thickness"), "must be finite"));
            }
        }
        for &(nm, n) in s.index.points() {
            if !(n.is_finite() && n > 0.0) {
                return Err(OpticsError::invalid(
                    field("index"),
                    format!("index at {nm} nm must be > 0"),
                ));
            }
        }
    }
    Ok(())
}

fn validate_wavelengths(wavelengths: &[WavelengthSpec]) -> Result<(), OpticsError> {
    if wavelengths.is_empty() {
        return Err(OpticsError::invalid(
            "wavelengths",
            "at least one wavelength required",
        ));
    }
    let channels = wavelengths.iter().map(|w| w.channel + 1).max().unwrap_or(0);
    for (i, w) in wavelengths.iter().enumerate() {
        if !(w.nm.is_finite() && w.nm > 0.0) {
            return Err(OpticsError::invalid(
                format!("wavelengths[{i}].nm"),
                "must be > 0",
            ));
        }
        if !(w.weight.is_finite() && w.weight >= 0.0) {
            return Err(OpticsError::invalid(
                format!("wavelengths[{i}].weight"),
                "must be >= 0",
            ));
        }
    }
    for c in 0..channels {
        let sum: f64 = wavelengths
            .iter()
            .filter(|w| w.channel == c)
            .map(|w| w.weight)
            .sum();
        if (sum - 1.0).abs() > CHANNEL_WEIGHT_TOL {
            return Err(OpticsError::invalid(
                "wavelengths",
                format!("weights of channel {c} sum to {sum}, expected 1"),
            ));
        }
    }
    Ok(())
}
