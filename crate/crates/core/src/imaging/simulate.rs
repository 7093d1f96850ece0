use super::buffer::ImageBuffer;
use super::convolve::{convolution_backends, convolve_patchwise_with, PatchConfig};
use super::noise::{add_noise, NoiseModel};
use super::ImageError;
use crate::error::Result;
use crate::optics::LensPrescription;
use crate::wavefront::{psf_grid, GridConfig, PsfGrid};

/// Supported object displacements from the in-focus plane, mm.
pub const DISTANCE_RANGE_MM: (f64, f64) = (-125.0, 125.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub grid: GridConfig,
    pub patch: PatchConfig,
    /// Name of the convolution backend, see [`convolution_backends`].
    pub backend: String,
    /// Noise parameters; the seed is supplied per call.
    pub noise: Option<(f64, f64)>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let noise = NoiseModel::default();
        Self {
            grid: GridConfig::default(),
            patch: PatchConfig::default(),
            backend: "auto".into(),
            noise: Some((noise.a, noise.b)),
        }
    }
}

/// Blur, illuminance and noise for object displacement `d` mm.
pub fn simulate(
    img: &ImageBuffer,
    prescription: &LensPrescription,
    d: f64,
    config: &SimulationConfig,
    seed: u64,
) -> Result<ImageBuffer> {
    let (lo, hi) = DISTANCE_RANGE_MM;
    if !(lo..=hi).contains(&d) {
        return Err(
            ImageError::InvalidConfig(format!("distance {d} mm outside [{lo}, {hi}]")).into(),
        );
    }
    let grid = psf_grid(prescription, d, [img.height, img.width], &config.grid)?;
    simulate_with_grid(img, &grid, config, seed)
}

/// The convolution and noise stages with a precomputed grid.
pub fn simulate_with_grid(
    img: &ImageBuffer,
    grid: &PsfGrid,
    config: &SimulationConfig,
    seed: u64,
) -> Result<ImageBuffer> {
    let backend = convolution_backends().create(&config.backend)?;
    let mut blurred = convolve_patchwise_with(img, grid, &config.patch, backend.as_ref())?;
    Ok(match config.noise {
        Some((a, b)) => add_noise(&blurred, &NoiseModel::new(a, b, seed)?),
        None => {
            blurred.clamp_unit();
            blurred
        }
    })
}
