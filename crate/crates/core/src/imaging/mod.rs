//! Image degradation (patch-wise spatially varying blur, illuminance,
//! sensor noise), dataset generation and image-quality metrics.

mod buffer;
mod convolve;
mod dataset;
mod metrics;
mod mtf;
mod noise;
mod simulate;

pub use buffer::ImageBuffer;
pub use convolve::{
    convolution_backends, convolve_patchwise, convolve_patchwise_with, patch_bounds, reflect_index,
    AutoBackend, ConvolutionBackend, DirectBackend, FftBackend, PatchConfig,
};
pub use dataset::{
    default_distances, distance_range, entry_seed, generate_dataset, DatasetConfig, DatasetEntry,
    DatasetFailure, DatasetManifest, DatasetReport, GridCache, MANIFEST_VERSION,
};
pub use metrics::{psnr, ssim, PSNR_CAP_DB};
pub use mtf::{mtf50, mtf_from_psf, slanted_edge_mtf, write_mtf_csv, Mtf50, MtfCurve, Roi};
pub use noise::{add_noise, NoiseModel};
pub use simulate::{simulate, simulate_with_grid, SimulationConfig, DISTANCE_RANGE_MM};

use std::path::PathBuf;

use thiserror::Error;

use crate::error::ErrorClass;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{kernel}×{kernel} kernel does not fit a {patch}-pixel patch")]
    KernelTooLarge { kernel: usize, patch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("cannot encode {path}: {message}")]
    Encode { path: PathBuf, message: String },
    #[error("no edge found: {0}")]
    NoEdge(String),
    #[error("malformed manifest: {0}")]
    Manifest(String),
}

impl ImageError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ImageError::Decode { .. } | ImageError::Encode { .. } | ImageError::Manifest(_) => {
                ErrorClass::Io
            }
            ImageError::NoEdge(_) => ErrorClass::Numeric,
            _ => ErrorClass::Validation,
        }
    }
}
