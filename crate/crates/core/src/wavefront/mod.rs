//! Exit-pupil OPD maps, pupil functions, Fourier-optics PSFs and the
//! per-patch PSF grid used for spatially varying blur.

mod format;
mod grid;
mod illuminance;
mod kernel;
mod pupil;

pub use format::{
    decode_psfg, encode_psfg, read_psfg, render_mosaic_png, write_psfg, PSFG_MAGIC, PSFG_VERSION,
};
pub use grid::{
    field_kernels, magnification, psf_grid, psf_grid_with, FieldKernels, GridConfig, PsfGrid,
};
pub use illuminance::{
    illuminance_models, relative_illuminance, CosineFourth, IlluminanceModel, IlluminanceSample,
    RayStatistics,
};
pub use kernel::{bin_to_pixels, psf_from_asf, PsfKernel};
pub use pupil::{
    amplitude_spread, exit_pupil_z, pupil_function, sample_exit_pupil, ComplexGrid, FieldPoint,
    PupilConfig, PupilMap,
};

use thiserror::Error;

use crate::error::ErrorClass;
use crate::optics::OpticsError;

#[derive(Debug, Error)]
pub enum PsfError {
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error("degenerate field: {0}")]
    DegenerateField(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{failed} of {total} field points failed (limit {limit:.1}%)")]
    TooManyFieldFailures {
        failed: usize,
        total: usize,
        limit: f64,
    },
    #[error("malformed PSF grid file: {0}")]
    Format(String),
}

impl PsfError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PsfError::Optics(e) => e.class(),
            PsfError::InvalidConfig(_) => ErrorClass::Validation,
            PsfError::Format(_) => ErrorClass::Io,
            _ => ErrorClass::Numeric,
        }
    }
}
