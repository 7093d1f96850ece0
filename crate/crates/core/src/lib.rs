//! Physics-based synthesis of optically degraded images and the invertible
//! building blocks of a conditional aberration-correction network.
//!
//! The crate is split along the processing chain:
//!
//! - [`optics`]: lens prescriptions and sequential geometric ray tracing.
//! - [`wavefront`]: exit-pupil OPD maps, pupil functions and per-field PSFs.
//! - [`imaging`]: spatially varying blur, sensor noise, datasets and image metrics.
//! - [`inn`]: squeeze, invertible channel mixing, conditional affine coupling,
//!   feature extraction and loss kernels.
//!
//! Interchangeable algorithms (convolution backends, illuminance models,
//! perceptual feature extractors) live behind traits and are looked up by
//! name through a [`registry::Registry`].

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
mod fft;
pub mod imaging;
pub mod inn;
pub mod optics;
pub mod registry;
pub mod wavefront;

pub use error::{Error, Result};
