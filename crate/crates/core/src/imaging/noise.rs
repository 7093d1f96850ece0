use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::buffer::ImageBuffer;
use super::ImageError;

/// Side of the square tiles that own independent random streams.
const NOISE_TILE: usize = 64;

/// Zero-mean Gaussian noise with variance `a·I + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub a: f64,
    pub b: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            a: 1e-3,
            b: 1e-4,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn new(a: f64, b: f64, seed: u64) -> Result<Self, ImageError> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(ImageError::InvalidConfig(format!(
                "noise parameters must be finite and non-negative, got a = {a}, b = {b}"
            )));
        }
        Ok(Self { a, b, seed })
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }
}

/// Adds noise and clamps to `[0, 1]`. Each 64×64 tile draws from its own
/// ChaCha stream keyed by `(seed, tile index)`, so the result does not
/// depend on the thread count.
pub fn add_noise(img: &ImageBuffer, model: &NoiseModel) -> ImageBuffer {
    let mut out = img.clone();
    if model.is_zero() {
        out.clamp_unit();
        return out;
    }
    let (h, w) = (img.height, img.width);
    let tiles_x = w.div_ceil(NOISE_TILE);
    let tiles = h.div_ceil(NOISE_TILE) * tiles_x;
    let samples: Vec<Vec<f64>> = (0..tiles)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
            rng.set_stream(t as u64);
            let (ty, tx) = (t / tiles_x, t % tiles_x);
            let ys = ty * NOISE_TILE..((ty + 1) * NOISE_TILE).min(h);
            let xs = tx * NOISE_TILE..((tx + 1) * NOISE_TILE).min(w);
            let mut vals = Vec::with_capacity(img.channels * ys.len() * xs.len());
            for c in 0..img.channels {
                for y in ys.clone() {
                    for x in xs.clone() {
                        let i = img.get(c, y, x);
                        let sd = (model.a * i + model.b).max(0.0).sqrt();
                        let z: f64 = StandardNormal.sample(&mut rng);
                        vals.push((i + sd * z).clamp(0.0, 1.0));
                    }
                }
            }
            vals
        })
        .collect();
    for (t, vals) in samples.into_iter().enumerate() {
        let (ty, tx) = (t / tiles_x, t % tiles_x);
        let ys = ty * NOISE_TILE..((ty + 1) * NOISE_TILE).min(h);
        let xs = tx * NOISE_TILE..((tx + 1) * NOISE_TILE).min(w);
        let mut it = vals.into_iter();
        for c in 0..img.channels {
            for y in ys.clone() {
                for x in xs.clone() {
                    out.set(c, y, x, it.next().unwrap());
                }
            }
        }
    }
    out
}
