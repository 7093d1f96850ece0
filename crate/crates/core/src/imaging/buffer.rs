use std::path::Path;

use image::{DynamicImage, ImageBuffer as RawImage, Luma, Rgb};

use super::ImageError;
use crate::error::{Error, Result};

/// Planar linear-intensity image: `data[(channel * height + y) * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if height == 0 || width == 0 || !(channels == 1 || channels == 3) {
            return Err(ImageError::InvalidConfig(format!(
                "image must be non-empty with 1 or 3 channels, got {height}×{width}×{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(ImageError::DimensionMismatch(format!(
                "{} samples for a {height}×{width}×{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
        .expect("valid dimensions")
    }

    /// `f(channel, y, x)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(height, width, channels, data).expect("valid dimensions")
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, channel: usize, y: usize, x: usize, v: f64) {
        self.data[(channel * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        (self.height, self.width, self.channels) == (other.height, other.width, other.channels)
    }

    pub fn clamp_unit(&mut self) {
        self.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }

    /// Mean over channels, one plane.
    pub fn luminance(&self) -> Vec<f64> {
        let n = self.height * self.width;
        let mut out = vec![0.0; n];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(self.plane(c)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= self.channels as f64);
        out
    }

    /// Decodes any supported file. Sample values are taken as linear
    /// intensity; alpha is dropped and grey stays single-channel.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = image::load_from_memory(&bytes).map_err(|e| ImageError::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        if img.color().has_color() {
            let rgb = img.to_rgb32f();
            Self::from_fn(h, w, 3, |c, y, x| {
                rgb.get_pixel(x as u32, y as u32).0[c] as f64
            })
        } else {
            let grey = img.to_luma32f();
            Self::from_fn(h, w, 1, |_, y, x| {
                grey.get_pixel(x as u32, y as u32).0[0] as f64
            })
        }
    }

    fn to_u16(v: f64) -> u16 {
        (v.clamp(0.0, 1.0) * 65535.0).round() as u16
    }

    /// 16-bit PNG, values clamped to `[0, 1]`.
    pub fn save_png16(&self, path: &Path) -> Result<()> {
        let (w, h) = (self.width as u32, self.height as u32);
        let dynamic = if self.channels == 1 {
            DynamicImage::ImageLuma16(RawImage::<Luma<u16>, Vec<u16>>::from_fn(w, h, |x, y| {
                Luma([Self::to_u16(self.get(0, y as usize, x as usize))])
            }))
        } else {
            DynamicImage::ImageRgb16(RawImage::<Rgb<u16>, Vec<u16>>::from_fn(w, h, |x, y| {
                let (x, y) = (x as usize, y as usize);
                Rgb([0, 1, 2].map(|c| Self::to_u16(self.get(c, y, x))))
            }))
        };
        dynamic
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => ImageError::Encode {
                    path: path.to_path_buf(),
                    message: other.to_string(),
                }
                .into(),
            })
    }
}
