use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

use super::InnError;
use crate::imaging::ImageBuffer;

/// Floating-point element type of the network (`f32` or `f64`).
pub trait Real: Float + Sum + Default + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
}

/// Channel-major `C × H × W` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_vec(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<T>,
    ) -> Result<Self, InnError> {
        if channels == 0 || height == 0 || width == 0 || data.len() != channels * height * width {
            return Err(InnError::Shape(format!(
                "{} values for a {channels}×{height}×{width} tensor",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    /// `f(channel, y, x)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor3<U> {
        Tensor3 {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    /// Channels `from..to`.
    pub fn channel_range(&self, from: usize, to: usize) -> Self {
        let n = self.plane_len();
        Self {
            channels: to - from,
            height: self.height,
            width: self.width,
            data: self.data[from * n..to * n].to_vec(),
        }
    }

    /// Stacks along the channel axis.
    pub fn concat(parts: &[&Self]) -> Result<Self, InnError> {
        let (h, w) = (parts[0].height, parts[0].width);
        if parts.iter().any(|p| p.height != h || p.width != w) {
            return Err(InnError::Shape(
                "concatenated tensors differ in spatial size".into(),
            ));
        }
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            channels: parts.iter().map(|p| p.channels).sum(),
            height: h,
            width: w,
            data,
        })
    }

    /// Largest elementwise absolute difference; infinite if any value is not
    /// finite.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.f64() - b.f64()).abs())
            .fold(0.0, |m, d| {
                if d.is_nan() || m.is_infinite() {
                    f64::INFINITY
                } else {
                    m.max(d)
                }
            })
    }

    pub fn from_image(img: &ImageBuffer) -> Self {
        Self {
            channels: img.channels,
            height: img.height,
            width: img.width,
            data: img.data.iter().map(|&v| T::of(v)).collect(),
        }
    }

    pub fn to_image(&self) -> Result<ImageBuffer, InnError> {
        ImageBuffer::new(
            self.height,
            self.width,
            self.channels,
            self.data.iter().map(|v| v.f64()).collect(),
        )
        .map_err(|e| InnError::Shape(e.to_string()))
    }
}

/// `C × H × W → 4C × H/2 × W/2`. Output channel `4c + s` holds sub-lattice
/// `s` of input channel `c`, with `s` = 0 (even row, even column),
/// 1 (even row, odd column), 2 (odd row, even column), 3 (odd row, odd
/// column).
pub fn squeeze<T: Real>(t: &Tensor3<T>) -> Result<Tensor3<T>, InnError> {
    if !t.height.is_multiple_of(2) || !t.width.is_multiple_of(2) {
        return Err(InnError::OddSpatial {
            height: t.height,
            width: t.width,
        });
    }
    let (h2, w2) = (t.height / 2, t.width / 2);
    let mut out = Tensor3::zeros(4 * t.channels, h2, w2);
    for c in 0..t.channels {
        for s in 0..4 {
            let (dy, dx) = (s / 2, s % 2);
            let dst = out.plane_mut(4 * c + s);
            for y in 0..h2 {
                for x in 0..w2 {
                    dst[y * w2 + x] = t.get(c, 2 * y + dy, 2 * x + dx);
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`squeeze`].
pub fn unsqueeze<T: Real>(t: &Tensor3<T>) -> Result<Tensor3<T>, InnError> {
    if !t.channels.is_multiple_of(4) {
        return Err(InnError::Shape(format!(
            "unsqueeze needs a multiple of 4 channels, got {}",
            t.channels
        )));
    }
    let (h, w) = (2 * t.height, 2 * t.width);
    let mut out = Tensor3::zeros(t.channels / 4, h, w);
    for c in 0..t.channels / 4 {
        for s in 0..4 {
            let (dy, dx) = (s / 2, s % 2);
            let src = t.plane(4 * c + s);
            let dst = out.plane_mut(c);
            for y in 0..t.height {
                for x in 0..t.width {
                    dst[(2 * y + dy) * w + 2 * x + dx] = src[y * t.width + x];
                }
            }
        }
    }
    Ok(out)
}
