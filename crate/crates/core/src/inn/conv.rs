use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::{Real, Tensor3};
use super::InnError;

/// Read-only parameter visitor: `(name, shape, values)`.
pub type ParamFn<'a, T> = dyn FnMut(String, Vec<usize>, &[T]) + 'a;
/// Mutable parameter visitor: `(name, shape, values)`.
pub type ParamFnMut<'a, T> = dyn FnMut(String, Vec<usize>, &mut [T]) + 'a;

/// 2-D convolution with zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `[out][in][ky][kx]`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        assert!(kernel % 2 == 1 && stride >= 1);
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: vec![T::zero(); out_channels * in_channels * kernel * kernel],
            bias: vec![T::zero(); out_channels],
        }
    }

    /// He-normal weights scaled by `gain`, zero bias.
    pub fn he_normal(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        gain: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut c = Self::zeros(in_channels, out_channels, kernel, stride);
        let std = gain * (2.0 / (in_channels * kernel * kernel) as f64).sqrt();
        for w in &mut c.weight {
            let z: f64 = StandardNormal.sample(rng);
            *w = T::of(std * z);
        }
        c
    }

    pub fn forward(&self, input: &Tensor3<T>) -> Result<Tensor3<T>, InnError> {
        if input.channels != self.in_channels {
            return Err(InnError::Shape(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels, input.channels
            )));
        }
        let (h, w) = (input.height, input.width);
        let s = self.stride;
        let (oh, ow) = (h.div_ceil(s), w.div_ceil(s));
        let k = self.kernel;
        let p = k / 2;
        let mut out = Tensor3::zeros(self.out_channels, oh, ow);
        for o in 0..self.out_channels {
            let dst = out.plane_mut(o);
            dst.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_channels {
                let src = input.plane(i);
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = self.weight[((o * self.in_channels + i) * k + ky) * k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        for y in 0..oh {
                            let sy = (y * s + ky) as isize - p as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let row = &src[sy as usize * w..(sy as usize + 1) * w];
                            let drow = &mut dst[y * ow..(y + 1) * ow];
                            // Output columns whose source column lies inside the row.
                            let x0 = p.saturating_sub(kx).div_ceil(s);
                            let x1 = ((w + p).saturating_sub(kx).div_ceil(s)).min(ow);
                            if x1 <= x0 {
                                continue;
                            }
                            if s == 1 {
                                let off = x0 + kx - p;
                                for (d, &v) in
                                    drow[x0..x1].iter_mut().zip(&row[off..off + (x1 - x0)])
                                {
                                    *d = *d + wv * v;
                                }
                            } else {
                                for x in x0..x1 {
                                    drow[x] = drow[x] + wv * row[x * s + kx - p];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn params(&self, prefix: &str, f: &mut ParamFn<'_, T>) {
        let k = self.kernel;
        f(
            format!("{prefix}.weight"),
            vec![self.out_channels, self.in_channels, k, k],
            &self.weight,
        );
        f(
            format!("{prefix}.bias"),
            vec![self.out_channels],
            &self.bias,
        );
    }

    pub fn params_mut(&mut self, prefix: &str, f: &mut ParamFnMut<'_, T>) {
        let k = self.kernel;
        f(
            format!("{prefix}.weight"),
            vec![self.out_channels, self.in_channels, k, k],
            &mut self.weight,
        );
        f(
            format!("{prefix}.bias"),
            vec![self.out_channels],
            &mut self.bias,
        );
    }
}

pub fn leaky_relu<T: Real>(t: &mut Tensor3<T>, slope: f64) {
    let a = T::of(slope);
    t.data.iter_mut().for_each(|v| {
        if *v < T::zero() {
            *v = *v * a;
        }
    });
}

pub fn relu<T: Real>(t: &mut Tensor3<T>) {
    leaky_relu(t, 0.0);
}

/// `x + conv2(relu(conv1(x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock<T> {
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
}

impl<T: Real> ResBlock<T> {
    pub fn zeros(channels: usize) -> Self {
        Self {
            conv1: Conv2d::zeros(channels, channels, 3, 1),
            conv2: Conv2d::zeros(channels, channels, 3, 1),
        }
    }

    pub fn he_normal(channels: usize, rng: &mut impl Rng) -> Self {
        Self {
            conv1: Conv2d::he_normal(channels, channels, 3, 1, 1.0, rng),
            conv2: Conv2d::he_normal(channels, channels, 3, 1, 1.0, rng),
        }
    }

    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, InnError> {
        let mut h = self.conv1.forward(x)?;
        relu(&mut h);
        let mut out = self.conv2.forward(&h)?;
        for (o, &v) in out.data.iter_mut().zip(&x.data) {
            *o = *o + v;
        }
        Ok(out)
    }

    pub fn params(&self, prefix: &str, f: &mut ParamFn<'_, T>) {
        self.conv1.params(&format!("{prefix}.conv1"), f);
        self.conv2.params(&format!("{prefix}.conv2"), f);
    }

    pub fn params_mut(&mut self, prefix: &str, f: &mut ParamFnMut<'_, T>) {
        self.conv1.params_mut(&format!("{prefix}.conv1"), f);
        self.conv2.params_mut(&format!("{prefix}.conv2"), f);
    }
}
