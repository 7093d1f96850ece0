use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{leaky_relu, Conv2d, ParamFn, ParamFnMut, ResBlock};
use super::tensor::{Real, Tensor3};
use super::InnError;

const SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub width: usize,
    pub res_blocks: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            width: 64,
            res_blocks: 4,
        }
    }
}

/// Residual multi-scale enhancement net:
///
/// ```text
/// h = lrelu(conv7(x))                      full resolution
/// d = resblocks(lrelu(conv3/2(h)))         half resolution
/// u = lrelu(conv3(upsample2(d)))           back to full resolution
/// y = x + conv3(lrelu(conv1([h, u])))
/// ```
///
/// With all-zero weights the output equals the input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNet<T> {
    pub head: Conv2d<T>,
    pub down: Conv2d<T>,
    pub blocks: Vec<ResBlock<T>>,
    pub up: Conv2d<T>,
    pub fuse: Conv2d<T>,
    pub tail: Conv2d<T>,
}

/// Nearest-neighbour 2× upsampling cropped to `height × width`.
fn upsample2<T: Real>(t: &Tensor3<T>, height: usize, width: usize) -> Tensor3<T> {
    Tensor3::from_fn(t.channels, height, width, |c, y, x| t.get(c, y / 2, x / 2))
}

impl<T: Real> FeatureNet<T> {
    pub fn zeros(channels: usize, spec: &FeatureSpec) -> Self {
        let w = spec.width;
        Self {
            head: Conv2d::zeros(channels, w, 7, 1),
            down: Conv2d::zeros(w, w, 3, 2),
            blocks: (0..spec.res_blocks).map(|_| ResBlock::zeros(w)).collect(),
            up: Conv2d::zeros(w, w, 3, 1),
            fuse: Conv2d::zeros(2 * w, w, 1, 1),
            tail: Conv2d::zeros(w, channels, 3, 1),
        }
    }

    pub fn he_normal(channels: usize, spec: &FeatureSpec, rng: &mut impl Rng) -> Self {
        let w = spec.width;
        Self {
            head: Conv2d::he_normal(channels, w, 7, 1, 1.0, rng),
            down: Conv2d::he_normal(w, w, 3, 2, 1.0, rng),
            blocks: (0..spec.res_blocks)
                .map(|_| ResBlock::he_normal(w, rng))
                .collect(),
            up: Conv2d::he_normal(w, w, 3, 1, 1.0, rng),
            fuse: Conv2d::he_normal(2 * w, w, 1, 1, 1.0, rng),
            tail: Conv2d::he_normal(w, channels, 3, 1, 1.0, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.head.in_channels
    }

    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, InnError> {
        if x.channels != self.channels() {
            return Err(InnError::Shape(format!(
                "feature net expects {} channels, got {}",
                self.channels(),
                x.channels
            )));
        }
        let mut h = self.head.forward(x)?;
        leaky_relu(&mut h, SLOPE);
        let mut d = self.down.forward(&h)?;
        leaky_relu(&mut d, SLOPE);
        for b in &self.blocks {
            d = b.forward(&d)?;
        }
        let mut u = self.up.forward(&upsample2(&d, x.height, x.width))?;
        leaky_relu(&mut u, SLOPE);
        let mut f = self.fuse.forward(&Tensor3::concat(&[&h, &u])?)?;
        leaky_relu(&mut f, SLOPE);
        let mut out = self.tail.forward(&f)?;
        for (o, &v) in out.data.iter_mut().zip(&x.data) {
            *o = v + *o;
        }
        Ok(out)
    }

    pub fn params(&self, prefix: &str, f: &mut ParamFn<'_, T>) {
        self.head.params(&format!("{prefix}.head"), f);
        self.down.params(&format!("{prefix}.down"), f);
        for (i, b) in self.blocks.iter().enumerate() {
            b.params(&format!("{prefix}.res{i}"), f);
        }
        self.up.params(&format!("{prefix}.up"), f);
        self.fuse.params(&format!("{prefix}.fuse"), f);
        self.tail.params(&format!("{prefix}.tail"), f);
    }

    pub fn params_mut(&mut self, prefix: &str, f: &mut ParamFnMut<'_, T>) {
        self.head.params_mut(&format!("{prefix}.head"), f);
        self.down.params_mut(&format!("{prefix}.down"), f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.params_mut(&format!("{prefix}.res{i}"), f);
        }
        self.up.params_mut(&format!("{prefix}.up"), f);
        self.fuse.params_mut(&format!("{prefix}.fuse"), f);
        self.tail.params_mut(&format!("{prefix}.tail"), f);
    }
}
