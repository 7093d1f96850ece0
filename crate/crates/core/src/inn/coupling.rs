use rand::Rng;
use serde::{Deserialize, Serialize};

use super::condition::{ConditionCode, CONDITION_BITS};
use super::conv::{leaky_relu, Conv2d, ParamFn, ParamFnMut, ResBlock};
use super::tensor::{Real, Tensor3};
use super::InnError;

/// Slope of the leaky ReLU after the subnet head.
const HEAD_SLOPE: f64 = 0.2;

/// Layer sizes of the coupling subnets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubnetSpec {
    pub hidden: usize,
    pub head_kernel: usize,
    pub res_blocks: usize,
    /// Extra factor on the He-normal scale of the output projection. Small
    /// values keep an untrained random chain of twelve blocks from
    /// overflowing.
    pub output_gain: f64,
}

impl Default for SubnetSpec {
    fn default() -> Self {
        Self {
            hidden: 32,
            head_kernel: 7,
            res_blocks: 2,
            output_gain: 0.01,
        }
    }
}

/// Conv(head) → leaky ReLU → residual blocks → 3×3 projection; spatial size
/// is preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Subnet<T> {
    pub head: Conv2d<T>,
    pub blocks: Vec<ResBlock<T>>,
    pub out: Conv2d<T>,
}

impl<T: Real> Subnet<T> {
    pub fn zeros(spec: &SubnetSpec, inputs: usize, outputs: usize) -> Self {
        Self {
            head: Conv2d::zeros(inputs, spec.hidden, spec.head_kernel, 1),
            blocks: (0..spec.res_blocks)
                .map(|_| ResBlock::zeros(spec.hidden))
                .collect(),
            out: Conv2d::zeros(spec.hidden, outputs, 3, 1),
        }
    }

    pub fn he_normal(spec: &SubnetSpec, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Self {
            head: Conv2d::he_normal(inputs, spec.hidden, spec.head_kernel, 1, 1.0, rng),
            blocks: (0..spec.res_blocks)
                .map(|_| ResBlock::he_normal(spec.hidden, rng))
                .collect(),
            out: Conv2d::he_normal(spec.hidden, outputs, 3, 1, spec.output_gain, rng),
        }
    }

    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, InnError> {
        let mut h = self.head.forward(x)?;
        leaky_relu(&mut h, HEAD_SLOPE);
        for b in &self.blocks {
            h = b.forward(&h)?;
        }
        self.out.forward(&h)
    }

    pub fn params(&self, prefix: &str, f: &mut ParamFn<'_, T>) {
        self.head.params(&format!("{prefix}.head"), f);
        for (i, b) in self.blocks.iter().enumerate() {
            b.params(&format!("{prefix}.res{i}"), f);
        }
        self.out.params(&format!("{prefix}.out"), f);
    }

    pub fn params_mut(&mut self, prefix: &str, f: &mut ParamFnMut<'_, T>) {
        self.head.params_mut(&format!("{prefix}.head"), f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.params_mut(&format!("{prefix}.res{i}"), f);
        }
        self.out.params_mut(&format!("{prefix}.out"), f);
    }
}

/// Conditional affine coupling on a channel split `u = (u₁, u₂)`:
///
/// ```text
/// u₁' = u₁ ⊙ exp(ψ(u₂, h)) + φ(u₂)
/// u₂' = u₂ ⊙ exp(ρ(u₁')) + η(u₁')
/// ```
///
/// `ψ` is bounded by `clamp · tanh(·)`; the condition `h` enters `ψ` only, as
/// seven constant planes appended to `u₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<T> {
    pub split: usize,
    pub channels: usize,
    pub clamp: f64,
    pub psi: Subnet<T>,
    pub phi: Subnet<T>,
    pub rho: Subnet<T>,
    pub eta: Subnet<T>,
}

pub const PSI_CLAMP: f64 = 2.0;

fn check_channels(channels: usize) -> Result<usize, InnError> {
    if channels < 2 || !channels.is_multiple_of(2) {
        Err(InnError::OddChannels(channels))
    } else {
        Ok(channels / 2)
    }
}

impl<T: Real> Coupling<T> {
    pub fn zeros(channels: usize, spec: &SubnetSpec) -> Result<Self, InnError> {
        let c1 = check_channels(channels)?;
        let c2 = channels - c1;
        Ok(Self {
            split: c1,
            channels,
            clamp: PSI_CLAMP,
            psi: Subnet::zeros(spec, c2 + CONDITION_BITS, c1),
            phi: Subnet::zeros(spec, c2, c1),
            rho: Subnet::zeros(spec, c1, c2),
            eta: Subnet::zeros(spec, c1, c2),
        })
    }

    pub fn he_normal(
        channels: usize,
        spec: &SubnetSpec,
        rng: &mut impl Rng,
    ) -> Result<Self, InnError> {
        let c1 = check_channels(channels)?;
        let c2 = channels - c1;
        Ok(Self {
            split: c1,
            channels,
            clamp: PSI_CLAMP,
            psi: Subnet::he_normal(spec, c2 + CONDITION_BITS, c1, rng),
            phi: Subnet::he_normal(spec, c2, c1, rng),
            rho: Subnet::he_normal(spec, c1, c2, rng),
            eta: Subnet::he_normal(spec, c1, c2, rng),
        })
    }

    fn check(&self, u: &Tensor3<T>) -> Result<(), InnError> {
        if u.channels != self.channels {
            return Err(InnError::Shape(format!(
                "coupling expects {} channels, got {}",
                self.channels, u.channels
            )));
        }
        Ok(())
    }

    /// Clamped `ψ(u₂, h)`.
    fn psi_out(&self, u2: &Tensor3<T>, h: &ConditionCode) -> Result<Tensor3<T>, InnError> {
        let planes = h.planes::<T>(u2.height, u2.width);
        let raw = self.psi.forward(&Tensor3::concat(&[u2, &planes])?)?;
        let a = T::of(self.clamp);
        Ok(raw.map(|v| a * v.tanh()))
    }

    /// Returns the output and `log|det J| = Σψ + Σρ`.
    pub fn forward(
        &self,
        u: &Tensor3<T>,
        h: &ConditionCode,
    ) -> Result<(Tensor3<T>, f64), InnError> {
        self.check(u)?;
        let u1 = u.channel_range(0, self.split);
        let u2 = u.channel_range(self.split, self.channels);
        let psi = self.psi_out(&u2, h)?;
        let phi = self.phi.forward(&u2)?;
        let mut v1 = u1;
        for ((v, &s), &t) in v1.data.iter_mut().zip(&psi.data).zip(&phi.data) {
            *v = *v * s.exp() + t;
        }
        let rho = self.rho.forward(&v1)?;
        let eta = self.eta.forward(&v1)?;
        let mut v2 = u2;
        for ((v, &s), &t) in v2.data.iter_mut().zip(&rho.data).zip(&eta.data) {
            *v = *v * s.exp() + t;
        }
        let logdet = psi.data.iter().map(|v| v.f64()).sum::<f64>()
            + rho.data.iter().map(|v| v.f64()).sum::<f64>();
        Ok((Tensor3::concat(&[&v1, &v2])?, logdet))
    }

    /// Exact algebraic inverse of [`Coupling::forward`].
    pub fn inverse(&self, v: &Tensor3<T>, h: &ConditionCode) -> Result<Tensor3<T>, InnError> {
        self.check(v)?;
        let v1 = v.channel_range(0, self.split);
        let mut u2 = v.channel_range(self.split, self.channels);
        let rho = self.rho.forward(&v1)?;
        let eta = self.eta.forward(&v1)?;
        for ((x, &s), &t) in u2.data.iter_mut().zip(&rho.data).zip(&eta.data) {
            *x = (*x - t) * (-s).exp();
        }
        let psi = self.psi_out(&u2, h)?;
        let phi = self.phi.forward(&u2)?;
        let mut u1 = v1;
        for ((x, &s), &t) in u1.data.iter_mut().zip(&psi.data).zip(&phi.data) {
            *x = (*x - t) * (-s).exp();
        }
        Tensor3::concat(&[&u1, &u2])
    }

    pub fn params(&self, prefix: &str, f: &mut ParamFn<'_, T>) {
        self.psi.params(&format!("{prefix}.psi"), f);
        self.phi.params(&format!("{prefix}.phi"), f);
        self.rho.params(&format!("{prefix}.rho"), f);
        self.eta.params(&format!("{prefix}.eta"), f);
    }

    pub fn params_mut(&mut self, prefix: &str, f: &mut ParamFnMut<'_, T>) {
        self.psi.params_mut(&format!("{prefix}.psi"), f);
        self.phi.params_mut(&format!("{prefix}.phi"), f);
        self.rho.params_mut(&format!("{prefix}.rho"), f);
        self.eta.params_mut(&format!("{prefix}.eta"), f);
    }
}
