use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::condition::{encode_condition, ConditionCode};
use super::coupling::{Coupling, SubnetSpec};
use super::features::{FeatureNet, FeatureSpec};
use super::mixer::ChannelMixer;
use super::tensor::{squeeze, unsqueeze, Real, Tensor3};
use super::InnError;

/// One named parameter array, as stored in weight files.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Squeeze → 1×1 mix → conditional coupling → unsqueeze.
#[derive(Debug, Clone, PartialEq)]
pub struct InvBlock<T> {
    pub mixer: ChannelMixer,
    pub coupling: Coupling<T>,
}

impl<T: Real> InvBlock<T> {
    pub fn forward(
        &self,
        t: &Tensor3<T>,
        h: &ConditionCode,
    ) -> Result<(Tensor3<T>, f64), InnError> {
        let s = squeeze(t)?;
        let mix_logdet = (s.height * s.width) as f64 * self.mixer.log_abs_det();
        let m = self.mixer.mix(&s)?;
        let (c, logdet) = self.coupling.forward(&m, h)?;
        Ok((unsqueeze(&c)?, logdet + mix_logdet))
    }

    pub fn inverse(&self, t: &Tensor3<T>, h: &ConditionCode) -> Result<Tensor3<T>, InnError> {
        let s = squeeze(t)?;
        let c = self.coupling.inverse(&s, h)?;
        unsqueeze(&self.mixer.unmix(&c)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Seeded He-normal subnets and random orthogonal mixers.
    Random,
    /// All-zero subnets and identity mixers: the whole network is the
    /// identity.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnConfig {
    /// Number of invertible blocks.
    pub k: usize,
    /// Image channels.
    pub channels: usize,
    pub subnet: SubnetSpec,
    pub features: FeatureSpec,
    pub seed: u64,
    pub init: Init,
}

impl Default for InnConfig {
    fn default() -> Self {
        Self {
            k: 12,
            channels: 3,
            subnet: SubnetSpec::default(),
            features: FeatureSpec::default(),
            seed: 0,
            init: Init::Random,
        }
    }
}

/// Independent stream `id` of the configuration seed.
fn component_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const FORWARD_FEATURES: u64 = 1;
const REVERSE_FEATURES: u64 = 2;
const BLOCK_STREAM_BASE: u64 = 1 << 16;

/// Forward feature net followed by the invertible block chain. Only the
/// block chain is a bijection; the two feature nets are separate,
/// unconstrained networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalInn<T> {
    pub config: InnConfig,
    pub blocks: Vec<InvBlock<T>>,
    pub forward_features: FeatureNet<T>,
    pub reverse_features: FeatureNet<T>,
}

impl<T: Real> ConditionalInn<T> {
    pub fn new(config: InnConfig) -> Result<Self, InnError> {
        let inner = 4 * config.channels;
        let mut blocks = Vec::with_capacity(config.k);
        for i in 0..config.k {
            let block = match config.init {
                Init::Zero => InvBlock {
                    mixer: ChannelMixer::identity(inner),
                    coupling: Coupling::zeros(inner, &config.subnet)?,
                },
                Init::Random => {
                    let mut rng = component_rng(config.seed, BLOCK_STREAM_BASE + i as u64);
                    let mixer = ChannelMixer::random_orthogonal(inner, rng.next_u64());
                    InvBlock {
                        mixer,
                        coupling: Coupling::he_normal(inner, &config.subnet, &mut rng)?,
                    }
                }
            };
            blocks.push(block);
        }
        let (forward_features, reverse_features) = match config.init {
            Init::Zero => (
                FeatureNet::zeros(config.channels, &config.features),
                FeatureNet::zeros(config.channels, &config.features),
            ),
            Init::Random => (
                FeatureNet::he_normal(
                    config.channels,
                    &config.features,
                    &mut component_rng(config.seed, FORWARD_FEATURES),
                ),
                FeatureNet::he_normal(
                    config.channels,
                    &config.features,
                    &mut component_rng(config.seed, REVERSE_FEATURES),
                ),
            ),
        };
        Ok(Self {
            config,
            blocks,
            forward_features,
            reverse_features,
        })
    }

    fn check_input(&self, t: &Tensor3<T>) -> Result<(), InnError> {
        if t.channels != self.config.channels {
            return Err(InnError::Shape(format!(
                "network expects {} channels, got {}",
                self.config.channels, t.channels
            )));
        }
        if !t.height.is_multiple_of(2) || !t.width.is_multiple_of(2) {
            return Err(InnError::OddSpatial {
                height: t.height,
                width: t.width,
            });
        }
        Ok(())
    }

    /// Block chain only; returns the output and the summed log-determinant.
    pub fn forward_blocks(
        &self,
        t: &Tensor3<T>,
        h: &ConditionCode,
    ) -> Result<(Tensor3<T>, f64), InnError> {
        self.check_input(t)?;
        let mut x = t.clone();
        let mut logdet = 0.0;
        for b in &self.blocks {
            let (y, ld) = b.forward(&x, h)?;
            x = y;
            logdet += ld;
        }
        Ok((x, logdet))
    }

    pub fn inverse_blocks(
        &self,
        t: &Tensor3<T>,
        h: &ConditionCode,
    ) -> Result<Tensor3<T>, InnError> {
        self.check_input(t)?;
        let mut x = t.clone();
        for b in self.blocks.iter().rev() {
            x = b.inverse(&x, h)?;
        }
        Ok(x)
    }

    /// Degraded image `y` at distance `d` mm to the restored estimate.
    pub fn forward(&self, y: &Tensor3<T>, d: f64) -> Result<Tensor3<T>, InnError> {
        let h = encode_condition(d)?;
        self.check_input(y)?;
        let features = self.forward_features.forward(y)?;
        Ok(self.forward_blocks(&features, &h)?.0)
    }

    /// Sharp image `x` at distance `d` mm to the re-degraded estimate.
    pub fn inverse(&self, x: &Tensor3<T>, d: f64) -> Result<Tensor3<T>, InnError> {
        let h = encode_condition(d)?;
        let z = self.inverse_blocks(x, &h)?;
        self.reverse_features.forward(&z)
    }

    /// Every parameter in storage order.
    pub fn export(&self) -> Vec<NamedTensor> {
        let mut out = Vec::new();
        let mut push = |name: String, shape: Vec<usize>, data: &[T]| {
            out.push(NamedTensor {
                name,
                shape,
                data: data.iter().map(|v| v.f64() as f32).collect(),
            })
        };
        self.forward_features.params("features.forward", &mut push);
        self.reverse_features.params("features.reverse", &mut push);
        for (i, b) in self.blocks.iter().enumerate() {
            let c = b.mixer.channels();
            push(
                format!("blocks.{i}.mix.weight"),
                vec![c, c],
                &b.mixer
                    .weight()
                    .iter()
                    .map(|&v| T::of(v))
                    .collect::<Vec<_>>(),
            );
            b.coupling
                .params(&format!("blocks.{i}.coupling"), &mut push);
        }
        out
    }

    /// Replaces every parameter; names and shapes must match [`Self::export`]
    /// order exactly.
    pub fn import(&mut self, tensors: &[NamedTensor]) -> Result<(), InnError> {
        let mut iter = tensors.iter();
        let mut error: Option<InnError> = None;
        let mut take = |name: String, shape: Vec<usize>| -> Option<&NamedTensor> {
            if error.is_some() {
                return None;
            }
            match iter.next() {
                Some(t) if t.name == name && t.shape == shape => Some(t),
                Some(t) => {
                    error = Some(InnError::WeightFormat(format!(
                        "expected {name} {shape:?}, found {} {:?}",
                        t.name, t.shape
                    )));
                    None
                }
                None => {
                    error = Some(InnError::WeightFormat(format!("missing tensor {name}")));
                    None
                }
            }
        };
        let mut fill = |name: String, shape: Vec<usize>, dst: &mut [T]| {
            if let Some(t) = take(name, shape) {
                for (d, &s) in dst.iter_mut().zip(&t.data) {
                    *d = T::of(s as f64);
                }
            }
        };
        self.forward_features
            .params_mut("features.forward", &mut fill);
        self.reverse_features
            .params_mut("features.reverse", &mut fill);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let c = b.mixer.channels();
            let mut w = vec![T::zero(); c * c];
            fill(format!("blocks.{i}.mix.weight"), vec![c, c], &mut w);
            b.mixer = ChannelMixer::from_matrix(c, w.iter().map(|v| v.f64()).collect())?;
            b.coupling
                .params_mut(&format!("blocks.{i}.coupling"), &mut fill);
        }
        if let Some(e) = error {
            return Err(e);
        }
        if iter.next().is_some() {
            return Err(InnError::WeightFormat("unexpected trailing tensors".into()));
        }
        Ok(())
    }
}
