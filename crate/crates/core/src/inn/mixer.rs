use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::{Real, Tensor3};
use super::InnError;

/// Smallest accepted `|det W|`.
pub const MIN_DETERMINANT: f64 = 1e-8;

/// Invertible 1×1 convolution: every pixel's channel vector is multiplied
/// by `W`. The inverse and `log|det W|` are computed once, in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMixer {
    channels: usize,
    weight: Vec<f64>,
    inverse: Vec<f64>,
    log_abs_det: f64,
}

impl ChannelMixer {
    /// Row-major `C × C` matrix.
    pub fn from_matrix(channels: usize, weight: Vec<f64>) -> Result<Self, InnError> {
        if weight.len() != channels * channels || channels == 0 {
            return Err(InnError::Shape(format!(
                "{} entries for a {channels}×{channels} mixing matrix",
                weight.len()
            )));
        }
        let m = DMatrix::from_row_slice(channels, channels, &weight);
        let det = m.determinant();
        if !(det.abs() >= MIN_DETERMINANT) {
            return Err(InnError::SingularMatrix { det });
        }
        let inv = m
            .clone()
            .try_inverse()
            .ok_or(InnError::SingularMatrix { det })?;
        Ok(Self {
            channels,
            weight,
            inverse: inv.transpose().as_slice().to_vec(),
            log_abs_det: det.abs().ln(),
        })
    }

    pub fn identity(channels: usize) -> Self {
        Self::from_matrix(
            channels,
            DMatrix::<f64>::identity(channels, channels)
                .as_slice()
                .to_vec(),
        )
        .expect("identity is invertible")
    }

    /// Random orthogonal matrix: QR of a seeded Gaussian matrix with the
    /// signs of `R`'s diagonal folded into `Q`.
    pub fn random_orthogonal(channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::<f64>::from_fn(channels, channels, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..channels {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Self::from_matrix(channels, q.transpose().as_slice().to_vec())
            .expect("orthogonal matrices are invertible")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Row-major.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn inverse(&self) -> &[f64] {
        &self.inverse
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    fn apply<T: Real>(&self, m: &[f64], t: &Tensor3<T>) -> Result<Tensor3<T>, InnError> {
        let c = self.channels;
        if t.channels != c {
            return Err(InnError::Shape(format!(
                "mixer expects {c} channels, got {}",
                t.channels
            )));
        }
        let m: Vec<T> = m.iter().map(|&v| T::of(v)).collect();
        let mut out = Tensor3::zeros(c, t.height, t.width);
        for i in 0..c {
            let dst = out.plane_mut(i);
            for j in 0..c {
                let w = m[i * c + j];
                if w == T::zero() {
                    continue;
                }
                for (d, &s) in dst.iter_mut().zip(t.plane(j)) {
                    *d = *d + w * s;
                }
            }
        }
        Ok(out)
    }

    pub fn mix<T: Real>(&self, t: &Tensor3<T>) -> Result<Tensor3<T>, InnError> {
        self.apply(&self.weight, t)
    }

    pub fn unmix<T: Real>(&self, t: &Tensor3<T>) -> Result<Tensor3<T>, InnError> {
        self.apply(&self.inverse, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_with_inverse_is_identity() {
        let m = ChannelMixer::random_orthogonal(12, 3);
        let (w, v) = (m.weight(), m.inverse());
        for i in 0..12 {
            for j in 0..12 {
                let p: f64 = (0..12).map(|k| w[i * 12 + k] * v[k * 12 + j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p - e).abs() < 1e-10);
            }
        }
        assert!(m.log_abs_det().abs() < 1e-10);
    }

    #[test]
    fn swap_permutation() {
        let m = ChannelMixer::from_matrix(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let t = Tensor3::from_vec(2, 1, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mix(&t).unwrap().data, vec![3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_singular() {
        let err = ChannelMixer::from_matrix(2, vec![1.0, 2.0, 2.0, 4.0]).unwrap_err();
        assert!(matches!(err, InnError::SingularMatrix { .. }));
    }

    #[test]
    fn seeded_init_is_deterministic() {
        assert_eq!(
            ChannelMixer::random_orthogonal(4, 9),
            ChannelMixer::random_orthogonal(4, 9)
        );
        assert_ne!(
            ChannelMixer::random_orthogonal(4, 9),
            ChannelMixer::random_orthogonal(4, 10)
        );
    }
}
