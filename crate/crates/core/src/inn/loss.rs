use super::tensor::{Real, Tensor3};
use super::InnError;
use crate::imaging::reflect_index;
use crate::registry::Registry;

/// Loss weights `λ₁..λ₄` for forward, reverse, edge and perceptual terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub forward: f64,
    pub reverse: f64,
    pub edge: f64,
    pub perceptual: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            forward: 1.0,
            reverse: 0.5,
            edge: 0.05,
            perceptual: 0.02,
        }
    }
}

/// Individual loss values; `perceptual` is `None` without an extractor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub forward: f64,
    pub reverse: f64,
    pub edge: f64,
    pub perceptual: Option<f64>,
}

fn check<T: Real>(a: &Tensor3<T>, b: &Tensor3<T>) -> Result<(), InnError> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(InnError::Shape(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

/// Mean absolute difference.
pub fn l1<T: Real>(a: &Tensor3<T>, b: &Tensor3<T>) -> Result<f64, InnError> {
    check(a, b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x.f64() - y.f64()).abs())
        .sum::<f64>()
        / a.data.len() as f64)
}

/// Restoration loss between the restored and the sharp image.
pub fn loss_forward<T: Real>(restored: &Tensor3<T>, sharp: &Tensor3<T>) -> Result<f64, InnError> {
    l1(restored, sharp)
}

/// Re-degradation loss between the reverse output and the degraded image.
pub fn loss_reverse<T: Real>(
    redegraded: &Tensor3<T>,
    degraded: &Tensor3<T>,
) -> Result<f64, InnError> {
    l1(redegraded, degraded)
}

/// 5-point Laplacian with reflected borders, per channel.
pub fn laplacian<T: Real>(t: &Tensor3<T>) -> Tensor3<f64> {
    let (h, w) = (t.height, t.width);
    let at =
        |c: usize, y: isize, x: isize| t.get(c, reflect_index(y, h), reflect_index(x, w)).f64();
    Tensor3::from_fn(t.channels, h, w, |c, y, x| {
        let (y, x) = (y as isize, x as isize);
        at(c, y - 1, x) + at(c, y + 1, x) + at(c, y, x - 1) + at(c, y, x + 1) - 4.0 * at(c, y, x)
    })
}

/// Mean absolute difference of the Laplacians.
pub fn loss_edge<T: Real>(restored: &Tensor3<T>, sharp: &Tensor3<T>) -> Result<f64, InnError> {
    check(restored, sharp)?;
    l1(&laplacian(restored), &laplacian(sharp))
}

/// Maps an image to a feature grid for the perceptual loss.
pub trait FeatureExtractor: Send + Sync {
    fn name(&self) -> &'static str;
    fn extract(&self, img: &Tensor3<f64>) -> Tensor3<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityExtractor;

impl FeatureExtractor for IdentityExtractor {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn extract(&self, img: &Tensor3<f64>) -> Tensor3<f64> {
        img.clone()
    }
}

/// Mean over non-overlapping 2×2 blocks (trailing odd row/column dropped).
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanPool2;

impl FeatureExtractor for MeanPool2 {
    fn name(&self) -> &'static str {
        "mean-pool-2"
    }

    fn extract(&self, img: &Tensor3<f64>) -> Tensor3<f64> {
        let (h, w) = ((img.height / 2).max(1), (img.width / 2).max(1));
        Tensor3::from_fn(img.channels, h, w, |c, y, x| {
            let ys = [2 * y, (2 * y + 1).min(img.height - 1)];
            let xs = [2 * x, (2 * x + 1).min(img.width - 1)];
            ys.iter()
                .flat_map(|&yy| xs.iter().map(move |&xx| (yy, xx)))
                .map(|(yy, xx)| img.get(c, yy, xx))
                .sum::<f64>()
                / 4.0
        })
    }
}

pub fn feature_extractors() -> Registry<dyn FeatureExtractor> {
    let mut r: Registry<dyn FeatureExtractor> = Registry::new("feature extractor");
    r.register("identity", || Box::new(IdentityExtractor));
    r.register("mean-pool-2", || Box::new(MeanPool2));
    r
}

/// `‖φ(a) − φ(b)‖₁ / (C·H·W)` of the extracted features.
pub fn loss_perceptual<T: Real>(
    restored: &Tensor3<T>,
    sharp: &Tensor3<T>,
    extractor: Option<&dyn FeatureExtractor>,
) -> Result<f64, InnError> {
    check(restored, sharp)?;
    let extractor = extractor
        .ok_or_else(|| InnError::Unsupported("perceptual loss needs a feature extractor".into()))?;
    l1(
        &extractor.extract(&restored.cast()),
        &extractor.extract(&sharp.cast()),
    )
}

/// Weighted sum of the terms. Without a perceptual term its weight must be
/// zero.
pub fn loss_total(terms: &LossTerms, weights: &LossWeights) -> Result<f64, InnError> {
    let perceptual = match terms.perceptual {
        Some(p) => weights.perceptual * p,
        None if weights.perceptual == 0.0 => 0.0,
        None => {
            return Err(InnError::Unsupported(
                "perceptual weight is non-zero but no perceptual term was computed".into(),
            ))
        }
    };
    Ok(weights.forward * terms.forward
        + weights.reverse * terms.reverse
        + weights.edge * terms.edge
        + perceptual)
}
