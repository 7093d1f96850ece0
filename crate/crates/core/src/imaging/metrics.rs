use super::buffer::ImageBuffer;
use super::ImageError;

/// Reported for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 1e-4;
const SSIM_C2: f64 = 9e-4;

fn check_shape(a: &ImageBuffer, b: &ImageBuffer) -> Result<(), ImageError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(ImageError::DimensionMismatch(format!(
            "{}×{}×{} vs {}×{}×{}",
            a.height, a.width, a.channels, b.height, b.width, b.channels
        )))
    }
}

/// Peak signal-to-noise ratio for unit-range data, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, ImageError> {
    check_shape(a, b)?;
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_taps() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut taps = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - SSIM_RADIUS as f64;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    taps
}

/// Separable Gaussian mean; the window is cut at the image border and its
/// remaining weights renormalized.
fn local_mean(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = SSIM_RADIUS as isize;
    let pass = |src: &[f64], len: usize, stride: usize, count: usize, step: usize| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for line in 0..count {
            for i in 0..len {
                let (mut acc, mut norm) = (0.0, 0.0);
                for (t, &wt) in taps.iter().enumerate() {
                    let j = i as isize + t as isize - r;
                    if j < 0 || j >= len as isize {
                        continue;
                    }
                    acc += wt * src[line * step + j as usize * stride];
                    norm += wt;
                }
                out[line * step + i * stride] = acc / norm;
            }
        }
        out
    };
    let rows = pass(plane, w, 1, h, w);
    pass(&rows, h, w, w, 1)
}

/// Mean structural similarity over all pixels and channels.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, ImageError> {
    check_shape(a, b)?;
    let (h, w) = (a.height, a.width);
    let taps = gaussian_taps();
    let mut total = 0.0;
    for c in 0..a.channels {
        let (pa, pb) = (a.plane(c), b.plane(c));
        let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
        let mu_a = local_mean(pa, h, w, &taps);
        let mu_b = local_mean(pb, h, w, &taps);
        let e_aa = local_mean(&sq(pa, pa), h, w, &taps);
        let e_bb = local_mean(&sq(pb, pb), h, w, &taps);
        let e_ab = local_mean(&sq(pa, pb), h, w, &taps);
        for i in 0..h * w {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
        }
    }
    Ok(total / (h * w * a.channels) as f64)
}
