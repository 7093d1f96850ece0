//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use aberrasim_core::imaging::ImageBuffer;
use aberrasim_core::inn::Tensor3;
use aberrasim_core::optics::{LensPrescription, Ray, Surface, WavelengthSpec};
use aberrasim_core::wavefront::{PsfGrid, PsfKernel, PupilMap};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Bessel J1 by trapezoidal quadrature of its integral representation,
/// which is spectrally accurate for this periodic integrand.
pub fn bessel_j1(x: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let tau = k as f64 * h;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += w * (tau - x * tau.sin()).cos();
    }
    acc * h / PI
}

pub fn airy(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        1.0
    } else {
        (2.0 * bessel_j1(v) / v).powi(2)
    }
}

/// Sag of the surface that images the axial point at `-s_o` (air) onto
/// `s_i` inside glass of index `n` without aberration.
pub fn cartesian_oval(r: f64, s_o: f64, s_i: f64, n: f64) -> f64 {
    let total = s_o + n * s_i;
    let f = |z: f64| {
        (r * r + (z + s_o).powi(2)).sqrt() + n * (r * r + (s_i - z).powi(2)).sqrt() - total
    };
    let (mut lo, mut hi) = (0.0, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub const S_O: f64 = 100.0;
pub const S_I: f64 = 30.0;
pub const N_GLASS: f64 = 1.5;
pub const STOP_R: f64 = 3.0;

/// Stop at the vertex of a single refracting surface fitted to the
/// Cartesian oval; stigmatic for the on-axis point at the design distance.
pub fn stigmatic(wavelengths: &[f64], pitch: f64) -> LensPrescription {
    let c = (N_GLASS / S_I + 1.0 / S_O) / (N_GLASS - 1.0);
    let scale = 3.3;
    let orders = [2u32, 4, 6, 8, 10, 12];
    let samples = 400;
    let mut a = DMatrix::zeros(samples, orders.len());
    let mut b = DVector::zeros(samples);
    let base = Surface::spherical(c, 6.0, 0.0, 1.0);
    for k in 0..samples {
        let r = scale * k as f64 / (samples - 1) as f64;
        for (col, &j) in orders.iter().enumerate() {
            a[(k, col)] = (r / scale).powi(j as i32);
        }
        b[k] = cartesian_oval(r, S_O, S_I, N_GLASS) - base.sag(r).unwrap();
    }
    let coef = a.clone().svd(true, true).solve(&b, 1e-15).unwrap();
    let residual = (&a * &coef - &b).amax();
    assert!(residual < 1e-9, "oval fit residual {residual}");
    let aspheric = orders
        .iter()
        .zip(coef.iter())
        .map(|(&j, &m)| (j, m / scale.powi(j as i32)))
        .collect();
    let wl = wavelengths
        .iter()
        .enumerate()
        .map(|(ch, &nm)| WavelengthSpec {
            nm,
            channel: ch,
            weight: 1.0,
        })
        .collect();
    LensPrescription::new(
        vec![
            Surface::stop(STOP_R, 0.0),
            Surface::aspheric(c, aspheric, 6.0, S_I, N_GLASS),
            Surface::image_plane(),
        ],
        0,
        wl,
        S_O,
        pitch,
    )
    .unwrap()
}

pub fn rms_relative(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

pub fn flat_pupil(n: usize, radius: f64) -> PupilMap {
    let half = n as f64 / 2.0;
    let mut amplitude = vec![0.0; n * n];
    let mut transmitted = 0;
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 + 0.5 - half, j as f64 + 0.5 - half);
            if x.hypot(y) <= radius {
                amplitude[j * n + i] = 1.0;
                transmitted += 1;
            }
        }
    }
    PupilMap {
        n,
        wavelength_nm: 550.0,
        opd: vec![0.0; n * n],
        amplitude,
        direction_step: [1e-3, 1e-3],
        image_index: 1.0,
        chief_image_point: [0.0, 0.0],
        reference_radius: 50.0,
        transmitted,
        chief_angle: 0.0,
    }
}

/// Radius (pixels) of the first minimum of the azimuthally averaged
/// profile, refined by a parabola through the three lowest bins.
pub fn first_minimum(k: &PsfKernel, bin: f64) -> f64 {
    let c = (k.size / 2) as f64;
    let nbins = (c / bin) as usize;
    let mut sum = vec![0.0; nbins];
    let mut count = vec![0.0; nbins];
    for r in 0..k.size {
        for col in 0..k.size {
            let rad = (r as f64 - c).hypot(col as f64 - c);
            let b = (rad / bin).round() as usize;
            if b < nbins {
                sum[b] += k.at(r, col);
                count[b] += 1.0;
            }
        }
    }
    let prof: Vec<f64> = sum.iter().zip(&count).map(|(s, n)| s / n).collect();
    let i = (1..nbins - 1)
        .find(|&i| prof[i] < prof[i - 1] && prof[i] <= prof[i + 1])
        .expect("profile has a minimum");
    let (y0, y1, y2) = (prof[i - 1], prof[i], prof[i + 1]);
    let shift = 0.5 * (y0 - y2) / (y0 - 2.0 * y1 + y2);
    (i as f64 + shift) * bin
}

/// Bisection on the sag residual along the ray over `[lo, hi]`.
pub fn bisection_oracle(
    ray: &Ray,
    surface: &Surface,
    vertex_z: f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    let f = |t: f64| {
        let p = ray.at(t);
        p.z - vertex_z - surface.sag(p.x.hypot(p.y)).unwrap()
    };
    let mut flo = f(lo);
    assert!(
        flo.signum() != f(hi).signum(),
        "oracle bracket does not straddle the root"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    i as usize
}

pub fn random_image(h: usize, w: usize, channels: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageBuffer::from_fn(h, w, channels, |_, _, _| rng.random::<f64>())
}

/// Gaussian kernels whose width varies from patch to patch.
pub fn varying_grid(rows: usize, cols: usize, size: usize) -> PsfGrid {
    let mut grid = PsfGrid::identity(rows, cols, 1);
    grid.kernel_size = size;
    for (i, k) in grid.kernels.iter_mut().enumerate() {
        let sigma = 0.6 + 2.0 * ((i * 7) % (rows * cols)) as f64 / (rows * cols) as f64;
        let mut g = PsfKernel::gaussian(size, sigma);
        g.field = k.field;
        *k = g;
    }
    grid
}

pub fn random_tensor(c: usize, h: usize, w: usize, seed: u64) -> Tensor3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor3::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0..1.0))
}

/// `log|det J|` of `f` at `x` by central differences.
pub fn numeric_logdet(f: impl Fn(&Tensor3<f64>) -> Tensor3<f64>, x: &Tensor3<f64>) -> f64 {
    let n = x.data.len();
    let step = 1e-6;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus.data[j] += step;
        minus.data[j] -= step;
        let (fp, fm) = (f(&plus), f(&minus));
        for i in 0..n {
            jac[(i, j)] = (fp.data[i] - fm.data[i]) / (2.0 * step);
        }
    }
    jac.determinant().abs().ln()
}
