//! Two-dimensional FFT helpers on row-major complex buffers.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Unnormalized 2-D DFT in place. The inverse direction is not scaled.
pub(crate) fn fft2(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    assert_eq!(data.len(), rows * cols);
    let dir = if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    };
    plan(cols, dir).process(data);
    let mut t = vec![Complex64::default(); data.len()];
    transpose(data, &mut t, rows, cols);
    plan(rows, dir).process(&mut t);
    transpose(&t, data, cols, rows);
}

/// Moves index `n/2` to index 0 along both axes (`ifftshift`).
pub(crate) fn ifftshift(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    roll(data, rows, cols, rows - rows / 2, cols - cols / 2)
}

/// Moves index 0 to index `n/2` along both axes (`fftshift`).
pub(crate) fn fftshift(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    roll(data, rows, cols, rows / 2, cols / 2)
}

fn roll(data: &[Complex64], rows: usize, cols: usize, dr: usize, dc: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); data.len()];
    for r in 0..rows {
        let rr = (r + dr) % rows;
        for c in 0..cols {
            out[rr * cols + (c + dc) % cols] = data[r * cols + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); rows * cols];
        for ky in 0..rows {
            for kx in 0..cols {
                let mut acc = Complex64::default();
                for y in 0..rows {
                    for x in 0..cols {
                        let ph = -2.0
                            * std::f64::consts::PI
                            * ((ky * y) as f64 / rows as f64 + (kx * x) as f64 / cols as f64);
                        acc += data[y * cols + x] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[ky * cols + kx] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_rectangular_grid() {
        let (rows, cols) = (6, 10);
        let data: Vec<Complex64> = (0..rows * cols)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        fft2(&mut fast, rows, cols, false);
        let slow = naive_dft(&data, rows, cols);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn shifts_are_inverse() {
        let data: Vec<Complex64> = (0..35).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let back = ifftshift(&fftshift(&data, 5, 7), 5, 7);
        assert_eq!(back, data);
        let shifted = fftshift(&data, 5, 7);
        assert_eq!(shifted[2 * 7 + 3], data[0]);
    }
}
