use aberrasim_core::optics::{aim_ray, trace_ray, LensPrescription, Vec3};
use aberrasim_core::wavefront::{
    amplitude_spread, bin_to_pixels, field_kernels, psf_from_asf, psf_grid, pupil_function,
    read_psfg, relative_illuminance, render_mosaic_png, sample_exit_pupil, write_psfg,
    CosineFourth, FieldPoint, GridConfig, PupilConfig, RayStatistics,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

mod common;
use common::*;

// Oracles

// Pupil sampling

#[test]
fn stigmatic_system_has_zero_opd() {
    let p = stigmatic(&[587.6], 0.005);
    let map =
        sample_exit_pupil(&p, FieldPoint::on_axis(0.0), 587.6, PupilConfig::default()).unwrap();
    assert!(map.transmitted > 0);
    for (w, a) in map.opd.iter().zip(&map.amplitude) {
        if *a > 0.0 {
            assert!(w.abs() < 1e-8, "opd {w} mm");
        }
    }
}

#[test]
fn on_axis_opd_is_rotationally_symmetric() {
    let p = LensPrescription::toy();
    let cfg = PupilConfig {
        samples: 64,
        ..PupilConfig::default()
    };
    let map = sample_exit_pupil(&p, FieldPoint::on_axis(40.0), 550.0, cfg).unwrap();
    let n = map.n;
    for j in 0..n {
        for i in 0..n {
            let a = map.opd[j * n + i];
            for (jj, ii) in [
                (i, j),
                (j, n - 1 - i),
                (n - 1 - j, i),
                (n - 1 - i, n - 1 - j),
            ] {
                assert_eq!(map.amplitude[j * n + i], map.amplitude[jj * n + ii]);
                assert!((a - map.opd[jj * n + ii]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn defocus_is_quadratic_in_pupil_radius() {
    let p = stigmatic(&[587.6], 0.005);
    let d = 5.0;
    let cfg = PupilConfig {
        samples: 64,
        ..PupilConfig::default()
    };
    let map = sample_exit_pupil(&p, FieldPoint::on_axis(d), 587.6, cfg).unwrap();
    let n = map.n;
    let half = n as f64 / 2.0;
    let step = 2.0 * cfg.overfill / n as f64;
    let (mut rows, mut rhs) = (Vec::new(), Vec::new());
    for j in 0..n {
        for i in 0..n {
            if map.amplitude[j * n + i] > 0.0 {
                let (x, y) = (
                    (i as f64 + 0.5 - half) * step,
                    (j as f64 + 0.5 - half) * step,
                );
                rows.push([1.0, x * x + y * y]);
                rhs.push(map.opd[j * n + i]);
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), 2, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let fit = a.clone().svd(true, true).solve(&b, 1e-15).unwrap();
    let resid = (&a * &fit - &b).norm();
    let mean = b.mean();
    let spread = b.map(|v| v - mean).norm();
    assert!(
        resid / spread < 0.05,
        "residual fraction {}",
        resid / spread
    );

    // Paraxial oracle: longitudinal image shift times n' sin²u' / 2.
    let shifted = N_GLASS
        / ((N_GLASS - 1.0) * (N_GLASS / S_I + 1.0 / S_O) / (N_GLASS - 1.0) - 1.0 / (S_O + d));
    let sin_u = STOP_R / STOP_R.hypot(S_I);
    let w020 = N_GLASS * (S_I - shifted) * sin_u * sin_u / 2.0;
    assert!(
        (fit[1].abs() - w020).abs() / w020 < 0.05,
        "fit {} paraxial {w020}",
        fit[1]
    );
}

// Pupil function and Fourier step

#[test]
fn circular_pupil_gives_airy_pattern() {
    let n = 64;
    let radius = 32.0;
    let map = flat_pupil(n, radius);
    let padding = 4;
    let m = n * padding;
    let h = amplitude_spread(&pupil_function(&map), n, padding).unwrap();
    let k = psf_from_asf(&h, 63).unwrap();
    // Intensity ∝ (2 J1(v)/v)² with v = 2π R r / m for a disk of radius R samples.
    let c = 31.0;
    let mut oracle: Vec<f64> = (0..63 * 63)
        .map(|idx| {
            let (r, col) = ((idx / 63) as f64, (idx % 63) as f64);
            airy(2.0 * PI * radius * (r - c).hypot(col - c) / m as f64)
        })
        .collect();
    let total: f64 = oracle.iter().sum();
    oracle.iter_mut().for_each(|v| *v /= total);
    let err = rms_relative(&k.values, &oracle);
    assert!(err < 0.02, "relative RMS error {err}");
}

#[test]
fn tilt_translates_the_psf() {
    let n = 32;
    let padding = 4;
    let m = n * padding;
    let flat = flat_pupil(n, 16.0);
    let mut tilted = flat.clone();
    let shift = 3.0;
    let lambda_mm = tilted.wavelength_nm * 1e-6;
    for j in 0..n {
        for i in 0..n {
            tilted.opd[j * n + i] = lambda_mm * shift * i as f64 / m as f64;
        }
    }
    let a = amplitude_spread(&pupil_function(&flat), n, padding)
        .unwrap()
        .intensity();
    let b = amplitude_spread(&pupil_function(&tilted), n, padding)
        .unwrap()
        .intensity();
    let peak = a.iter().cloned().fold(0.0, f64::max);
    for r in 0..m {
        for c in 0..m {
            let moved = b[r * m + (c + shift as usize) % m];
            assert!((moved - a[r * m + c]).abs() < 1e-9 * peak);
        }
    }
    // Binned at one pixel per sample, the kernel peak sits `shift` pixels
    // right of centre.
    let k = 15;
    let binned = bin_to_pixels(&b, m, [1.0, 1.0], [0.0, 0.0], 1.0, k);
    let arg = binned
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .unwrap()
        .0;
    assert_eq!((arg / k, arg % k), (k / 2, k / 2 + shift as usize));
}

// Kernels through the full pipeline

#[test]
fn airy_zero_matches_f_number_and_scales_with_wavelength() {
    let nms = [486.1, 587.6, 656.3];
    let pitch = 0.0002;
    let p = stigmatic(&nms, pitch);
    let cfg = GridConfig {
        kernel_size: 61,
        pupil: PupilConfig {
            samples: 64,
            ..PupilConfig::default()
        },
        padding: 8,
        ..GridConfig::default()
    };
    let fk = field_kernels(&p, FieldPoint::on_axis(0.0), &cfg).unwrap();

    let obj = Vec3::new(0.0, 0.0, p.object_z(0.0));
    let (marginal, _) = aim_ray(&p, &obj, [STOP_R, 0.0], 587.6).unwrap();
    let rim = trace_ray(&p, &marginal, 587.6).hit_points[1];
    let sin_u = rim.x / (rim - Vec3::new(0.0, 0.0, S_I)).norm();

    let mut zeros = Vec::new();
    for (ch, &nm) in nms.iter().enumerate() {
        let r0 = first_minimum(&fk.channels[ch], 0.5) * pitch;
        let expect = 0.6098 * nm * 1e-6 / (N_GLASS * sin_u);
        assert!(
            (r0 - expect).abs() / expect < 0.03,
            "{nm} nm: zero {r0} expected {expect}"
        );
        zeros.push(r0 / nm);
    }
    for z in &zeros {
        assert!((z / zeros[1] - 1.0).abs() < 0.03);
    }
}

#[test]
fn doubling_pupil_sampling_converges() {
    let p = LensPrescription::toy();
    let field = FieldPoint::new(20.0, 10.0, 0.0);
    let mut cfg = GridConfig::default();
    cfg.pupil.samples = 128;
    let coarse = field_kernels(&p, field, &cfg).unwrap();
    cfg.pupil.samples = 256;
    let fine = field_kernels(&p, field, &cfg).unwrap();
    for ch in 0..3 {
        let err = rms_relative(&coarse.channels[ch].values, &fine.channels[ch].values);
        assert!(err < 0.005, "channel {ch}: {err}");
    }
}

fn small_config() -> GridConfig {
    GridConfig {
        patches: [4, 4],
        kernel_size: 15,
        pupil: PupilConfig {
            samples: 32,
            ..PupilConfig::default()
        },
        use_symmetry: false,
        ..GridConfig::default()
    }
}

#[test]
fn mirrored_fields_give_mirrored_kernels() {
    let p = LensPrescription::toy();
    let cfg = small_config();
    let grid = psf_grid(&p, 30.0, [300, 400], &cfg).unwrap();
    assert_eq!(grid.kernels.len(), 4 * 4 * 3);
    for r in 0..4 {
        for c in 0..4 {
            for ch in 0..3 {
                let k = grid.kernel(r, c, ch);
                assert!((k.sum() - 1.0).abs() < 1e-9);
                assert!(k.values.iter().all(|&v| v >= 0.0));
                let lr = grid.kernel(r, 3 - c, ch).flip_cols();
                let ud = grid.kernel(3 - r, c, ch).flip_rows();
                for ((a, b), u) in k.values.iter().zip(&lr.values).zip(&ud.values) {
                    assert!((a - b).abs() < 1e-6, "({r},{c},{ch}) lr {a} {b}");
                    assert!((a - u).abs() < 1e-6, "({r},{c},{ch}) ud {a} {u}");
                }
            }
            assert!((grid.illuminance_at(r, c) - grid.illuminance_at(r, 3 - c)).abs() < 1e-12);
        }
    }
}

#[test]
fn symmetry_reuse_matches_full_computation() {
    let p = LensPrescription::toy();
    let mut cfg = small_config();
    let full = psf_grid(&p, -20.0, [320, 320], &cfg).unwrap();
    cfg.use_symmetry = true;
    let reused = psf_grid(&p, -20.0, [320, 320], &cfg).unwrap();
    for (a, b) in full.kernels.iter().zip(&reused.kernels) {
        assert!(a
            .values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| (x - y).abs() < 1e-6));
    }
}

#[test]
fn on_axis_kernel_is_centrally_symmetric() {
    let p = LensPrescription::toy();
    let fk = field_kernels(&p, FieldPoint::on_axis(60.0), &small_config()).unwrap();
    for k in &fk.channels {
        let peak = k.values.iter().cloned().fold(0.0, f64::max);
        let n = k.size;
        for r in 0..n {
            for c in 0..n {
                assert!((k.at(r, c) - k.at(n - 1 - r, n - 1 - c)).abs() < 1e-6 * peak);
            }
        }
    }
}

#[test]
fn in_focus_kernel_is_tightest() {
    let p = LensPrescription::toy();
    let cfg = GridConfig {
        kernel_size: 41,
        pupil: PupilConfig {
            samples: 64,
            ..PupilConfig::default()
        },
        ..GridConfig::default()
    };
    let moment = |d: f64| {
        let fk = field_kernels(&p, FieldPoint::on_axis(d), &cfg).unwrap();
        fk.channels.iter().map(|k| k.second_moment()).sum::<f64>()
    };
    let focus = moment(0.0);
    for d in [-125.0, -60.0, -15.0, 15.0, 60.0, 125.0] {
        assert!(moment(d) > focus, "d = {d}");
    }
}

// Illuminance

#[test]
fn illuminance_examples() {
    let cfg = PupilConfig {
        samples: 64,
        ..PupilConfig::default()
    };
    let toy = LensPrescription::toy();
    let on_axis =
        relative_illuminance(&toy, FieldPoint::on_axis(0.0), 550.0, cfg, &RayStatistics).unwrap();
    assert_eq!(on_axis, 1.0);

    let p = stigmatic(&[587.6], 0.005);
    for &(x, y) in &[(3.0, 0.0), (-2.0, 4.0)] {
        let e = relative_illuminance(&p, FieldPoint::new(x, y, 0.0), 587.6, cfg, &RayStatistics)
            .unwrap();
        assert_eq!(e, 1.0, "field ({x}, {y})");
    }

    // The stop is the first surface, so the chief ray leaves a field point
    // at height S_O·tan 30° at exactly 30°.
    let h = S_O * (PI / 6.0).tan();
    let e =
        relative_illuminance(&p, FieldPoint::new(h, 0.0, 0.0), 587.6, cfg, &CosineFourth).unwrap();
    assert!((e - 0.5625).abs() < 1e-9, "cos4 {e}");
}

// File format

#[test]
fn psfg_file_round_trip_and_mosaic() {
    let p = LensPrescription::toy();
    let mut cfg = small_config();
    cfg.use_symmetry = true;
    let grid = psf_grid(&p, 10.0, [256, 256], &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.psfg");
    write_psfg(&path, &grid).unwrap();
    let back = read_psfg(&path).unwrap();
    assert_eq!(back.distance, grid.distance);
    assert_eq!(
        (back.rows, back.cols, back.channels, back.kernel_size),
        (4, 4, 3, 15)
    );
    for (a, b) in grid.kernels.iter().zip(&back.kernels) {
        assert!(a
            .values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| (x - y).abs() < 1e-6));
        assert!((b.sum() - 1.0).abs() < 1e-9);
    }
    for (a, b) in grid.illuminance.iter().zip(&back.illuminance) {
        assert!((a - b).abs() < 1e-6);
    }
    let png = dir.path().join("mosaic.png");
    render_mosaic_png(&png, &grid).unwrap();
    assert!(std::fs::metadata(&png).unwrap().len() > 0);
}

// Properties

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernels_are_normalized_and_nonnegative(
        coeffs in prop::array::uniform4(-2e-3f64..2e-3),
        radius in 6.0f64..16.0,
    ) {
        let n = 32;
        let mut map = flat_pupil(n, radius);
        let half = n as f64 / 2.0;
        for j in 0..n {
            for i in 0..n {
                let (x, y) = ((i as f64 + 0.5 - half) / half, (j as f64 + 0.5 - half) / half);
                let r2 = x * x + y * y;
                map.opd[j * n + i] = coeffs[0] * r2 + coeffs[1] * r2 * r2 + coeffs[2] * x + coeffs[3] * x * r2;
            }
        }
        let h = amplitude_spread(&pupil_function(&map), n, 4).unwrap();
        let k = psf_from_asf(&h, 25).unwrap();
        prop_assert!((k.sum() - 1.0).abs() < 1e-9);
        prop_assert!(k.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn half_wave_opd_negates_pupil(idx in 0usize..64, amp in 0.1f64..1.0) {
        let mut map = flat_pupil(8, 8.0);
        map.amplitude[idx] = amp;
        map.opd[idx] = map.wavelength_nm * 1e-6 / 2.0;
        let p = pupil_function(&map);
        prop_assert!((p[idx] - Complex64::new(-amp, 0.0)).norm() < 1e-12);
    }
}

// Focus of the bundled lens

fn polychromatic_rms_waves(p: &LensPrescription) -> f64 {
    let cfg = PupilConfig {
        samples: 64,
        ..PupilConfig::default()
    };
    let mut acc = 0.0;
    for w in p.wavelengths() {
        let map = sample_exit_pupil(p, FieldPoint::on_axis(0.0), w.nm, cfg).unwrap();
        let waves: Vec<f64> = map
            .opd
            .iter()
            .zip(&map.amplitude)
            .filter(|(_, a)| **a > 0.0)
            .map(|(o, _)| o / (w.nm * 1e-6))
            .collect();
        let mean = waves.iter().sum::<f64>() / waves.len() as f64;
        acc += waves.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / waves.len() as f64;
    }
    (acc / p.wavelengths().len() as f64).sqrt()
}

#[test]
fn toy_lens_is_focused_at_minimum_wavefront_error() {
    let toy = LensPrescription::toy();
    let with_back_focus = |t: f64| {
        let mut file = toy.to_file();
        let n = file.surfaces.len();
        file.surfaces[n - 2].thickness = t;
        LensPrescription::from_file(&file).unwrap()
    };
    let bundled = toy.surfaces()[toy.surfaces().len() - 2].thickness;
    // Golden-section search for the back focus.
    let (mut lo, mut hi) = (bundled - 0.2, bundled + 0.2);
    for _ in 0..40 {
        let a = lo + 0.382 * (hi - lo);
        let b = lo + 0.618 * (hi - lo);
        if polychromatic_rms_waves(&with_back_focus(a))
            < polychromatic_rms_waves(&with_back_focus(b))
        {
            hi = b;
        } else {
            lo = a;
        }
    }
    let best = 0.5 * (lo + hi);
    assert!(
        (best - bundled).abs() < 1e-3,
        "best back focus {best}, bundled {bundled}"
    );
}
