//! Acceptance run: one pass/fail line per criterion, non-zero exit if any
//! criterion fails.

use aberrasim_core::imaging::{
    convolve_patchwise, convolve_patchwise_with, default_distances, generate_dataset, mtf50,
    mtf_from_psf, psnr, simulate, ssim, DatasetConfig, DirectBackend, FftBackend, ImageBuffer,
    PatchConfig, SimulationConfig,
};
use aberrasim_core::inn::{
    encode_condition, squeeze, unsqueeze, ChannelMixer, ConditionCode, ConditionalInn, Coupling,
    Init, InnConfig, InvBlock, SubnetSpec, LATTICE_SIZE,
};
use aberrasim_core::optics::{intersect_asphere, refract, LensPrescription, Ray, Surface, Vec3};
use aberrasim_core::wavefront::{
    amplitude_spread, field_kernels, psf_from_asf, psf_grid, pupil_function, FieldPoint,
    GridConfig, PsfGrid, PsfKernel, PupilConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

mod common;
use common::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn worst_seam(img: &ImageBuffer) -> f64 {
    let plane = img.plane(img.channels / 2);
    let (h, w) = (img.height, img.width);
    let mut worst: f64 = 0.0;
    for y in 1..h {
        for x in 1..w {
            let here = plane[y * w + x];
            worst = worst.max((here - plane[y * w + x - 1]).abs());
            worst = worst.max((here - plane[(y - 1) * w + x]).abs());
        }
    }
    worst
}

fn unit(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    )
}

fn sha256_file(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

fn no_illuminance() -> PatchConfig {
    PatchConfig {
        apply_illuminance: false,
        ..PatchConfig::default()
    }
}

fn diffraction() -> Outcome {
    let start = Instant::now();
    // Zero-OPD disk pupil against the analytic Airy intensity. Kernels are
    // odd-sized, so the 64-sample window is evaluated as 63×63.
    let (n, radius, padding, size) = (64, 32.0, 4, 63);
    let h = amplitude_spread(&pupil_function(&flat_pupil(n, radius)), n, padding)
        .map_err(|e| e.to_string())?;
    let k = psf_from_asf(&h, size).map_err(|e| e.to_string())?;
    let c = (size / 2) as f64;
    let m = (n * padding) as f64;
    let mut oracle: Vec<f64> = (0..size * size)
        .map(|i| airy(2.0 * PI * radius * ((i / size) as f64 - c).hypot((i % size) as f64 - c) / m))
        .collect();
    let total: f64 = oracle.iter().sum();
    oracle.iter_mut().for_each(|v| *v /= total);
    let rms = rms_relative(&k.values, &oracle);
    ensure(rms < 0.02, || format!("Airy RMS error {rms:.4}"))?;

    // Dark ring radius through the full pipeline on a stigmatic surface.
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
    let fk = field_kernels(&p, FieldPoint::on_axis(0.0), &cfg).map_err(|e| e.to_string())?;
    let sin_u = STOP_R / STOP_R.hypot(S_I);
    let f_number = 1.0 / (2.0 * N_GLASS * sin_u);
    let mut worst: f64 = 0.0;
    for (ch, &nm) in nms.iter().enumerate() {
        let r0 = first_minimum(&fk.channels[ch], 0.5) * pitch;
        let expect = 1.22 * nm * 1e-6 * f_number;
        worst = worst.max((r0 - expect).abs() / expect);
    }
    ensure(worst < 0.03, || {
        format!("dark ring off by {:.2}%", 100.0 * worst)
    })?;
    within_time(start.elapsed(), 5.0)?;
    Ok(format!(
        "Airy RMS {:.3}%, dark ring within {:.2}%, {:.2} s",
        100.0 * rms,
        100.0 * worst,
        start.elapsed().as_secs_f64()
    ))
}

fn snell_and_asphere() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut refracted, mut worst_tangential) = (0, 0.0f64);
    while refracted < 1000 {
        let d = unit(rng.random_range(0.0..1.4), rng.random_range(0.0..2.0 * PI));
        let nrm = unit(rng.random_range(0.0..0.8), rng.random_range(0.0..2.0 * PI));
        let (n1, n2) = (rng.random_range(1.0..1.9), rng.random_range(1.0..1.9));
        if let Ok(out) = refract(&d, &nrm, n1, n2) {
            let tan_in = (d - nrm * d.dot(&nrm)) * n1;
            let tan_out = (out - nrm * out.dot(&nrm)) * n2;
            worst_tangential = worst_tangential.max((tan_in - tan_out).norm());
            refracted += 1;
        }
    }
    ensure(worst_tangential < 1e-12, || {
        format!("tangential mismatch {worst_tangential:e}")
    })?;

    let mut worst_t = 0.0f64;
    for _ in 0..1000 {
        let surface = Surface::aspheric(
            rng.random_range(-0.06..0.06),
            vec![
                (4, rng.random_range(-2e-5..2e-5)),
                (6, rng.random_range(-1e-7..1e-7)),
            ],
            12.0,
            0.0,
            1.5,
        );
        let ray = Ray::new(
            Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                -20.0,
            ),
            Vec3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                1.0,
            ),
        );
        let t = intersect_asphere(&ray, &surface, 0.0).map_err(|e| format!("{e:?}"))?;
        let oracle = bisection_oracle(&ray, &surface, 0.0, 10.0, 30.0);
        worst_t = worst_t.max((t - oracle).abs());
    }
    ensure(worst_t < 1e-9, || {
        format!("asphere root off by {worst_t:e} mm")
    })?;
    within_time(start.elapsed(), 5.0)?;
    Ok(format!(
        "tangential {worst_tangential:.1e}, asphere {worst_t:.1e} mm, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn energy_conservation() -> Outcome {
    let toy = LensPrescription::toy();
    let small = GridConfig {
        patches: [4, 4],
        kernel_size: 15,
        pupil: PupilConfig {
            samples: 64,
            ..PupilConfig::default()
        },
        ..GridConfig::default()
    };
    let grids = [
        varying_grid(4, 4, 9),
        psf_grid(&toy, 90.0, [160, 192], &small).map_err(|e| e.to_string())?,
    ];
    let mut worst_mean = 0.0f64;
    let constant = ImageBuffer::constant(160, 192, 1, 0.5);
    for grid in &grids {
        let out =
            convolve_patchwise(&constant, grid, &no_illuminance()).map_err(|e| e.to_string())?;
        let r = grid.kernel_size / 2;
        let mut sum = 0.0;
        let mut count = 0.0;
        for c in 0..out.channels {
            for y in r..out.height - r {
                for x in r..out.width - r {
                    sum += out.get(c, y, x);
                    count += 1.0;
                }
            }
        }
        worst_mean = worst_mean.max((sum / count - 0.5).abs());
    }
    ensure(worst_mean < 1e-3, || {
        format!("interior mean off by {worst_mean:e}")
    })?;

    let (h, w) = (160, 192);
    let gradient = ImageBuffer::from_fn(h, w, 1, |_, y, x| {
        let (u, v) = (x as f64 / w as f64, y as f64 / h as f64);
        0.15 + 0.5 * u + 0.2 * v * v
    });
    let mut seam = 0.0f64;
    for grid in &grids {
        let out =
            convolve_patchwise(&gradient, grid, &no_illuminance()).map_err(|e| e.to_string())?;
        seam = seam.max(worst_seam(&out));
    }
    ensure(seam < 2.0 / 255.0, || format!("seam jump {seam:.5}"))?;
    Ok(format!(
        "interior mean error {worst_mean:.1e}, largest step {:.4} (limit {:.4})",
        seam,
        2.0 / 255.0
    ))
}

fn convolution_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for seed in 0..6 {
        let img = random_image(64, 64, 1, 300 + seed);
        for patches in [1, 2, 4] {
            let mut grid = PsfGrid::identity(patches, patches, 1);
            grid.kernel_size = 9;
            for k in grid.kernels.iter_mut() {
                let mut v =
                    PsfKernel::from_values(9, (0..81).map(|_| rng.random::<f64>()).collect());
                v.normalize();
                *k = v;
            }
            let a = convolve_patchwise_with(&img, &grid, &no_illuminance(), &DirectBackend)
                .map_err(|e| e.to_string())?;
            let b = convolve_patchwise_with(&img, &grid, &no_illuminance(), &FftBackend)
                .map_err(|e| e.to_string())?;
            for (x, y) in a.data.iter().zip(&b.data) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    ensure(worst < 1e-6, || format!("backends differ by {worst:e}"))?;
    Ok(format!("direct vs FFT max difference {worst:.1e}"))
}

fn invertibility() -> Outcome {
    let start = Instant::now();
    let t = random_tensor(3, 32, 32, 5);
    ensure(unsqueeze(&squeeze(&t).unwrap()).unwrap() == t, || {
        "squeeze not exact".into()
    })?;

    let mixer = ChannelMixer::random_orthogonal(12, 5);
    let m = random_tensor(12, 16, 16, 6).cast::<f32>();
    let mix_err = mixer
        .unmix(&mixer.mix(&m).unwrap())
        .unwrap()
        .max_abs_diff(&m);
    ensure(mix_err < 1e-6, || format!("mixer round trip {mix_err:e}"))?;

    let spec = SubnetSpec::default();
    let (mut err32, mut err64) = (0.0f64, 0.0f64);
    for seed in 0..20 {
        let h = ConditionCode::from_index(seed as usize * 5).unwrap();
        let x = random_tensor(12, 8, 8, 100 + seed);
        let c64 =
            Coupling::<f64>::he_normal(12, &spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let c32 =
            Coupling::<f32>::he_normal(12, &spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        err64 = err64.max(
            c64.inverse(&c64.forward(&x, &h).unwrap().0, &h)
                .unwrap()
                .max_abs_diff(&x),
        );
        let x32 = x.cast::<f32>();
        err32 = err32.max(
            c32.inverse(&c32.forward(&x32, &h).unwrap().0, &h)
                .unwrap()
                .max_abs_diff(&x32),
        );
    }
    ensure(err32 < 1e-5, || {
        format!("f32 coupling round trip {err32:e}")
    })?;
    ensure(err64 < 1e-10, || {
        format!("f64 coupling round trip {err64:e}")
    })?;

    let net = ConditionalInn::<f32>::new(InnConfig {
        seed: 7,
        ..InnConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let x = random_tensor(3, 32, 32, 8)
        .map(|v| 0.5 + 0.5 * v)
        .cast::<f32>();
    let h = encode_condition(-40.0).unwrap();
    let y = net.forward_blocks(&x, &h).unwrap().0;
    let chain_err = net.inverse_blocks(&y, &h).unwrap().max_abs_diff(&x);
    ensure(chain_err < 1.2e-4, || {
        format!("k=12 chain round trip {chain_err:e}")
    })?;

    let zero = ConditionalInn::<f32>::new(InnConfig {
        init: Init::Zero,
        ..InnConfig::default()
    })
    .map_err(|e| e.to_string())?;
    ensure(zero.forward(&x, 0.0).unwrap() == x, || {
        "zero network is not the identity".into()
    })?;
    within_time(start.elapsed(), 10.0)?;
    Ok(format!(
        "mix {mix_err:.1e}, coupling f32 {err32:.1e} / f64 {err64:.1e}, chain {chain_err:.1e}, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn jacobian() -> Outcome {
    let spec = SubnetSpec {
        hidden: 8,
        head_kernel: 3,
        res_blocks: 1,
        output_gain: 0.5,
    };
    let h = ConditionCode::from_index(42).unwrap();
    let coupling = Coupling::<f64>::he_normal(2, &spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let x = random_tensor(2, 2, 2, 10 + seed);
        let analytic = coupling.forward(&x, &h).unwrap().1;
        let numeric = numeric_logdet(|t| coupling.forward(t, &h).unwrap().0, &x);
        worst = worst.max((analytic - numeric).abs());
    }
    #[rustfmt::skip]
    let mixer = ChannelMixer::from_matrix(4, vec![
        1.2, 0.3, 0.0, 0.1,
        -0.2, 0.9, 0.4, 0.0,
        0.0, 0.1, 1.1, -0.3,
        0.2, 0.0, 0.2, 0.8,
    ])
    .unwrap();
    let block = InvBlock {
        mixer,
        coupling: Coupling::<f64>::he_normal(4, &spec, &mut ChaCha8Rng::seed_from_u64(6)).unwrap(),
    };
    let x = random_tensor(1, 4, 4, 7);
    let analytic = block.forward(&x, &h).unwrap().1;
    let numeric = numeric_logdet(|t| block.forward(t, &h).unwrap().0, &x);
    worst = worst.max((analytic - numeric).abs());
    ensure(worst < 1e-4, || format!("log-determinant off by {worst:e}"))?;
    Ok(format!("largest log-determinant difference {worst:.1e}"))
}

fn metrics() -> Outcome {
    let constant = |v| ImageBuffer::constant(32, 32, 1, v);
    let x = random_image(32, 32, 1, 9);
    let checks = [
        ("psnr(x, x)", psnr(&x, &x).unwrap(), 100.0),
        (
            "psnr(0, 1)",
            psnr(&constant(0.0), &constant(1.0)).unwrap(),
            0.0,
        ),
        (
            "psnr(0.3, 0.4)",
            psnr(&constant(0.3), &constant(0.4)).unwrap(),
            20.0,
        ),
        ("ssim(x, x)", ssim(&x, &x).unwrap(), 1.0),
        (
            "ssim(0.5, 0.5)",
            ssim(&constant(0.5), &constant(0.5)).unwrap(),
            1.0,
        ),
        (
            "ssim(0.2, 0.8)",
            ssim(&constant(0.2), &constant(0.8)).unwrap(),
            (2.0 * 0.2 * 0.8 + 1e-4) / (0.2 * 0.2 + 0.8 * 0.8 + 1e-4),
        ),
    ];
    for (name, got, expect) in checks {
        ensure((got - expect).abs() < 1e-9, || {
            format!("{name} = {got}, expected {expect}")
        })?;
    }

    let sigma = 2.0;
    let curve = mtf_from_psf(&PsfKernel::gaussian(25, sigma));
    let mut worst = 0.0f64;
    for (&f, &m) in curve.frequency.iter().zip(&curve.modulation) {
        if f <= 0.25 {
            worst = worst.max((m - (-2.0 * PI * PI * sigma * sigma * f * f).exp()).abs());
        }
    }
    ensure(worst < 0.01, || format!("Gaussian MTF off by {worst:.4}"))?;
    let m50 = mtf50(&curve);
    ensure(
        !m50.at_nyquist && (m50.frequency - 0.0937).abs() < 0.002,
        || format!("MTF50 {:.4}", m50.frequency),
    )?;
    Ok(format!(
        "closed forms exact, MTF error {worst:.4}, MTF50 {:.4} c/p",
        m50.frequency
    ))
}

fn smoke_simulation() -> SimulationConfig {
    SimulationConfig {
        grid: GridConfig {
            patches: [4, 4],
            kernel_size: 15,
            pupil: PupilConfig {
                samples: 64,
                ..PupilConfig::default()
            },
            ..GridConfig::default()
        },
        ..SimulationConfig::default()
    }
}

fn dataset_protocol() -> Outcome {
    let d = default_distances();
    ensure(d.len() == 101, || format!("{} default distances", d.len()))?;
    for (i, v) in d.iter().enumerate() {
        ensure((v - (-125.0 + 2.5 * i as f64)).abs() < 1e-9, || {
            format!("distance {i} is {v}")
        })?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sharp = dir.path().join("sharp");
    std::fs::create_dir_all(&sharp).map_err(|e| e.to_string())?;
    for (i, name) in ["a.png", "b.png"].iter().enumerate() {
        let img = ImageBuffer::from_fn(256, 256, 3, |c, y, x| {
            let r = random_image(1, 1, 1, (i * 100_000 + y * 256 + x) as u64 + c as u64).data[0];
            0.5 + 0.3 * ((x as f64 / 9.0 + c as f64).sin() * (y as f64 / 13.0).cos()) + 0.1 * r
        });
        img.save_png16(&sharp.join(name))
            .map_err(|e| e.to_string())?;
    }
    let run = |out: &str| {
        let config = DatasetConfig {
            sharp_dir: sharp.clone(),
            out_dir: dir.path().join(out),
            distances: vec![-125.0, -60.0, 0.0, 60.0, 125.0],
            seed: 2024,
            simulation: smoke_simulation(),
            cache_dir: None,
        };
        let start = Instant::now();
        let report =
            generate_dataset(&LensPrescription::toy(), &config).map_err(|e| e.to_string())?;
        Ok::<_, String>((report, start.elapsed()))
    };
    let (first, elapsed) = run("first")?;
    let (second, _) = run("second")?;
    ensure(
        first.manifest.entries.len() == 10 && first.failures.is_empty(),
        || {
            format!(
                "{} entries, {} failures",
                first.manifest.entries.len(),
                first.failures.len()
            )
        },
    )?;
    for (a, b) in first.manifest.entries.iter().zip(&second.manifest.entries) {
        let ha = sha256_file(&dir.path().join("first").join(&a.degraded));
        let hb = sha256_file(&dir.path().join("second").join(&b.degraded));
        ensure(ha == hb, || format!("{} differs between runs", a.degraded))?;
    }
    within_time(elapsed, 60.0)?;
    Ok(format!(
        "101 distances, 10 entries hash-identical across runs, smoke run {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn monotonicity() -> Outcome {
    let toy = LensPrescription::toy();
    let cfg = GridConfig {
        patches: [8, 8],
        kernel_size: 25,
        pupil: PupilConfig {
            samples: 64,
            ..PupilConfig::default()
        },
        ..GridConfig::default()
    };
    let sim = SimulationConfig {
        grid: cfg.clone(),
        noise: None,
        ..SimulationConfig::default()
    };
    let sharp = random_image(256, 256, 3, 10);
    let sweep: Vec<f64> = (0..11).map(|i| 12.5 * i as f64).collect();
    let mut moments = Vec::new();
    let mut inverse_psnr = Vec::new();
    for &d in &sweep {
        let fk = field_kernels(&toy, FieldPoint::on_axis(d), &cfg).map_err(|e| e.to_string())?;
        moments.push(fk.channels.iter().map(|k| k.second_moment()).sum::<f64>());
        let out = simulate(&sharp, &toy, d, &sim, 0).map_err(|e| e.to_string())?;
        inverse_psnr.push(1.0 / psnr(&out, &sharp).map_err(|e| e.to_string())?);
    }
    for i in 1..sweep.len() {
        ensure(moments[i] > moments[i - 1], || {
            format!(
                "second moment falls from {} to {} at d = {}",
                moments[i - 1],
                moments[i],
                sweep[i]
            )
        })?;
        ensure(inverse_psnr[i] > inverse_psnr[i - 1], || {
            format!("1/PSNR falls at d = {}", sweep[i])
        })?;
    }
    Ok(format!(
        "second moment {:.2} → {:.2} px², PSNR {:.2} → {:.2} dB",
        moments[0],
        moments[10],
        1.0 / inverse_psnr[0],
        1.0 / inverse_psnr[10]
    ))
}

fn condition_encoding() -> Outcome {
    let mut seen = std::collections::HashSet::new();
    for i in 0..LATTICE_SIZE {
        let code = encode_condition(-125.0 + 2.5 * i as f64).map_err(|e| e.to_string())?;
        ensure(seen.insert(code), || format!("duplicate code at index {i}"))?;
    }
    let lo = encode_condition(-125.0).unwrap().to_string();
    let hi = encode_condition(125.0).unwrap().to_string();
    ensure(lo == "0000000" && hi == "1100100", || {
        format!("endpoints {lo} and {hi}")
    })?;
    Ok(format!(
        "{} distinct codes, endpoints {lo} and {hi}",
        seen.len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("diffraction oracle", diffraction),
        ("refraction and asphere oracles", snell_and_asphere),
        ("energy conservation", energy_conservation),
        ("convolution equivalence", convolution_equivalence),
        ("invertibility", invertibility),
        ("jacobian check", jacobian),
        ("metrics oracles", metrics),
        ("dataset protocol", dataset_protocol),
        ("monotonicity", monotonicity),
        ("condition encoding", condition_encoding),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
