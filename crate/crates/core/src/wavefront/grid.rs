use rayon::prelude::*;

use super::illuminance::{illuminance_models, IlluminanceModel, IlluminanceSample};
use super::kernel::{bin_to_pixels, PsfKernel};
use super::pupil::{amplitude_spread, pupil_function, sample_exit_pupil, FieldPoint, PupilConfig};
use super::PsfError;
use crate::error::Result;
use crate::optics::{find_chief_ray, trace_ray, LensPrescription, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Patch rows and columns.
    pub patches: [usize; 2],
    /// Kernel side in pixels (odd).
    pub kernel_size: usize,
    pub pupil: PupilConfig,
    /// Zero-padding factor of the pupil before the Fourier transform.
    pub padding: usize,
    /// Name of the illuminance model, see [`illuminance_models`].
    pub illuminance: String,
    /// Reuse kernels across mirror-symmetric (and, for square layouts,
    /// transposed) patch positions.
    pub use_symmetry: bool,
    pub max_failure_fraction: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            patches: [32, 32],
            kernel_size: 25,
            pupil: PupilConfig::default(),
            padding: 4,
            illuminance: "ray-statistics".into(),
            use_symmetry: true,
            max_failure_fraction: 0.01,
        }
    }
}

/// Per-patch kernels for every colour channel and per-patch relative
/// illuminance at one object distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfGrid {
    pub distance: f64,
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub kernel_size: usize,
    /// Indexed `[(row * cols + col) * channels + channel]`.
    pub kernels: Vec<PsfKernel>,
    /// Indexed `[row * cols + col]`, in `(0, 1]`.
    pub illuminance: Vec<f64>,
}

impl PsfGrid {
    /// Every patch uses `kernel`, illuminance 1.
    pub fn uniform(rows: usize, cols: usize, channels: usize, kernel: &PsfKernel) -> Self {
        let mut kernels = Vec::with_capacity(rows * cols * channels);
        for r in 0..rows {
            for c in 0..cols {
                for ch in 0..channels {
                    let mut k = kernel.clone();
                    k.field = (r, c);
                    k.channel = ch;
                    kernels.push(k);
                }
            }
        }
        Self {
            distance: 0.0,
            rows,
            cols,
            channels,
            kernel_size: kernel.size,
            kernels,
            illuminance: vec![1.0; rows * cols],
        }
    }

    pub fn identity(rows: usize, cols: usize, channels: usize) -> Self {
        Self::uniform(rows, cols, channels, &PsfKernel::delta(1))
    }

    pub fn kernel(&self, row: usize, col: usize, channel: usize) -> &PsfKernel {
        &self.kernels[(row * self.cols + col) * self.channels + channel]
    }

    pub fn illuminance_at(&self, row: usize, col: usize) -> f64 {
        self.illuminance[row * self.cols + col]
    }
}

/// Polychromatic kernels of one field point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldKernels {
    pub field: FieldPoint,
    /// One kernel per channel, centred on the primary-wavelength chief-ray
    /// image point.
    pub channels: Vec<PsfKernel>,
    pub chief_image_point: [f64; 2],
    /// Sampled at the primary wavelength.
    pub illuminance: IlluminanceSample,
}

/// Diffraction PSFs of `field` for every channel, binned onto pixels of
/// the prescription's pitch.
pub fn field_kernels(
    prescription: &LensPrescription,
    field: FieldPoint,
    config: &GridConfig,
) -> Result<FieldKernels, PsfError> {
    let k = config.kernel_size;
    if k == 0 || k.is_multiple_of(2) {
        return Err(PsfError::InvalidConfig(format!(
            "kernel size must be odd, got {k}"
        )));
    }
    let pitch = prescription.pixel_pitch();
    let primary = prescription.primary_wavelength();
    let reference = sample_exit_pupil(prescription, field, primary, config.pupil)?;
    let centre = reference.chief_image_point;
    let illuminance = IlluminanceSample::from(&reference);

    let channels = prescription.channel_count();
    let mut acc = vec![vec![0.0; k * k]; channels];
    let mut weight_used = vec![0.0; channels];
    for spec in prescription.wavelengths() {
        if spec.weight == 0.0 {
            continue;
        }
        let map = if spec.nm == primary {
            reference.clone()
        } else {
            sample_exit_pupil(prescription, field, spec.nm, config.pupil)?
        };
        let h = amplitude_spread(&pupil_function(&map), map.n, config.padding)?;
        let m = h.size;
        let intensity = h.intensity();
        let total: f64 = intensity.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(PsfError::DegenerateField(format!(
                "no energy at {} nm",
                spec.nm
            )));
        }
        let offset = [
            map.chief_image_point[0] - centre[0],
            map.chief_image_point[1] - centre[1],
        ];
        let binned = bin_to_pixels(&intensity, m, map.image_step(m), offset, pitch, k);
        for (a, b) in acc[spec.channel].iter_mut().zip(&binned) {
            *a += spec.weight * b / total;
        }
        weight_used[spec.channel] += spec.weight;
    }
    let mut kernels = Vec::with_capacity(channels);
    for (ch, values) in acc.into_iter().enumerate() {
        let mut kernel = PsfKernel::from_values(k, values);
        kernel.channel = ch;
        kernel.pixel_pitch = pitch;
        if weight_used[ch] == 0.0 {
            kernel = PsfKernel {
                values: PsfKernel::delta(k).values,
                ..kernel
            };
        } else if !kernel.normalize() {
            return Err(PsfError::DegenerateField(format!(
                "channel {ch} kernel falls outside the {k}×{k} window"
            )));
        }
        kernels.push(kernel);
    }
    Ok(FieldKernels {
        field,
        channels: kernels,
        chief_image_point: centre,
        illuminance,
    })
}

/// Lateral magnification (image height over object height) at object
/// displacement `d`, from a near-axis chief ray.
pub fn magnification(prescription: &LensPrescription, d: f64) -> Result<f64, PsfError> {
    let nm = prescription.primary_wavelength();
    let z = prescription.object_z(d);
    let h = 1e-4 * z.abs();
    let chief = find_chief_ray(prescription, &Vec3::new(0.0, h, z), nm)?;
    let result = trace_ray(prescription, &chief, nm);
    match (result.vignetted, result.last_point()) {
        (None, Some(p)) if p.y != 0.0 => Ok(p.y / h),
        _ => Err(PsfError::DegenerateField(
            "near-axis chief ray does not reach the image".into(),
        )),
    }
}

/// Object-space field point whose nominal image lies at the centre of
/// patch `(row, col)` of an `image_dims = [height, width]` sensor.
fn patch_field(
    row: usize,
    col: usize,
    patches: [usize; 2],
    image_dims: [usize; 2],
    pitch: f64,
    m: f64,
    d: f64,
) -> FieldPoint {
    let sy = ((row as f64 + 0.5) / patches[0] as f64 - 0.5) * image_dims[0] as f64 * pitch;
    let sx = ((col as f64 + 0.5) / patches[1] as f64 - 0.5) * image_dims[1] as f64 * pitch;
    FieldPoint::new(sx / m, sy / m, d)
}

/// How patch `(row, col)` derives from a computed representative.
#[derive(Debug, Clone, Copy)]
struct Derivation {
    source: (usize, usize),
    transpose: bool,
    flip_rows: bool,
    flip_cols: bool,
}

fn derivation(
    row: usize,
    col: usize,
    patches: [usize; 2],
    square: bool,
    symmetric: bool,
) -> Derivation {
    if !symmetric {
        return Derivation {
            source: (row, col),
            transpose: false,
            flip_rows: false,
            flip_cols: false,
        };
    }
    let r = row.min(patches[0] - 1 - row);
    let c = col.min(patches[1] - 1 - col);
    let (source, transpose) = if square && c < r {
        ((c, r), true)
    } else {
        ((r, c), false)
    };
    Derivation {
        source,
        transpose,
        flip_rows: r != row,
        flip_cols: c != col,
    }
}

fn derive(kernel: &PsfKernel, how: &Derivation) -> PsfKernel {
    let mut k = if how.transpose {
        kernel.transpose()
    } else {
        kernel.clone()
    };
    if how.flip_rows {
        k = k.flip_rows();
    }
    if how.flip_cols {
        k = k.flip_cols();
    }
    k
}

/// PSF grid for object displacement `d` and an image of
/// `image_dims = [height, width]` pixels.
pub fn psf_grid(
    prescription: &LensPrescription,
    d: f64,
    image_dims: [usize; 2],
    config: &GridConfig,
) -> Result<PsfGrid> {
    let model = illuminance_models().create(&config.illuminance)?;
    psf_grid_with(prescription, d, image_dims, config, model.as_ref())
}

pub fn psf_grid_with(
    prescription: &LensPrescription,
    d: f64,
    image_dims: [usize; 2],
    config: &GridConfig,
    model: &dyn IlluminanceModel,
) -> Result<PsfGrid> {
    let [rows, cols] = config.patches;
    if rows == 0 || cols == 0 {
        return Err(PsfError::InvalidConfig("patch grid must be non-empty".into()).into());
    }
    let pitch = prescription.pixel_pitch();
    let m = magnification(prescription, d)?;
    let square = rows == cols && image_dims[0] == image_dims[1];

    let plan: Vec<Derivation> = (0..rows * cols)
        .map(|i| {
            derivation(
                i / cols,
                i % cols,
                config.patches,
                square,
                config.use_symmetry,
            )
        })
        .collect();
    let mut sources: Vec<(usize, usize)> = plan.iter().map(|p| p.source).collect();
    sources.sort_unstable();
    sources.dedup();

    let results: Vec<Result<FieldKernels, PsfError>> = sources
        .par_iter()
        .map(|&(r, c)| {
            let field = patch_field(r, c, config.patches, image_dims, pitch, m, d);
            field_kernels(prescription, field, config)
        })
        .collect();
    for (&(r, c), res) in sources.iter().zip(&results) {
        if let Err(e) = res {
            log::warn!("patch ({r}, {c}) at d = {d} mm failed: {e}");
        }
    }

    let axis_map = sample_exit_pupil(
        prescription,
        FieldPoint::on_axis(d),
        prescription.primary_wavelength(),
        config.pupil,
    )?;
    let on_axis = IlluminanceSample::from(&axis_map);

    let lookup = |src: (usize, usize)| {
        sources
            .binary_search(&src)
            .ok()
            .and_then(|i| results[i].as_ref().ok())
    };
    let failed: Vec<bool> = plan.iter().map(|p| lookup(p.source).is_none()).collect();
    let n_failed = failed.iter().filter(|&&f| f).count();
    let total = rows * cols;
    if n_failed as f64 > config.max_failure_fraction * total as f64 {
        return Err(PsfError::TooManyFieldFailures {
            failed: n_failed,
            total,
            limit: 100.0 * config.max_failure_fraction,
        }
        .into());
    }
    if n_failed == total {
        return Err(PsfError::DegenerateField("every patch failed".into()).into());
    }

    // Failed patches borrow from the nearest successful one.
    let nearest_ok = |idx: usize| -> usize {
        let (r0, c0) = ((idx / cols) as isize, (idx % cols) as isize);
        (0..total)
            .filter(|&j| !failed[j])
            .min_by_key(|&j| {
                let (r, c) = ((j / cols) as isize, (j % cols) as isize);
                ((r - r0).pow(2) + (c - c0).pow(2), j)
            })
            .expect("at least one patch succeeded")
    };

    let channels = prescription.channel_count();
    let mut kernels = Vec::with_capacity(total * channels);
    let mut illuminance = Vec::with_capacity(total);
    for (idx, &bad) in failed.iter().enumerate() {
        let use_idx = if bad { nearest_ok(idx) } else { idx };
        let how = plan[use_idx];
        let fk = lookup(how.source).expect("source succeeded");
        for kernel in &fk.channels {
            let mut k = derive(kernel, &how);
            k.field = (idx / cols, idx % cols);
            kernels.push(k);
        }
        illuminance.push(model.ratio(&fk.illuminance, &on_axis));
    }
    let centre = illuminance[(rows / 2) * cols + cols / 2];
    if !(centre > 0.0 && centre.is_finite()) {
        return Err(PsfError::DegenerateField("central patch has no illuminance".into()).into());
    }
    for v in &mut illuminance {
        *v = (*v / centre).clamp(f64::MIN_POSITIVE, 1.0);
    }

    Ok(PsfGrid {
        distance: d,
        rows,
        cols,
        channels,
        kernel_size: config.kernel_size,
        kernels,
        illuminance,
    })
}
