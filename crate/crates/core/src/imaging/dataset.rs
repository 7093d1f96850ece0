use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::buffer::ImageBuffer;
use super::simulate::{simulate_with_grid, SimulationConfig, DISTANCE_RANGE_MM};
use super::ImageError;
use crate::error::{Error, Result};
use crate::optics::LensPrescription;
use crate::wavefront::{decode_psfg, encode_psfg, psf_grid, GridConfig, PsfGrid};

pub const MANIFEST_VERSION: &str = env!("CARGO_PKG_VERSION");

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub sharp: String,
    /// Relative to the manifest's directory.
    pub degraded: String,
    pub distance_mm: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: String,
    pub prescription_sha256: String,
    pub entries: Vec<DatasetEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text).map_err(|e| ImageError::Manifest(e.to_string()))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// An input that could not be processed; generation carried on without it.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFailure {
    pub sharp: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetReport {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
    pub failures: Vec<DatasetFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub sharp_dir: PathBuf,
    pub out_dir: PathBuf,
    pub distances: Vec<f64>,
    pub seed: u64,
    pub simulation: SimulationConfig,
    /// Persist PSF grids here and reuse them across runs.
    pub cache_dir: Option<PathBuf>,
}

/// `−125, −122.5, …, 125` mm: 101 values.
pub fn default_distances() -> Vec<f64> {
    distance_range(-125.0, 125.0, 2.5).expect("valid default range")
}

/// Inclusive arithmetic range `start, start + step, …` up to `stop`.
pub fn distance_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, ImageError> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(ImageError::InvalidConfig(format!(
            "bad distance range {start}:{step}:{stop}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Noise seed of one (image, distance) pair.
pub fn entry_seed(seed: u64, image: usize, distance: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((image as u64) << 32) | distance as u64))
}

/// PSF grids keyed by distance and image size, in memory and optionally on
/// disk. Grids pass through the on-disk encoding even when not persisted,
/// so cached and fresh runs produce identical images.
pub struct GridCache {
    memory: HashMap<(u64, usize, usize), Arc<PsfGrid>>,
    dir: Option<PathBuf>,
    key: String,
}

impl GridCache {
    pub fn new(prescription: &LensPrescription, config: &GridConfig, dir: Option<PathBuf>) -> Self {
        let mut h = Sha256::new();
        h.update(prescription.sha256());
        h.update(format!("{config:?}"));
        Self {
            memory: HashMap::new(),
            dir,
            key: hex::encode(&h.finalize()[..8]),
        }
    }

    pub fn clear_memory(&mut self) {
        self.memory.clear();
    }

    fn file_name(&self, d: f64, dims: [usize; 2]) -> String {
        format!("{}_{:+.4}_{}x{}.psfg", self.key, d, dims[0], dims[1])
    }

    pub fn get(
        &mut self,
        prescription: &LensPrescription,
        d: f64,
        dims: [usize; 2],
        config: &GridConfig,
    ) -> Result<Arc<PsfGrid>> {
        let key = (d.to_bits(), dims[0], dims[1]);
        if let Some(g) = self.memory.get(&key) {
            return Ok(g.clone());
        }
        let path = self
            .dir
            .as_ref()
            .map(|dir| dir.join(self.file_name(d, dims)));
        let bytes = match path.as_ref().filter(|p| p.is_file()) {
            Some(p) => std::fs::read(p).map_err(|e| Error::io(p, e))?,
            None => {
                let bytes = encode_psfg(&psf_grid(prescription, d, dims, config)?);
                if let Some(p) = &path {
                    if let Some(dir) = p.parent() {
                        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    }
                    std::fs::write(p, &bytes).map_err(|e| Error::io(p, e))?;
                }
                bytes
            }
        };
        let grid = Arc::new(decode_psfg(&bytes)?);
        self.memory.insert(key, grid.clone());
        Ok(grid)
    }
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Degrades every image of `sharp_dir` at every distance, writing 16-bit
/// PNGs under `out_dir/degraded` and `out_dir/manifest.json`.
pub fn generate_dataset(
    prescription: &LensPrescription,
    config: &DatasetConfig,
) -> Result<DatasetReport> {
    let (lo, hi) = DISTANCE_RANGE_MM;
    if config.distances.is_empty() {
        return Err(ImageError::InvalidConfig("no distances requested".into()).into());
    }
    if let Some(d) = config.distances.iter().find(|d| !(lo..=hi).contains(*d)) {
        return Err(
            ImageError::InvalidConfig(format!("distance {d} mm outside [{lo}, {hi}]")).into(),
        );
    }
    let images = list_images(&config.sharp_dir)?;
    let degraded_dir = config.out_dir.join("degraded");
    std::fs::create_dir_all(&degraded_dir).map_err(|e| Error::io(&degraded_dir, e))?;

    let mut cache = GridCache::new(
        prescription,
        &config.simulation.grid,
        config.cache_dir.clone(),
    );
    let mut failed: HashMap<usize, String> = HashMap::new();
    let mut entries = Vec::new();
    for (j, &d) in config.distances.iter().enumerate() {
        cache.clear_memory();
        for (i, path) in images.iter().enumerate() {
            if failed.contains_key(&i) {
                continue;
            }
            let img = match ImageBuffer::load(path) {
                Ok(img) => img,
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    failed.insert(i, e.to_string());
                    continue;
                }
            };
            let grid = cache.get(
                prescription,
                d,
                [img.height, img.width],
                &config.simulation.grid,
            )?;
            let seed = entry_seed(config.seed, i, j);
            let out = simulate_with_grid(&img, &grid, &config.simulation, seed)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            let name = format!("{stem}_d{d:+.1}.png");
            out.save_png16(&degraded_dir.join(&name))?;
            entries.push((
                i,
                j,
                DatasetEntry {
                    sharp: path.display().to_string(),
                    degraded: format!("degraded/{name}"),
                    distance_mm: d,
                    seed,
                },
            ));
        }
    }
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION.to_string(),
        prescription_sha256: prescription.sha256(),
        entries: entries.into_iter().map(|(_, _, e)| e).collect(),
    };
    let manifest_path = config.out_dir.join("manifest.json");
    manifest.save(&manifest_path)?;
    let mut failures: Vec<DatasetFailure> = failed
        .into_iter()
        .map(|(i, message)| DatasetFailure {
            sharp: images[i].clone(),
            message,
        })
        .collect();
    failures.sort_by(|a, b| a.sharp.cmp(&b.sharp));
    Ok(DatasetReport {
        manifest,
        manifest_path,
        failures,
    })
}
