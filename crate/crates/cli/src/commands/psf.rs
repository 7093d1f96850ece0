use aberrasim_core::imaging::GridCache;
use aberrasim_core::wavefront::{render_mosaic_png, write_psfg};
use serde::Serialize;

use super::{cache_dir, display, file_sha256, grid_config, load_prescription, Output};
use crate::args::PsfArgs;
use crate::error::Result;

#[derive(Debug, Serialize)]
struct PsfReport {
    out: String,
    sha256: String,
    mosaic: Option<String>,
    distance_mm: f64,
    rows: usize,
    cols: usize,
    channels: usize,
    kernel_size: usize,
    illuminance_min: f64,
    illuminance_max: f64,
}

pub fn run(args: &PsfArgs, out: &Output) -> Result<()> {
    let p = load_prescription(&args.lens)?;
    let config = grid_config(&args.grid)?;
    let grid = GridCache::new(&p, &config, cache_dir()).get(
        &p,
        args.distance,
        args.image_size,
        &config,
    )?;
    write_psfg(&args.out, &grid)?;
    if let Some(png) = &args.dump_png {
        render_mosaic_png(png, &grid)?;
    }
    let report = PsfReport {
        out: display(&args.out),
        sha256: file_sha256(&args.out)?,
        mosaic: args.dump_png.as_deref().map(display),
        distance_mm: grid.distance,
        rows: grid.rows,
        cols: grid.cols,
        channels: grid.channels,
        kernel_size: grid.kernel_size,
        illuminance_min: grid
            .illuminance
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
        illuminance_max: grid.illuminance.iter().cloned().fold(0.0, f64::max),
    };
    out.emit(&report, || {
        format!(
            "{}×{} patches × {} channels of {}×{} kernels at d = {} mm → {}",
            report.rows,
            report.cols,
            report.channels,
            report.kernel_size,
            report.kernel_size,
            report.distance_mm,
            report.out
        )
    })
}
