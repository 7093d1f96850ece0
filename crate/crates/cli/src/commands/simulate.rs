use aberrasim_core::imaging::{psnr, simulate_with_grid, GridCache, ImageBuffer};
use serde::Serialize;

use super::{
    cache_dir, display, file_sha256, grid_config, load_prescription, simulation_config, Output,
};
use crate::args::SimulateArgs;
use crate::error::Result;

#[derive(Debug, Serialize)]
struct SimulateReport {
    input: String,
    out: String,
    sha256: String,
    distance_mm: f64,
    seed: u64,
    height: usize,
    width: usize,
    channels: usize,
    psnr_db: f64,
}

pub fn run(args: &SimulateArgs, out: &Output) -> Result<()> {
    let p = load_prescription(&args.lens)?;
    let config = simulation_config(
        grid_config(&args.grid)?,
        &args.conv,
        args.noise,
        args.no_noise,
    )?;
    let img = ImageBuffer::load(&args.input)?;
    let dims = [img.height, img.width];
    let grid =
        GridCache::new(&p, &config.grid, cache_dir()).get(&p, args.distance, dims, &config.grid)?;
    let degraded = simulate_with_grid(&img, &grid, &config, args.seed)?;
    degraded.save_png16(&args.out)?;
    let report = SimulateReport {
        input: display(&args.input),
        out: display(&args.out),
        sha256: file_sha256(&args.out)?,
        distance_mm: args.distance,
        seed: args.seed,
        height: img.height,
        width: img.width,
        channels: img.channels,
        psnr_db: psnr(&degraded, &img)?,
    };
    out.emit(&report, || {
        format!(
            "{} → {} at d = {} mm ({:.2} dB against the input)",
            report.input, report.out, report.distance_mm, report.psnr_db
        )
    })
}
