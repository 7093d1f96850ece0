use aberrasim_core::imaging::{generate_dataset, DatasetConfig};
use serde::Serialize;

use super::{cache_dir, display, grid_config, load_prescription, simulation_config, Output};
use crate::args::DatasetArgs;
use crate::error::Result;

#[derive(Debug, Serialize)]
struct Failure {
    sharp: String,
    message: String,
}

#[derive(Debug, Serialize)]
struct DatasetReport {
    manifest: String,
    entries: usize,
    distances: usize,
    seed: u64,
    failures: Vec<Failure>,
}

pub fn run(args: &DatasetArgs, out: &Output) -> Result<()> {
    let p = load_prescription(&args.lens)?;
    let simulation = simulation_config(
        grid_config(&args.grid)?,
        &args.conv,
        args.noise,
        args.no_noise,
    )?;
    let config = DatasetConfig {
        sharp_dir: args.sharp_dir.clone(),
        out_dir: args.out.clone(),
        distances: args.distances.0.clone(),
        seed: args.seed,
        simulation,
        cache_dir: cache_dir(),
    };
    let result = generate_dataset(&p, &config)?;
    for f in &result.failures {
        log::warn!("skipped {}: {}", f.sharp.display(), f.message);
    }
    let report = DatasetReport {
        manifest: display(&result.manifest_path),
        entries: result.manifest.entries.len(),
        distances: args.distances.0.len(),
        seed: args.seed,
        failures: result
            .failures
            .iter()
            .map(|f| Failure {
                sharp: display(&f.sharp),
                message: f.message.clone(),
            })
            .collect(),
    };
    out.emit(&report, || {
        format!(
            "{} entries over {} distances → {} ({} image(s) skipped)",
            report.entries,
            report.distances,
            report.manifest,
            report.failures.len()
        )
    })
}
