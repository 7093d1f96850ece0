//! One module per subcommand, plus the helpers they share.

mod dataset;
mod inn;
mod metrics;
mod mtf;
mod psf;
mod simulate;
mod trace;

use std::path::{Path, PathBuf};

use aberrasim_core::imaging::{convolution_backends, SimulationConfig};
use aberrasim_core::optics::LensPrescription;
use aberrasim_core::wavefront::{GridConfig, PupilConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{Cli, Command, GridArgs, LensArgs};
use crate::error::{CliError, Result};

pub const CACHE_ENV: &str = "ABERRASIM_CACHE_DIR";

pub fn run(cli: &Cli) -> Result<()> {
    let out = Output {
        json: cli.json,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Trace(a) => trace::run(a, &out),
        Command::Psf(a) => psf::run(a, &out),
        Command::Simulate(a) => simulate::run(a, &out),
        Command::Dataset(a) => dataset::run(a, &out),
        Command::Mtf(a) => mtf::run(a, &out),
        Command::Metrics(a) => metrics::run(a, &out),
        Command::InnRoundtrip(a) => inn::run(a, &out),
    }
}

/// Output mode selected by the global flags.
pub struct Output {
    json: bool,
    quiet: bool,
}

impl Output {
    pub fn emit<T: Serialize>(&self, report: &T, human: impl FnOnce() -> String) -> Result<()> {
        if self.json {
            let text = serde_json::to_string_pretty(report).expect("reports serialize");
            println!("{text}");
        } else if !self.quiet {
            println!("{}", human());
        }
        Ok(())
    }
}

pub fn load_prescription(args: &LensArgs) -> Result<LensPrescription> {
    match &args.prescription {
        Some(path) => Ok(LensPrescription::load(path)?),
        None => Ok(LensPrescription::toy()),
    }
}

pub fn grid_config(args: &GridArgs) -> Result<GridConfig> {
    if args.kernel_size.is_multiple_of(2) {
        return Err(CliError::Invalid(format!(
            "--kernel-size {} must be odd",
            args.kernel_size
        )));
    }
    if args.pupil_n < 2 || !args.pupil_n.is_multiple_of(2) {
        return Err(CliError::Invalid(format!(
            "--pupil-n {} must be even",
            args.pupil_n
        )));
    }
    if args.patches.contains(&0) {
        return Err(CliError::Invalid("--patches must be positive".into()));
    }
    Ok(GridConfig {
        patches: args.patches,
        kernel_size: args.kernel_size,
        pupil: PupilConfig {
            samples: args.pupil_n,
            ..PupilConfig::default()
        },
        illuminance: args.illuminance.clone(),
        use_symmetry: !args.no_symmetry,
        ..GridConfig::default()
    })
}

pub fn simulation_config(
    grid: GridConfig,
    conv: &str,
    noise: [f64; 2],
    no_noise: bool,
) -> Result<SimulationConfig> {
    let backends = convolution_backends();
    if !backends.contains(conv) {
        return Err(CliError::Invalid(format!(
            "unknown --conv `{conv}` (available: {})",
            backends.names().join(", ")
        )));
    }
    Ok(SimulationConfig {
        grid,
        backend: conv.to_string(),
        noise: if no_noise {
            None
        } else {
            Some((noise[0], noise[1]))
        },
        ..SimulationConfig::default()
    })
}

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}
