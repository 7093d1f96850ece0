//! Command-line arguments and the small value parsers they use.

use std::path::PathBuf;

use aberrasim_core::imaging::{distance_range, DISTANCE_RANGE_MM};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "aberrasim",
    version,
    about = "Ray-traced lens aberration synthesis and analysis"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true, conflicts_with = "quiet")]
    pub json: bool,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace a fan of rays through the prescription.
    Trace(TraceArgs),
    /// Compute the PSF grid for one object distance.
    Psf(PsfArgs),
    /// Degrade one image.
    Simulate(SimulateArgs),
    /// Degrade a directory of sharp images at several distances.
    Dataset(DatasetArgs),
    /// MTF curve and MTF50 of a kernel or a slanted edge.
    Mtf(MtfArgs),
    /// PSNR and SSIM between two images.
    Metrics(MetricsArgs),
    /// Forward/inverse round trip of the invertible block chain.
    InnRoundtrip(InnArgs),
}

#[derive(Debug, Args)]
pub struct LensArgs {
    /// Prescription JSON (default: the bundled toy lens).
    #[arg(long)]
    pub prescription: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Pupil samples per side (even).
    #[arg(long, default_value_t = 128)]
    pub pupil_n: usize,
    /// Patch rows and columns, `R,C`.
    #[arg(long, value_parser = parse_usize_pair, default_value = "32,32")]
    pub patches: [usize; 2],
    /// Kernel side in pixels (odd).
    #[arg(long, default_value_t = 25)]
    pub kernel_size: usize,
    /// Relative illuminance model.
    #[arg(long, default_value = "ray-statistics")]
    pub illuminance: String,
    /// Compute every patch instead of reusing mirror-symmetric ones.
    #[arg(long)]
    pub no_symmetry: bool,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub lens: LensArgs,
    /// Object displacement from the in-focus plane, mm.
    #[arg(long, default_value_t = 0.0, value_parser = parse_distance, allow_hyphen_values = true)]
    pub distance: f64,
    /// Object point `X,Y` in mm.
    #[arg(long, value_parser = parse_f64_pair, default_value = "0,0", allow_hyphen_values = true)]
    pub field: [f64; 2],
    /// Number of rays in the meridional fan.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub rays: u32,
    /// Fan half-width as a fraction of the stop radius.
    #[arg(long, default_value_t = 1.0)]
    pub fan_extent: f64,
    /// Wavelength in nm (default: the primary wavelength).
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Also write the JSON dump here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PsfArgs {
    #[command(flatten)]
    pub lens: LensArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_parser = parse_distance, allow_hyphen_values = true)]
    pub distance: f64,
    /// Sensor size in pixels, `H,W`.
    #[arg(long, value_parser = parse_usize_pair, default_value = "512,512")]
    pub image_size: [usize; 2],
    /// Output PSFG file.
    #[arg(long)]
    pub out: PathBuf,
    /// Also render a PNG mosaic of the green-channel kernels.
    #[arg(long)]
    pub dump_png: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub lens: LensArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Sharp input image (linear values).
    #[arg(long)]
    pub input: PathBuf,
    /// Degraded 16-bit PNG.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_distance, allow_hyphen_values = true)]
    pub distance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Convolution backend.
    #[arg(long, default_value = "auto")]
    pub conv: String,
    /// Noise variance `A,B` in `σ² = A·I + B`.
    #[arg(long, value_parser = parse_f64_pair, default_value = "0.001,0.0001")]
    pub noise: [f64; 2],
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[command(flatten)]
    pub lens: LensArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Directory of sharp images.
    #[arg(long)]
    pub sharp_dir: PathBuf,
    /// Output directory for `degraded/` and `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated list or `START:STEP:STOP` range, mm.
    #[arg(long, value_parser = parse_distances, default_value = "-125:2.5:125", allow_hyphen_values = true)]
    pub distances: Distances,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "auto")]
    pub conv: String,
    #[arg(long, value_parser = parse_f64_pair, default_value = "0.001,0.0001")]
    pub noise: [f64; 2],
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct MtfSource {
    /// Synthetic Gaussian kernel of this σ in pixels.
    #[arg(long, group = "source")]
    pub gaussian: Option<f64>,
    /// A kernel from a PSFG file.
    #[arg(long, group = "source")]
    pub psfg: Option<PathBuf>,
    /// Slanted-edge measurement on an image.
    #[arg(long, group = "source")]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MtfArgs {
    #[command(flatten)]
    pub source: MtfSource,
    /// Side of the synthetic Gaussian kernel.
    #[arg(long, default_value_t = 25)]
    pub kernel_size: usize,
    /// Patch `R,C` of the PSFG kernel (default: the central patch).
    #[arg(long, value_parser = parse_usize_pair)]
    pub patch: Option<[usize; 2]>,
    /// Channel of the PSFG kernel (default: the middle channel).
    #[arg(long)]
    pub channel: Option<usize>,
    /// Edge region `X,Y,W,H` for `--image`.
    #[arg(long, value_parser = parse_roi)]
    pub roi: Option<[usize; 4]>,
    /// CSV output of the curve.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Reference image.
    pub reference: PathBuf,
    /// Image under test.
    pub test: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    Zero,
}

#[derive(Debug, Args)]
pub struct InnArgs {
    /// Number of invertible blocks.
    #[arg(long, default_value_t = 12)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side of the random test image (even).
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 0.0, value_parser = parse_distance, allow_hyphen_values = true)]
    pub distance: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    /// Load the network from a weight file instead of initializing it.
    #[arg(long, conflicts_with_all = ["k", "init"])]
    pub weights: Option<PathBuf>,
    /// Write the network to a weight file.
    #[arg(long)]
    pub save_weights: Option<PathBuf>,
}

/// Parsed `--distances` value.
#[derive(Debug, Clone, PartialEq)]
pub struct Distances(pub Vec<f64>);

fn check_distance(d: f64) -> Result<f64, String> {
    let (lo, hi) = DISTANCE_RANGE_MM;
    if (lo..=hi).contains(&d) {
        Ok(d)
    } else {
        Err(format!("distance {d} mm outside [{lo}, {hi}]"))
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("`{s}` is not a number"))
}

pub fn parse_distance(s: &str) -> Result<f64, String> {
    check_distance(parse_number(s)?)
}

pub fn parse_distances(s: &str) -> Result<Distances, String> {
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range `{s}` must be START:STEP:STOP"));
        }
        let (start, step, stop) = (
            parse_number(parts[0])?,
            parse_number(parts[1])?,
            parse_number(parts[2])?,
        );
        distance_range(start, stop, step).map_err(|e| e.to_string())?
    } else {
        s.split(',')
            .map(parse_number)
            .collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err("no distances given".into());
    }
    values
        .into_iter()
        .map(check_distance)
        .collect::<Result<_, _>>()
        .map(Distances)
}

fn parse_list<T: std::str::FromStr, const N: usize>(s: &str) -> Result<[T; N], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated values, got `{s}`"));
    }
    let mut out = Vec::with_capacity(N);
    for p in parts {
        out.push(
            p.trim()
                .parse::<T>()
                .map_err(|_| format!("`{p}` is not a valid value"))?,
        );
    }
    out.try_into()
        .map_err(|_| "length checked above".to_string())
}

pub fn parse_usize_pair(s: &str) -> Result<[usize; 2], String> {
    parse_list(s)
}

pub fn parse_f64_pair(s: &str) -> Result<[f64; 2], String> {
    parse_list(s)
}

pub fn parse_roi(s: &str) -> Result<[usize; 4], String> {
    parse_list(s)
}
