use aberrasim_core::imaging::{
    mtf50, mtf_from_psf, slanted_edge_mtf, write_mtf_csv, ImageBuffer, Roi,
};
use aberrasim_core::wavefront::{read_psfg, PsfKernel};
use serde::Serialize;

use super::{display, Output};
use crate::args::MtfArgs;
use crate::error::{CliError, Result};

#[derive(Debug, Serialize)]
struct MtfReport {
    source: String,
    mtf50: f64,
    at_nyquist: bool,
    samples: usize,
    out: Option<String>,
}

pub fn run(args: &MtfArgs, out: &Output) -> Result<()> {
    let (source, curve) = if let Some(sigma) = args.source.gaussian {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CliError::Invalid(format!(
                "--gaussian {sigma} must be positive"
            )));
        }
        if args.kernel_size.is_multiple_of(2) {
            return Err(CliError::Invalid(format!(
                "--kernel-size {} must be odd",
                args.kernel_size
            )));
        }
        (
            format!("gaussian sigma {sigma} px"),
            mtf_from_psf(&PsfKernel::gaussian(args.kernel_size, sigma)),
        )
    } else if let Some(path) = &args.source.psfg {
        let grid = read_psfg(path)?;
        let [r, c] = args.patch.unwrap_or([grid.rows / 2, grid.cols / 2]);
        let ch = args.channel.unwrap_or(grid.channels / 2);
        if r >= grid.rows || c >= grid.cols || ch >= grid.channels {
            return Err(CliError::Invalid(format!(
                "patch ({r}, {c}) channel {ch} outside a {}×{}×{} grid",
                grid.rows, grid.cols, grid.channels
            )));
        }
        (
            format!("{} patch ({r}, {c}) channel {ch}", display(path)),
            mtf_from_psf(grid.kernel(r, c, ch)),
        )
    } else if let Some(path) = &args.source.image {
        let [x, y, width, height] = args
            .roi
            .ok_or_else(|| CliError::Invalid("--image needs --roi X,Y,W,H".into()))?;
        let img = ImageBuffer::load(path)?;
        if x + width > img.width || y + height > img.height {
            return Err(CliError::Invalid(format!(
                "ROI exceeds the {}×{} image",
                img.width, img.height
            )));
        }
        let roi = Roi {
            x,
            y,
            width,
            height,
        };
        (
            format!("{} slanted edge", display(path)),
            slanted_edge_mtf(&img, roi)?,
        )
    } else {
        unreachable!("clap requires one source")
    };
    if let Some(path) = &args.out {
        write_mtf_csv(path, &curve)?;
    }
    let m = mtf50(&curve);
    let report = MtfReport {
        source,
        mtf50: m.frequency,
        at_nyquist: m.at_nyquist,
        samples: curve.frequency.len(),
        out: args.out.as_deref().map(display),
    };
    out.emit(&report, || {
        if report.at_nyquist {
            format!("MTF50 {:.4} c/p (no crossing below Nyquist)", report.mtf50)
        } else {
            format!("MTF50 {:.4} c/p", report.mtf50)
        }
    })
}
