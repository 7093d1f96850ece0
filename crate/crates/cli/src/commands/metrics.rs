use aberrasim_core::imaging::{psnr, ssim, ImageBuffer};
use serde::Serialize;

use super::{display, Output};
use crate::args::MetricsArgs;
use crate::error::Result;

#[derive(Debug, Serialize)]
struct MetricsReport {
    reference: String,
    test: String,
    psnr_db: f64,
    ssim: f64,
}

pub fn run(args: &MetricsArgs, out: &Output) -> Result<()> {
    let a = ImageBuffer::load(&args.reference)?;
    let b = ImageBuffer::load(&args.test)?;
    let report = MetricsReport {
        reference: display(&args.reference),
        test: display(&args.test),
        psnr_db: psnr(&a, &b)?,
        ssim: ssim(&a, &b)?,
    };
    out.emit(&report, || {
        format!("PSNR {:.4} dB  SSIM {:.4}", report.psnr_db, report.ssim)
    })
}
