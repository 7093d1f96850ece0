use aberrasim_core::optics::{aim_ray, trace_ray, Vec3};
use serde::Serialize;

use super::{display, load_prescription, Output};
use crate::args::TraceArgs;
use crate::error::{CliError, Result};

#[derive(Debug, Serialize)]
struct RayReport {
    /// Fan coordinate as a fraction of the stop radius.
    pupil: f64,
    stop_target_mm: [f64; 2],
    transmitted: bool,
    vignetted_at: Option<usize>,
    cause: Option<String>,
    hit_points: Vec<[f64; 3]>,
    opl_mm: Option<f64>,
    exit_direction: Option<[f64; 3]>,
}

#[derive(Debug, Serialize)]
struct TraceReport {
    prescription_sha256: String,
    distance_mm: f64,
    field_mm: [f64; 2],
    wavelength_nm: f64,
    rays: Vec<RayReport>,
}

fn xyz(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn run(args: &TraceArgs, out: &Output) -> Result<()> {
    let p = load_prescription(&args.lens)?;
    let nm = args.wavelength.unwrap_or_else(|| p.primary_wavelength());
    if !(nm > 0.0 && nm.is_finite()) {
        return Err(CliError::Invalid(format!(
            "--wavelength {nm} must be positive"
        )));
    }
    if !(args.fan_extent >= 0.0 && args.fan_extent.is_finite()) {
        return Err(CliError::Invalid(
            "--fan-extent must be non-negative".into(),
        ));
    }
    let stop_radius = p.surfaces()[p.stop_index()].semi_diameter;
    let object = Vec3::new(args.field[0], args.field[1], p.object_z(args.distance));
    let n = args.rays as usize;
    let mut rays = Vec::with_capacity(n);
    for i in 0..n {
        let pupil = if n == 1 {
            0.0
        } else {
            args.fan_extent * (2.0 * i as f64 / (n - 1) as f64 - 1.0)
        };
        let target = [0.0, pupil * stop_radius];
        let report = match aim_ray(&p, &object, target, nm) {
            Ok((ray, _)) => {
                let r = trace_ray(&p, &ray, nm);
                let transmitted = r.is_transmitted();
                RayReport {
                    pupil,
                    stop_target_mm: target,
                    transmitted,
                    vignetted_at: r.vignetted.map(|v| v.surface),
                    cause: r.vignetted.map(|v| v.cause.to_string()),
                    hit_points: r.hit_points.iter().map(xyz).collect(),
                    opl_mm: transmitted.then_some(r.opl),
                    exit_direction: transmitted.then(|| xyz(&r.exit_direction)),
                }
            }
            Err(e) => RayReport {
                pupil,
                stop_target_mm: target,
                transmitted: false,
                vignetted_at: None,
                cause: Some(e.to_string()),
                hit_points: Vec::new(),
                opl_mm: None,
                exit_direction: None,
            },
        };
        rays.push(report);
    }
    let report = TraceReport {
        prescription_sha256: p.sha256(),
        distance_mm: args.distance,
        field_mm: args.field,
        wavelength_nm: nm,
        rays,
    };
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&report).expect("reports serialize");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?;
    }
    out.emit(&report, || {
        let mut s = format!(
            "{} ray(s) at {nm} nm from ({}, {}) mm, d = {} mm",
            report.rays.len(),
            args.field[0],
            args.field[1],
            args.distance
        );
        for r in &report.rays {
            s.push_str(&format!("\n  pupil {:+.3}: ", r.pupil));
            match (r.transmitted, r.hit_points.last()) {
                (true, Some(end)) => s.push_str(&format!(
                    "image ({:.6}, {:.6}) mm, OPL {:.6} mm",
                    end[0],
                    end[1],
                    r.opl_mm.unwrap_or(f64::NAN)
                )),
                _ => s.push_str(&format!(
                    "vignetted{}: {}",
                    r.vignetted_at
                        .map(|i| format!(" at surface {i}"))
                        .unwrap_or_default(),
                    r.cause.as_deref().unwrap_or("unknown")
                )),
            }
        }
        if let Some(path) = &args.out {
            s.push_str(&format!("\nwrote {}", display(path)));
        }
        s
    })
}
