use super::pupil::{sample_exit_pupil, FieldPoint, PupilConfig, PupilMap};
use super::PsfError;
use crate::optics::LensPrescription;
use crate::registry::Registry;

/// What an illuminance model may look at for one field point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminanceSample {
    /// Fraction of launched pupil rays reaching the image plane.
    pub transmitted_fraction: f64,
    /// Object-space chief-ray angle to the axis, radians.
    pub chief_angle: f64,
}

impl From<&PupilMap> for IlluminanceSample {
    fn from(map: &PupilMap) -> Self {
        Self {
            transmitted_fraction: map.transmitted_fraction(),
            chief_angle: map.chief_angle,
        }
    }
}

/// Field-dependent brightness relative to the on-axis value.
pub trait IlluminanceModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Unclamped ratio for `field` against the on-axis sample.
    fn ratio(&self, field: &IlluminanceSample, on_axis: &IlluminanceSample) -> f64;

    /// Ratio limited to `(0, 1]`.
    fn relative(&self, field: &IlluminanceSample, on_axis: &IlluminanceSample) -> f64 {
        self.ratio(field, on_axis).clamp(f64::MIN_POSITIVE, 1.0)
    }
}

/// Ratio of transmitted ray fractions; falls back to cos⁴ when the
/// on-axis count is unusable.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayStatistics;

impl IlluminanceModel for RayStatistics {
    fn name(&self) -> &'static str {
        "ray-statistics"
    }

    fn ratio(&self, field: &IlluminanceSample, on_axis: &IlluminanceSample) -> f64 {
        if on_axis.transmitted_fraction > 0.0 {
            field.transmitted_fraction / on_axis.transmitted_fraction
        } else {
            CosineFourth.ratio(field, on_axis)
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CosineFourth;

impl IlluminanceModel for CosineFourth {
    fn name(&self) -> &'static str {
        "cos4"
    }

    fn ratio(&self, field: &IlluminanceSample, _on_axis: &IlluminanceSample) -> f64 {
        field.chief_angle.cos().powi(4)
    }
}

pub fn illuminance_models() -> Registry<dyn IlluminanceModel> {
    let mut r: Registry<dyn IlluminanceModel> = Registry::new("illuminance model");
    r.register("ray-statistics", || Box::new(RayStatistics));
    r.register("cos4", || Box::new(CosineFourth));
    r
}

/// Relative illuminance of one field point, traced at `nm`.
pub fn relative_illuminance(
    prescription: &LensPrescription,
    field: FieldPoint,
    nm: f64,
    pupil: PupilConfig,
    model: &dyn IlluminanceModel,
) -> Result<f64, PsfError> {
    let here = IlluminanceSample::from(&sample_exit_pupil(prescription, field, nm, pupil)?);
    if field.x == 0.0 && field.y == 0.0 {
        return Ok(model.relative(&here, &here));
    }
    let axis = sample_exit_pupil(prescription, FieldPoint::on_axis(field.defocus), nm, pupil)?;
    Ok(model.relative(&here, &IlluminanceSample::from(&axis)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(f: f64, angle_deg: f64) -> IlluminanceSample {
        IlluminanceSample {
            transmitted_fraction: f,
            chief_angle: angle_deg.to_radians(),
        }
    }

    #[test]
    fn cos4_at_thirty_degrees() {
        let v = CosineFourth.relative(&sample(0.5, 30.0), &sample(0.7, 0.0));
        assert!((v - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn ray_statistics_ratio_and_clamp() {
        let axis = sample(0.8, 0.0);
        assert!((RayStatistics.relative(&sample(0.4, 10.0), &axis) - 0.5).abs() < 1e-12);
        assert_eq!(RayStatistics.relative(&sample(0.9, 10.0), &axis), 1.0);
        assert_eq!(RayStatistics.relative(&axis, &axis), 1.0);
    }

    #[test]
    fn ray_statistics_falls_back_without_axis_rays() {
        let v = RayStatistics.relative(&sample(0.0, 30.0), &sample(0.0, 0.0));
        assert!((v - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn registry_names() {
        let r = illuminance_models();
        assert_eq!(r.create("cos4").unwrap().name(), "cos4");
        assert!(r.create("design-tool").is_err());
    }
}
