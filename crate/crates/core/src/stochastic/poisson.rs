use crate::error::{invalid, Result};
use crate::geometry::{Aabb, PointCloud};
use crate::rng::RandomSource;
use crate::stochastic::IntensityField;

/// Samples a Poisson point process with intensity `scale * c(x) dx` on
/// `region`: a homogeneous process at level `scale * ||c||`, thinned with
/// acceptance `c(x) / ||c||`.
pub fn sample_poisson_points(
    rng: &mut RandomSource,
    region: &Aabb,
    intensity: &IntensityField,
    scale: f64,
) -> Result<PointCloud> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(invalid(format!("scale must be finite and >= 0, got {scale}")));
    }
    intensity.validate()?;
    let vol = region.volume();
    if !vol.is_finite() {
        return Err(invalid("region must be bounded"));
    }
    let dim = region.dim();
    let mut out = PointCloud::new(dim);
    let bound = intensity.bound();
    if scale == 0.0 || bound == 0.0 || vol == 0.0 {
        return Ok(out);
    }
    let count = rng.poisson(scale * bound * vol);
    let constant = matches!(intensity, IntensityField::Constant { .. });
    let mut p = vec![0.0; dim];
    out.coords.reserve(count as usize * dim);
    for _ in 0..count {
        region.sample_into(rng, &mut p);
        if constant || rng.uniform() * bound < intensity.eval(&p) {
            out.push(&p);
        }
    }
    Ok(out)
}
