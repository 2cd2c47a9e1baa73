//! Hit-or-miss estimators for sausage volumes and weighted integrals.

use crate::error::{invalid, Result};
use crate::geometry::Aabb;
use crate::rng::RandomSource;
use crate::stats::{EstimateWithError, MeanVar};
use crate::stochastic::{gamma_half, validate_step_for_radius, BrownianPath, BrownianStepper, IntensityField};

use super::cloud::{Coverage, SampleCloud, BRIDGE_REACH};

/// Newtonian capacity of the unit ball: `pi` in the plane, `(d-2) pi^{d/2} / Gamma(d/2)` above.
pub fn kd_constant(dim: usize) -> Result<f64> {
    match dim {
        0 | 1 => Err(invalid(format!("capacity constant needs d >= 2, got {dim}"))),
        2 => Ok(std::f64::consts::PI),
        d => Ok((d as f64 - 2.0) * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d as u32)),
    }
}

/// The sausage of radius `eps` around a sampled path, optionally weighted.
#[derive(Clone, Debug)]
pub struct SausageQuery {
    pub path: BrownianPath,
    pub eps: f64,
    pub weight: Option<IntensityField>,
    /// Read the polyline as a Brownian path: points just outside the radius
    /// count with their bridge crossing probability. On by default; turn it
    /// off to measure the neighbourhood of the polyline itself.
    pub bridge: bool,
}

impl SausageQuery {
    pub fn new(path: BrownianPath, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid(format!("radius must be positive, got {eps}")));
        }
        if path.len() > 1 {
            validate_step_for_radius(path.step(), eps)?;
        }
        Ok(Self { path, eps, weight: None, bridge: true })
    }

    pub fn weighted(mut self, c: IntensityField) -> Result<Self> {
        c.validate()?;
        self.weight = Some(c);
        Ok(self)
    }

    pub fn bridged(mut self, on: bool) -> Self {
        self.bridge = on;
        self
    }

    fn margin(&self) -> f64 {
        if self.bridge {
            BRIDGE_REACH * self.path.step().sqrt()
        } else {
            0.0
        }
    }

    /// The sampling box: the path bounding box inflated by the radius.
    pub fn region(&self) -> Aabb {
        self.path.bbox().inflate(self.eps + self.margin())
    }

    /// Shared-randomness building block: a fresh cloud over `region()` and its coverage.
    pub fn cover(&self, rng: &mut RandomSource, samples: usize) -> Result<(SampleCloud, Coverage)> {
        let cloud = SampleCloud::uniform(rng, &self.region(), samples, self.eps + self.margin())?;
        let cov = cloud.cover_path(&self.path, self.eps, self.bridge);
        Ok((cloud, cov))
    }
}

/// `vol(box) * mean(weight * hit)` with its hit-or-miss standard error.
pub fn integral_from_coverage(
    cloud: &SampleCloud,
    cov: &Coverage,
    weight: Option<&IntensityField>,
) -> EstimateWithError {
    let mut acc = MeanVar::default();
    match weight {
        None => cov.hits().for_each(|h| acc.push(h)),
        Some(c) if c.is_zero() => cov.hits().for_each(|_| acc.push(0.0)),
        Some(c) => {
            for (i, h) in cov.hits().enumerate() {
                acc.push(if h > 0.0 { h * c.eval(cloud.point(i)) } else { 0.0 });
            }
        }
    }
    acc.estimate()
        .scaled(cloud.volume())
        .with_meta("box_volume", cloud.volume())
        .with_meta("samples", cloud.len())
}

pub fn sausage_volume(q: &SausageQuery, rng: &mut RandomSource, samples: usize) -> Result<EstimateWithError> {
    let (cloud, cov) = q.cover(rng, samples)?;
    Ok(integral_from_coverage(&cloud, &cov, None))
}

pub fn sausage_weighted_integral(
    q: &SausageQuery,
    rng: &mut RandomSource,
    samples: usize,
) -> Result<EstimateWithError> {
    let c = q
        .weight
        .as_ref()
        .ok_or_else(|| invalid("weighted integral needs a weight"))?;
    if c.is_zero() {
        return Ok(EstimateWithError::exact(0.0, samples));
    }
    let (cloud, cov) = q.cover(rng, samples)?;
    Ok(integral_from_coverage(&cloud, &cov, Some(c)))
}

/// Volume of the points within `eps` of both paths. Distinct paths get
/// independent bridge corrections.
pub fn intersection_volume(
    a: &BrownianPath,
    b: &BrownianPath,
    eps: f64,
    rng: &mut RandomSource,
    samples: usize,
) -> Result<EstimateWithError> {
    if a.dim() != b.dim() {
        return Err(invalid("paths differ in dimension"));
    }
    let qa = SausageQuery::new(a.clone(), eps)?;
    let qb = SausageQuery::new(b.clone(), eps)?;
    let Some(region) = qa.region().intersection(&qb.region()) else {
        return Ok(EstimateWithError::exact(0.0, samples.max(1)));
    };
    let cloud = SampleCloud::uniform(rng, &region, samples, eps + qa.margin().max(qb.margin()))?;
    let ca = cloud.cover_path(a, eps, qa.bridge);
    let mut acc = MeanVar::default();
    if a == b {
        // one path, one set of bridges
        ca.hits().for_each(|h| acc.push(h));
    } else {
        let cb = cloud.cover_path(b, eps, qb.bridge);
        ca.both(&cb).into_iter().for_each(|h| acc.push(h));
    }
    Ok(acc.estimate().scaled(cloud.volume()).with_meta("box_volume", cloud.volume()))
}

/// Trapezoidal `int c(xi_s) ds` along the path.
pub fn path_time_integral(path: &BrownianPath, c: &IntensityField) -> f64 {
    if path.len() < 2 || c.is_zero() {
        return 0.0;
    }
    let vals: Vec<f64> = path.points().map(|p| c.eval(p)).collect();
    let inner: f64 = vals[1..vals.len() - 1].iter().sum();
    path.step() * (inner + 0.5 * (vals[0] + vals[vals.len() - 1]))
}

/// Sausage functionals of one long path at several radii, computed without
/// storing the path: the path is regenerated from `path_rng` twice (bounding
/// box, then marking). Radius `r` sees the path subsampled to the coarsest
/// step allowed at that radius, so all radii share the same trajectory. Each
/// radius gets its own cloud (stream `k` of `sample_rng`): `samples` points
/// at the smallest radius and `samples * r_min / r` at radius `r`, which
/// keeps the error of the `1/r`-scaled volume roughly constant.
#[derive(Clone, Debug)]
pub struct StreamedSausage {
    pub clouds: Vec<SampleCloud>,
    pub coverage: Vec<Coverage>,
    pub strides: Vec<usize>,
    /// Trapezoidal time integral of the weight along the fine path.
    pub time_integral: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn stream_sausages(
    path_rng: &RandomSource,
    sample_rng: &RandomSource,
    x: &[f64],
    t0: f64,
    t1: f64,
    step: f64,
    radii: &[f64],
    samples: usize,
    bridge: bool,
    weight: Option<&IntensityField>,
) -> Result<StreamedSausage> {
    if radii.is_empty() {
        return Err(invalid("no radii"));
    }
    let min_r = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_r > 0.0) {
        return Err(invalid("radii must be positive"));
    }
    validate_step_for_radius(step, min_r)?;
    let strides: Vec<usize> = radii
        .iter()
        .map(|&r| (((r / 5.0).powi(2) / step) * (1.0 + 1e-9)).floor().max(1.0) as usize)
        .collect();
    let dim = x.len();

    let mut lo = x.to_vec();
    let mut hi = x.to_vec();
    let mut walk = BrownianStepper::new(path_rng.clone(), x, t0, t1, step)?;
    while let Some(p) = walk.advance() {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let bbox = Aabb::new(lo, hi)?;
    let clouds = radii
        .iter()
        .zip(&strides)
        .enumerate()
        .map(|(k, (&r, &s))| {
            let reach = r + if bridge { BRIDGE_REACH * (s as f64 * step).sqrt() } else { 0.0 };
            let m = ((samples as f64 * min_r / r).ceil() as usize).max(1);
            SampleCloud::uniform(&mut sample_rng.derive(k as u64), &bbox.inflate(reach), m, reach)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut markers: Vec<_> = clouds
        .iter()
        .zip(radii.iter().zip(&strides))
        .map(|(c, (&r, &s))| c.marker(r, s as f64 * step, bridge))
        .collect();
    let mut walk = BrownianStepper::new(path_rng.clone(), x, t0, t1, step)?;
    let total = walk.remaining();
    let mut integral = weight.map(|c| 0.5 * c.eval(x));
    for m in markers.iter_mut() {
        m.push(x);
    }
    let mut i = 0usize;
    while let Some(p) = walk.advance() {
        i += 1;
        if let (Some(acc), Some(c)) = (integral.as_mut(), weight) {
            *acc += if i == total { 0.5 } else { 1.0 } * c.eval(p);
        }
        for (m, &s) in markers.iter_mut().zip(&strides) {
            if i % s == 0 || i == total {
                m.push(p);
            }
        }
    }
    let coverage = markers.into_iter().map(|m| m.finish()).collect();
    Ok(StreamedSausage {
        clouds,
        coverage,
        strides,
        time_integral: integral.map(|v| v * step),
    })
}

impl StreamedSausage {
    pub fn integral(&self, k: usize, weight: Option<&IntensityField>) -> EstimateWithError {
        integral_from_coverage(&self.clouds[k], &self.coverage[k], weight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::sample_brownian_path;
    use std::f64::consts::PI;

    fn brownian(seed: u64, dim: usize, t: f64, step: f64) -> BrownianPath {
        let mut rng = RandomSource::new(seed, 11);
        sample_brownian_path(&mut rng, &vec![0.0; dim], 0.0, t, step, dim).unwrap()
    }

    #[test]
    fn capacity_constants() {
        assert_eq!(kd_constant(2).unwrap(), PI);
        assert!((kd_constant(3).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!((kd_constant(4).unwrap() - 19.739_208_802).abs() < 1e-8);
        assert!(kd_constant(1).is_err());
    }

    #[test]
    fn single_point_is_a_ball() {
        let path = BrownianPath::new(3, 0.0, 1e-4, vec![0.3, 0.1, -0.2]).unwrap();
        let q = SausageQuery::new(path, 0.1).unwrap();
        let mut rng = RandomSource::new(4, 0);
        let e = sausage_volume(&q, &mut rng, 400_000).unwrap();
        assert!(e.z_score(4.0 / 3.0 * PI * 1e-3) < 4.0, "{e:?}");
    }

    #[test]
    fn straight_segment_is_a_capsule() {
        let n = 400;
        let positions: Vec<f64> = (0..=n).flat_map(|i| [i as f64 / n as f64, 0.0, 0.0]).collect();
        let path = BrownianPath::new(3, 0.0, 1e-4, positions).unwrap();
        let q = SausageQuery::new(path, 0.1).unwrap().bridged(false);
        let mut rng = RandomSource::new(5, 0);
        let e = sausage_volume(&q, &mut rng, 1_000_000).unwrap();
        let want = PI * 0.01 + 4.0 / 3.0 * PI * 1e-3;
        assert!((want - 0.035605).abs() < 1e-6);
        assert!(e.z_score(want) < 4.0, "{e:?}");
    }

    #[test]
    fn step_must_resolve_radius() {
        let path = brownian(1, 3, 0.1, 1e-3);
        assert!(SausageQuery::new(path, 0.1).is_err());
    }

    #[test]
    fn weight_reductions() {
        let path = brownian(2, 3, 0.05, 1e-5);
        let q = SausageQuery::new(path, 0.02).unwrap();
        let vol = sausage_volume(&q, &mut RandomSource::new(9, 9), 50_000).unwrap();
        let one = q.clone().weighted(IntensityField::constant(1.0).unwrap()).unwrap();
        let w = sausage_weighted_integral(&one, &mut RandomSource::new(9, 9), 50_000).unwrap();
        assert_eq!(vol.mean, w.mean);
        let zero = q.weighted(IntensityField::zero()).unwrap();
        assert_eq!(sausage_weighted_integral(&zero, &mut RandomSource::new(9, 9), 50_000).unwrap().mean, 0.0);
    }

    #[test]
    fn intersection_edge_cases() {
        let a = brownian(3, 3, 0.02, 1e-5);
        let q = SausageQuery::new(a.clone(), 0.02).unwrap();
        let v = sausage_volume(&q, &mut RandomSource::new(1, 2), 20_000).unwrap();
        let i = intersection_volume(&a, &a, 0.02, &mut RandomSource::new(1, 2), 20_000).unwrap();
        assert_eq!(v.mean, i.mean);
        let shifted: Vec<f64> = a.positions().iter().map(|x| x + 10.0).collect();
        let b = BrownianPath::new(3, 0.0, a.step(), shifted).unwrap();
        let far = intersection_volume(&a, &b, 0.02, &mut RandomSource::new(1, 2), 1000).unwrap();
        assert_eq!((far.mean, far.std_error), (0.0, 0.0));
    }

    #[test]
    fn trapezoid_time_integral() {
        let path = brownian(4, 2, 0.7, 1e-3);
        let one = IntensityField::constant(1.0).unwrap();
        assert!((path_time_integral(&path, &one) - 0.7).abs() < 1e-9);
        assert_eq!(path_time_integral(&path, &IntensityField::zero()), 0.0);
    }

    #[test]
    fn streamed_matches_stored_path() {
        let pr = RandomSource::new(6, 1);
        let sr = RandomSource::new(6, 2);
        let s = stream_sausages(&pr, &sr, &[0.0, 0.0, 0.0], 0.0, 0.05, 1e-5, &[0.02], 30_000, true, None).unwrap();
        let path = sample_brownian_path(&mut pr.clone(), &[0.0; 3], 0.0, 0.05, 1e-5, 3).unwrap();
        let stored = s.clouds[0].cover_path(&path, 0.02, true);
        assert_eq!(stored, s.coverage[0]);
    }
}
