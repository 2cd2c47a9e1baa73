use crate::error::{invalid, Error, Result};
use crate::geometry::{dist2, Aabb, PointCloud};
use crate::obstacle::CenterIndex;
use crate::rng::RandomSource;
use crate::stochastic::{sample_poisson_points, IntensityField};

/// Obstacle density prefactor: `log(1/eps)` in d = 2, `eps^{2-d}` in d >= 3.
pub fn sd_scale(eps: f64, dim: usize) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    match dim {
        0 | 1 => Err(invalid(format!("dimension must be >= 2, got {dim}"))),
        2 => Ok((1.0 / eps).ln()),
        d => Ok(eps.powi(2 - d as i32)),
    }
}

/// One realization of the obstacle set: closed balls of radius `eps`
/// around Poisson centers sampled in `gen_region`.
#[derive(Clone, Debug)]
pub struct Environment {
    eps: f64,
    dim: usize,
    centers: PointCloud,
    gen_region: Aabb,
    index: CenterIndex,
}

impl Environment {
    pub fn from_centers(eps: f64, gen_region: Aabb, centers: PointCloud) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid(format!("obstacle radius must be positive, got {eps}")));
        }
        let dim = gen_region.dim();
        if !centers.is_empty() && centers.dim != dim {
            return Err(invalid("centers and region differ in dimension"));
        }
        if let Some(p) = centers.iter().find(|p| !gen_region.contains(p)) {
            return Err(invalid(format!("center {p:?} lies outside the generation region")));
        }
        let centers = PointCloud {
            dim,
            coords: centers.coords,
        };
        let index = CenterIndex::build(&gen_region, &centers, 2.0 * eps);
        Ok(Self {
            eps,
            dim,
            centers,
            gen_region,
            index,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centers(&self) -> &PointCloud {
        &self.centers
    }

    pub fn gen_region(&self) -> &Aabb {
        &self.gen_region
    }

    pub fn index(&self) -> &CenterIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Same environment with one extra center.
    pub fn with_center(&self, p: &[f64]) -> Result<Self> {
        let mut c = self.centers.clone();
        c.push(p);
        Self::from_centers(self.eps, self.gen_region.clone(), c)
    }

    /// Fails unless `extent` inflated by `margin` lies in the generation region.
    pub fn check_coverage(&self, extent: &Aabb, margin: f64) -> Result<()> {
        let need = extent.inflate(margin);
        if self.gen_region.contains_box(&need) {
            Ok(())
        } else {
            Err(Error::CoverageViolation(format!(
                "query extent {:?}..{:?} (margin {margin:.3e}) exceeds generation region {:?}..{:?}",
                need.lo, need.hi, self.gen_region.lo, self.gen_region.hi
            )))
        }
    }

    /// Whether `q` lies in some closed obstacle ball.
    pub fn covers(&self, q: &[f64]) -> bool {
        let r2 = self.eps * self.eps;
        let lo: Vec<f64> = q.iter().map(|v| v - self.eps).collect();
        let hi: Vec<f64> = q.iter().map(|v| v + self.eps).collect();
        let mut hit = false;
        self.index.visit_box(&lo, &hi, |i| {
            hit = dist2(self.centers.get(i as usize), q) <= r2;
            !hit
        });
        hit
    }

    /// Same answer as [`covers`](Self::covers) by scanning every center.
    pub fn covers_linear(&self, q: &[f64]) -> bool {
        let r2 = self.eps * self.eps;
        self.centers.iter().any(|c| dist2(c, q) <= r2)
    }

    /// Distance from `q` to the obstacle set, if some center lies within
    /// `eps + reach` of `q`.
    pub fn clearance(&self, q: &[f64], reach: f64) -> Option<f64> {
        let r = self.eps + reach;
        let lo: Vec<f64> = q.iter().map(|v| v - r).collect();
        let hi: Vec<f64> = q.iter().map(|v| v + r).collect();
        let mut best = f64::INFINITY;
        self.index.visit_box(&lo, &hi, |i| {
            best = best.min(dist2(self.centers.get(i as usize), q));
            true
        });
        let d = best.sqrt() - self.eps;
        (d <= reach).then_some(d.max(0.0))
    }
}

/// Samples `Gamma_eps`: Poisson centers of intensity `s_d(eps) c(x) dx` on
/// `region`. When `query_extent` is given, the region must contain it
/// inflated by `eps`.
pub fn generate_environment(
    rng: &mut RandomSource,
    eps: f64,
    c: &IntensityField,
    region: &Aabb,
    dim: usize,
    query_extent: Option<&Aabb>,
) -> Result<Environment> {
    if region.dim() != dim {
        return Err(invalid("region dimension does not match dim"));
    }
    let scale = sd_scale(eps, dim)?;
    if let Some(q) = query_extent {
        if !region.contains_box(&q.inflate(eps)) {
            return Err(Error::CoverageViolation(format!(
                "generation region does not contain the declared query extent inflated by eps = {eps}"
            )));
        }
    }
    let centers = sample_poisson_points(rng, region, c, scale)?;
    Environment::from_centers(eps, region.clone(), centers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sd_scale_values() {
        assert!((sd_scale((-1.0f64).exp(), 2).unwrap() - 1.0).abs() < 1e-12);
        assert!((sd_scale(0.02, 3).unwrap() - 50.0).abs() < 1e-9);
        assert!((sd_scale(0.1, 5).unwrap() - 1000.0).abs() < 1e-6);
        assert!(sd_scale(0.5, 3).is_err());
        assert!(sd_scale(0.0, 3).is_err());
        assert!(sd_scale(0.1, 1).is_err());
    }

    #[test]
    fn zero_intensity_gives_empty_environment() {
        let mut rng = RandomSource::new(1, 1);
        let region = Aabb::cube(&[0.0; 3], 1.0).unwrap();
        let env = generate_environment(&mut rng, 0.02, &IntensityField::zero(), &region, 3, None).unwrap();
        assert!(env.is_empty());
    }

    #[test]
    fn expected_count_matches_poisson_mean() {
        // d = 3, c = 1, eps = 0.02: intensity 50 on a unit-volume region
        let region = Aabb::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let c = IntensityField::constant(1.0).unwrap();
        let n = 1000;
        let total: usize = (0..n)
            .map(|r| {
                let mut rng = RandomSource::new(3, r);
                generate_environment(&mut rng, 0.02, &c, &region, 3, None).unwrap().len()
            })
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 50.0).abs() < 3.0 * (50.0 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn doubling_volume_doubles_count() {
        let small = Aabb::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let big = Aabb::new(vec![0.0; 3], vec![2.0, 1.0, 1.0]).unwrap();
        let c = IntensityField::constant(1.0).unwrap();
        let n = 1000;
        let mean = |region: &Aabb| {
            (0..n)
                .map(|r| {
                    let mut rng = RandomSource::new(4, r);
                    generate_environment(&mut rng, 0.02, &c, region, 3, None).unwrap().len()
                })
                .sum::<usize>() as f64
                / n as f64
        };
        let (a, b) = (mean(&small), mean(&big));
        // sd of the difference ~ sqrt((50 + 100) / n)
        assert!((b - 2.0 * a).abs() < 4.0 * ((4.0 * 50.0 + 100.0) / n as f64).sqrt(), "{a} {b}");
    }

    #[test]
    fn query_extent_must_fit() {
        let mut rng = RandomSource::new(1, 1);
        let region = Aabb::cube(&[0.0; 2], 1.0).unwrap();
        let q = Aabb::cube(&[0.0; 2], 0.99).unwrap();
        let c = IntensityField::constant(1.0).unwrap();
        let err = generate_environment(&mut rng, 0.02, &c, &region, 2, Some(&q)).unwrap_err();
        assert!(matches!(err, Error::CoverageViolation(_)));
    }

    #[test]
    fn index_agrees_with_scan_on_point_queries() {
        let region = Aabb::cube(&[0.0; 3], 1.0).unwrap();
        let c = IntensityField::constant(1.0).unwrap();
        let mut rng = RandomSource::new(8, 0);
        let env = generate_environment(&mut rng, 0.08, &c, &region, 3, None).unwrap();
        let mut q = [0.0; 3];
        for _ in 0..20_000 {
            region.sample_into(&mut rng, &mut q);
            assert_eq!(env.covers(&q), env.covers_linear(&q));
        }
    }
}
