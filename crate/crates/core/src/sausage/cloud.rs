//! Hit-or-miss sample clouds and streaming polyline coverage.
//!
//! The sample points are bucketed on a uniform grid (stored sorted by cell).
//! A polyline is fed vertex by vertex; consecutive vertices are grouped into
//! short chunks and each chunk only visits the cells its inflated bounding
//! box overlaps. Paths therefore never need to be materialized.

use crate::error::{invalid, Result};
use crate::geometry::{dist2, segment_dist2, Aabb};
use crate::obstacle::bridge_crossing_probability;
use crate::rng::RandomSource;
use crate::stochastic::BrownianPath;

const MAX_CELLS: usize = 1 << 24;
const MAX_CHUNK: usize = 32;

/// Bridge corrections are dropped beyond `BRIDGE_REACH * sqrt(dt)` of the
/// radius, where the crossing probability is below `exp(-18)`.
pub const BRIDGE_REACH: f64 = 3.0;

#[derive(Clone, Debug)]
pub struct SampleCloud {
    dim: usize,
    region: Aabb,
    points: Vec<f64>,
    origin: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    offsets: Vec<u32>,
}

impl SampleCloud {
    /// `samples` uniform points in `region`. `reach` is the largest distance
    /// the cloud will be queried at (radius plus any bridge margin).
    pub fn uniform(rng: &mut RandomSource, region: &Aabb, samples: usize, reach: f64) -> Result<Self> {
        let dim = region.dim();
        let vol = region.volume();
        if !(vol > 0.0) || !vol.is_finite() {
            return Err(invalid("sample region is degenerate"));
        }
        if samples == 0 {
            return Err(invalid("need at least one sample"));
        }
        let mut cell = (2.0 * reach).max((vol / samples as f64).powf(1.0 / dim as f64));
        let cells_for = |c: f64| -> f64 {
            (0..dim).map(|k| (region.extent(k) / c).ceil().max(1.0)).product()
        };
        while cells_for(cell) > MAX_CELLS as f64 {
            cell *= 1.25;
        }
        let shape: Vec<usize> = (0..dim)
            .map(|k| (region.extent(k) / cell).ceil().max(1.0) as usize)
            .collect();
        let n_cells: usize = shape.iter().product();

        let mut raw = vec![0.0; samples * dim];
        for p in raw.chunks_exact_mut(dim) {
            region.sample_into(rng, p);
        }
        let mut cloud = Self {
            dim,
            region: region.clone(),
            points: Vec::new(),
            origin: region.lo.clone(),
            cell,
            shape,
            offsets: vec![0; n_cells + 1],
        };
        let cell_ids: Vec<u32> = raw.chunks_exact(dim).map(|p| cloud.cell_of(p) as u32).collect();
        for &c in &cell_ids {
            cloud.offsets[c as usize + 1] += 1;
        }
        for i in 0..n_cells {
            cloud.offsets[i + 1] += cloud.offsets[i];
        }
        let mut fill: Vec<u32> = cloud.offsets[..n_cells].to_vec();
        let mut points = vec![0.0; samples * dim];
        for (p, &c) in raw.chunks_exact(dim).zip(&cell_ids) {
            let slot = fill[c as usize] as usize;
            fill[c as usize] += 1;
            points[slot * dim..(slot + 1) * dim].copy_from_slice(p);
        }
        cloud.points = points;
        Ok(cloud)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn region(&self) -> &Aabb {
        &self.region
    }

    pub fn volume(&self) -> f64 {
        self.region.volume()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    fn axis_cell(&self, k: usize, v: f64) -> usize {
        let c = ((v - self.origin[k]) / self.cell).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.shape[k] - 1)
        }
    }

    fn cell_of(&self, p: &[f64]) -> usize {
        let mut flat = 0;
        for k in (0..self.dim).rev() {
            flat = flat * self.shape[k] + self.axis_cell(k, p[k]);
        }
        flat
    }

    /// Streaming coverage of a polyline at radius `eps`. With `bridge`, the
    /// polyline is read as a Brownian path of time step `dt` and points just
    /// outside the radius get the bridge crossing probability.
    pub fn marker(&self, eps: f64, dt: f64, bridge: bool) -> PolylineMarker<'_> {
        let margin = if bridge { BRIDGE_REACH * dt.sqrt() } else { 0.0 };
        PolylineMarker {
            cloud: self,
            eps,
            dt,
            margin,
            miss: vec![1.0; self.len()],
            chunk: Vec::with_capacity((MAX_CHUNK + 1) * self.dim),
            lo: vec![0.0; self.dim],
            hi: vec![0.0; self.dim],
            seen: 0,
        }
    }

    pub fn cover_path(&self, path: &BrownianPath, eps: f64, bridge: bool) -> Coverage {
        let mut m = self.marker(eps, path.step(), bridge);
        for p in path.points() {
            m.push(p);
        }
        m.finish()
    }

    /// Coverage by testing every point against every segment.
    pub fn cover_path_brute_force(&self, path: &BrownianPath, eps: f64) -> Coverage {
        let e2 = eps * eps;
        let miss = (0..self.len())
            .map(|i| if path.dist2_to(self.point(i)) <= e2 { 0.0 } else { 1.0 })
            .collect();
        Coverage { miss }
    }
}

/// Per-point probability of *not* being covered (0/1 without bridge correction).
#[derive(Clone, Debug, PartialEq)]
pub struct Coverage {
    miss: Vec<f64>,
}

impl Coverage {
    pub fn len(&self) -> usize {
        self.miss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.miss.is_empty()
    }

    #[inline]
    pub fn hit(&self, i: usize) -> f64 {
        1.0 - self.miss[i]
    }

    pub fn hits(&self) -> impl Iterator<Item = f64> + '_ {
        self.miss.iter().map(|m| 1.0 - m)
    }

    /// Coverage by either of two independently covered sets.
    pub fn union(&self, other: &Coverage) -> Coverage {
        Coverage {
            miss: self.miss.iter().zip(&other.miss).map(|(a, b)| a * b).collect(),
        }
    }

    /// Per-point probability of being covered by both sets.
    pub fn both(&self, other: &Coverage) -> Vec<f64> {
        self.hits().zip(other.hits()).map(|(a, b)| a * b).collect()
    }
}

pub struct PolylineMarker<'c> {
    cloud: &'c SampleCloud,
    eps: f64,
    dt: f64,
    margin: f64,
    miss: Vec<f64>,
    chunk: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    seen: usize,
}

impl PolylineMarker<'_> {
    pub fn push(&mut self, v: &[f64]) {
        let d = self.cloud.dim;
        self.seen += 1;
        if self.chunk.is_empty() {
            self.chunk.extend_from_slice(v);
            self.lo.copy_from_slice(v);
            self.hi.copy_from_slice(v);
            return;
        }
        self.chunk.extend_from_slice(v);
        let mut wide = false;
        for k in 0..d {
            self.lo[k] = self.lo[k].min(v[k]);
            self.hi[k] = self.hi[k].max(v[k]);
            wide |= self.hi[k] - self.lo[k] > 0.5 * self.cloud.cell;
        }
        if wide || self.chunk.len() / d > MAX_CHUNK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let d = self.cloud.dim;
        let nv = self.chunk.len() / d;
        if nv >= 2 {
            self.process();
        }
        let last = self.chunk[(nv - 1) * d..].to_vec();
        self.chunk.clear();
        self.chunk.extend_from_slice(&last);
        self.lo.copy_from_slice(&last);
        self.hi.copy_from_slice(&last);
    }

    fn process(&mut self) {
        let cloud = self.cloud;
        let d = cloud.dim;
        let r = self.eps + self.margin;
        let e2 = self.eps * self.eps;
        let nv = self.chunk.len() / d;
        let mut qlo = [0.0; 8];
        let mut qhi = [0.0; 8];
        let mut a = [0usize; 8];
        let mut b = [0usize; 8];
        let mut cur = [0usize; 8];
        for k in 0..d {
            qlo[k] = self.lo[k] - r;
            qhi[k] = self.hi[k] + r;
            a[k] = cloud.axis_cell(k, qlo[k]);
            b[k] = cloud.axis_cell(k, qhi[k]);
            cur[k] = a[k];
        }
        loop {
            let mut flat = 0;
            for k in (0..d).rev() {
                flat = flat * cloud.shape[k] + cur[k];
            }
            let (s, e) = (cloud.offsets[flat] as usize, cloud.offsets[flat + 1] as usize);
            for i in s..e {
                if self.miss[i] == 0.0 {
                    continue;
                }
                let p = &cloud.points[i * d..(i + 1) * d];
                if (0..d).any(|k| p[k] < qlo[k] || p[k] > qhi[k]) {
                    continue;
                }
                self.test_point(i, p, nv, e2);
            }
            let mut k = 0;
            loop {
                if k == d {
                    return;
                }
                if cur[k] < b[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = a[k];
                k += 1;
            }
        }
    }

    #[inline]
    fn test_point(&mut self, i: usize, p: &[f64], nv: usize, e2: f64) {
        let d = self.cloud.dim;
        let verts = &self.chunk;
        for j in 0..nv - 1 {
            let v0 = &verts[j * d..(j + 1) * d];
            let v1 = &verts[(j + 1) * d..(j + 2) * d];
            if segment_dist2(v0, v1, p) <= e2 {
                self.miss[i] = 0.0;
                return;
            }
        }
        if self.margin > 0.0 {
            let outer = (self.eps + self.margin).powi(2);
            let mut keep = 1.0;
            let mut q0 = dist2(&verts[..d], p);
            for j in 0..nv - 1 {
                let q1 = dist2(&verts[(j + 1) * d..(j + 2) * d], p);
                if q0.min(q1) <= outer {
                    let a0 = q0.sqrt() - self.eps;
                    let a1 = q1.sqrt() - self.eps;
                    keep *= 1.0 - bridge_crossing_probability(a0, a1, self.dt);
                }
                q0 = q1;
            }
            self.miss[i] *= keep;
        }
    }

    pub fn finish(mut self) -> Coverage {
        let d = self.cloud.dim;
        if self.seen == 1 {
            // a single point: the closed ball around it
            let c = self.chunk.clone();
            let e2 = self.eps * self.eps;
            for i in 0..self.cloud.len() {
                if dist2(self.cloud.point(i), &c[..d]) <= e2 {
                    self.miss[i] = 0.0;
                }
            }
        } else if self.chunk.len() / d >= 2 {
            self.flush();
        }
        Coverage { miss: self.miss }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::sample_brownian_path;

    #[test]
    fn streaming_matches_brute_force() {
        for seed in 0..20 {
            let mut rng = RandomSource::new(seed, 0);
            let d = 2 + (seed as usize % 2);
            let path = sample_brownian_path(&mut rng, &vec![0.0; d], 0.0, 0.05, 0.0004, d).unwrap();
            let eps = 0.1;
            let region = path.bbox().inflate(eps);
            let cloud = SampleCloud::uniform(&mut rng, &region, 3000, eps).unwrap();
            let fast = cloud.cover_path(&path, eps, false);
            let slow = cloud.cover_path_brute_force(&path, eps);
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn single_point_path_is_a_ball() {
        let mut rng = RandomSource::new(1, 0);
        let path = BrownianPath::new(2, 0.0, 0.01, vec![0.0, 0.0]).unwrap();
        let region = Aabb::cube(&[0.0, 0.0], 1.0).unwrap();
        let cloud = SampleCloud::uniform(&mut rng, &region, 5000, 0.5).unwrap();
        let cov = cloud.cover_path(&path, 0.5, false);
        for i in 0..cloud.len() {
            let inside = dist2(cloud.point(i), &[0.0, 0.0]) <= 0.25;
            assert_eq!(cov.hit(i), if inside { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn bridge_weights_only_add_coverage() {
        let mut rng = RandomSource::new(3, 0);
        let path = sample_brownian_path(&mut rng, &[0.0, 0.0, 0.0], 0.0, 0.02, 1e-4, 3).unwrap();
        let eps = 0.05;
        let region = path.bbox().inflate(eps + 0.1);
        let cloud = SampleCloud::uniform(&mut rng, &region, 20_000, eps + 0.06).unwrap();
        let hard = cloud.cover_path(&path, eps, false);
        let soft = cloud.cover_path(&path, eps, true);
        for i in 0..cloud.len() {
            assert!(soft.hit(i) >= hard.hit(i));
            if hard.hit(i) == 1.0 {
                assert_eq!(soft.hit(i), 1.0);
            }
        }
    }
}
