//! Points, boxes and the small amount of Euclidean geometry everything else needs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::RandomSource;

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("box corners must have equal, nonzero dimension"));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !l.is_finite() || !h.is_finite() {
                return Err(invalid("box must be bounded"));
            }
            if l > h {
                return Err(invalid(format!("box has lo {l} > hi {h}")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Cube of half-width `half` around `center`.
    pub fn cube(center: &[f64], half: f64) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - half).collect(),
            center.iter().map(|c| c + half).collect(),
        )
    }

    /// Smallest box containing every point of `coords` (flat, `dim` per point).
    pub fn bounding(dim: usize, coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(invalid("bounding box of an empty point set"));
        }
        let mut lo = coords[..dim].to_vec();
        let mut hi = lo.clone();
        for p in coords.chunks_exact(dim) {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn max_extent(&self) -> f64 {
        (0..self.dim()).map(|k| self.extent(k)).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.extent(k)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        Aabb {
            lo: self.lo.iter().map(|v| v - r).collect(),
            hi: self.hi.iter().map(|v| v + r).collect(),
        }
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            None
        } else {
            Some(Aabb { lo, hi })
        }
    }

    /// Writes a uniform point of the box into `out`.
    #[inline]
    pub fn sample_into(&self, rng: &mut RandomSource, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = rng.uniform_in(self.lo[k], self.hi[k]);
        }
    }

    /// Euclidean distance from `x` to the complement of the open box
    /// (zero when `x` is outside or on the boundary).
    pub fn depth(&self, x: &[f64]) -> f64 {
        let mut d = f64::INFINITY;
        for (k, v) in x.iter().enumerate() {
            d = d.min(v - self.lo[k]).min(self.hi[k] - v);
        }
        d.max(0.0)
    }
}

/// A set of points in R^d stored contiguously.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_coords(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(invalid("coordinate buffer is not a multiple of dim"));
        }
        Ok(Self { dim, coords })
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim.max(1))
    }
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Squared distance from `p` to the segment `[a, b]`.
#[inline]
pub fn segment_dist2(a: &[f64], b: &[f64], p: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for k in 0..a.len() {
        let ab = b[k] - a[k];
        ab2 += ab * ab;
        ap_ab += (p[k] - a[k]) * ab;
    }
    let s = if ab2 > 0.0 { (ap_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
    let mut d2 = 0.0;
    for k in 0..a.len() {
        let q = a[k] + s * (b[k] - a[k]) - p[k];
        d2 += q * q;
    }
    d2
}

/// Smallest `s` in [0, 1] with `|a + s (b - a) - c| <= r`, if any.
pub fn segment_ball_entry(a: &[f64], b: &[f64], c: &[f64], r: f64) -> Option<f64> {
    let mut aa = 0.0;
    let mut bb = 0.0;
    let mut cc = -r * r;
    for k in 0..a.len() {
        let u = b[k] - a[k];
        let w = a[k] - c[k];
        aa += u * u;
        bb += 2.0 * u * w;
        cc += w * w;
    }
    if cc <= 0.0 {
        return Some(0.0);
    }
    if aa == 0.0 {
        return None;
    }
    let disc = bb * bb - 4.0 * aa * cc;
    if disc < 0.0 {
        return None;
    }
    let s = (-bb - disc.sqrt()) / (2.0 * aa);
    (0.0..=1.0).contains(&s).then_some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_cases() {
        let a = [0.0, 0.0];
        let b = [1.0, 0.0];
        assert!((segment_dist2(&a, &b, &[0.5, 2.0]) - 4.0).abs() < 1e-12);
        assert!((segment_dist2(&a, &b, &[-1.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((segment_dist2(&a, &a, &[0.0, 3.0]) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn ball_entry_line_sphere() {
        // line x in [0, 4] at height 0.6 through the unit ball centred at (2, 0)
        let s = segment_ball_entry(&[0.0, 0.6], &[4.0, 0.6], &[2.0, 0.0], 1.0).unwrap();
        assert!((4.0 * s - 1.2).abs() < 1e-12);
        assert!(segment_ball_entry(&[0.0, 1.5], &[4.0, 1.5], &[2.0, 0.0], 1.0).is_none());
        assert_eq!(segment_ball_entry(&[2.0, 0.0], &[4.0, 0.0], &[2.0, 0.0], 1.0), Some(0.0));
    }

    #[test]
    fn box_helpers() {
        let b = Aabb::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(b.volume(), 2.0);
        assert!(b.contains(&[2.0, 1.0]));
        assert!((b.depth(&[0.5, 0.25]) - 0.25).abs() < 1e-15);
        assert!(Aabb::new(vec![0.0], vec![f64::INFINITY]).is_err());
        assert!(b.intersection(&Aabb::cube(&[5.0, 5.0], 1.0).unwrap()).is_none());
    }
}
