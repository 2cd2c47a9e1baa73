use crate::geometry::{Aabb, PointCloud};

/// Uniform grid over a box with centers bucketed per cell (CSR layout).
#[derive(Clone, Debug)]
pub struct CenterIndex {
    origin: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    offsets: Vec<u32>,
    items: Vec<u32>,
}

fn max_cells_per_axis(dim: usize) -> usize {
    if dim <= 3 {
        64
    } else {
        // keep the dense table near 2^18 cells
        ((1u64 << 18) as f64).powf(1.0 / dim as f64).floor().max(2.0) as usize
    }
}

impl CenterIndex {
    /// Cell side is `max(min_side, extent / 64)` (fewer cells per axis in d >= 4).
    pub fn build(region: &Aabb, centers: &PointCloud, min_side: f64) -> Self {
        let dim = region.dim();
        let cap = max_cells_per_axis(dim);
        let extent = region.max_extent();
        let cell = min_side.max(extent / cap as f64).max(1e-12);
        let shape: Vec<usize> = (0..dim)
            .map(|k| ((region.extent(k) / cell).ceil() as usize).clamp(1, cap.max(1) * 2))
            .collect();
        let mut idx = Self {
            origin: region.lo.clone(),
            cell,
            shape,
            offsets: Vec::new(),
            items: Vec::new(),
        };
        let n_cells: usize = idx.shape.iter().product();
        let mut counts = vec![0u32; n_cells + 1];
        let cell_of: Vec<usize> = centers.iter().map(|p| idx.cell_of(p)).collect();
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for i in 0..n_cells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; cell_of.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        idx.offsets = counts;
        idx.items = items;
        idx
    }

    pub fn cell_side(&self) -> f64 {
        self.cell
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
        for k in (0..p.len()).rev() {
            flat = flat * self.shape[k] + self.axis_cell(k, p[k]);
        }
        flat
    }

    /// Calls `f` with the index of every center bucketed in a cell that
    /// overlaps `[lo, hi]`. Returns early when `f` returns `false`.
    pub fn visit_box(&self, lo: &[f64], hi: &[f64], mut f: impl FnMut(u32) -> bool) {
        let dim = lo.len();
        let mut a = [0usize; 8];
        let mut b = [0usize; 8];
        let mut cur = [0usize; 8];
        assert!(dim <= 8, "index supports up to 8 dimensions");
        for k in 0..dim {
            a[k] = self.axis_cell(k, lo[k]);
            b[k] = self.axis_cell(k, hi[k]);
            cur[k] = a[k];
        }
        loop {
            let mut flat = 0;
            for k in (0..dim).rev() {
                flat = flat * self.shape[k] + cur[k];
            }
            let (s, e) = (self.offsets[flat] as usize, self.offsets[flat + 1] as usize);
            for &it in &self.items[s..e] {
                if !f(it) {
                    return;
                }
            }
            let mut k = 0;
            loop {
                if k == dim {
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
}
