use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Aabb;

/// Values of `w(t, x)` at cell centres of a uniform grid over a box, for a
/// decreasing list of times. `w(t, .)` vanishes for `t` past the last probe
/// time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub region: Aabb,
    pub shape: Vec<usize>,
    /// Stored times, decreasing from the last probe time to 0.
    pub times: Vec<f64>,
    /// One slice of `shape.product()` values per stored time.
    pub values: Vec<f64>,
}

/// JSON header of an exported grid function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub version: u32,
    pub region: Aabb,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub times: Vec<f64>,
}

pub const GRID_MAGIC: &str = "SBMO-GRID";
const GRID_VERSION: u32 = 1;
const TIME_TOL: f64 = 1e-9;

impl GridFunction {
    pub fn zeros(region: Aabb, shape: Vec<usize>) -> Result<Self> {
        if shape.len() != region.dim() || shape.iter().any(|&n| n == 0) {
            return Err(invalid("grid shape must give at least one cell per axis"));
        }
        Ok(Self { region, shape, times: Vec::new(), values: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.region.extent(k) / self.shape[k] as f64).collect()
    }

    /// `prod h_k`
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Time of the last probe (first stored time); `w` is zero after it.
    pub fn horizon(&self) -> f64 {
        self.times.first().copied().unwrap_or(0.0)
    }

    /// Cell-centre coordinates of flat index `i` (axis 0 fastest).
    pub fn center(&self, mut i: usize) -> Vec<f64> {
        let h = self.spacing();
        (0..self.dim())
            .map(|k| {
                let j = i % self.shape[k];
                i /= self.shape[k];
                self.region.lo[k] + (j as f64 + 0.5) * h[k]
            })
            .collect()
    }

    /// Flat index of the cell containing `x`, if `x` lies in the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() || !self.region.contains(x) {
            return None;
        }
        let h = self.spacing();
        let mut flat = 0;
        for k in (0..self.dim()).rev() {
            let j = (((x[k] - self.region.lo[k]) / h[k]).floor() as usize).min(self.shape[k] - 1);
            flat = flat * self.shape[k] + j;
        }
        Some(flat)
    }

    pub fn push_slice(&mut self, t: f64, slice: &[f64]) -> Result<()> {
        if slice.len() != self.cells() {
            return Err(Error::GridMismatch("slice length differs from the grid".into()));
        }
        if let Some(&last) = self.times.last() {
            if t >= last {
                return Err(invalid("slices must be pushed in decreasing time"));
            }
        }
        self.times.push(t);
        self.values.extend_from_slice(slice);
        Ok(())
    }

    pub fn slice_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= TIME_TOL * s.abs().max(1.0))
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.cells();
        &self.values[k * n..(k + 1) * n]
    }

    /// The stored slice at time `t`; all zeros for `t` past the horizon.
    pub fn at_time(&self, t: f64) -> Result<Vec<f64>> {
        if t > self.horizon() + TIME_TOL {
            return Ok(vec![0.0; self.cells()]);
        }
        let k = self.slice_index(t).ok_or(Error::MissingSnapshot(t))?;
        Ok(self.slice(k).to_vec())
    }

    /// `w(t, x)` with linear interpolation between stored times and the
    /// value of the containing cell in space; zero outside the box.
    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        let Some(i) = self.locate(x) else { return 0.0 };
        if self.times.is_empty() || t > self.horizon() + TIME_TOL {
            return 0.0;
        }
        let n = self.cells();
        // times decrease; find the bracket [times[k+1], times[k]]
        let k = self.times.partition_point(|&s| s > t);
        if k == 0 {
            return self.values[i];
        }
        if k >= self.times.len() {
            return self.values[(self.times.len() - 1) * n + i];
        }
        let (t_hi, t_lo) = (self.times[k - 1], self.times[k]);
        let (v_hi, v_lo) = (self.values[(k - 1) * n + i], self.values[k * n + i]);
        if t_hi == t_lo {
            return v_lo;
        }
        v_lo + (v_hi - v_lo) * (t - t_lo) / (t_hi - t_lo)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    fn header(&self) -> GridHeader {
        GridHeader {
            version: GRID_VERSION,
            region: self.region.clone(),
            shape: self.shape.clone(),
            spacing: self.spacing(),
            times: self.times.clone(),
        }
    }

    /// CSV with a `# {json header}` first line, then `t,x_1..x_d,w` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", serde_json::to_string(&self.header())?)?;
        let cols: Vec<String> = (1..=self.dim()).map(|k| format!("x{k}")).collect();
        writeln!(w, "t,{},w", cols.join(","))?;
        for (k, &t) in self.times.iter().enumerate() {
            for (i, v) in self.slice(k).iter().enumerate() {
                let x: Vec<String> = self.center(i).iter().map(|c| c.to_string()).collect();
                writeln!(w, "{t},{},{v}", x.join(","))?;
            }
        }
        Ok(())
    }

    /// Magic line, JSON header line, then little-endian f64 values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{GRID_MAGIC}")?;
        writeln!(w, "{}", serde_json::to_string(&self.header())?)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != GRID_MAGIC {
            return Err(Error::Format("not a grid function file".into()));
        }
        line.clear();
        r.read_line(&mut line)?;
        let h: GridHeader = serde_json::from_str(line.trim_end())?;
        if h.version != GRID_VERSION {
            return Err(Error::Format(format!("unsupported grid version {}", h.version)));
        }
        let mut g = Self::zeros(h.region, h.shape)?;
        let n = g.cells() * h.times.len();
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != n * 8 {
            return Err(Error::Format(format!("expected {} values, found {} bytes", n, bytes.len())));
        }
        g.values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        g.times = h.times;
        Ok(g)
    }
}

/// `sum h^d |a - b|` over the grid at time `t`.
pub fn l1_distance(a: &GridFunction, b: &GridFunction, t: f64) -> Result<f64> {
    if a.region != b.region || a.shape != b.shape {
        return Err(Error::GridMismatch("grids differ in box or shape".into()));
    }
    let (va, vb) = (a.at_time(t)?, b.at_time(t)?);
    Ok(a.cell_volume() * va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}
