//! Transition weights of the continuous-time nearest-neighbour walk whose
//! generator is half the discrete Laplacian, applied axis by axis.

/// `e^{-r} I_k(r)` for `k = 0..=K`, where the tail beyond `K` is below `1e-17`
/// of the total; computed by Miller's backward recurrence and normalised by
/// `I_0 + 2 sum_k I_k = e^r`.
pub fn lattice_kernel(r: f64) -> Vec<f64> {
    if r <= 0.0 {
        return vec![1.0];
    }
    // start well beyond the significant range
    let start = (r + 12.0 * r.sqrt() + 40.0).ceil() as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        // I_{k-1} = (2k / r) I_k + I_{k+1}
        vals[k - 1] = 2.0 * k as f64 / r * vals[k] + vals[k + 1];
        if vals[k - 1] > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let total = vals[0] + 2.0 * vals[1..].iter().sum::<f64>();
    let mut w: Vec<f64> = vals.iter().map(|v| v / total).collect();
    while w.len() > 1 && *w.last().unwrap() < 1e-17 {
        w.pop();
    }
    w
}

/// Convolves `values` (axis 0 fastest) with the symmetric kernel `w` along
/// `axis`, treating everything outside the grid as zero.
pub fn convolve_axis(values: &[f64], shape: &[usize], axis: usize, w: &[f64], out: &mut [f64]) {
    let n = shape[axis];
    let stride: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let reach = w.len() - 1;
    for o in 0..outer {
        for s in 0..stride {
            let base = o * stride * n + s;
            for j in 0..n {
                let lo = j.saturating_sub(reach);
                let hi = (j + reach).min(n - 1);
                let mut acc = 0.0;
                for m in lo..=hi {
                    acc += w[j.abs_diff(m)] * values[base + m * stride];
                }
                out[base + j * stride] = acc;
            }
        }
    }
}

/// One step of the walk on the whole grid: `P_dt u` with zero exterior.
pub fn heat_step(values: &mut Vec<f64>, scratch: &mut Vec<f64>, shape: &[usize], kernels: &[Vec<f64>]) {
    scratch.resize(values.len(), 0.0);
    for (axis, w) in kernels.iter().enumerate() {
        convolve_axis(values, shape, axis, w, scratch);
        std::mem::swap(values, scratch);
    }
}
