//! Gaussian product-kernel density estimate on a rectangular 2-D grid.

use nalgebra::DMatrix;

use crate::error::{DadaError, Result};

/// Regular grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2d {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl Grid2d {
    /// Grid spanning the sample range padded by `pad` bandwidths per axis.
    pub fn covering(points: &[[f64; 2]], bandwidth: [f64; 2], pad: f64, nx: usize, ny: usize) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Self {
            x_min: lo[0] - pad * bandwidth[0],
            x_max: hi[0] + pad * bandwidth[0],
            nx,
            y_min: lo[1] - pad * bandwidth[1],
            y_max: hi[1] + pad * bandwidth[1],
            ny,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        axis(self.y_min, self.y_max, self.ny)
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Density values; `density[(iy, ix)]` is the estimate at `(xs[ix], ys[iy])`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeGrid {
    pub grid: Grid2d,
    pub density: DMatrix<f64>,
}

impl KdeGrid {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let xs = self.grid.xs();
        let ys = self.grid.ys();
        let w = |v: &[f64], i: usize| -> f64 {
            let left = if i > 0 { v[i] - v[i - 1] } else { 0.0 };
            let right = if i + 1 < v.len() { v[i + 1] - v[i] } else { 0.0 };
            0.5 * (left + right)
        };
        let mut total = 0.0;
        for iy in 0..ys.len() {
            for ix in 0..xs.len() {
                total += w(&ys, iy) * w(&xs, ix) * self.density[(iy, ix)];
            }
        }
        total
    }
}

/// Scott's rule per axis, `h = s n^{-1/6}`.
pub fn scott_bandwidth(points: &[[f64; 2]]) -> [f64; 2] {
    let n = points.len() as f64;
    let mut out = [0.0; 2];
    for (k, slot) in out.iter_mut().enumerate() {
        let mean = points.iter().map(|p| p[k]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        *slot = var.sqrt() * n.powf(-1.0 / 6.0);
    }
    out
}

const CHUNK: usize = 4096;

pub fn kde2d(points: &[[f64; 2]], grid: &Grid2d, bandwidth: [f64; 2]) -> Result<KdeGrid> {
    if points.is_empty() {
        return Err(DadaError::Insufficient("kernel density of an empty sample".into()));
    }
    if !(bandwidth[0] > 0.0 && bandwidth[1] > 0.0) {
        return Err(DadaError::Domain(format!(
            "bandwidth must be positive, got {bandwidth:?}"
        )));
    }
    if grid.nx == 0 || grid.ny == 0 {
        return Err(DadaError::Domain("grid must have at least one node per axis".into()));
    }
    let xs = grid.xs();
    let ys = grid.ys();
    let norm = |h: f64| 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let (cx, cy) = (norm(bandwidth[0]), norm(bandwidth[1]));
    let mut density = DMatrix::zeros(grid.ny, grid.nx);
    for chunk in points.chunks(CHUNK) {
        let kx = DMatrix::from_fn(chunk.len(), xs.len(), |i, j| {
            let z = (xs[j] - chunk[i][0]) / bandwidth[0];
            cx * (-0.5 * z * z).exp()
        });
        let ky = DMatrix::from_fn(ys.len(), chunk.len(), |j, i| {
            let z = (ys[j] - chunk[i][1]) / bandwidth[1];
            cy * (-0.5 * z * z).exp()
        });
        density.gemm(1.0, &ky, &kx, 1.0);
    }
    density /= points.len() as f64;
    Ok(KdeGrid { grid: *grid, density })
}
