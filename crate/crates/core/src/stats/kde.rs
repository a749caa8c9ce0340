use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RESOLUTION: usize = 100;

/// Smallest per-axis bandwidth; applied when an axis has (near) zero spread.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KdeError {
    #[error("density estimation needs at least one point")]
    NoPoints,
    #[error("grid resolution must be positive")]
    ZeroResolution,
}

/// Density over the unit square sampled at cell centres.
///
/// `densities` is row-major with `resolution` rows; row `j` covers
/// `y ∈ [j/res, (j+1)/res)` so row 0 is the top of the touch area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeGrid {
    pub resolution: usize,
    pub bandwidth: [f64; 2],
    pub densities: Vec<f64>,
}

impl KdeGrid {
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.densities[row * self.resolution + col]
    }

    pub fn cell_area(&self) -> f64 {
        let side = 1.0 / self.resolution as f64;
        side * side
    }

    /// Riemann sum of the density over the unit square.
    pub fn mass(&self) -> f64 {
        self.densities.iter().sum::<f64>() * self.cell_area()
    }

    /// `(col, row)` of the densest cell. On ties the last one wins, which
    /// puts a point on a cell boundary into the right/lower cell, the one
    /// whose half-open interval contains it.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &d) in self.densities.iter().enumerate() {
            if d >= self.densities[best] {
                best = i;
            }
        }
        (best % self.resolution, best / self.resolution)
    }

    pub fn max(&self) -> f64 {
        self.densities.iter().copied().fold(0.0, f64::max)
    }

    /// Cells strictly greater than all 8 neighbours.
    pub fn local_maxima(&self) -> Vec<(usize, usize)> {
        let r = self.resolution as isize;
        let mut out = Vec::new();
        for row in 0..r {
            for col in 0..r {
                let v = self.at(col as usize, row as usize);
                let mut is_max = v > 0.0;
                'scan: for dr in -1..=1 {
                    for dc in -1..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (nr, nc) = (row + dr, col + dc);
                        if (0..r).contains(&nr)
                            && (0..r).contains(&nc)
                            && self.at(nc as usize, nr as usize) >= v
                        {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
                if is_max {
                    out.push((col as usize, row as usize));
                }
            }
        }
        out
    }

    /// CSV matrix, one grid row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.densities.chunks(self.resolution) {
            let line: Vec<String> = row.iter().map(|d| format!("{d:.6}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Gaussian product-kernel density estimate evaluated on a
/// `resolution × resolution` grid, with Scott's rule bandwidth
/// `σ · n^(−1/6)` per axis and no boundary correction.
pub fn kde2d(points: &[(f64, f64)], resolution: usize) -> Result<KdeGrid, KdeError> {
    if points.is_empty() {
        return Err(KdeError::NoPoints);
    }
    if resolution == 0 {
        return Err(KdeError::ZeroResolution);
    }
    let n = points.len() as f64;
    let factor = n.powf(-1.0 / 6.0);
    let hx = (sample_std(points.iter().map(|p| p.0)) * factor).max(BANDWIDTH_FLOOR);
    let hy = (sample_std(points.iter().map(|p| p.1)) * factor).max(BANDWIDTH_FLOOR);

    let centres: Vec<f64> = (0..resolution)
        .map(|i| (i as f64 + 0.5) / resolution as f64)
        .collect();
    let kernel = |c: f64, h: f64| -> Vec<f64> {
        centres
            .iter()
            .map(|g| {
                let u = (g - c) / h;
                (-0.5 * u * u).exp()
            })
            .collect()
    };

    // fixed chunking with an ordered reduction keeps the sum bit-for-bit
    // reproducible regardless of thread scheduling
    let partials: Vec<Vec<f64>> = points
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; resolution * resolution];
            for &(x, y) in chunk {
                let kx = kernel(x, hx);
                let ky = kernel(y, hy);
                for (row, &wy) in ky.iter().enumerate() {
                    if wy < 1e-300 {
                        continue;
                    }
                    let line = &mut acc[row * resolution..(row + 1) * resolution];
                    for (cell, &wx) in line.iter_mut().zip(&kx) {
                        *cell += wy * wx;
                    }
                }
            }
            acc
        })
        .collect();

    let norm = 1.0 / (n * 2.0 * std::f64::consts::PI * hx * hy);
    let mut densities = vec![0.0; resolution * resolution];
    for partial in &partials {
        for (d, p) in densities.iter_mut().zip(partial) {
            *d += p;
        }
    }
    for d in &mut densities {
        *d *= norm;
    }
    Ok(KdeGrid {
        resolution,
        bandwidth: [hx, hy],
        densities,
    })
}
