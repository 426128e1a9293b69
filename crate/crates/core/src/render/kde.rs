//! Gaussian kernel density estimates in one and two dimensions, highest
//! density thresholds and iso-lines.

use std::f64::consts::PI;

pub const DENSITY_POINTS: usize = 512;
pub const GRID_SIZE: usize = 100;
pub const DEFAULT_LEVELS: [f64; 3] = [0.5, 0.75, 0.95];

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

/// Scott's rule for a Gaussian kernel in `d` dimensions.
pub fn scott_bandwidth(x: &[f64], d: usize) -> f64 {
    let (_, sd) = mean_sd(x);
    let n = x.len() as f64;
    let factor = if d == 1 { 1.06 } else { 1.0 };
    factor * sd * n.powf(-1.0 / (d as f64 + 4.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Density1 {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub bandwidth: f64,
}

impl Density1 {
    /// Trapezoid integral over the evaluation grid.
    pub fn integral(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.y.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

/// Exact Gaussian KDE evaluated on `DENSITY_POINTS` points spanning the
/// sample range plus three bandwidths either side. A constant sample gets a
/// small positive bandwidth so the result is still a density.
pub fn density1(sample: &[f64]) -> Density1 {
    let mut h = scott_bandwidth(sample, 1);
    let (lo, hi) = sample
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(h > 0.0) {
        h = 1e-3 * lo.abs().max(hi.abs()).max(1.0);
    }
    let (a, b) = (lo - 3.0 * h, hi + 3.0 * h);
    let step = (b - a) / (DENSITY_POINTS - 1) as f64;
    let norm = 1.0 / (sample.len() as f64 * h * (2.0 * PI).sqrt());
    let x: Vec<f64> = (0..DENSITY_POINTS).map(|i| a + step * i as f64).collect();
    let y = x
        .iter()
        .map(|&xi| norm * sample.iter().map(|&s| (-0.5 * ((xi - s) / h).powi(2)).exp()).sum::<f64>())
        .collect();
    Density1 { x, y, bandwidth: h }
}

/// Binned 2-D Gaussian KDE on a `GRID_SIZE × GRID_SIZE` lattice; `z[i][j]`
/// is the density at `(x[i], y[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density2 {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<Vec<f64>>,
}

fn lattice(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let (a, b) = (lo - 3.0 * h, hi + 3.0 * h);
    let step = (b - a) / (GRID_SIZE - 1) as f64;
    (0..GRID_SIZE).map(|i| a + step * i as f64).collect()
}

fn gaussian_weights(h: f64, step: f64) -> Vec<f64> {
    let reach = ((4.0 * h / step).ceil() as usize).min(GRID_SIZE);
    (0..=reach).map(|d| (-0.5 * (d as f64 * step / h).powi(2)).exp()).collect()
}

fn convolve(line: &[f64], weights: &[f64]) -> Vec<f64> {
    (0..line.len())
        .map(|i| {
            let mut acc = 0.0;
            for (d, w) in weights.iter().enumerate() {
                if d == 0 {
                    acc += w * line[i];
                    continue;
                }
                if i >= d {
                    acc += w * line[i - d];
                }
                if i + d < line.len() {
                    acc += w * line[i + d];
                }
            }
            acc
        })
        .collect()
}

/// Returns `None` when either coordinate has zero spread.
pub fn density2(xs: &[f64], ys: &[f64]) -> Option<Density2> {
    let (hx, hy) = (scott_bandwidth(xs, 2), scott_bandwidth(ys, 2));
    if !(hx > 0.0 && hy > 0.0) {
        return None;
    }
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let (x0, x1) = range(xs);
    let (y0, y1) = range(ys);
    let gx = lattice(x0, x1, hx);
    let gy = lattice(y0, y1, hy);
    let (dx, dy) = (gx[1] - gx[0], gy[1] - gy[0]);

    // linear binning onto the lattice
    let mut counts = vec![vec![0.0; GRID_SIZE]; GRID_SIZE];
    let last = (GRID_SIZE - 1) as f64;
    for (&x, &y) in xs.iter().zip(ys) {
        let fx = ((x - gx[0]) / dx).clamp(0.0, last);
        let fy = ((y - gy[0]) / dy).clamp(0.0, last);
        let (i, j) = ((fx.floor() as usize).min(GRID_SIZE - 2), (fy.floor() as usize).min(GRID_SIZE - 2));
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        counts[i][j] += (1.0 - tx) * (1.0 - ty);
        counts[i + 1][j] += tx * (1.0 - ty);
        counts[i][j + 1] += (1.0 - tx) * ty;
        counts[i + 1][j + 1] += tx * ty;
    }

    let (wx, wy) = (gaussian_weights(hx, dx), gaussian_weights(hy, dy));
    let rows: Vec<Vec<f64>> = counts.iter().map(|row| convolve(row, &wy)).collect();
    let mut z = vec![vec![0.0; GRID_SIZE]; GRID_SIZE];
    for j in 0..GRID_SIZE {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        for (i, v) in convolve(&col, &wx).into_iter().enumerate() {
            z[i][j] = v;
        }
    }
    let mass: f64 = z.iter().flatten().sum::<f64>() * dx * dy;
    if !(mass > 0.0) {
        return None;
    }
    for v in z.iter_mut().flatten() {
        *v /= mass;
    }
    Some(Density2 { x: gx, y: gy, z })
}

impl Density2 {
    /// Density threshold whose super-level set holds probability `p`.
    pub fn hdr_threshold(&self, p: f64) -> f64 {
        let cell = (self.x[1] - self.x[0]) * (self.y[1] - self.y[0]);
        let mut values: Vec<f64> = self.z.iter().flatten().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        for &v in &values {
            acc += v * cell;
            if acc >= p {
                return v;
            }
        }
        *values.last().unwrap_or(&0.0)
    }

    /// Marching-squares iso-line at `level`, as independent segments.
    pub fn contour(&self, level: f64) -> Vec<[[f64; 2]; 2]> {
        let mut segments = Vec::new();
        let interp = |a: [f64; 2], b: [f64; 2], va: f64, vb: f64| {
            let t = if vb == va { 0.5 } else { (level - va) / (vb - va) };
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        };
        for i in 0..GRID_SIZE - 1 {
            for j in 0..GRID_SIZE - 1 {
                // corners counter-clockwise from bottom-left
                let p = [
                    [self.x[i], self.y[j]],
                    [self.x[i + 1], self.y[j]],
                    [self.x[i + 1], self.y[j + 1]],
                    [self.x[i], self.y[j + 1]],
                ];
                let v = [self.z[i][j], self.z[i + 1][j], self.z[i + 1][j + 1], self.z[i][j + 1]];
                let case = (0..4).fold(0, |acc, c| acc | (usize::from(v[c] >= level) << c));
                let edge = |e: usize| interp(p[e], p[(e + 1) % 4], v[e], v[(e + 1) % 4]);
                let pairs: &[(usize, usize)] = match case {
                    0 | 15 => &[],
                    1 | 14 => &[(3, 0)],
                    2 | 13 => &[(0, 1)],
                    3 | 12 => &[(3, 1)],
                    4 | 11 => &[(1, 2)],
                    6 | 9 => &[(0, 2)],
                    7 | 8 => &[(2, 3)],
                    5 | 10 => {
                        let centre = v.iter().sum::<f64>() / 4.0;
                        if (centre >= level) == (case == 5) {
                            &[(3, 2), (0, 1)]
                        } else {
                            &[(3, 0), (1, 2)]
                        }
                    }
                    _ => unreachable!(),
                };
                for &(a, b) in pairs {
                    segments.push([edge(a), edge(b)]);
                }
            }
        }
        segments
    }
}
