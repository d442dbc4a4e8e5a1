//! Density curves: Gaussian KDE of posterior draws and normal approximations
//! of reported estimates.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::VizError;
use crate::math;
use crate::synthesis::quantile_sorted;

pub const MIN_KDE_DRAWS: usize = 30;
pub const BANDWIDTH_FLOOR: f64 = 1e-6;

/// Kernel contributions beyond this many bandwidths are below 1e-14 and
/// skipped.
const KERNEL_CUTOFF: f64 = 8.0;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DensitySource {
    NormalApprox,
    KdePosterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub source: DensitySource,
}

impl DensityCurve {
    /// Location and height of the highest grid point.
    pub fn peak(&self) -> (f64, f64) {
        self.xs
            .iter()
            .zip(&self.ys)
            .fold((f64::NAN, f64::NEG_INFINITY), |acc, (&x, &y)| if y > acc.1 { (x, y) } else { acc })
    }

    /// Trapezoid rule over the grid.
    pub fn integral(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }

    /// Keep only grid points inside `[lo, hi]`.
    pub fn clipped(&self, lo: f64, hi: f64) -> DensityCurve {
        let (xs, ys) = self.xs.iter().zip(&self.ys).filter(|(x, _)| **x >= lo && **x <= hi).unzip();
        DensityCurve { xs, ys, source: self.source }
    }

    /// Interior grid indices that are strict local maxima.
    pub fn local_maxima(&self) -> Vec<usize> {
        (1..self.ys.len().saturating_sub(1))
            .filter(|&i| self.ys[i] > self.ys[i - 1] && self.ys[i] >= self.ys[i + 1])
            .collect()
    }
}

/// Silverman's rule of thumb, `0.9·min(sd, IQR/1.34)·n^(-1/5)`, floored at
/// [`BANDWIDTH_FLOOR`]. Falls back to the SD when the IQR is zero.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let sd = math::sqrt(math::variance(sorted));
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * math::powf(n, -0.2)).max(BANDWIDTH_FLOOR)
}

/// Gaussian KDE on `grid` evenly spaced points spanning
/// `[min − 3h, max + 3h]`.
pub fn kde(draws: &[f64], grid: usize) -> Result<DensityCurve, VizError> {
    if draws.len() < MIN_KDE_DRAWS {
        return Err(VizError::TooFewDraws(draws.len()));
    }
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let h = silverman_bandwidth(&s);
    let (lo, hi) = (s[0] - 3.0 * h, s[s.len() - 1] + 3.0 * h);
    let grid = grid.max(2);
    let step = (hi - lo) / (grid - 1) as f64;
    let norm = INV_SQRT_2PI / (h * s.len() as f64);

    let mut xs = Vec::with_capacity(grid);
    let mut ys = Vec::with_capacity(grid);
    for k in 0..grid {
        let x = lo + k as f64 * step;
        let a = s.partition_point(|&v| v < x - KERNEL_CUTOFF * h);
        let b = s.partition_point(|&v| v <= x + KERNEL_CUTOFF * h);
        let sum: f64 = s[a..b]
            .iter()
            .map(|&v| {
                let z = (x - v) / h;
                math::exp(-0.5 * z * z)
            })
            .sum();
        xs.push(x);
        ys.push(sum * norm);
    }
    Ok(DensityCurve { xs, ys, source: DensitySource::KdePosterior })
}

/// Normal density with the given mean and SD on `grid` points spanning
/// four SDs either side.
pub fn normal_density(mean: f64, sd: f64, grid: usize) -> DensityCurve {
    let grid = grid.max(2);
    let (lo, hi) = (mean - 4.0 * sd, mean + 4.0 * sd);
    let step = (hi - lo) / (grid - 1) as f64;
    let (xs, ys) = (0..grid)
        .map(|k| {
            let x = lo + k as f64 * step;
            let z = (x - mean) / sd;
            (x, INV_SQRT_2PI / sd * math::exp(-0.5 * z * z))
        })
        .unzip();
    DensityCurve { xs, ys, source: DensitySource::NormalApprox }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn standard_normal_peak_near_zero() {
        let c = kde(&normals(1, 100_000), 512).unwrap();
        let (x, y) = c.peak();
        assert!(x.abs() < 0.05, "peak at {x}");
        // Analytic peak 1/sqrt(2π) ≈ 0.3989, slightly flattened by smoothing.
        assert!((y - 0.3989).abs() < 0.01, "height {y}");
        let area = c.integral();
        assert!((0.97..=1.0 + 1e-6).contains(&area), "{area}");
    }

    #[test]
    fn constant_draws_give_spike() {
        let c = kde(&[0.3; 50], 101).unwrap();
        assert!((c.xs[0] - (0.3 - 3.0 * BANDWIDTH_FLOOR)).abs() < 1e-12);
        assert!(c.peak().1 > 1e4);
        assert!((c.peak().0 - 0.3).abs() < 1e-6);
    }

    #[test]
    fn too_few_draws() {
        assert_eq!(kde(&[0.0; 29], 64), Err(VizError::TooFewDraws(29)));
    }

    #[test]
    fn bimodal_mixture_has_two_modes() {
        // Equal mixture of N(-2, 0.5²) and N(2, 0.5²): analytic modes at ±2.
        let z = normals(4, 40_000);
        let draws: Vec<f64> =
            z.iter().enumerate().map(|(i, v)| if i % 2 == 0 { -2.0 } else { 2.0 } + 0.5 * v).collect();
        let c = kde(&draws, 400).unwrap();
        let modes: Vec<f64> = c.local_maxima().into_iter().map(|i| c.xs[i]).collect();
        assert_eq!(modes.len(), 2, "{modes:?}");
        assert!((modes[0] + 2.0).abs() < 0.1 && (modes[1] - 2.0).abs() < 0.1, "{modes:?}");
    }

    #[test]
    fn normal_density_symmetric_and_normalised() {
        let c = normal_density(0.0, 0.35, 201);
        for k in 0..c.ys.len() {
            assert!((c.ys[k] - c.ys[c.ys.len() - 1 - k]).abs() < 1e-12);
        }
        assert!((c.integral() - 0.99994).abs() < 1e-3);
        assert!(c.peak().0.abs() < 1e-12);
        let cut = c.clipped(-0.5, 0.5);
        assert!(cut.xs.iter().all(|x| x.abs() <= 0.5));
        assert_eq!(vec![cut.source], vec![DensitySource::NormalApprox]);
    }
}
