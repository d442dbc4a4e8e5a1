//! Posterior summaries and the split-R̂ convergence diagnostic.

use alloc::vec::Vec;

use super::{PosteriorSummary, SynthesisError};
use crate::math;

/// Type-7 quantile (linear interpolation between order statistics) of
/// already-sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = math::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median, equal-tailed 95% interval, mean and SD. The draws are moved into
/// the summary unchanged. An empty input gives NaN statistics.
pub fn summarize(draws: Vec<f64>) -> PosteriorSummary {
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    PosteriorSummary {
        median: quantile_sorted(&sorted, 0.5),
        lower95: quantile_sorted(&sorted, 0.025),
        upper95: quantile_sorted(&sorted, 0.975),
        mean: math::mean(&draws),
        sd: math::sqrt(math::variance(&draws)),
        draws,
    }
}

/// Split-R̂: each chain is cut into halves (dropping a middle draw when the
/// length is odd) and the classic potential scale reduction factor is taken
/// over the half-chains.
pub fn gelman_rubin(chains: &[&[f64]]) -> Result<f64, SynthesisError> {
    if chains.len() < 2 {
        return Err(SynthesisError::TooFewChains);
    }
    let len = chains[0].len();
    if len < 4 || chains.iter().any(|c| c.len() != len) {
        return Err(SynthesisError::BadChainLengths);
    }
    let n = len / 2;
    let halves: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..n], &c[len - n..]]).collect();
    let means: Vec<f64> = halves.iter().map(|h| math::mean(h)).collect();
    let w = halves.iter().map(|h| math::variance(h)).sum::<f64>() / halves.len() as f64;
    let b = n as f64 * math::variance(&means);
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    Ok(math::sqrt(var_plus / w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(seed: u64, n: usize, mu: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| mu + rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn constant_draws() {
        let s = summarize(vec![2.5; 100]);
        assert_eq!((s.median, s.lower95, s.upper95), (2.5, 2.5, 2.5));
        assert_eq!(s.sd, 0.0);
    }

    #[test]
    fn uniform_grid_quantiles() {
        let n = 10_000;
        let s = summarize((0..n).map(|i| i as f64 / (n - 1) as f64).collect());
        assert!((s.median - 0.5).abs() < 1e-12);
        assert!((s.lower95 - 0.025).abs() < 1e-12);
        assert!((s.upper95 - 0.975).abs() < 1e-12);
    }

    #[test]
    fn type7_interpolates() {
        // R: quantile(c(1, 2, 4, 8), c(.25, .5, .9), type = 7) = 1.75 3.0 6.8
        let x = [1.0, 2.0, 4.0, 8.0];
        assert!((quantile_sorted(&x, 0.25) - 1.75).abs() < 1e-12);
        assert!((quantile_sorted(&x, 0.5) - 3.0).abs() < 1e-12);
        assert!((quantile_sorted(&x, 0.9) - 6.8).abs() < 1e-12);
    }

    #[test]
    fn standard_normal_summary() {
        let s = summarize(normals(11, 200_000, 0.0));
        assert!(s.median.abs() < 0.01);
        assert!((s.lower95 + 1.959964).abs() < 0.02);
        assert!((s.upper95 - 1.959964).abs() < 0.02);
    }

    #[test]
    fn identical_stationary_chains_give_one() {
        // Each chain is one block repeated, so all four half-chains agree and
        // B = 0; R̂ is then sqrt((n - 1) / n).
        let block = normals(5, 5_000, 0.0);
        let chain = [block.clone(), block].concat();
        let r = gelman_rubin(&[&chain, &chain, &chain]).unwrap();
        assert!((r - (4_999.0f64 / 5_000.0).sqrt()).abs() < 1e-12);
        assert!((r - 1.0).abs() < 2e-4);

        let iid = normals(6, 10_000, 0.0);
        let r = gelman_rubin(&[&iid, &iid]).unwrap();
        assert!((r - 1.0).abs() < 2e-3, "{r}");
    }

    #[test]
    fn disjoint_chains_flagged() {
        let a = normals(1, 2_000, 0.0);
        let b = normals(2, 2_000, 10.0);
        // Half-chain means 0, 0, 10, 10 against unit within-variance: R̂ ≈ sqrt(1 + 100/3).
        let r = gelman_rubin(&[&a, &b]).unwrap();
        assert!(r > 5.0, "{r}");
    }

    #[test]
    fn diagnostic_preconditions() {
        let a = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(gelman_rubin(&[&a]), Err(SynthesisError::TooFewChains));
        assert_eq!(gelman_rubin(&[&a, &a[..3]]), Err(SynthesisError::BadChainLengths));
    }
}
