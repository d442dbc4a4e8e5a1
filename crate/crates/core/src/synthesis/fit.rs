//! Deviance and DIC.

use alloc::vec::Vec;

use super::{Datapoint, FitStats, SynthesisError};
use crate::math;

/// `Σ (y − δ)²/σ² + ln(2πσ²)`: minus twice the normal log-likelihood with
/// constants kept.
pub fn deviance(data: &[Datapoint], deltas: &[f64]) -> Result<f64, SynthesisError> {
    if deltas.len() != data.len() {
        return Err(SynthesisError::LengthMismatch { expected: data.len(), got: deltas.len() });
    }
    Ok(data.iter().zip(deltas).map(|(p, &d)| point_deviance(p, d)).sum())
}

fn point_deviance(p: &Datapoint, delta: f64) -> f64 {
    let v = p.sigma * p.sigma;
    let r = p.y - delta;
    r * r / v + math::ln(2.0 * math::PI * v)
}

/// Fit statistics from study-effect draws. `delta_draws[i]` holds the draws
/// for `data[i]`; all must have the same, non-zero, length.
pub fn fit_stats(data: &[Datapoint], delta_draws: &[Vec<f64>]) -> Result<FitStats, SynthesisError> {
    if delta_draws.len() != data.len() {
        return Err(SynthesisError::LengthMismatch { expected: data.len(), got: delta_draws.len() });
    }
    let n = delta_draws.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(SynthesisError::EmptyDraws);
    }
    if let Some(bad) = delta_draws.iter().find(|d| d.len() != n) {
        return Err(SynthesisError::LengthMismatch { expected: n, got: bad.len() });
    }

    let mut dbar = 0.0;
    let mut means = Vec::with_capacity(data.len());
    for (p, draws) in data.iter().zip(delta_draws) {
        dbar += draws.iter().map(|&d| point_deviance(p, d)).sum::<f64>() / n as f64;
        means.push(math::mean(draws));
    }
    let pd = dbar - deviance(data, &means)?;
    Ok(FitStats { dbar, pd, dic: dbar + pd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Indication;
    use alloc::vec;

    fn dp(y: f64, sigma: f64) -> Datapoint {
        Datapoint::new(y, sigma, Indication::Col, "x")
    }

    #[test]
    fn deviance_at_observed_values() {
        let data = [dp(-0.2, 0.3), dp(0.1, 0.3)];
        let d = deviance(&data, &[-0.2, 0.1]).unwrap();
        assert!((d - -1.140_137_084_485_053).abs() < 1e-12, "{d}");
        let one = [dp(0.4, 0.2)];
        assert_eq!(deviance(&one, &[0.4]).unwrap(), math::ln(2.0 * math::PI * 0.04));
        assert_eq!(
            deviance(&one, &[0.4, 0.1]),
            Err(SynthesisError::LengthMismatch { expected: 1, got: 2 })
        );
    }

    #[test]
    fn constant_draws_have_zero_pd() {
        let data = [dp(-0.2, 0.3), dp(0.1, 0.2)];
        let f = fit_stats(&data, &[vec![-0.1; 50], vec![0.0; 50]]).unwrap();
        assert!(f.pd.abs() < 1e-12);
        assert_eq!(f.dic, f.dbar + f.pd);
    }

    #[test]
    fn pd_is_mean_scaled_variance() {
        // For a single point, Dbar − D(mean) = Var(δ)/σ² exactly (population variance).
        let data = [dp(0.0, 0.5)];
        let f = fit_stats(&data, &[vec![-0.1, 0.1, -0.3, 0.3]]).unwrap();
        assert!((f.pd - 0.05 / 0.25).abs() < 1e-12);
        assert_eq!(fit_stats(&data, &[vec![]]), Err(SynthesisError::EmptyDraws));
    }
}
