//! Log-scale effect estimates and evidence-quality metrics.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::math;

/// Standard normal 97.5% quantile used for every CI <-> SE conversion.
/// Fixed at 1.959964 rather than 1.96 so that reconstructed intervals
/// round-trip to six significant figures.
pub const Z_975: f64 = 1.959964;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EffectError {
    #[error("degenerate interval: ci_lower equals ci_upper")]
    DegenerateInterval,
    #[error("invalid interval: need 0 < ci_lower <= hr <= ci_upper (got {hr} in [{ci_lower}, {ci_upper}])")]
    InvalidInterval { hr: f64, ci_lower: f64, ci_upper: f64 },
    #[error("relative uncertainty undefined for a null effect (HR = 1)")]
    NullEffect,
    #[error("unknown bin key {0:?}")]
    UnknownKey(String),
}

/// Log hazard ratio with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub ln_hr: f64,
    pub se: f64,
}

impl EffectEstimate {
    /// 95% interval on the HR scale.
    pub fn ci(&self) -> (f64, f64) {
        (
            math::exp(self.ln_hr - Z_975 * self.se),
            math::exp(self.ln_hr + Z_975 * self.se),
        )
    }

    pub fn hr(&self) -> f64 {
        math::exp(self.ln_hr)
    }
}

pub fn effect_from_hr_ci(hr: f64, ci_lower: f64, ci_upper: f64) -> Result<EffectEstimate, EffectError> {
    if !(ci_lower > 0.0 && ci_lower <= hr && hr <= ci_upper && ci_upper.is_finite()) {
        return Err(EffectError::InvalidInterval { hr, ci_lower, ci_upper });
    }
    if ci_lower == ci_upper {
        return Err(EffectError::DegenerateInterval);
    }
    Ok(EffectEstimate {
        ln_hr: math::ln(hr),
        se: (math::ln(ci_upper) - math::ln(ci_lower)) / (2.0 * Z_975),
    })
}

/// Events divided by patients randomized to the arm.
pub fn maturity(events: u32, n_total: u32) -> f64 {
    debug_assert!(n_total > 0 && events <= n_total);
    events as f64 / n_total as f64
}

pub fn ci_width(ci_lower: f64, ci_upper: f64) -> f64 {
    ci_upper - ci_lower
}

/// SE / |ln HR|.
pub fn relative_uncertainty(e: &EffectEstimate) -> Result<f64, EffectError> {
    if e.ln_hr == 0.0 {
        return Err(EffectError::NullEffect);
    }
    Ok(e.se / math::abs(e.ln_hr))
}

/// Display bin keys for circle sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BinKey {
    MaturityOs,
    MaturityPfs,
    CiWidth,
    RelUnc,
}

impl BinKey {
    pub const ALL: [BinKey; 4] = [BinKey::MaturityOs, BinKey::MaturityPfs, BinKey::CiWidth, BinKey::RelUnc];

    /// Lower edges of bins 2..=n. Bins are half-open: `[edge_k, edge_k+1)`.
    pub fn edges(self) -> &'static [f64] {
        match self {
            BinKey::MaturityOs => &[0.25, 0.40, 0.55, 0.70],
            BinKey::MaturityPfs => &[0.25, 0.45, 0.65, 0.85],
            BinKey::CiWidth => &[0.25, 0.45, 0.65],
            BinKey::RelUnc => &[0.25, 0.45, 0.65, 1.00],
        }
    }

    /// Values strictly above this are drawn as plain points.
    pub fn extreme_above(self) -> Option<f64> {
        match self {
            BinKey::CiWidth => Some(1.00),
            BinKey::RelUnc => Some(1.50),
            _ => None,
        }
    }

    pub fn n_bins(self) -> u8 {
        self.edges().len() as u8 + 1
    }

    /// True for keys where a small value is good news (narrow intervals).
    pub fn smaller_is_better(self) -> bool {
        matches!(self, BinKey::CiWidth | BinKey::RelUnc)
    }

    pub fn name(self) -> &'static str {
        match self {
            BinKey::MaturityOs => "MATURITY_OS",
            BinKey::MaturityPfs => "MATURITY_PFS",
            BinKey::CiWidth => "CI_WIDTH",
            BinKey::RelUnc => "REL_UNC",
        }
    }
}

impl fmt::Display for BinKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BinKey {
    type Err = EffectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BinKey::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| EffectError::UnknownKey(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinIndex {
    Bin(u8),
    Extreme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SizeBin {
    pub key: BinKey,
    pub index: BinIndex,
}

impl SizeBin {
    pub fn edges(&self) -> &'static [f64] {
        self.key.edges()
    }

    pub fn bin(&self) -> Option<u8> {
        match self.index {
            BinIndex::Bin(b) => Some(b),
            BinIndex::Extreme => None,
        }
    }

    pub fn is_extreme(&self) -> bool {
        self.index == BinIndex::Extreme
    }

    /// Short label for tables: `1`..`n` or `EXTREME`.
    pub fn label(&self) -> String {
        match self.index {
            BinIndex::Bin(b) => b.to_string(),
            BinIndex::Extreme => "EXTREME".to_string(),
        }
    }
}

/// Step function from a metric value to its display bin. NaN (an undefined
/// metric) maps to EXTREME so that it is still drawn.
pub fn assign_bin(value: f64, key: BinKey) -> SizeBin {
    let index = if value.is_nan() || key.extreme_above().is_some_and(|t| value > t) {
        BinIndex::Extreme
    } else {
        BinIndex::Bin(1 + key.edges().iter().filter(|&&e| value >= e).count() as u8)
    };
    SizeBin { key, index }
}

/// [`assign_bin`] with the key given by name.
pub fn assign_bin_named(value: f64, key: &str) -> Result<SizeBin, EffectError> {
    Ok(assign_bin(value, key.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with a 30-digit decimal log.
    #[test]
    fn effect_matches_high_precision_oracle() {
        let e = effect_from_hr_ci(0.66, 0.52, 0.84).unwrap();
        assert!((e.ln_hr - -0.415515443961666).abs() < 1e-12);
        assert!((e.se - 0.122342318599190).abs() < 1e-12);
        let e = effect_from_hr_ci(1.08, 0.60, 1.96).unwrap();
        assert!((e.ln_hr - 0.0769610411361284).abs() < 1e-12);
        assert!((e.se - 0.301987714317308).abs() < 1e-12);
    }

    #[test]
    fn symmetric_interval_about_one() {
        let e = effect_from_hr_ci(1.0, 0.5, 2.0).unwrap();
        assert_eq!(e.ln_hr, 0.0);
        assert!((e.se - 0.353653016361497).abs() < 1e-12);
        assert_eq!(relative_uncertainty(&e), Err(EffectError::NullEffect));
    }

    #[test]
    fn degenerate_and_invalid_intervals() {
        assert_eq!(effect_from_hr_ci(0.7, 0.7, 0.7), Err(EffectError::DegenerateInterval));
        assert!(matches!(effect_from_hr_ci(0.66, 0.84, 0.9), Err(EffectError::InvalidInterval { .. })));
        assert!(matches!(effect_from_hr_ci(0.0, 0.0, 0.9), Err(EffectError::InvalidInterval { .. })));
    }

    #[test]
    fn relative_uncertainty_examples() {
        let e = effect_from_hr_ci(0.66, 0.52, 0.84).unwrap();
        assert!((relative_uncertainty(&e).unwrap() - 0.294435069447087).abs() < 1e-12);
        let e = effect_from_hr_ci(1.08, 0.60, 1.96).unwrap();
        assert!((relative_uncertainty(&e).unwrap() - 3.92390370321464).abs() < 1e-10);
    }

    #[test]
    fn maturity_examples() {
        assert!((maturity(344, 444) - 0.774775).abs() < 1e-6);
        assert_eq!(maturity(0, 100), 0.0);
        assert!((maturity(137, 322) - 0.425466).abs() < 1e-6);
    }

    #[test]
    fn ci_width_examples() {
        assert!((ci_width(0.52, 0.84) - 0.32).abs() < 1e-12);
        assert!((ci_width(0.60, 1.96) - 1.36).abs() < 1e-12);
    }

    #[test]
    fn bin_examples() {
        assert_eq!(assign_bin(0.4255, BinKey::MaturityOs).index, BinIndex::Bin(3));
        assert_eq!(assign_bin(1.36, BinKey::CiWidth).index, BinIndex::Extreme);
        for k in BinKey::ALL {
            assert_eq!(assign_bin(0.24, k).index, BinIndex::Bin(1));
        }
        // Half-open edges.
        assert_eq!(assign_bin(0.25, BinKey::CiWidth).index, BinIndex::Bin(2));
        assert_eq!(assign_bin(1.00, BinKey::CiWidth).index, BinIndex::Bin(4));
        assert_eq!(assign_bin(1.50, BinKey::RelUnc).index, BinIndex::Bin(5));
        assert_eq!(assign_bin(1.51, BinKey::RelUnc).index, BinIndex::Extreme);
        assert_eq!(assign_bin(0.99, BinKey::MaturityPfs).index, BinIndex::Bin(5));
        assert_eq!(assign_bin(f64::NAN, BinKey::RelUnc).index, BinIndex::Extreme);
    }

    #[test]
    fn bin_keys_by_name() {
        assert_eq!("ci_width".parse::<BinKey>().unwrap(), BinKey::CiWidth);
        assert_eq!(assign_bin_named(0.3, "NOPE"), Err(EffectError::UnknownKey("NOPE".into())));
        for k in BinKey::ALL {
            assert!(k.edges().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
