//! Bayesian random-effects meta-analysis under three sharing models.
//!
//! Study effects follow `y_ij ~ N(δ_ij, σ_ij²)`, `δ_ij ~ N(d_j, τ_j²)` with
//! `τ_j ~ |N(0, s²)|`. The models differ in how the indication effects `d_j`
//! relate:
//!
//! * IP: independent, `d_j ~ N(0, V)`.
//! * CP: one shared `d ~ N(0, V)`; `τ_j` stays per indication.
//! * HMA: exchangeable, `d_j ~ N(m_d, τ_d²)`, `m_d ~ N(0, V)`, `τ_d ~ |N(0, s_d²)|`.
//!
//! `V` is a variance. Chains are independent; [`run_chain`] and
//! [`combine_chains`] let a caller run them on separate threads with the same
//! output as [`run_synthesis`].

mod fit;
mod sampler;
mod slice;
mod summary;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Indication;
use crate::effects::EffectEstimate;

pub use fit::{deviance, fit_stats};
pub use sampler::{run_chain, ChainDraws};
pub use summary::{gelman_rubin, quantile_sorted, summarize};

/// Split-R̂ above this flags a run as not converged.
pub const RHAT_THRESHOLD: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Model {
    Ip,
    Cp,
    Hma,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Ip, Model::Cp, Model::Hma];

    pub fn code(self) -> &'static str {
        match self {
            Model::Ip => "IP",
            Model::Cp => "CP",
            Model::Hma => "HMA",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Model {
    type Err = SynthesisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Model::ALL
            .into_iter()
            .find(|m| m.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SynthesisError::UnknownModel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: Model,
    /// Prior variance of `d_j` (IP), `d` (CP) and `m_d` (HMA).
    pub prior_effect_variance: f64,
    /// Half-normal scale for each within-indication SD `τ_j`.
    pub prior_tau_scale: f64,
    /// Half-normal scale for the between-indication SD `τ_d` (HMA only).
    pub prior_taud_scale: f64,
    /// Pins every `τ_j` to this value instead of sampling it. Zero gives the
    /// common-effect limit. Meant for validating the sampler against closed
    /// forms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_tau: Option<f64>,
}

impl ModelSpec {
    pub fn new(model: Model) -> Self {
        ModelSpec {
            model,
            prior_effect_variance: 1000.0,
            prior_tau_scale: 0.5,
            prior_taud_scale: 0.5,
            fixed_tau: None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.prior_effect_variance) {
            return Err(SynthesisError::InvalidSpec("prior_effect_variance must be positive"));
        }
        if !pos(self.prior_tau_scale) || !pos(self.prior_taud_scale) {
            return Err(SynthesisError::InvalidSpec("prior scales must be positive"));
        }
        if matches!(self.fixed_tau, Some(t) if !(t >= 0.0 && t.is_finite())) {
            return Err(SynthesisError::InvalidSpec("fixed_tau must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    pub burn_in: usize,
    pub samples_per_chain: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 3,
            burn_in: 10_000,
            samples_per_chain: 20_000,
            thin: 1,
            seed: 1,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.chains < 2 {
            return Err(SynthesisError::InvalidConfig("chains must be at least 2"));
        }
        if self.thin == 0 {
            return Err(SynthesisError::InvalidConfig("thin must be at least 1"));
        }
        if self.retained_per_chain() < 4 {
            return Err(SynthesisError::InvalidConfig("need at least 4 retained draws per chain"));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        self.samples_per_chain / self.thin
    }

    pub fn total_retained(&self) -> usize {
        self.chains * self.retained_per_chain()
    }
}

/// One study's log hazard ratio and its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datapoint {
    pub y: f64,
    pub sigma: f64,
    pub indication: Indication,
    pub label: String,
}

impl Datapoint {
    pub fn new(y: f64, sigma: f64, indication: Indication, label: &str) -> Self {
        Datapoint { y, sigma, indication, label: label.to_string() }
    }

    pub fn from_effect(e: &EffectEstimate, indication: Indication, label: &str) -> Self {
        Datapoint::new(e.ln_hr, e.se, indication, label)
    }
}

/// Median and equal-tailed 95% interval of a set of draws, plus the draws
/// themselves (empty once stripped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
    pub mean: f64,
    pub sd: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub draws: Vec<f64>,
}

impl PosteriorSummary {
    /// Quantile of the retained draws; `None` once stripped.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        if self.draws.is_empty() {
            return None;
        }
        let mut s = self.draws.clone();
        s.sort_by(f64::total_cmp);
        Some(quantile_sorted(&s, p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    /// Posterior mean deviance, constants included.
    pub dbar: f64,
    /// Effective number of parameters, `dbar` minus deviance at the
    /// posterior-mean study effects.
    pub pd: f64,
    pub dic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Split-R̂ per monitored parameter.
    pub rhat: BTreeMap<String, f64>,
    pub max_rhat: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub model: Model,
    /// `d_j`; under CP every indication maps to the shared `d`.
    pub pooled_effect: BTreeMap<Indication, PosteriorSummary>,
    /// `τ_j`.
    pub within_sd: BTreeMap<Indication, PosteriorSummary>,
    /// `τ_d`, HMA only.
    pub between_sd: Option<PosteriorSummary>,
    /// `m_d`, HMA only.
    pub overall_mean: Option<PosteriorSummary>,
    /// `δ_ij` by datapoint label.
    pub study_effects: BTreeMap<String, PosteriorSummary>,
    pub fit: FitStats,
    pub convergence: Convergence,
    pub n_datapoints: usize,
}

impl SynthesisResult {
    /// `Err(NonConvergence)` naming the worst parameter when any split-R̂
    /// exceeds [`RHAT_THRESHOLD`].
    pub fn check_convergence(&self) -> Result<(), SynthesisError> {
        if self.convergence.converged {
            return Ok(());
        }
        let (name, r) = self
            .convergence
            .rhat
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| (k.clone(), *v))
            .unwrap_or_default();
        Err(SynthesisError::NonConvergence { parameter: name, rhat: r })
    }

    /// True when the pooled effects still carry raw draws.
    pub fn has_draws(&self) -> bool {
        self.pooled_effect.values().all(|s| !s.draws.is_empty())
    }

    /// Drop raw draws to save memory. Pooled-effect draws are kept when
    /// `keep_pooled` is set, since the posterior plots need them.
    pub fn strip_draws(&mut self, keep_pooled: bool) {
        let all = self
            .within_sd
            .values_mut()
            .chain(self.study_effects.values_mut())
            .chain(self.between_sd.iter_mut())
            .chain(self.overall_mean.iter_mut());
        for s in all {
            s.draws = Vec::new();
        }
        if !keep_pooled {
            for s in self.pooled_effect.values_mut() {
                s.draws = Vec::new();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("no datapoints to synthesise")]
    NoData,
    #[error("model needs indication {0} but it has no datapoints")]
    EmptyIndication(Indication),
    #[error("datapoint {0:?} has a non-positive or non-finite sigma or y")]
    InvalidDatapoint(String),
    #[error("invalid model spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid MCMC config: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("not converged: split R-hat {rhat:.3} for {parameter}")]
    NonConvergence { parameter: String, rhat: f64 },
    #[error("length mismatch: {expected} datapoints but {got} values")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no draws")]
    EmptyDraws,
    #[error("need at least 2 chains")]
    TooFewChains,
    #[error("chains must have equal length of at least 4 draws")]
    BadChainLengths,
}

/// Run every chain sequentially and combine. Output is identical to running
/// the chains concurrently with [`run_chain`] and [`combine_chains`].
pub fn run_synthesis(
    data: &[Datapoint],
    spec: &ModelSpec,
    cfg: &McmcConfig,
) -> Result<SynthesisResult, SynthesisError> {
    check_inputs(data, spec, cfg)?;
    let chains = (0..cfg.chains)
        .map(|c| run_chain(data, spec, cfg, c))
        .collect::<Result<Vec<_>, _>>()?;
    combine_chains(data, spec, chains)
}

pub fn check_inputs(data: &[Datapoint], spec: &ModelSpec, cfg: &McmcConfig) -> Result<(), SynthesisError> {
    spec.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return Err(SynthesisError::NoData);
    }
    for d in data {
        if !(d.sigma > 0.0 && d.sigma.is_finite() && d.y.is_finite()) {
            return Err(SynthesisError::InvalidDatapoint(d.label.clone()));
        }
    }
    Ok(())
}

/// Pool per-chain draws into summaries, fit statistics and diagnostics.
/// `chains` must be in chain-index order.
pub fn combine_chains(
    data: &[Datapoint],
    spec: &ModelSpec,
    chains: Vec<ChainDraws>,
) -> Result<SynthesisResult, SynthesisError> {
    if chains.len() < 2 {
        return Err(SynthesisError::TooFewChains);
    }
    let groups = chains[0].groups.clone();
    let mut rhat = BTreeMap::new();

    let mut monitor = |name: String, per_chain: Vec<&[f64]>| -> Result<PosteriorSummary, SynthesisError> {
        rhat.insert(name, gelman_rubin(&per_chain)?);
        Ok(summarize(per_chain.concat()))
    };

    let mut pooled_effect = BTreeMap::new();
    match spec.model {
        Model::Cp => {
            let s = monitor("d".into(), chains.iter().map(|c| c.d[0].as_slice()).collect())?;
            for g in &groups {
                pooled_effect.insert(*g, s.clone());
            }
        }
        _ => {
            for (j, g) in groups.iter().enumerate() {
                let s = monitor(format!("d[{g}]"), chains.iter().map(|c| c.d[j].as_slice()).collect())?;
                pooled_effect.insert(*g, s);
            }
        }
    }

    let mut within_sd = BTreeMap::new();
    for (j, g) in groups.iter().enumerate() {
        let per_chain: Vec<&[f64]> = chains.iter().map(|c| c.tau[j].as_slice()).collect();
        let s = if spec.fixed_tau.is_some() {
            summarize(per_chain.concat())
        } else {
            monitor(format!("tau[{g}]"), per_chain)?
        };
        within_sd.insert(*g, s);
    }

    let (between_sd, overall_mean) = if spec.model == Model::Hma {
        let td = monitor("tau_d".into(), chains.iter().map(|c| c.tau_d.as_slice()).collect())?;
        let md = monitor("m_d".into(), chains.iter().map(|c| c.m_d.as_slice()).collect())?;
        (Some(td), Some(md))
    } else {
        (None, None)
    };

    let delta: Vec<Vec<f64>> = (0..data.len())
        .map(|i| chains.iter().flat_map(|c| c.delta[i].iter().copied()).collect())
        .collect();
    let fit = fit_stats(data, &delta)?;

    let mut study_effects = BTreeMap::new();
    for (dp, draws) in data.iter().zip(delta) {
        let mut label = dp.label.clone();
        let mut k = 2;
        while study_effects.contains_key(&label) {
            label = format!("{}#{k}", dp.label);
            k += 1;
        }
        study_effects.insert(label, summarize(draws));
    }

    let max_rhat = rhat.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let converged = rhat.values().all(|r| *r <= RHAT_THRESHOLD);
    Ok(SynthesisResult {
        model: spec.model,
        pooled_effect,
        within_sd,
        between_sd,
        overall_mean,
        study_effects,
        fit,
        convergence: Convergence { rhat, max_rhat, converged },
        n_datapoints: data.len(),
    })
}
