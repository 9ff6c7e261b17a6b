//! Value at risk, conditional value at risk and the risk-envelope dual.
//!
//! Returns are rewards, so the left tail is the bad one: `CVaR_α` is the mean
//! of the worst `α`-fraction of outcomes and `CVaR_1` is the expectation.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::math;

/// Probability-mass tolerance shared by distributions and envelopes.
pub const MASS_TOL: f64 = 1e-9;

/// A finite distribution over real values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteDistribution {
    outcomes: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    /// Builds a distribution from `(value, probability)` pairs.
    pub fn new(outcomes: Vec<(f64, f64)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidDistribution("no outcomes".to_string()));
        }
        let mut total = 0.0;
        for &(v, p) in &outcomes {
            if !v.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution("values must be finite and probabilities in [0, 1]".to_string()));
            }
            total += p;
        }
        if math::abs(total - 1.0) > MASS_TOL {
            return Err(Error::InvalidDistribution("probabilities do not sum to one".to_string()));
        }
        Ok(Self { outcomes })
    }

    pub fn outcomes(&self) -> &[(f64, f64)] {
        &self.outcomes
    }

    pub fn probs(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.1).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.0).collect()
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|(v, p)| v * p).sum()
    }
}

/// A density perturbation `ξ` in the risk envelope `B(α, P)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvelopeWeights {
    pub xi: Vec<f64>,
}

impl EnvelopeWeights {
    /// `0 <= ξ <= 1/α` and `Σ ξ P = 1`, both within [`MASS_TOL`].
    pub fn is_feasible(&self, probs: &[f64], alpha: f64) -> bool {
        if self.xi.len() != probs.len() {
            return false;
        }
        let cap = 1.0 / alpha + MASS_TOL;
        let in_box = self.xi.iter().all(|&x| (-MASS_TOL..=cap).contains(&x));
        let mass: f64 = self.xi.iter().zip(probs).map(|(x, p)| x * p).sum();
        in_box && math::abs(mass - 1.0) <= MASS_TOL
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("alpha must lie in (0, 1]".to_string()))
    }
}

/// Number of samples in the empirical `α`-tail, `⌈αN⌉` (at least one).
pub fn tail_size(n: usize, alpha: f64) -> usize {
    // Guard against 0.2 * 10 evaluating to 2.0000000000000004.
    let k = math::ceil(alpha * n as f64 - 1e-9) as usize;
    k.clamp(1, n)
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// The `⌈αN⌉`-th smallest sample.
pub fn empirical_var(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let k = tail_size(samples.len(), alpha);
    Ok(sorted(samples)[k - 1])
}

/// Mean of the `⌈αN⌉` smallest samples.
pub fn empirical_cvar(samples: &[f64], alpha: f64) -> Result<f64> {
    Ok(cvar_with_se(samples, alpha)?.0)
}

/// Empirical CVaR together with the standard error `sd(tail) / √⌈αN⌉`.
pub fn cvar_with_se(samples: &[f64], alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let k = tail_size(samples.len(), alpha);
    let s = sorted(samples);
    let (mean, sd) = mean_sd(&s[..k]);
    Ok((mean, sd / math::sqrt(k as f64)))
}

/// Sample mean and standard error of the mean.
pub fn mean_with_se(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let (mean, sd) = mean_sd(samples);
    Ok((mean, sd / math::sqrt(samples.len() as f64)))
}

/// Mean and (n - 1)-normalised standard deviation; zero spread for one sample.
fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, math::sqrt(var))
}

/// Exact CVaR of a discrete distribution.
pub fn exact_cvar(dist: &DiscreteDistribution, alpha: f64) -> Result<f64> {
    let values = dist.values();
    Ok(min_over_envelope(dist, alpha, &values)?.0)
}

/// `min_{ξ ∈ B(α, P)} Σ ξ P values` and a minimiser.
///
/// The envelope is filled greedily: outcomes are visited from the lowest
/// value up (ties by index) and each receives `ξ = 1/α` until the mass `α`
/// is spent, with a fractional weight on the boundary outcome.
pub fn min_over_envelope(dist: &DiscreteDistribution, alpha: f64, values: &[f64]) -> Result<(f64, EnvelopeWeights)> {
    check_alpha(alpha)?;
    if values.len() != dist.outcomes.len() {
        return Err(Error::InvalidArgument("one value per outcome is required".to_string()));
    }
    let probs = dist.probs();
    let (value, xi) = greedy_envelope(&probs, alpha, values);
    Ok((value, EnvelopeWeights { xi }))
}

/// Slice-level greedy envelope minimisation; inputs are assumed valid.
pub(crate) fn greedy_envelope(probs: &[f64], alpha: f64, values: &[f64]) -> (f64, Vec<f64>) {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(Ordering::Equal).then(i.cmp(&j)));
    let mut xi = alloc::vec![0.0; probs.len()];
    let mut remaining = alpha;
    let mut acc = 0.0;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let p = probs[i];
        if p <= 0.0 {
            continue;
        }
        let w = p.min(remaining);
        xi[i] = w / (alpha * p);
        acc += w * values[i];
        remaining -= w;
    }
    (acc / alpha, xi)
}
