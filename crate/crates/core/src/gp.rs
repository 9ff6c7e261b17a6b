//! Exact Gaussian-process regression and lower-confidence-bound proposals.
//!
//! The kernel is the squared exponential `exp(-||x - x'||² / (2 l²))` with
//! unit signal variance, the prior mean is zero and the observation noise
//! variance is fixed. Models are tiny (one per adversary node), so the
//! posterior is refitted with a full Cholesky factorisation on every update.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::game::{is_admissible, random_perturbation};
use crate::math;

/// Observation noise variance.
pub const NOISE_VAR: f64 = 1.0;

pub fn kernel(x: &[f64], x2: &[f64], lengthscale: f64) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::InvalidArgument("kernel inputs differ in dimension".into()));
    }
    if !(lengthscale > 0.0) {
        return Err(Error::InvalidArgument("lengthscale must be positive".into()));
    }
    Ok(kernel_unchecked(x, x2, lengthscale))
}

#[inline]
fn kernel_unchecked(x: &[f64], x2: &[f64], lengthscale: f64) -> f64 {
    let d2: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    math::exp(-d2 / (2.0 * lengthscale * lengthscale))
}

#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    labels: Vec<f64>,
    lengthscale: f64,
    noise_var: f64,
    chol: Option<Cholesky<f64, Dyn>>,
    weights: DVector<f64>,
}

impl GpModel {
    pub fn new(lengthscale: f64) -> Self {
        Self::with_noise(lengthscale, NOISE_VAR)
    }

    pub fn with_noise(lengthscale: f64, noise_var: f64) -> Self {
        Self {
            inputs: Vec::new(),
            labels: Vec::new(),
            lengthscale,
            noise_var,
            chol: None,
            weights: DVector::zeros(0),
        }
    }

    /// Fits a model to the given data in one go.
    pub fn fit(inputs: Vec<Vec<f64>>, labels: Vec<f64>, lengthscale: f64) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidArgument("inputs and labels differ in length".into()));
        }
        let mut m = Self::new(lengthscale);
        m.inputs = inputs;
        m.labels = labels;
        m.refit()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn observe(&mut self, x: Vec<f64>, label: f64) -> Result<()> {
        if let Some(first) = self.inputs.first() {
            if first.len() != x.len() {
                return Err(Error::InvalidArgument("input dimension changed".into()));
            }
        }
        self.inputs.push(x);
        self.labels.push(label);
        self.refit()
    }

    fn refit(&mut self) -> Result<()> {
        let n = self.inputs.len();
        if n == 0 {
            self.chol = None;
            self.weights = DVector::zeros(0);
            return Ok(());
        }
        let l = self.lengthscale;
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel_unchecked(&self.inputs[i], &self.inputs[j], l) + if i == j { self.noise_var } else { 0.0 }
        });
        let chol = Cholesky::new(k).ok_or(Error::Factorization)?;
        self.weights = chol.solve(&DVector::from_column_slice(&self.labels));
        self.chol = Some(chol);
        Ok(())
    }

    /// Posterior mean and standard deviation of the latent function at `x`.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64)> {
        let Some(chol) = &self.chol else { return Ok((0.0, 1.0)) };
        if x.len() != self.inputs[0].len() {
            return Err(Error::InvalidArgument("query dimension differs from the data".into()));
        }
        let kx = DVector::from_iterator(self.len(), self.inputs.iter().map(|xi| kernel_unchecked(xi, x, self.lengthscale)));
        let mu = kx.dot(&self.weights);
        let v = chol.l().solve_lower_triangular(&kx).ok_or(Error::Factorization)?;
        let var = (1.0 - v.dot(&v)).max(0.0);
        Ok((mu, math::sqrt(var)))
    }

    /// Input with the smallest label.
    pub fn incumbent(&self) -> Option<&[f64]> {
        self.labels
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| self.inputs[i].as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcquisitionConfig {
    pub c_bo: f64,
    pub num_candidates: usize,
    /// Jittered copies of the incumbent added to the candidate set.
    pub num_jitter: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { c_bo: 2.0, num_candidates: 64, num_jitter: 16 }
    }
}

/// A feasible set that proposals are drawn from.
pub trait PerturbationSpace {
    /// A random feasible point.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>;
    /// A feasible point near `x` at roughly the given scale, if one is found.
    fn jitter<R: Rng + ?Sized>(&self, x: &[f64], scale: f64, rng: &mut R) -> Option<Vec<f64>>;
    fn contains(&self, x: &[f64]) -> bool;
}

/// The admissible perturbations of a successor distribution at budget `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSpace {
    pub probs: Vec<f64>,
    pub y: f64,
}

impl PerturbationSpace for EnvelopeSpace {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        random_perturbation(&self.probs, self.y, rng).xi
    }

    /// Gaussian noise in the perturbed-distribution coordinates `q = ξ T⁺`,
    /// projected onto `Σ q = 1`; infeasible draws are retried a few times.
    fn jitter<R: Rng + ?Sized>(&self, x: &[f64], scale: f64, rng: &mut R) -> Option<Vec<f64>> {
        let n = self.probs.len();
        let mut noise = vec![0.0; n];
        for _ in 0..8 {
            for e in noise.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *e = scale * z;
            }
            let mean = noise.iter().sum::<f64>() / n as f64;
            let xi: Vec<f64> = (0..n)
                .map(|i| {
                    let p = self.probs[i];
                    if p > 0.0 {
                        (x[i] * p + noise[i] - mean) / p
                    } else {
                        x[i]
                    }
                })
                .collect();
            if self.contains(&xi) {
                return Some(xi);
            }
        }
        None
    }

    fn contains(&self, x: &[f64]) -> bool {
        is_admissible(x, &self.probs, self.y)
    }
}

/// The candidate minimising `μ - c_bo σ` among `num_candidates` draws from
/// `space` and jittered copies of the incumbent.
pub fn propose<S: PerturbationSpace, R: Rng + ?Sized>(
    model: &GpModel,
    space: &S,
    cfg: &AcquisitionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut candidates: Vec<Vec<f64>> = (0..cfg.num_candidates.max(1)).map(|_| space.sample(rng)).collect();
    if let Some(best) = model.incumbent() {
        let best = best.to_vec();
        for k in 0..cfg.num_jitter {
            // geometric ladder of scales, coarse to fine
            let scale = 0.1 * math::powf(0.5, (k % 4) as f64);
            if let Some(c) = space.jitter(&best, scale, rng) {
                candidates.push(c);
            }
        }
    }
    let mut best: Option<(f64, usize)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let (mu, sigma) = model.posterior(c)?;
        let acq = mu - cfg.c_bo * sigma;
        if best.is_none_or(|(b, _)| acq < b) {
            best = Some((acq, i));
        }
    }
    let (_, i) = best.expect("at least one candidate");
    Ok(candidates.swap_remove(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel(&[0.3, 0.1], &[0.3, 0.1], 0.7).unwrap(), 1.0);
        let l = 0.5;
        let d = l * 2f64.sqrt();
        let k = kernel(&[0.0, 0.0], &[d, 0.0], l).unwrap();
        assert!((k - (-1f64).exp()).abs() < 1e-12);
        assert!(kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn kernel_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            assert_eq!(kernel(&a, &b, 0.3).unwrap(), kernel(&b, &a, 0.3).unwrap());
        }
    }

    #[test]
    fn empty_model_is_prior() {
        assert_eq!(GpModel::new(1.0).posterior(&[0.2, 0.8]).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn one_observation_halves_label() {
        let mut m = GpModel::new(0.4);
        m.observe(vec![1.0, 1.0], 6.0).unwrap();
        let (mu, sigma) = m.posterior(&[1.0, 1.0]).unwrap();
        assert!((mu - 3.0).abs() < 1e-12);
        assert!((sigma - 0.5f64.sqrt()).abs() < 1e-12);
    }

    /// Posterior against a Gauss-Jordan solve of the same linear system.
    #[test]
    fn posterior_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = 0.6;
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..2).map(|_| rng.random::<f64>()).collect()).collect();
        let ys: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m = GpModel::fit(xs.clone(), ys.clone(), l).unwrap();
        let k = |a: &[f64], b: &[f64]| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-d / (2.0 * l * l)).exp()
        };
        let solve = |rhs: &[f64]| -> Vec<f64> {
            let n = xs.len();
            let mut a: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut row: Vec<f64> = (0..n).map(|j| k(&xs[i], &xs[j]) + if i == j { 1.0 } else { 0.0 }).collect();
                    row.push(rhs[i]);
                    row
                })
                .collect();
            for c in 0..n {
                let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
                a.swap(c, p);
                for r in 0..n {
                    if r != c {
                        let f = a[r][c] / a[c][c];
                        for cc in c..=n {
                            a[r][cc] -= f * a[c][cc];
                        }
                    }
                }
            }
            (0..n).map(|i| a[i][n] / a[i][i]).collect()
        };
        for x in &xs {
            let kx: Vec<f64> = xs.iter().map(|xi| k(xi, x)).collect();
            let w = solve(&ys);
            let mu: f64 = kx.iter().zip(&w).map(|(a, b)| a * b).sum();
            let v = solve(&kx);
            let var = 1.0 - kx.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            let (gm, gs) = m.posterior(x).unwrap();
            assert!((gm - mu).abs() < 1e-10);
            assert!((gs - var.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma_shrinks_after_observation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = GpModel::new(0.3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let (_, before) = m.posterior(&x).unwrap();
            m.observe(x.clone(), rng.random_range(-1.0..1.0)).unwrap();
            let (_, after) = m.posterior(&x).unwrap();
            assert!(after <= before + 1e-12);
        }
    }

    #[test]
    fn empty_model_proposal_is_admissible_sample() {
        let space = EnvelopeSpace { probs: vec![0.5, 0.3, 0.2], y: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = propose(&GpModel::new(1.0), &space, &AcquisitionConfig::default(), &mut rng).unwrap();
        assert!(space.contains(&x));
    }

    #[test]
    fn pure_exploitation_goes_to_low_label() {
        let space = EnvelopeSpace { probs: vec![0.5, 0.5], y: 0.5 };
        let x0 = vec![1.8, 0.2];
        let mut m = GpModel::new(1.0 / (5.0 * 0.5));
        m.observe(x0.clone(), -50.0).unwrap();
        m.observe(vec![0.2, 1.8], 0.0).unwrap();
        let cfg = AcquisitionConfig { c_bo: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = propose(&m, &space, &cfg, &mut rng).unwrap();
        assert!((x[0] - x0[0]).abs() < 0.3, "{x:?}");
    }

    #[test]
    fn proposals_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let space = EnvelopeSpace { probs: vec![0.7, 0.2, 0.1], y: 0.1 };
        let mut m = GpModel::new(2.0);
        for _ in 0..30 {
            let x = propose(&m, &space, &AcquisitionConfig::default(), &mut rng).unwrap();
            assert!(space.contains(&x));
            let label = x[0] * 3.0 - x[2];
            m.observe(x, label).unwrap();
        }
    }
}
