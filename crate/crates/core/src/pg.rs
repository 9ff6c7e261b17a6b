//! CVaR policy gradient over a particle belief.
//!
//! The belief is a fixed set of `M` models drawn from the prior with
//! posterior weights `z`. Action preferences are linear in `z`,
//! `F(a) = Σ_m z_m W[m][s, a]`, and the policy is the softmax of `F` over the
//! legal actions. The gradient is the likelihood-ratio estimator of the
//! lower-tail CVaR with the empirical VaR as baseline.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::belief::BayesMdp;
use crate::cvar::{empirical_cvar, empirical_var};
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{MdpSpec, TrajectoryRecord};
use crate::vi::CvarPolicy;

/// Posterior weights over a fixed set of sampled models.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleBelief {
    pub z: Vec<f64>,
}

impl ParticleBelief {
    pub fn uniform(m: usize) -> Self {
        Self { z: vec![1.0 / m as f64; m] }
    }

    /// Bayes update `z_m ∝ T_m(s, a, s') z_m`. Returns `false` when every
    /// particle ruled the transition out and the weights were reset to uniform.
    pub fn update(&mut self, particles: &[MdpSpec], s: usize, a: usize, next: usize) -> bool {
        let mut total = 0.0;
        for (z, p) in self.z.iter_mut().zip(particles) {
            *z *= p.prob(s, a, next);
            total += *z;
        }
        if total > 0.0 && total.is_finite() {
            for z in &mut self.z {
                *z /= total;
            }
            true
        } else {
            log::warn!("no particle supports ({s}, {a}, {next}); resetting to uniform weights");
            *self = Self::uniform(self.z.len());
            false
        }
    }
}

/// Weights `W[m][s * A + a]`, stored flat.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicyParams {
    pub num_particles: usize,
    pub num_states: usize,
    pub num_actions: usize,
    pub w: Vec<f64>,
}

impl PolicyParams {
    pub fn constant(num_particles: usize, num_states: usize, num_actions: usize, value: f64) -> Self {
        Self { num_particles, num_states, num_actions, w: vec![value; num_particles * num_states * num_actions] }
    }

    /// 2 where `policy` acts at budget `y`, 1 elsewhere, for every particle.
    /// A state is read at the first stage that has a decision for it.
    pub fn from_policy(num_particles: usize, mdp: &MdpSpec, policy: &CvarPolicy<usize>, y: f64) -> Self {
        let mut p = Self::constant(num_particles, mdp.num_states, mdp.num_actions, 1.0);
        for s in 0..mdp.num_states {
            if let Some(a) = (0..mdp.horizon).find_map(|t| policy.action(t, &s, y)) {
                for m in 0..num_particles {
                    let i = p.index(m, s, a);
                    p.w[i] = 2.0;
                }
            }
        }
        p
    }

    #[inline]
    pub fn index(&self, m: usize, s: usize, a: usize) -> usize {
        (m * self.num_states + s) * self.num_actions + a
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Softmax policy over `legal` in state `s`.
    pub fn action_probs(&self, z: &[f64], s: usize, legal: &[usize]) -> Vec<f64> {
        let f: Vec<f64> = legal
            .iter()
            .map(|&a| z.iter().enumerate().map(|(m, zm)| zm * self.w[self.index(m, s, a)]).sum())
            .collect();
        let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = f.iter().map(|v| math::exp(v - top)).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    }

    /// Appends `∇_W log π(a | s, z)` as sparse entries.
    fn push_score(&self, z: &[f64], s: usize, legal: &[usize], probs: &[f64], a: usize, out: &mut Vec<(u32, f64)>) {
        for (m, &zm) in z.iter().enumerate() {
            if zm == 0.0 {
                continue;
            }
            for (&b, &fb) in legal.iter().zip(probs) {
                let ind = if b == a { 1.0 } else { 0.0 };
                out.push((self.index(m, s, b) as u32, zm * (ind - fb)));
            }
        }
    }
}

/// A sampled episode with its return and sparse score `∇ log P(τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEpisode {
    pub trajectory: TrajectoryRecord,
    pub score: Vec<(u32, f64)>,
}

/// The particle set together with the policy weights.
#[derive(Debug, Clone)]
pub struct PgPolicy {
    pub particles: Vec<MdpSpec>,
    pub params: PolicyParams,
}

impl PgPolicy {
    /// Draws `m` particles from the prior of `model`.
    pub fn sample_particles<R: Rng + ?Sized>(model: &Arc<BayesMdp>, m: usize, rng: &mut R) -> Vec<MdpSpec> {
        let b = model.root_belief();
        (0..m).map(|_| b.sample_transition_fn(rng)).collect()
    }

    /// Runs one episode in `env`, recording the score when `score` is set.
    pub fn run<R: Rng + ?Sized>(&self, env: &MdpSpec, score: bool, rng: &mut R) -> Result<ScoredEpisode> {
        let mut belief = ParticleBelief::uniform(self.particles.len());
        let mut traj = TrajectoryRecord::default();
        let mut grad = Vec::new();
        let mut s = env.initial_state;
        for _ in 0..env.horizon {
            if env.is_terminal(s) {
                break;
            }
            let legal = &env.legal_actions[s];
            let probs = self.params.action_probs(&belief.z, s, legal);
            let a = legal[math::sample_index(probs.iter().copied(), rng)];
            if score {
                self.params.push_score(&belief.z, s, legal, &probs, a, &mut grad);
            }
            let (next, r) = env.step(s, a, rng)?;
            traj.push(s, a, next, r);
            belief.update(&self.particles, s, a, next);
            s = next;
        }
        Ok(ScoredEpisode { trajectory: traj, score: grad })
    }
}

/// `(1/(αN)) Σ_{R_i ≤ v̂} (R_i - v̂) ∇ log P(τ_i)` with `v̂` the empirical VaR.
pub fn cvar_gradient(episodes: &[ScoredEpisode], alpha: f64, num_params: usize) -> Result<Vec<f64>> {
    let need = math::ceil(1.0 / alpha) as usize;
    if episodes.len() < need {
        return Err(Error::MinibatchTooSmall { got: episodes.len(), need });
    }
    let returns: Vec<f64> = episodes.iter().map(|e| e.trajectory.total_return).collect();
    let var = empirical_var(&returns, alpha)?;
    let scale = 1.0 / (alpha * episodes.len() as f64);
    let mut g = vec![0.0; num_params];
    for (e, &r) in episodes.iter().zip(&returns) {
        if r <= var {
            let d = scale * (r - var);
            if d == 0.0 {
                continue;
            }
            for &(i, v) in &e.score {
                g[i as usize] += d * v;
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PgConfig {
    pub alpha: f64,
    pub num_particles: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub total_sims: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
}

impl Default for PgConfig {
    fn default() -> Self {
        Self {
            alpha: 0.03,
            num_particles: 25,
            minibatch: 1000,
            learning_rate: 0.001,
            total_sims: 2_000_000,
            eval_every: 20_000,
            eval_episodes: 2000,
        }
    }
}

impl PgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || self.num_particles == 0 || self.learning_rate <= 0.0 || self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("policy gradient needs alpha in (0,1], particles >= 1, step > 0".into()));
        }
        let need = math::ceil(1.0 / self.alpha) as usize;
        if self.minibatch < need {
            return Err(Error::MinibatchTooSmall { got: self.minibatch, need });
        }
        Ok(())
    }
}

/// Empirical CVaR of the policy after a given number of training episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub sims: u64,
    pub cvar: f64,
}

/// Mean-over-prior evaluation: each episode runs in a fresh model drawn from the prior.
pub fn evaluate_cvar<R: Rng + ?Sized>(policy: &PgPolicy, model: &Arc<BayesMdp>, alpha: f64, episodes: usize, rng: &mut R) -> Result<f64> {
    let prior = model.root_belief();
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let env = prior.sample_transition_fn(rng);
        returns.push(policy.run(&env, false, rng)?.trajectory.total_return);
    }
    empirical_cvar(&returns, alpha)
}

/// Gradient ascent on the CVaR; episodes are drawn in models sampled from the prior.
pub fn train<R: Rng + ?Sized>(policy: &mut PgPolicy, model: &Arc<BayesMdp>, cfg: &PgConfig, rng: &mut R) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let prior = model.root_belief();
    let mut curve = Vec::new();
    let mut sims = 0u64;
    let mut next_eval = 0u64;
    let mut batch = Vec::with_capacity(cfg.minibatch);
    while sims < cfg.total_sims {
        if sims >= next_eval {
            curve.push(CurvePoint { sims, cvar: evaluate_cvar(policy, model, cfg.alpha, cfg.eval_episodes, rng)? });
            next_eval += cfg.eval_every.max(1);
        }
        batch.clear();
        for _ in 0..cfg.minibatch {
            let env = prior.sample_transition_fn(rng);
            batch.push(policy.run(&env, true, rng)?);
        }
        sims += cfg.minibatch as u64;
        let g = cvar_gradient(&batch, cfg.alpha, policy.params.len())?;
        for (w, gi) in policy.params.w.iter_mut().zip(&g) {
            *w += cfg.learning_rate * gi;
        }
        if let Some(i) = policy.params.w.iter().position(|w| !w.is_finite()) {
            return Err(Error::Diverged { sims, detail: alloc::format!("weight {i} is not finite") });
        }
    }
    curve.push(CurvePoint { sims, cvar: evaluate_cvar(policy, model, cfg.alpha, cfg.eval_episodes, rng)? });
    Ok(curve)
}
