//! The Bayes-adaptive CVaR stochastic game.
//!
//! The agent picks an action, then an adversary perturbs the posterior
//! predictive successor distribution by a density `ξ` with
//! `0 <= ξ(s') <= 1/y` and `Σ ξ(s') T⁺(s') = 1`, and finally nature samples the
//! successor from the perturbed distribution. The budget `y` is multiplied
//! by the `ξ` of the realised successor, so the product of all perturbations
//! along a path never exceeds `1/α`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::math;

/// Tolerance of the admissibility checks.
pub const ADMISSIBLE_TOL: f64 = 1e-9;
/// Perturbed successor probabilities below this are dropped.
pub const MIN_BRANCH_PROB: f64 = 1e-12;
/// Rejection attempts before [`random_perturbation`] falls back to `ξ ≡ 1`.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Turn {
    Agent,
    Adversary,
    Chance,
}

/// One supported successor under the posterior predictive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Successor {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// A state of the game: environment state, belief, budget and whose turn it is.
#[derive(Debug, Clone, PartialEq)]
pub struct AugState {
    pub state: usize,
    pub belief: Belief,
    pub y: f64,
    pub turn: Turn,
    pub pending_action: Option<usize>,
    /// Steps taken so far.
    pub t: usize,
}

/// The adversary's move: one weight per supported successor, in the order
/// returned by [`AugState::successors`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Perturbation {
    pub xi: Vec<f64>,
}

impl Perturbation {
    pub fn identity(n: usize) -> Self {
        Self { xi: vec![1.0; n] }
    }

    pub fn is_identity(&self) -> bool {
        self.xi.iter().all(|&x| x == 1.0)
    }
}

/// A successor of a perturbed transition.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedOutcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
    pub y: f64,
}

impl AugState {
    /// The game's initial state `(s0, h0, α)`.
    pub fn root(belief: Belief, alpha: f64) -> Self {
        let state = belief.model().initial_state;
        Self { state, belief, y: alpha, turn: Turn::Agent, pending_action: None, t: 0 }
    }

    pub fn is_terminal(&self) -> bool {
        let m = self.belief.model();
        self.t >= m.horizon || m.terminal[self.state]
    }

    /// Supported successors of `(s, a)` under the posterior predictive.
    pub fn successors(&self, action: usize) -> Result<Vec<Successor>> {
        if !self.belief.model().is_legal(self.state, action) {
            return Err(Error::IllegalAction { state: self.state, action });
        }
        Ok(self
            .belief
            .predictive_row(self.state, action)
            .into_iter()
            .map(|(next, prob, reward)| Successor { next, prob, reward })
            .collect())
    }

    /// The adversary-turn state after the agent commits to `action`.
    pub fn after_action(&self, action: usize) -> Result<AugState> {
        if self.turn != Turn::Agent {
            return Err(Error::InvalidArgument("only the agent can choose an action".into()));
        }
        if !self.belief.model().is_legal(self.state, action) {
            return Err(Error::IllegalAction { state: self.state, action });
        }
        Ok(AugState { turn: Turn::Adversary, pending_action: Some(action), ..self.clone() })
    }

    /// Whether `xi` is admissible for `action` at this state's budget.
    pub fn is_admissible(&self, xi: &Perturbation, action: usize) -> bool {
        match self.successors(action) {
            Ok(succ) => {
                let probs: Vec<f64> = succ.iter().map(|s| s.prob).collect();
                is_admissible(&xi.xi, &probs, self.y)
            }
            Err(_) => false,
        }
    }

    /// The distribution over next agent-turn states under `xi`.
    pub fn perturbed_transition(&self, action: usize, xi: &Perturbation) -> Result<Vec<(AugState, f64)>> {
        let succ = self.successors(action)?;
        let probs: Vec<f64> = succ.iter().map(|s| s.prob).collect();
        if !is_admissible(&xi.xi, &probs, self.y) {
            return Err(Error::Inadmissible);
        }
        perturbed_outcomes(&succ, &xi.xi, self.y)
            .into_iter()
            .map(|o| {
                let belief = self.belief.update(self.state, action, o.next)?;
                let next = AugState { state: o.next, belief, y: o.y, turn: Turn::Agent, pending_action: None, t: self.t + 1 };
                Ok((next, o.prob))
            })
            .collect()
    }
}

/// `0 <= ξ <= 1/y` and `Σ ξ T⁺ = 1`, within [`ADMISSIBLE_TOL`].
pub fn is_admissible(xi: &[f64], probs: &[f64], y: f64) -> bool {
    if xi.len() != probs.len() || !(y > 0.0) {
        return false;
    }
    let cap = 1.0 / y + ADMISSIBLE_TOL;
    let mass: f64 = xi.iter().zip(probs).map(|(x, p)| x * p).sum();
    xi.iter().all(|&x| x >= -ADMISSIBLE_TOL && x <= cap) && math::abs(mass - 1.0) <= ADMISSIBLE_TOL
}

/// Successors with probability `ξ T⁺` and budget `min(1, y ξ)`.
///
/// Branches whose perturbed probability is below [`MIN_BRANCH_PROB`] are
/// dropped and the rest renormalised.
pub fn perturbed_outcomes(succ: &[Successor], xi: &[f64], y: f64) -> Vec<PerturbedOutcome> {
    let mut out: Vec<PerturbedOutcome> = succ
        .iter()
        .zip(xi)
        .filter(|(s, &x)| x * s.prob >= MIN_BRANCH_PROB)
        .map(|(s, &x)| PerturbedOutcome { next: s.next, prob: x * s.prob, reward: s.reward, y: next_budget(y, x) })
        .collect();
    let total: f64 = out.iter().map(|o| o.prob).sum();
    out.iter_mut().for_each(|o| o.prob /= total);
    out
}

/// `min(1, y ξ)`.
#[inline]
pub fn next_budget(y: f64, xi: f64) -> f64 {
    (y * xi).min(1.0)
}

/// A random admissible perturbation.
///
/// Draws the perturbed distribution `q = ξ T⁺` uniformly from the simplex
/// restricted to `q <= T⁺/y` by rejection from a flat Dirichlet. When the
/// caps leave little room (`Σ T⁺/y < 2`) the complement `w = (T⁺/y - q) / S`,
/// `S = 1/y - 1`, is sampled instead: it is uniform on a capped simplex with
/// much looser caps, and the map between the two is affine, so the result is
/// equally uniform. Without room to perturb (`y >= 1` or a single successor)
/// the identity is returned and no randomness is consumed.
pub fn random_perturbation<R: Rng + ?Sized>(probs: &[f64], y: f64, rng: &mut R) -> Perturbation {
    let n = probs.len();
    if y >= 1.0 || n <= 1 {
        return Perturbation::identity(n);
    }
    let caps: Vec<f64> = probs.iter().map(|p| p / y).collect();
    let slack = 1.0 / y - 1.0;
    let complement = slack < 1.0;
    let bounds: Vec<f64> = if complement { caps.iter().map(|c| c / slack).collect() } else { caps.clone() };
    let mut w = vec![0.0; n];
    for _ in 0..MAX_REJECTIONS {
        let mut total = 0.0;
        for x in w.iter_mut() {
            *x = Exp1.sample(rng);
            total += *x;
        }
        w.iter_mut().for_each(|x| *x /= total);
        if w.iter().zip(&bounds).all(|(x, b)| x <= b) {
            let xi = (0..n)
                .map(|i| {
                    let q = if complement { caps[i] - slack * w[i] } else { w[i] };
                    if probs[i] > 0.0 {
                        (q / probs[i]).clamp(0.0, 1.0 / y)
                    } else {
                        1.0
                    }
                })
                .collect();
            return Perturbation { xi };
        }
    }
    Perturbation::identity(n)
}
