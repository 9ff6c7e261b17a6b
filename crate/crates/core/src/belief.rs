//! Posterior beliefs over an unknown transition function.
//!
//! A [`BayesMdp`] fixes the state/action structure and rewards of a domain and
//! says, for every `(s, a, s')`, whether the transition probability is known or
//! is outcome `k` of a latent categorical parameter group `g`. The latent
//! groups carry a prior: independent Beta/Dirichlet distributions per group,
//! or a finite set of candidate parameter vectors.
//!
//! Beliefs are stored as outcome counts per group. For both prior families
//! the counts are a sufficient statistic for the history, so two histories
//! with the same counts share a posterior.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{MdpSpec, Outcome, ROW_SUM_TOL};

/// Categorical probabilities for each latent group, `params[group][outcome]`.
pub type LatentParams = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
            Ok(Self { alpha, beta })
        } else {
            Err(Error::InvalidArgument("Beta parameters must be positive".to_string()))
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirichletParams {
    pub concentration: Vec<f64>,
}

impl DirichletParams {
    pub fn new(concentration: Vec<f64>) -> Result<Self> {
        if concentration.is_empty() || concentration.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument(
                "Dirichlet concentrations must be positive".to_string(),
            ));
        }
        Ok(Self { concentration })
    }

    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.concentration.iter().sum();
        self.concentration.iter().map(|c| c / total).collect()
    }
}

/// Conjugate prior of one latent group. A Beta group has outcomes
/// `0 = success` (weight `alpha`) and `1 = failure` (weight `beta`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GroupPrior {
    Beta(BetaParams),
    Dirichlet(DirichletParams),
}

impl GroupPrior {
    pub fn num_outcomes(&self) -> usize {
        match self {
            GroupPrior::Beta(_) => 2,
            GroupPrior::Dirichlet(d) => d.concentration.len(),
        }
    }

    pub fn concentration(&self, outcome: usize) -> f64 {
        match self {
            GroupPrior::Beta(b) => {
                if outcome == 0 {
                    b.alpha
                } else {
                    b.beta
                }
            }
            GroupPrior::Dirichlet(d) => d.concentration[outcome],
        }
    }

    /// The posterior after adding `counts` (one per outcome).
    pub fn posterior(&self, counts: &[u32]) -> GroupPrior {
        match self {
            GroupPrior::Beta(b) => GroupPrior::Beta(BetaParams {
                alpha: b.alpha + counts[0] as f64,
                beta: b.beta + counts[1] as f64,
            }),
            GroupPrior::Dirichlet(d) => GroupPrior::Dirichlet(DirichletParams {
                concentration: d
                    .concentration
                    .iter()
                    .zip(counts)
                    .map(|(c, &n)| c + n as f64)
                    .collect(),
            }),
        }
    }
}

/// A prior supported on finitely many latent parameter vectors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FiniteSupportPrior {
    pub weights: Vec<f64>,
    pub models: Vec<LatentParams>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Prior {
    Conjugate(Vec<GroupPrior>),
    FiniteSupport(FiniteSupportPrior),
}

impl Prior {
    fn group_sizes(&self) -> Vec<usize> {
        match self {
            Prior::Conjugate(groups) => groups.iter().map(GroupPrior::num_outcomes).collect(),
            Prior::FiniteSupport(f) => f.models.first().map_or(Vec::new(), |m| m.iter().map(Vec::len).collect()),
        }
    }
}

/// Where a transition probability comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProbSource {
    Known(f64),
    Latent { group: usize, outcome: usize },
}

/// One successor of a state-action pair in a [`BayesMdp`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Branch {
    pub next: usize,
    pub reward: f64,
    pub source: ProbSource,
}

/// Domain structure plus prior: everything needed to build the BAMDP.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub legal_actions: Vec<Vec<usize>>,
    pub rows: Vec<Vec<Branch>>,
    pub terminal: Vec<bool>,
    pub horizon: usize,
    pub initial_state: usize,
    pub prior: Prior,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

impl BayesMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        legal_actions: Vec<Vec<usize>>,
        rows: Vec<Vec<Branch>>,
        terminal: Vec<bool>,
        horizon: usize,
        initial_state: usize,
        prior: Prior,
    ) -> Result<Arc<Self>> {
        let sizes = prior.group_sizes();
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &n in &sizes {
            offsets.push(acc);
            acc += n;
        }
        let model = BayesMdp {
            num_states,
            num_actions,
            legal_actions,
            rows,
            terminal,
            horizon,
            initial_state,
            prior,
            offsets,
            sizes,
        };
        model.check()?;
        Ok(Arc::new(model))
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.legal_actions.len() != self.num_states
            || self.terminal.len() != self.num_states
            || self.rows.len() != self.num_states * self.num_actions
        {
            return bad("table shapes do not match the state/action counts");
        }
        if self.horizon == 0 || self.initial_state >= self.num_states {
            return bad("horizon must be positive and the initial state in range");
        }
        match &self.prior {
            Prior::Conjugate(_) => {}
            Prior::FiniteSupport(f) => {
                if f.weights.is_empty() || f.weights.len() != f.models.len() {
                    return bad("finite-support prior needs one weight per model");
                }
                if math::abs(f.weights.iter().sum::<f64>() - 1.0) > ROW_SUM_TOL || f.weights.iter().any(|&w| w < 0.0) {
                    return bad("finite-support prior weights must form a distribution");
                }
                for m in &f.models {
                    if m.len() != self.sizes.len() {
                        return bad("finite-support models must share the group layout");
                    }
                    for (g, p) in m.iter().enumerate() {
                        if p.len() != self.sizes[g] || math::abs(p.iter().sum::<f64>() - 1.0) > ROW_SUM_TOL {
                            return bad("finite-support model groups must be distributions");
                        }
                    }
                }
            }
        }
        for s in 0..self.num_states {
            for &a in &self.legal_actions[s] {
                if a >= self.num_actions {
                    return bad("legal action index out of range");
                }
                let row = self.row(s, a);
                if row.is_empty() {
                    return bad("legal state-action pair without successors");
                }
                if row.iter().any(|b| b.next >= self.num_states) {
                    return bad("successor index out of range");
                }
                for (i, b) in row.iter().enumerate() {
                    if row[..i].iter().any(|o| o.next == b.next) {
                        return bad("duplicate successor in a row");
                    }
                }
                match row[0].source {
                    ProbSource::Known(_) => {
                        let mut sum = 0.0;
                        for b in row {
                            match b.source {
                                ProbSource::Known(p) if (0.0..=1.0).contains(&p) => sum += p,
                                _ => return bad("rows must not mix known and latent probabilities"),
                            }
                        }
                        if math::abs(sum - 1.0) > ROW_SUM_TOL {
                            return bad("known transition probabilities must sum to one");
                        }
                    }
                    ProbSource::Latent { group, .. } => {
                        if group >= self.sizes.len() {
                            return bad("latent group index out of range");
                        }
                        let mut seen = vec![false; self.sizes[group]];
                        for b in row {
                            match b.source {
                                ProbSource::Latent { group: g, outcome } if g == group && outcome < seen.len() => {
                                    if seen[outcome] {
                                        return bad("latent outcome used twice in a row");
                                    }
                                    seen[outcome] = true;
                                }
                                _ => return bad("a row must draw all its outcomes from one latent group"),
                            }
                        }
                        if seen.iter().any(|&x| !x) {
                            return bad("a latent row must cover every outcome of its group");
                        }
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[Branch] {
        &self.rows[state * self.num_actions + action]
    }

    pub fn is_legal(&self, state: usize, action: usize) -> bool {
        self.legal_actions[state].contains(&action)
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn group_size(&self, group: usize) -> usize {
        self.sizes[group]
    }

    /// Total number of count slots in a [`Belief`].
    pub fn num_count_slots(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Belief before any observation.
    pub fn root_belief(self: &Arc<Self>) -> Belief {
        Belief { model: Arc::clone(self), counts: vec![0; self.num_count_slots()] }
    }

    /// Concrete MDP for fixed latent parameters.
    pub fn instantiate(&self, params: &LatentParams) -> MdpSpec {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|b| Outcome {
                        next: b.next,
                        reward: b.reward,
                        prob: match b.source {
                            ProbSource::Known(p) => p,
                            ProbSource::Latent { group, outcome } => params[group][outcome],
                        },
                    })
                    .collect()
            })
            .collect();
        MdpSpec {
            num_states: self.num_states,
            num_actions: self.num_actions,
            legal_actions: self.legal_actions.clone(),
            rows,
            terminal: self.terminal.clone(),
            horizon: self.horizon,
            initial_state: self.initial_state,
        }
    }
}

/// Posterior belief: prior plus outcome counts.
#[derive(Clone)]
pub struct Belief {
    model: Arc<BayesMdp>,
    counts: Vec<u32>,
}

impl PartialEq for Belief {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.model, &other.model) && self.counts == other.counts
    }
}

impl Eq for Belief {}

impl fmt::Debug for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Belief").field("counts", &self.counts).finish()
    }
}

impl Belief {
    /// Belief with the given outcome counts (one slot per group outcome).
    pub fn with_counts(model: &Arc<BayesMdp>, counts: Vec<u32>) -> Result<Belief> {
        if counts.len() != model.num_count_slots() {
            return Err(Error::InvalidArgument("count vector does not match the group layout".to_string()));
        }
        Ok(Belief { model: Arc::clone(model), counts })
    }

    pub fn model(&self) -> &Arc<BayesMdp> {
        &self.model
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Counts of one group, indexed by outcome.
    pub fn group_counts(&self, group: usize) -> &[u32] {
        let off = self.model.offsets[group];
        &self.counts[off..off + self.model.sizes[group]]
    }

    /// Belief after observing `(s, a, s')`; `self` is left unchanged.
    ///
    /// Transitions with a known probability carry no information and leave
    /// the counts as they are. Transitions that are not in the model are
    /// rejected.
    pub fn update(&self, state: usize, action: usize, next: usize) -> Result<Belief> {
        let mut b = self.clone();
        b.observe(state, action, next)?;
        Ok(b)
    }

    /// In-place version of [`Belief::update`].
    pub fn observe(&mut self, state: usize, action: usize, next: usize) -> Result<()> {
        let unmapped = Error::UnmappedTransition { state, action, next };
        if state >= self.model.num_states || action >= self.model.num_actions {
            return Err(unmapped);
        }
        let branch = self.model.row(state, action).iter().find(|b| b.next == next).ok_or(unmapped)?;
        if let ProbSource::Latent { group, outcome } = branch.source {
            let idx = self.model.offsets[group] + outcome;
            self.counts[idx] += 1;
        }
        Ok(())
    }

    /// Posterior-predictive probability of each outcome of `group`.
    pub fn group_predictive(&self, group: usize, out: &mut [f64]) {
        let counts = self.group_counts(group);
        match &self.model.prior {
            Prior::Conjugate(groups) => {
                let prior = &groups[group];
                let mut total = 0.0;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = prior.concentration(k) + counts[k] as f64;
                    total += *o;
                }
                for o in out.iter_mut() {
                    *o /= total;
                }
            }
            Prior::FiniteSupport(f) => {
                let w = self.model_weights_unchecked(f);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = f.models.iter().zip(&w).map(|(m, wp)| wp * m[group][k]).sum();
                }
            }
        }
    }

    /// Posterior weights of the candidate models of a finite-support prior.
    pub fn model_weights(&self) -> Option<Vec<f64>> {
        match &self.model.prior {
            Prior::FiniteSupport(f) => Some(self.model_weights_unchecked(f)),
            Prior::Conjugate(_) => None,
        }
    }

    fn model_weights_unchecked(&self, f: &FiniteSupportPrior) -> Vec<f64> {
        let logw: Vec<f64> = f
            .models
            .iter()
            .zip(&f.weights)
            .map(|(m, &w0)| {
                let mut lw = if w0 > 0.0 { math::ln(w0) } else { f64::NEG_INFINITY };
                for (g, probs) in m.iter().enumerate() {
                    for (k, &p) in probs.iter().enumerate() {
                        let n = self.group_counts(g)[k];
                        if n > 0 {
                            lw += if p > 0.0 { n as f64 * math::ln(p) } else { f64::NEG_INFINITY };
                        }
                    }
                }
                lw
            })
            .collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logw.iter().map(|&l| if max.is_finite() { math::exp(l - max) } else { 0.0 }).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter_mut().for_each(|x| *x /= total);
        }
        w
    }

    /// Bayes-adaptive transition probability `T+((s, h), a, (s', has'))`.
    pub fn predictive_prob(&self, state: usize, action: usize, next: usize) -> f64 {
        if !self.model.is_legal(state, action) {
            return 0.0;
        }
        let Some(b) = self.model.row(state, action).iter().find(|b| b.next == next) else {
            return 0.0;
        };
        match b.source {
            ProbSource::Known(p) => p,
            ProbSource::Latent { group, outcome } => {
                let mut buf = vec![0.0; self.model.sizes[group]];
                self.group_predictive(group, &mut buf);
                buf[outcome]
            }
        }
    }

    /// Supported successors of `(s, a)` as `(s', T+, R(s, a, s'))`, appended to `out`.
    pub fn predictive_row_into(&self, state: usize, action: usize, out: &mut Vec<(usize, f64, f64)>) {
        let row = self.model.row(state, action);
        match row.first().map(|b| b.source) {
            None => {}
            Some(ProbSource::Known(_)) => {
                for b in row {
                    if let ProbSource::Known(p) = b.source {
                        if p > 0.0 {
                            out.push((b.next, p, b.reward));
                        }
                    }
                }
            }
            Some(ProbSource::Latent { group, .. }) => {
                let mut buf = [0.0f64; 16];
                let mut heap;
                let probs: &mut [f64] = if self.model.sizes[group] <= buf.len() {
                    &mut buf[..self.model.sizes[group]]
                } else {
                    heap = vec![0.0; self.model.sizes[group]];
                    &mut heap
                };
                self.group_predictive(group, probs);
                for b in row {
                    if let ProbSource::Latent { outcome, .. } = b.source {
                        if probs[outcome] > 0.0 {
                            out.push((b.next, probs[outcome], b.reward));
                        }
                    }
                }
            }
        }
    }

    pub fn predictive_row(&self, state: usize, action: usize) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        self.predictive_row_into(state, action, &mut out);
        out
    }

    /// Posterior-mean latent parameters.
    pub fn posterior_mean(&self) -> LatentParams {
        (0..self.model.num_groups())
            .map(|g| {
                let mut p = vec![0.0; self.model.sizes[g]];
                self.group_predictive(g, &mut p);
                p
            })
            .collect()
    }

    /// Draws latent parameters from the posterior.
    pub fn sample_params<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentParams {
        match &self.model.prior {
            Prior::Conjugate(groups) => groups
                .iter()
                .enumerate()
                .map(|(g, prior)| sample_dirichlet(&prior.posterior(self.group_counts(g)), rng))
                .collect(),
            Prior::FiniteSupport(f) => {
                let w = self.model_weights_unchecked(f);
                let i = math::sample_index(w.iter().copied(), rng);
                f.models[i].clone()
            }
        }
    }

    /// A concrete MDP drawn from the posterior.
    pub fn sample_transition_fn<R: Rng + ?Sized>(&self, rng: &mut R) -> MdpSpec {
        self.model.instantiate(&self.sample_params(rng))
    }

    /// The MDP whose transition probabilities are the posterior means.
    pub fn expected_mdp(&self) -> MdpSpec {
        self.model.instantiate(&self.posterior_mean())
    }
}

/// Gamma-based Dirichlet draw; a Beta group is the two-outcome case.
fn sample_dirichlet<R: Rng + ?Sized>(posterior: &GroupPrior, rng: &mut R) -> Vec<f64> {
    let n = posterior.num_outcomes();
    for _ in 0..64 {
        let draws: Vec<f64> = (0..n)
            .map(|k| {
                Gamma::new(posterior.concentration(k), 1.0)
                    .map(|g| g.sample(rng))
                    .unwrap_or(0.0)
            })
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
    // Every gamma draw underflowed; fall back to the mean.
    let total: f64 = (0..n).map(|k| posterior.concentration(k)).sum();
    (0..n).map(|k| posterior.concentration(k) / total).collect()
}
