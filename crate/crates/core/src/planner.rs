//! Risk-averse Bayes-adaptive Monte Carlo tree search.
//!
//! The tree alternates three layers per step: agent nodes choose actions by
//! UCB, adversary nodes choose perturbations by a lower confidence bound and
//! grow their action set by progressive widening, and chance nodes sample
//! the successor from the perturbed posterior predictive. New perturbations
//! are proposed by Gaussian-process LCB over the already expanded ones (or
//! at random). With `alpha = 1` every adversary node has the identity as its
//! only move and the search is plain BAMCP.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::belief::{BayesMdp, Belief};
use crate::error::{Error, Result};
use crate::game::{next_budget, perturbed_outcomes, random_perturbation, AugState, Perturbation, PerturbedOutcome, Successor, Turn};
use crate::gp::{propose, AcquisitionConfig, EnvelopeSpace, GpModel};
use crate::math;
use crate::mdp::{MdpSpec, TrajectoryRecord};
use crate::vi::{CvarPolicy, MIN_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ExpansionMode {
    #[default]
    BayesOpt,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SearchConfig {
    pub c_mcts: f64,
    pub c_bo: f64,
    pub tau: f64,
    pub sims_initial: u64,
    pub sims_step: u64,
    pub alpha: f64,
    pub expansion_mode: ExpansionMode,
    pub num_candidates: usize,
    /// Width of the return range; confidence bonuses are `c · scale · sqrt(ln N / n)`,
    /// so `c` applies to returns normalised to unit range.
    pub value_scale: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            c_mcts: 2.0,
            c_bo: 2.0,
            tau: 0.2,
            sims_initial: 100_000,
            sims_step: 25_000,
            alpha: 0.03,
            expansion_mode: ExpansionMode::BayesOpt,
            num_candidates: 64,
            value_scale: 1.0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau > 0.0
            && self.tau < 1.0
            && self.sims_initial >= 1
            && self.sims_step >= 1
            && self.alpha > 0.0
            && self.alpha <= 1.0
            && self.c_mcts >= 0.0
            && self.c_bo >= 0.0
            && self.num_candidates >= 1
            && self.value_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("search needs tau in (0,1), sims >= 1, alpha in (0,1], c >= 0".into()))
        }
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Agent,
    Adversary,
    Chance,
}

#[derive(Debug, Clone)]
enum NodeData {
    Agent {
        belief: Belief,
        untried: Vec<usize>,
        children: Vec<(usize, NodeId)>,
    },
    Adversary {
        action: usize,
        succ: Vec<Successor>,
        /// Only the identity is admissible (`y >= 1` or a single successor).
        forced: bool,
        children: Vec<NodeId>,
        gp_size: usize,
    },
    Chance {
        xi: Perturbation,
        outcomes: Vec<PerturbedOutcome>,
        children: Vec<Option<NodeId>>,
    },
}

#[derive(Debug, Clone)]
pub struct Node {
    pub n: u64,
    pub q: f64,
    pub y: f64,
    pub t: usize,
    pub state: usize,
    pub parent: Option<NodeId>,
    data: NodeData,
}

impl Node {
    pub fn kind(&self) -> NodeKind {
        match self.data {
            NodeData::Agent { .. } => NodeKind::Agent,
            NodeData::Adversary { .. } => NodeKind::Adversary,
            NodeData::Chance { .. } => NodeKind::Chance,
        }
    }

    /// Expanded children in creation order.
    pub fn children(&self) -> Vec<NodeId> {
        match &self.data {
            NodeData::Agent { children, .. } => children.iter().map(|c| c.1).collect(),
            NodeData::Adversary { children, .. } => children.clone(),
            NodeData::Chance { children, .. } => children.iter().flatten().copied().collect(),
        }
    }

    /// The perturbation of a chance node.
    pub fn perturbation(&self) -> Option<&Perturbation> {
        match &self.data {
            NodeData::Chance { xi, .. } => Some(xi),
            _ => None,
        }
    }

    /// Perturbed successor distribution of a chance node.
    pub fn outcomes(&self) -> Option<&[PerturbedOutcome]> {
        match &self.data {
            NodeData::Chance { outcomes, .. } => Some(outcomes),
            _ => None,
        }
    }

    /// Action of an adversary node.
    pub fn action(&self) -> Option<usize> {
        match &self.data {
            NodeData::Adversary { action, .. } => Some(*action),
            _ => None,
        }
    }

    /// Posterior-predictive successors of an adversary node.
    pub fn successors(&self) -> Option<&[Successor]> {
        match &self.data {
            NodeData::Adversary { succ, .. } => Some(succ),
            _ => None,
        }
    }
}

/// The nodes visited by one simulation and the return backed up into each.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub path: Vec<NodeId>,
    /// Return accumulated from the corresponding node onwards.
    pub returns: Vec<f64>,
}

/// Per-perturbation statistics of a root child.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbationStats {
    pub xi: Vec<f64>,
    pub visits: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChildStats {
    pub action: usize,
    pub visits: u64,
    pub value: f64,
    pub gp_size: usize,
    pub perturbations: Vec<PerturbationStats>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RootStats {
    pub visits: u64,
    pub value: f64,
    pub children: Vec<ChildStats>,
}

/// Outcome of a search: the action to play, the adversary's reply and the
/// successors it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub action: usize,
    pub xi: Perturbation,
    pub successors: Vec<Successor>,
    pub stats: RootStats,
}

impl SearchResult {
    /// `ξ*(s')`, zero for successors outside the support.
    pub fn xi_for(&self, next: usize) -> f64 {
        self.successors.iter().zip(&self.xi.xi).find(|(s, _)| s.next == next).map_or(0.0, |(_, &x)| x)
    }
}

/// Everything a search tree needs that does not change during the search.
#[derive(Clone)]
pub struct Planner {
    pub model: Arc<BayesMdp>,
    pub config: SearchConfig,
    /// Agent rollout policy keyed by `(t, s, y)`; uniform over legal actions if absent.
    pub rollout: Option<Arc<CvarPolicy<usize>>>,
}

/// A search tree rooted at an agent node.
pub struct Tree<'p> {
    planner: &'p Planner,
    nodes: Vec<Node>,
    warned: bool,
}

impl<'p> Tree<'p> {
    pub fn new<R: Rng + ?Sized>(planner: &'p Planner, root: &AugState, rng: &mut R) -> Result<Self> {
        if root.turn != Turn::Agent {
            return Err(Error::InvalidArgument("the search root must be an agent node".into()));
        }
        if root.is_terminal() {
            return Err(Error::TerminalState(root.state));
        }
        let mut tree = Tree { planner, nodes: Vec::new(), warned: false };
        tree.new_agent(root.state, root.belief.clone(), root.y, root.t, None, rng);
        Ok(tree)
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn new_agent<R: Rng + ?Sized>(&mut self, state: usize, belief: Belief, y: f64, t: usize, parent: Option<NodeId>, rng: &mut R) -> NodeId {
        let m = belief.model();
        let mut untried = if t >= m.horizon || m.terminal[state] { Vec::new() } else { m.legal_actions[state].clone() };
        untried.shuffle(rng);
        self.nodes.push(Node { n: 0, q: 0.0, y, t, state, parent, data: NodeData::Agent { belief, untried, children: Vec::new() } });
        self.nodes.len() - 1
    }

    fn is_terminal_agent(&self, v: NodeId) -> bool {
        let node = &self.nodes[v];
        let m = &self.planner.model;
        node.t >= m.horizon || m.terminal[node.state]
    }

    fn belief_of(&self, mut v: NodeId) -> &Belief {
        loop {
            match &self.nodes[v].data {
                NodeData::Agent { belief, .. } => return belief,
                _ => v = self.nodes[v].parent.expect("non-agent nodes have a parent"),
            }
        }
    }

    fn expand_agent(&mut self, v: NodeId, action: usize) -> NodeId {
        let node = &self.nodes[v];
        let (state, y, t) = (node.state, node.y, node.t);
        let succ: Vec<Successor> = self
            .belief_of(v)
            .predictive_row(state, action)
            .into_iter()
            .map(|(next, prob, reward)| Successor { next, prob, reward })
            .collect();
        let forced = y >= 1.0 || succ.len() <= 1;
        self.nodes.push(Node {
            n: 0,
            q: 0.0,
            y,
            t,
            state,
            parent: Some(v),
            data: NodeData::Adversary { action, succ, forced, children: Vec::new(), gp_size: 0 },
        });
        let id = self.nodes.len() - 1;
        if let NodeData::Agent { children, .. } = &mut self.nodes[v].data {
            children.push((action, id));
        }
        id
    }

    /// Whether the adversary node `v` may add a perturbation now.
    pub fn can_widen(&self, v: NodeId) -> bool {
        match &self.nodes[v].data {
            NodeData::Adversary { forced: true, children, .. } => children.is_empty(),
            NodeData::Adversary { children, .. } => {
                math::powf(self.nodes[v].n as f64, self.planner.config.tau) >= children.len() as f64
            }
            _ => false,
        }
    }

    /// Adds a perturbation to adversary node `v` and returns the new chance node.
    pub fn expand_adversary<R: Rng + ?Sized>(&mut self, v: NodeId, rng: &mut R) -> Result<NodeId> {
        if !self.can_widen(v) {
            return Err(Error::WideningNotAllowed);
        }
        let cfg = &self.planner.config;
        let y = self.nodes[v].y;
        let NodeData::Adversary { succ, forced, children, .. } = &self.nodes[v].data else {
            return Err(Error::InvalidArgument("not an adversary node".into()));
        };
        let probs: Vec<f64> = succ.iter().map(|s| s.prob).collect();
        let mut gp_len = 0;
        let xi = if *forced {
            Perturbation::identity(probs.len())
        } else if children.is_empty() || cfg.expansion_mode == ExpansionMode::Random {
            random_perturbation(&probs, y, rng)
        } else {
            let inputs: Vec<Vec<f64>> = children.iter().map(|&c| self.nodes[c].perturbation().unwrap().xi.clone()).collect();
            let labels: Vec<f64> = children.iter().map(|&c| self.nodes[c].q).collect();
            gp_len = inputs.len();
            let gp = GpModel::fit(inputs, labels, 1.0 / (5.0 * y))?;
            let space = EnvelopeSpace { probs: probs.clone(), y };
            let acq = AcquisitionConfig { c_bo: cfg.c_bo, num_candidates: cfg.num_candidates, ..Default::default() };
            Perturbation { xi: propose(&gp, &space, &acq, rng)? }
        };
        let outcomes = perturbed_outcomes(succ, &xi.xi, y);
        let k = outcomes.len();
        let (state, t) = (self.nodes[v].state, self.nodes[v].t);
        self.nodes.push(Node {
            n: 0,
            q: 0.0,
            y,
            t,
            state,
            parent: Some(v),
            data: NodeData::Chance { xi, outcomes, children: vec![None; k] },
        });
        let id = self.nodes.len() - 1;
        if let NodeData::Adversary { children, gp_size, .. } = &mut self.nodes[v].data {
            children.push(id);
            *gp_size = gp_len;
        }
        Ok(id)
    }

    /// UCB child for agent nodes, LCB child for adversary nodes; ties are
    /// broken uniformly at random.
    pub fn best_child<R: Rng + ?Sized>(&self, v: NodeId, c: f64, rng: &mut R) -> Result<NodeId> {
        let node = &self.nodes[v];
        let (children, sign) = match node.kind() {
            NodeKind::Agent => (node.children(), 1.0),
            NodeKind::Adversary => (node.children(), -1.0),
            NodeKind::Chance => return Err(Error::InvalidArgument("chance nodes are sampled, not selected".into())),
        };
        if children.is_empty() {
            return Err(Error::Unexpanded);
        }
        let ln_n = math::ln(node.n.max(1) as f64);
        let score = |id: NodeId| {
            let ch = &self.nodes[id];
            let bonus = if ch.n == 0 { f64::INFINITY } else { c * math::sqrt(ln_n / ch.n as f64) };
            sign * ch.q + bonus
        };
        Ok(argmax_random_ties(&children, score, rng))
    }

    fn sample_outcome<R: Rng + ?Sized>(&self, v: NodeId, rng: &mut R) -> usize {
        let outcomes = self.nodes[v].outcomes().expect("chance node");
        math::sample_index(outcomes.iter().map(|o| o.prob), rng)
    }

    fn chance_child<R: Rng + ?Sized>(&mut self, v: NodeId, k: usize, rng: &mut R) -> (NodeId, f64) {
        let NodeData::Chance { outcomes, children, .. } = &self.nodes[v].data else { unreachable!() };
        let o = outcomes[k].clone();
        if let Some(id) = children[k] {
            return (id, o.reward);
        }
        let adv = self.nodes[v].parent.expect("chance nodes have a parent");
        let action = self.nodes[adv].action().expect("adversary parent");
        let state = self.nodes[v].state;
        let belief = self.belief_of(adv).update(state, action, o.next).expect("successor from the predictive row");
        let t = self.nodes[v].t + 1;
        let id = self.new_agent(o.next, belief, o.y, t, Some(v), rng);
        if let NodeData::Chance { children, .. } = &mut self.nodes[v].data {
            children[k] = Some(id);
        }
        (id, o.reward)
    }

    /// Descends to a newly expanded node (or a terminal agent node).
    fn tree_policy<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(Vec<NodeId>, Vec<f64>)> {
        let c = self.planner.config.c_mcts * self.planner.config.value_scale;
        let mut path = vec![0];
        let mut rewards = vec![0.0];
        let mut v = 0;
        loop {
            match self.nodes[v].kind() {
                NodeKind::Agent => {
                    if self.is_terminal_agent(v) {
                        break;
                    }
                    let next_action = match &mut self.nodes[v].data {
                        NodeData::Agent { untried, .. } => untried.pop(),
                        _ => unreachable!(),
                    };
                    if let Some(a) = next_action {
                        let id = self.expand_agent(v, a);
                        path.push(id);
                        rewards.push(0.0);
                        break;
                    }
                    v = self.best_child(v, c, rng)?;
                    path.push(v);
                    rewards.push(0.0);
                }
                NodeKind::Adversary => {
                    if self.can_widen(v) {
                        let id = self.expand_adversary(v, rng)?;
                        path.push(id);
                        rewards.push(0.0);
                        break;
                    }
                    v = self.best_child(v, c, rng)?;
                    path.push(v);
                    rewards.push(0.0);
                }
                NodeKind::Chance => {
                    let k = self.sample_outcome(v, rng);
                    let (id, r) = self.chance_child(v, k, rng);
                    v = id;
                    path.push(v);
                    rewards.push(r);
                }
            }
        }
        Ok((path, rewards))
    }

    /// Rollout return from `leaf` to the horizon.
    fn default_policy<R: Rng + ?Sized>(&mut self, leaf: NodeId, rng: &mut R) -> f64 {
        let node = &self.nodes[leaf];
        let (mut s, mut y, mut t) = (node.state, node.y, node.t);
        enum Phase {
            Agent,
            Adversary(usize, Vec<Successor>),
            Chance(usize, Vec<PerturbedOutcome>),
        }
        let mut phase = match &node.data {
            NodeData::Agent { .. } => Phase::Agent,
            NodeData::Adversary { action, succ, .. } => Phase::Adversary(*action, succ.clone()),
            NodeData::Chance { outcomes, .. } => {
                let adv = node.parent.expect("chance parent");
                Phase::Chance(self.nodes[adv].action().unwrap(), outcomes.clone())
            }
        };
        let mut belief = self.belief_of(leaf).clone();
        let model = Arc::clone(&self.planner.model);
        let mut ret = 0.0;
        let mut buf = Vec::new();
        loop {
            phase = match phase {
                Phase::Agent => {
                    if t >= model.horizon || model.terminal[s] {
                        break;
                    }
                    let a = match self.planner.rollout.as_ref().and_then(|p| p.action(t, &s, y)) {
                        Some(a) => a,
                        None => {
                            if !self.warned {
                                if self.planner.rollout.is_some() {
                                    log::warn!("rollout policy has no entry for stage {t}, state {s}; acting uniformly");
                                }
                                self.warned = true;
                            }
                            let legal = &model.legal_actions[s];
                            legal[rng.random_range(0..legal.len())]
                        }
                    };
                    buf.clear();
                    belief.predictive_row_into(s, a, &mut buf);
                    let succ = buf.iter().map(|&(next, prob, reward)| Successor { next, prob, reward }).collect();
                    Phase::Adversary(a, succ)
                }
                Phase::Adversary(a, succ) => {
                    let probs: Vec<f64> = succ.iter().map(|x| x.prob).collect();
                    let xi = random_perturbation(&probs, y, rng);
                    Phase::Chance(a, perturbed_outcomes(&succ, &xi.xi, y))
                }
                Phase::Chance(a, outcomes) => {
                    let o = &outcomes[math::sample_index(outcomes.iter().map(|o| o.prob), rng)];
                    ret += o.reward;
                    belief.observe(s, a, o.next).expect("successor from the predictive row");
                    s = o.next;
                    y = o.y;
                    t += 1;
                    Phase::Agent
                }
            };
        }
        ret
    }

    /// One simulation: tree policy, rollout and backup.
    pub fn simulate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<SimulationTrace> {
        let (path, rewards) = self.tree_policy(rng)?;
        let leaf = *path.last().unwrap();
        let leaf_value =
            if self.nodes[leaf].kind() == NodeKind::Agent && self.is_terminal_agent(leaf) { 0.0 } else { self.default_policy(leaf, rng) };
        let mut returns = vec![0.0; path.len()];
        let mut g = leaf_value;
        for i in (0..path.len()).rev() {
            let node = &mut self.nodes[path[i]];
            node.n += 1;
            node.q += (g - node.q) / node.n as f64;
            returns[i] = g;
            g += rewards[i];
        }
        Ok(SimulationTrace { path, returns })
    }

    /// Action with the highest value and the lowest-valued perturbation below it.
    pub fn recommendation(&self) -> Result<SearchResult> {
        let root = &self.nodes[0];
        let kids = root.children();
        let best = *kids
            .iter()
            .reduce(|a, b| if self.nodes[*b].q > self.nodes[*a].q { b } else { a })
            .ok_or(Error::Unexpanded)?;
        let adv = &self.nodes[best];
        let succ = adv.successors().unwrap().to_vec();
        let xi = adv
            .children()
            .iter()
            .copied()
            .reduce(|a, b| if self.nodes[b].q < self.nodes[a].q { b } else { a })
            .and_then(|c| self.nodes[c].perturbation().cloned())
            .unwrap_or_else(|| Perturbation::identity(succ.len()));
        Ok(SearchResult { action: adv.action().unwrap(), xi, successors: succ, stats: self.root_stats() })
    }

    pub fn root_stats(&self) -> RootStats {
        let root = &self.nodes[0];
        let children = root
            .children()
            .into_iter()
            .map(|id| {
                let adv = &self.nodes[id];
                let gp_size = match &adv.data {
                    NodeData::Adversary { gp_size, .. } => *gp_size,
                    _ => 0,
                };
                ChildStats {
                    action: adv.action().unwrap(),
                    visits: adv.n,
                    value: adv.q,
                    gp_size,
                    perturbations: adv
                        .children()
                        .into_iter()
                        .map(|c| {
                            let ch = &self.nodes[c];
                            PerturbationStats { xi: ch.perturbation().unwrap().xi.clone(), visits: ch.n, value: ch.q }
                        })
                        .collect(),
                }
            })
            .collect();
        RootStats { visits: root.n, value: root.q, children }
    }
}

/// Index maximising `score` with ties broken uniformly at random; the RNG is
/// only used when there is a tie.
fn argmax_random_ties<R: Rng + ?Sized>(items: &[NodeId], score: impl Fn(NodeId) -> f64, rng: &mut R) -> NodeId {
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<NodeId> = Vec::new();
    for &id in items {
        let s = score(id);
        if s > best {
            best = s;
            ties.clear();
            ties.push(id);
        } else if s == best {
            ties.push(id);
        }
    }
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Hooks around each online planning step (timing, diagnostics).
pub trait StepObserver {
    fn before_search(&mut self, _t: usize) {}
    fn after_search(&mut self, _t: usize, _root: &AugState, _result: &SearchResult) {}
}

impl StepObserver for () {}

impl Planner {
    pub fn new(model: Arc<BayesMdp>, config: SearchConfig, rollout: Option<Arc<CvarPolicy<usize>>>) -> Result<Self> {
        config.validate()?;
        Ok(Self { model, config, rollout })
    }

    /// Runs `sims` simulations from `root` and returns the recommendation.
    pub fn search<R: Rng + ?Sized>(&self, root: &AugState, sims: u64, rng: &mut R) -> Result<SearchResult> {
        let mut tree = Tree::new(self, root, rng)?;
        for _ in 0..sims {
            tree.simulate(rng)?;
        }
        tree.recommendation()
    }

    /// Plays one episode against `env`, replanning from scratch every step.
    /// Environment transitions draw from `env_rng`, the search from `rng`.
    pub fn act_online<E: Rng + ?Sized, R: Rng + ?Sized>(&self, env: &MdpSpec, env_rng: &mut E, rng: &mut R) -> Result<TrajectoryRecord> {
        self.act_online_observed(env, env_rng, rng, &mut ())
    }

    pub fn act_online_observed<E: Rng + ?Sized, R: Rng + ?Sized>(
        &self,
        env: &MdpSpec,
        env_rng: &mut E,
        rng: &mut R,
        observer: &mut dyn StepObserver,
    ) -> Result<TrajectoryRecord> {
        let mut aug = AugState::root(self.model.root_belief(), self.config.alpha);
        let mut traj = TrajectoryRecord::default();
        while !aug.is_terminal() {
            let sims = if aug.t == 0 { self.config.sims_initial } else { self.config.sims_step };
            observer.before_search(aug.t);
            let res = self.search(&aug, sims, rng)?;
            observer.after_search(aug.t, &aug, &res);
            let (next, r) = env.step(aug.state, res.action, env_rng)?;
            traj.push(aug.state, res.action, next, r);
            aug.belief.observe(aug.state, res.action, next)?;
            aug.y = next_budget(aug.y, res.xi_for(next)).max(MIN_BUDGET);
            aug.state = next;
            aug.t += 1;
        }
        Ok(traj)
    }
}
