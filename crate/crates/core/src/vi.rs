//! CVaR value iteration on a budget-augmented state space.
//!
//! The budget `y` is discretised on a log-spaced grid. For each stage `t`,
//! state `s` and grid point `y`,
//!
//! ```text
//! V_t(s, y) = max_a min_ξ Σ_{s'} ξ(s') T(s, a, s') [R(s, a, s') + V_{t+1}(s', y ξ(s'))]
//! ```
//!
//! over `0 <= ξ <= 1/y`, `Σ ξ T = 1`. Writing `ζ = y ξ`, the objective is
//! `(1/y) Σ T g(ζ)` with `g(z) = z W(z)`; interpolating `g` linearly between
//! grid points turns the inner problem into a linear program over segment
//! variables, which is a fractional knapsack and is solved greedily.
//!
//! The solver works on any [`BackupModel`]: an explicit [`MdpSpec`] (used for
//! the expected MDP) or the reachable part of a count-based BAMDP.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::hash::Hash;

use hashbrown::HashMap;
use rand::Rng;

use crate::belief::{BayesMdp, Belief};
use crate::error::{Error, Result};
use crate::game::next_budget;
use crate::math;
use crate::mdp::{MdpSpec, TrajectoryRecord};

/// Budgets are never tracked below this value at execution time.
pub const MIN_BUDGET: f64 = 1e-9;

/// Sorted confidence levels in `(0, 1]`, always ending at 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct YGrid {
    points: Vec<f64>,
}

impl YGrid {
    /// `n` log-spaced points on `[alpha / 10, 1]`, with `alpha` inserted if
    /// it is not already a grid point.
    pub fn log_spaced(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || n < 2 {
            return Err(Error::InvalidArgument("grid needs alpha in (0, 1] and at least two points".into()));
        }
        let lo = math::ln(alpha / 10.0);
        let mut points: Vec<f64> = (0..n).map(|i| math::exp(lo * (1.0 - i as f64 / (n - 1) as f64))).collect();
        points[n - 1] = 1.0;
        if !points.iter().any(|&p| math::abs(p - alpha) <= 1e-12 * alpha) {
            let pos = points.partition_point(|&p| p < alpha);
            points.insert(pos, alpha);
        }
        Self::new(points)
    }

    pub fn new(points: Vec<f64>) -> Result<Self> {
        let ok = !points.is_empty()
            && points[0] > 0.0
            && *points.last().unwrap() == 1.0
            && points.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self { points })
        } else {
            Err(Error::InvalidArgument("grid must be strictly increasing in (0, 1] and end at 1".into()))
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid point closest to `y` in log distance.
    pub fn nearest(&self, y: f64) -> usize {
        let ly = math::ln(y.max(MIN_BUDGET));
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &p) in self.points.iter().enumerate() {
            let d = math::abs(math::ln(p) - ly);
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }

    /// Index of a point equal to `y` (relative tolerance 1e-12).
    pub fn index_of(&self, y: f64) -> Option<usize> {
        self.points.iter().position(|&p| math::abs(p - y) <= 1e-12 * p)
    }

    /// `V(y)` interpolated linearly in `y`, constant outside the grid.
    pub fn interpolate(&self, values: &[f64], y: f64) -> f64 {
        let p = &self.points;
        if y <= p[0] {
            return values[0];
        }
        if y >= 1.0 {
            return values[p.len() - 1];
        }
        let k = p.partition_point(|&x| x <= y);
        let w = (y - p[k - 1]) / (p[k] - p[k - 1]);
        values[k - 1] + w * (values[k] - values[k - 1])
    }

    /// `V(y)` from linear interpolation of `y V(y)`, with `V` constant below
    /// the grid.
    pub fn interpolate_scaled(&self, values: &[f64], y: f64) -> f64 {
        let p = &self.points;
        if y <= p[0] {
            return values[0];
        }
        if y >= 1.0 {
            return values[p.len() - 1];
        }
        let k = p.partition_point(|&x| x <= y);
        let (g0, g1) = (p[k - 1] * values[k - 1], p[k] * values[k]);
        let w = (y - p[k - 1]) / (p[k] - p[k - 1]);
        (g0 + w * (g1 - g0)) / y
    }
}

/// How continuation values are interpolated inside the inner minimisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Interpolation {
    /// Linear in `y V(y)`; the inner problem is an exact LP.
    #[default]
    Scaled,
    /// Linear in `V(y)`; minimised over grid-breakpoint combinations.
    Direct,
}

struct Segment {
    succ: usize,
    width: f64,
    slope: f64,
}

/// The inner minimisation for one `(s, a)`, reusable across budgets.
pub struct InnerProblem {
    probs: Vec<f64>,
    segments: Vec<Segment>,
}

impl InnerProblem {
    /// `cont[j][k]` is `R(s, a, s'_j) + V(s'_j, y_k)`.
    pub fn new(probs: &[f64], cont: &[&[f64]], grid: &YGrid) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.is_empty() || math::abs(total - 1.0) > 1e-9 || probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidDistribution("successor probabilities must sum to one".into()));
        }
        if cont.len() != probs.len() || cont.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidArgument("one grid of continuation values per successor".into()));
        }
        let mut segments = Vec::with_capacity(probs.len() * grid.len());
        for (j, (&p, w)) in probs.iter().zip(cont).enumerate() {
            if p <= 0.0 {
                continue;
            }
            let mut z0 = 0.0;
            let mut g0 = 0.0;
            for (&z1, &v) in grid.points().iter().zip(w.iter()) {
                let g1 = z1 * v;
                segments.push(Segment { succ: j, width: p * (z1 - z0), slope: (g1 - g0) / (z1 - z0) });
                z0 = z1;
                g0 = g1;
            }
        }
        segments.sort_by(|a, b| a.slope.total_cmp(&b.slope));
        Ok(Self { probs: probs.to_vec(), segments })
    }

    /// Minimum value and minimising `ξ` at budget `y`.
    ///
    /// Mass `y` is poured into the cheapest segments first; segments with
    /// equal slope are filled in proportion to their width, which returns
    /// `ξ ≡ 1` when every continuation is the same constant.
    pub fn solve(&self, y: f64) -> (f64, Vec<f64>) {
        let n = self.probs.len();
        let mut filled = vec![0.0; n];
        let mut remaining = y;
        let mut acc = 0.0;
        let mut i = 0;
        while i < self.segments.len() && remaining > 0.0 {
            let s0 = self.segments[i].slope;
            let tol = 1e-12 * (1.0 + math::abs(s0));
            let mut j = i;
            let mut cap = 0.0;
            while j < self.segments.len() && self.segments[j].slope - s0 <= tol {
                cap += self.segments[j].width;
                j += 1;
            }
            let frac = if cap <= remaining { 1.0 } else { remaining / cap };
            for seg in &self.segments[i..j] {
                let m = seg.width * frac;
                filled[seg.succ] += m;
                acc += m * seg.slope;
            }
            remaining -= cap * frac;
            i = j;
        }
        let xi = (0..n)
            .map(|j| if self.probs[j] > 0.0 { (filled[j] / (self.probs[j] * y)).min(1.0 / y) } else { 0.0 })
            .collect();
        (acc / y, xi)
    }
}

/// One-shot inner minimisation with the exact segment LP.
pub fn inner_min(probs: &[f64], cont: &[&[f64]], y: f64, grid: &YGrid) -> Result<(f64, Vec<f64>)> {
    Ok(InnerProblem::new(probs, cont, grid)?.solve(y))
}

/// Inner minimisation with `V` (not `y V`) interpolated linearly.
///
/// The objective is not convex in this form, so it is minimised over all
/// points where every successor but one sits on a grid breakpoint (or at
/// zero) and the remaining one absorbs the normalisation.
pub fn inner_min_direct(probs: &[f64], cont: &[&[f64]], y: f64, grid: &YGrid) -> Result<(f64, Vec<f64>)> {
    let n = probs.len();
    if cont.len() != n || n == 0 || n > 5 {
        return Err(Error::InvalidArgument("direct interpolation supports 1 to 5 successors".into()));
    }
    let mut knots = vec![0.0];
    knots.extend_from_slice(grid.points());
    let objective = |zeta: &[f64]| -> f64 {
        (0..n)
            .map(|j| if zeta[j] > 0.0 { probs[j] * zeta[j] * grid.interpolate(cont[j], zeta[j]) } else { 0.0 })
            .sum::<f64>()
            / y
    };
    let mut best = (f64::INFINITY, vec![1.0; n]);
    let mut zeta = vec![0.0; n];
    for free in 0..n {
        if probs[free] <= 0.0 {
            continue;
        }
        let others: Vec<usize> = (0..n).filter(|&j| j != free).collect();
        let combos = knots.len().pow(others.len() as u32);
        for code in 0..combos {
            let mut c = code;
            let mut used = 0.0;
            for &j in &others {
                zeta[j] = knots[c % knots.len()];
                c /= knots.len();
                used += probs[j] * zeta[j];
            }
            zeta[free] = (y - used) / probs[free];
            if !(-1e-12..=1.0 + 1e-12).contains(&zeta[free]) {
                continue;
            }
            zeta[free] = zeta[free].clamp(0.0, 1.0);
            let v = objective(&zeta);
            if v < best.0 - 1e-12 {
                best = (v, zeta.iter().map(|z| z / y).collect());
            }
        }
    }
    Ok(best)
}

/// A finite-horizon model that CVaR value iteration can back up.
pub trait BackupModel {
    type State: Clone + Eq + Hash;

    fn horizon(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    /// All states of stage `t`, if the model wants a full table rather than
    /// the states reachable from the initial state.
    fn full_layer(&self, _t: usize) -> Option<Vec<Self::State>> {
        None
    }
    fn is_terminal(&self, s: &Self::State) -> bool;
    fn actions(&self, s: &Self::State) -> Vec<usize>;
    /// Appends `(s', T(s, a, s'), R(s, a, s'))` for the supported successors.
    fn successors(&self, s: &Self::State, a: usize, out: &mut Vec<(Self::State, f64, f64)>) -> Result<()>;
}

/// An explicit MDP; every state gets a table entry at every stage.
pub struct MdpBackup<'a> {
    pub mdp: &'a MdpSpec,
}

impl BackupModel for MdpBackup<'_> {
    type State = usize;

    fn horizon(&self) -> usize {
        self.mdp.horizon
    }

    fn initial_state(&self) -> usize {
        self.mdp.initial_state
    }

    fn full_layer(&self, _t: usize) -> Option<Vec<usize>> {
        Some((0..self.mdp.num_states).collect())
    }

    fn is_terminal(&self, s: &usize) -> bool {
        self.mdp.is_terminal(*s)
    }

    fn actions(&self, s: &usize) -> Vec<usize> {
        self.mdp.legal_actions[*s].clone()
    }

    fn successors(&self, s: &usize, a: usize, out: &mut Vec<(usize, f64, f64)>) -> Result<()> {
        out.extend(self.mdp.row(*s, a).iter().filter(|o| o.prob > 0.0).map(|o| (o.next, o.prob, o.reward)));
        Ok(())
    }
}

/// A BAMDP state summarised by its outcome counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeliefState {
    pub state: usize,
    pub counts: Vec<u32>,
}

/// The reachable part of a BAMDP, with beliefs keyed by counts.
pub struct BamdpBackup {
    pub model: Arc<BayesMdp>,
}

impl BackupModel for BamdpBackup {
    type State = BeliefState;

    fn horizon(&self) -> usize {
        self.model.horizon
    }

    fn initial_state(&self) -> BeliefState {
        BeliefState { state: self.model.initial_state, counts: vec![0; self.model.num_count_slots()] }
    }

    fn is_terminal(&self, s: &BeliefState) -> bool {
        self.model.terminal[s.state]
    }

    fn actions(&self, s: &BeliefState) -> Vec<usize> {
        self.model.legal_actions[s.state].clone()
    }

    fn successors(&self, s: &BeliefState, a: usize, out: &mut Vec<(BeliefState, f64, f64)>) -> Result<()> {
        let belief = Belief::with_counts(&self.model, s.counts.clone())?;
        for (next, p, r) in belief.predictive_row(s.state, a) {
            let b2 = belief.update(s.state, a, next)?;
            out.push((BeliefState { state: next, counts: b2.counts().to_vec() }, p, r));
        }
        Ok(())
    }
}

/// The states of one stage with their values on the grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageValues<S: Eq + Hash> {
    pub states: Vec<S>,
    /// `values[i * grid.len() + k]`.
    pub values: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip, default = "HashMap::new"))]
    index: HashMap<S, usize>,
}

impl<S: Clone + Eq + Hash> StageValues<S> {
    fn new(states: Vec<S>, g: usize) -> Self {
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let values = vec![0.0; states.len() * g];
        Self { states, values, index }
    }

    pub fn index_of(&self, s: &S) -> Option<usize> {
        self.index.get(s).copied()
    }

    fn reindex(&mut self) {
        self.index = self.states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    }
}

/// `V_t(s, y)` on the grid, for `t = 0..=H`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValueTable<S: Eq + Hash> {
    pub grid: YGrid,
    pub stages: Vec<StageValues<S>>,
}

impl<S: Clone + Eq + Hash> ValueTable<S> {
    /// Values of `s` at stage `t` on the grid.
    pub fn row(&self, t: usize, s: &S) -> Option<&[f64]> {
        let st = self.stages.get(t)?;
        let i = st.index_of(s)?;
        let g = self.grid.len();
        Some(&st.values[i * g..(i + 1) * g])
    }

    /// `V_t(s, y)` with `y V` interpolated linearly.
    pub fn value(&self, t: usize, s: &S, y: f64) -> Option<f64> {
        self.row(t, s).map(|v| self.grid.interpolate_scaled(v, y))
    }

    /// Rebuilds the state lookup tables after deserialisation.
    pub fn reindex(&mut self) {
        self.stages.iter_mut().for_each(StageValues::reindex);
    }

    /// Whether every row is nondecreasing in `y` up to `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let g = self.grid.len();
        self.stages.iter().all(|st| st.values.chunks(g).all(|row| row.windows(2).all(|w| w[0] <= w[1] + tol)))
    }
}

/// Greedy action and minimising perturbation for one `(t, s, y_k)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Decision {
    pub action: usize,
    /// `(index of s' in stage t + 1, ξ(s'))` for every supported successor.
    pub xi: Vec<(u32, f64)>,
}

/// Values plus the greedy decisions of every non-terminal entry.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CvarPolicy<S: Eq + Hash> {
    pub alpha: f64,
    pub values: ValueTable<S>,
    /// `decisions[t][i * grid.len() + k]`, `None` at terminal states.
    pub decisions: Vec<Vec<Option<Decision>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveOptions {
    pub interpolation: Interpolation,
    /// Abort when the total number of table states exceeds this.
    pub max_states: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { interpolation: Interpolation::Scaled, max_states: 2_000_000 }
    }
}

/// Backward induction over the augmented state space.
pub fn solve<M: BackupModel>(model: &M, alpha: f64, grid: YGrid, opts: &SolveOptions) -> Result<CvarPolicy<M::State>> {
    if grid.index_of(alpha).is_none() {
        return Err(Error::InvalidArgument("alpha must be a grid point".into()));
    }
    let h = model.horizon();
    let g = grid.len();

    // Forward pass: stage layers and transitions.
    type Trans = Vec<(usize, Vec<(u32, f64, f64)>)>;
    let mut layers: Vec<StageValues<M::State>> = Vec::with_capacity(h + 1);
    let mut trans: Vec<Vec<Trans>> = Vec::with_capacity(h);
    let first = model.full_layer(0).unwrap_or_else(|| vec![model.initial_state()]);
    layers.push(StageValues::new(first, g));
    let mut total = layers[0].states.len();
    let mut buf = Vec::new();
    for t in 0..h {
        let mut next_states: Vec<M::State> = model.full_layer(t + 1).unwrap_or_default();
        let mut next_index: HashMap<M::State, usize> =
            next_states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let fixed = !next_states.is_empty();
        let mut stage_trans = Vec::with_capacity(layers[t].states.len());
        for s in &layers[t].states {
            let mut per_action = Vec::new();
            if !model.is_terminal(s) {
                for a in model.actions(s) {
                    buf.clear();
                    model.successors(s, a, &mut buf)?;
                    let mut row = Vec::with_capacity(buf.len());
                    for (s2, p, r) in buf.drain(..) {
                        let j = match next_index.get(&s2) {
                            Some(&j) => j,
                            None if fixed => return Err(Error::UnknownState { stage: t + 1, state: usize::MAX }),
                            None => {
                                next_states.push(s2.clone());
                                next_index.insert(s2, next_states.len() - 1);
                                next_states.len() - 1
                            }
                        };
                        row.push((j as u32, p, r));
                    }
                    per_action.push((a, row));
                }
            }
            stage_trans.push(per_action);
        }
        total += next_states.len();
        if total > opts.max_states {
            return Err(Error::StateSpaceTooLarge { cap: opts.max_states, stage: t + 1, reached: total });
        }
        trans.push(stage_trans);
        layers.push(StageValues { values: vec![0.0; next_states.len() * g], states: next_states, index: next_index });
    }

    // Backward pass.
    let mut decisions: Vec<Vec<Option<Decision>>> = vec![Vec::new(); h];
    for t in (0..h).rev() {
        let (cur, next) = layers.split_at_mut(t + 1);
        let (cur, next) = (&mut cur[t], &next[0]);
        let mut stage_dec = vec![None; cur.states.len() * g];
        for (i, per_action) in trans[t].iter().enumerate() {
            if per_action.is_empty() {
                continue;
            }
            let mut best_val = vec![f64::NEG_INFINITY; g];
            for (a, row) in per_action {
                let probs: Vec<f64> = row.iter().map(|e| e.1).collect();
                let cont: Vec<Vec<f64>> = row
                    .iter()
                    .map(|&(j, _, r)| next.values[j as usize * g..(j as usize + 1) * g].iter().map(|v| v + r).collect())
                    .collect();
                let cont_ref: Vec<&[f64]> = cont.iter().map(Vec::as_slice).collect();
                let scaled = match opts.interpolation {
                    Interpolation::Scaled => Some(InnerProblem::new(&probs, &cont_ref, &grid)?),
                    Interpolation::Direct => None,
                };
                for k in 0..g {
                    let y = grid.points()[k];
                    let (v, xi) = match &scaled {
                        Some(p) => p.solve(y),
                        None => inner_min_direct(&probs, &cont_ref, y, &grid)?,
                    };
                    // strict improvement keeps the lowest action index on ties
                    if v > best_val[k] + 1e-10 {
                        best_val[k] = v;
                        let xi = row.iter().zip(xi).map(|(e, x)| (e.0, x)).collect();
                        stage_dec[i * g + k] = Some(Decision { action: *a, xi });
                    }
                }
            }
            cur.values[i * g..(i + 1) * g].copy_from_slice(&best_val);
        }
        decisions[t] = stage_dec;
    }
    Ok(CvarPolicy { alpha, values: ValueTable { grid, stages: layers }, decisions })
}

/// CVaR value iteration on an explicit MDP.
pub fn solve_mdp(mdp: &MdpSpec, alpha: f64, grid: YGrid, opts: &SolveOptions) -> Result<CvarPolicy<usize>> {
    solve(&MdpBackup { mdp }, alpha, grid, opts)
}

/// CVaR value iteration on the reachable count-based BAMDP.
pub fn solve_bamdp(model: &Arc<BayesMdp>, alpha: f64, grid: YGrid, opts: &SolveOptions) -> Result<CvarPolicy<BeliefState>> {
    solve(&BamdpBackup { model: Arc::clone(model) }, alpha, grid, opts)
}

impl<S: Clone + Eq + Hash> CvarPolicy<S> {
    pub fn grid(&self) -> &YGrid {
        &self.values.grid
    }

    pub fn horizon(&self) -> usize {
        self.decisions.len()
    }

    /// Decision at stage `t`, state `s` and the grid point nearest `y`.
    pub fn decision(&self, t: usize, s: &S, y: f64) -> Option<&Decision> {
        let i = self.values.stages.get(t)?.index_of(s)?;
        let k = self.values.grid.nearest(y);
        self.decisions.get(t)?.get(i * self.values.grid.len() + k)?.as_ref()
    }

    pub fn action(&self, t: usize, s: &S, y: f64) -> Option<usize> {
        self.decision(t, s, y).map(|d| d.action)
    }

    /// Value at the first stage's initial state and budget `alpha`.
    pub fn root_value(&self, s0: &S) -> Option<f64> {
        let k = self.values.grid.index_of(self.alpha)?;
        self.values.row(0, s0).map(|r| r[k])
    }

    /// `ξ*(s')` of the decision at `(t, s, y)` for the realised `s'`.
    pub fn xi_for(&self, t: usize, s: &S, y: f64, next: &S) -> Option<f64> {
        let d = self.decision(t, s, y)?;
        let j = self.values.stages.get(t + 1)?.index_of(next)? as u32;
        Some(d.xi.iter().find(|e| e.0 == j).map_or(0.0, |e| e.1))
    }

    pub fn reindex(&mut self) {
        self.values.reindex();
    }

    /// Runs one episode, tracking the budget with the stored perturbations.
    fn run<R, K>(&self, env: &MdpSpec, mut key: K, observe: &mut dyn FnMut(usize, usize, usize) -> Result<()>, rng: &mut R) -> Result<TrajectoryRecord>
    where
        R: Rng + ?Sized,
        K: FnMut(usize) -> S,
    {
        let mut traj = TrajectoryRecord::default();
        let mut s = env.initial_state;
        let mut y = self.alpha;
        for t in 0..env.horizon.min(self.horizon()) {
            if env.is_terminal(s) {
                break;
            }
            let k = key(s);
            let a = self.action(t, &k, y).ok_or(Error::UnknownState { stage: t, state: s })?;
            let (next, r) = env.step(s, a, rng)?;
            traj.push(s, a, next, r);
            observe(s, a, next)?;
            let k2 = key(next);
            let xi = self.xi_for(t, &k, y, &k2).ok_or(Error::UnknownState { stage: t + 1, state: next })?;
            y = next_budget(y, xi).max(MIN_BUDGET);
            s = next;
        }
        Ok(traj)
    }
}

impl CvarPolicy<usize> {
    /// Executes an expected-MDP policy in `env`.
    pub fn execute<R: Rng + ?Sized>(&self, env: &MdpSpec, rng: &mut R) -> Result<TrajectoryRecord> {
        self.run(env, |s| s, &mut |_, _, _| Ok(()), rng)
    }
}

impl CvarPolicy<BeliefState> {
    /// Executes a BAMDP policy in `env`, updating the belief counts on the way.
    pub fn execute<R: Rng + ?Sized>(&self, model: &Arc<BayesMdp>, env: &MdpSpec, rng: &mut R) -> Result<TrajectoryRecord> {
        let belief = core::cell::RefCell::new(model.root_belief());
        self.run(
            env,
            |s| BeliefState { state: s, counts: belief.borrow().counts().to_vec() },
            &mut |s, a, next| belief.borrow_mut().observe(s, a, next),
            rng,
        )
    }
}
