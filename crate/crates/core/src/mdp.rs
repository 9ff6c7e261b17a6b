//! Tabular finite-horizon MDPs with successor-dependent rewards.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;

/// Row-sum tolerance used by [`MdpSpec::validate`].
pub const ROW_SUM_TOL: f64 = 1e-9;

/// One successor of a state-action pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// An explicit finite-horizon MDP.
///
/// Transitions are stored sparsely: `rows[s * num_actions + a]` lists the
/// successors of `(s, a)` with their probability and reward `R(s, a, s')`.
/// Rows of illegal pairs are empty. An episode stops when a terminal state
/// is reached or after `horizon` steps, whichever comes first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub legal_actions: Vec<Vec<usize>>,
    pub rows: Vec<Vec<Outcome>>,
    pub terminal: Vec<bool>,
    pub horizon: usize,
    pub initial_state: usize,
}

/// A problem found by [`MdpSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { state: usize, action: usize, sum: f64 },
    ProbabilityRange { state: usize, action: usize, next: usize, prob: f64 },
    ActionIndex { state: usize, action: usize },
    StateIndex { state: usize, action: usize, next: usize },
    DuplicateSuccessor { state: usize, action: usize, next: usize },
    NoLegalActions { state: usize },
    Shape(&'static str),
    Horizon,
    InitialState { state: usize },
    /// Warning only: no terminal state can be reached from the initial state.
    UnreachableTerminal,
}

impl Violation {
    pub fn is_warning(&self) -> bool {
        matches!(self, Violation::UnreachableTerminal)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, action, sum } => {
                write!(f, "row ({state}, {action}) sums to {sum}")
            }
            Violation::ProbabilityRange { state, action, next, prob } => {
                write!(f, "T({state}, {action}, {next}) = {prob} is outside [0, 1]")
            }
            Violation::ActionIndex { state, action } => {
                write!(f, "legal action {action} of state {state} is out of range")
            }
            Violation::StateIndex { state, action, next } => {
                write!(f, "successor {next} of ({state}, {action}) is out of range")
            }
            Violation::DuplicateSuccessor { state, action, next } => {
                write!(f, "successor {next} listed twice for ({state}, {action})")
            }
            Violation::NoLegalActions { state } => {
                write!(f, "non-terminal state {state} has no legal action")
            }
            Violation::Shape(what) => write!(f, "inconsistent table shape: {what}"),
            Violation::Horizon => f.write_str("horizon must be at least 1"),
            Violation::InitialState { state } => write!(f, "initial state {state} is out of range"),
            Violation::UnreachableTerminal => {
                f.write_str("warning: no terminal state is reachable from the initial state")
            }
        }
    }
}

impl MdpSpec {
    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[Outcome] {
        &self.rows[state * self.num_actions + action]
    }

    pub fn is_legal(&self, state: usize, action: usize) -> bool {
        self.legal_actions
            .get(state)
            .is_some_and(|acts| acts.contains(&action))
    }

    #[inline]
    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    /// `T(s, a, s')`, zero for unsupported successors.
    pub fn prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.row(state, action)
            .iter()
            .find(|o| o.next == next)
            .map_or(0.0, |o| o.prob)
    }

    /// `R(s, a, s')` for supported successors.
    pub fn reward(&self, state: usize, action: usize, next: usize) -> Option<f64> {
        self.row(state, action)
            .iter()
            .find(|o| o.next == next)
            .map(|o| o.reward)
    }

    /// Returns every violation found; an empty list means the MDP is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.legal_actions.len() != self.num_states || self.terminal.len() != self.num_states {
            out.push(Violation::Shape("per-state tables must have num_states entries"));
            return out;
        }
        if self.rows.len() != self.num_states * self.num_actions {
            out.push(Violation::Shape("rows must have num_states * num_actions entries"));
            return out;
        }
        if self.horizon == 0 {
            out.push(Violation::Horizon);
        }
        if self.initial_state >= self.num_states {
            out.push(Violation::InitialState { state: self.initial_state });
        }
        for s in 0..self.num_states {
            if !self.terminal[s] && self.legal_actions[s].is_empty() {
                out.push(Violation::NoLegalActions { state: s });
            }
            for &a in &self.legal_actions[s] {
                if a >= self.num_actions {
                    out.push(Violation::ActionIndex { state: s, action: a });
                    continue;
                }
                let row = self.row(s, a);
                let mut sum = 0.0;
                for (i, o) in row.iter().enumerate() {
                    if o.next >= self.num_states {
                        out.push(Violation::StateIndex { state: s, action: a, next: o.next });
                    }
                    if !(0.0..=1.0).contains(&o.prob) || o.prob.is_nan() {
                        out.push(Violation::ProbabilityRange { state: s, action: a, next: o.next, prob: o.prob });
                    }
                    if row[..i].iter().any(|p| p.next == o.next) {
                        out.push(Violation::DuplicateSuccessor { state: s, action: a, next: o.next });
                    }
                    sum += o.prob;
                }
                if math::abs(sum - 1.0) > ROW_SUM_TOL {
                    out.push(Violation::RowSum { state: s, action: a, sum });
                }
            }
        }
        if out.is_empty() && self.terminal.iter().any(|&t| t) && !self.terminal_reachable() {
            out.push(Violation::UnreachableTerminal);
        }
        out
    }

    fn terminal_reachable(&self) -> bool {
        let mut seen = vec![false; self.num_states];
        let mut stack = vec![self.initial_state];
        seen[self.initial_state] = true;
        while let Some(s) = stack.pop() {
            if self.terminal[s] {
                return true;
            }
            for &a in &self.legal_actions[s] {
                for o in self.row(s, a) {
                    if o.prob > 0.0 && !seen[o.next] {
                        seen[o.next] = true;
                        stack.push(o.next);
                    }
                }
            }
        }
        false
    }

    /// Samples `s' ~ T(s, a, ·)` and returns it with `R(s, a, s')`.
    pub fn step<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> Result<(usize, f64)> {
        if !self.is_legal(state, action) {
            return Err(Error::IllegalAction { state, action });
        }
        let row = self.row(state, action);
        let i = math::sample_index(row.iter().map(|o| o.prob), rng);
        Ok((row[i].next, row[i].reward))
    }

    /// Runs one episode from the initial state; `policy(t, s)` picks actions.
    pub fn simulate<R, P>(&self, mut policy: P, rng: &mut R) -> Result<TrajectoryRecord>
    where
        R: Rng + ?Sized,
        P: FnMut(usize, usize) -> usize,
    {
        let mut traj = TrajectoryRecord::default();
        let mut s = self.initial_state;
        for t in 0..self.horizon {
            if self.terminal[s] {
                break;
            }
            let a = policy(t, s);
            let (next, r) = self.step(s, a, rng)?;
            traj.push(s, a, next, r);
            s = next;
        }
        Ok(traj)
    }
}

/// One executed transition.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub reward: f64,
}

/// An executed episode and its total return.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryRecord {
    pub steps: Vec<Step>,
    pub total_return: f64,
}

impl TrajectoryRecord {
    pub fn push(&mut self, state: usize, action: usize, next_state: usize, reward: f64) {
        self.steps.push(Step { state, action, next_state, reward });
        self.total_return += reward;
    }

    /// Sum of the step rewards, recomputed from scratch.
    pub fn replayed_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}
