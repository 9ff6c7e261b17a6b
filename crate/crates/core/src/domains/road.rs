//! Road-network navigation.
//!
//! Junctions are joined by directed edges, each labelled with a road type
//! and the move (up/down/left/right) that takes it. Traversing an edge takes
//! a random duration whose outcome distribution is unknown but shared by all
//! roads of the same type, with a Dirichlet prior per type. The reward is
//! minus the duration, plus a bonus on arriving at the goal, which ends the
//! episode.
//!
//! The MDP state is `(junction, outcome of the last traversal)`, so that two
//! outcomes with the same destination are distinct successors and the
//! observed outcome can be read off the transition.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::belief::{BayesMdp, Branch, DirichletParams, GroupPrior, LatentParams, Prior, ProbSource};
use crate::error::{Error, Result};
use crate::mdp::MdpSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A road type: outcome labels with their durations and the Dirichlet prior.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoadType {
    pub name: String,
    pub outcomes: Vec<(String, f64)>,
    pub prior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoadEdge {
    pub from: usize,
    pub to: usize,
    pub road_type: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoadNetworkConfig {
    pub junctions: Vec<String>,
    pub start: usize,
    pub goal: usize,
    pub goal_reward: f64,
    pub horizon: usize,
    pub road_types: Vec<RoadType>,
    pub edges: Vec<RoadEdge>,
}

fn road_type(name: &str, durations: [f64; 3]) -> RoadType {
    RoadType {
        name: name.into(),
        outcomes: vec![("fast".into(), durations[0]), ("medium".into(), durations[1]), ("slow".into(), durations[2])],
        prior: vec![1.0, 1.0, 0.4],
    }
}

impl RoadNetworkConfig {
    /// The four road types with their fast/medium/slow durations.
    pub fn standard_road_types() -> Vec<RoadType> {
        vec![
            road_type("highway", [1.0, 2.0, 18.0]),
            road_type("main_road", [2.0, 4.0, 13.0]),
            road_type("street", [4.0, 5.0, 11.0]),
            road_type("lane", [7.0, 7.0, 8.0]),
        ]
    }

    /// The shipped 5x5 grid map (version 1).
    ///
    /// Junction `(r, c)` has index `5r + c`; the car starts at `(0, 0)` and the
    /// goal is `(4, 4)`. The top row and right column are highways, the left
    /// column and bottom row are lanes, interior east-west roads are main
    /// roads and interior north-south roads are streets. Every road can be
    /// driven in both directions.
    pub fn default_grid() -> Self {
        let n = 5;
        let idx = |r: usize, c: usize| r * n + c;
        let mut edges = Vec::new();
        let mut add = |a: usize, b: usize, ty: &str, fwd: Direction, back: Direction| {
            edges.push(RoadEdge { from: a, to: b, road_type: ty.into(), direction: fwd });
            edges.push(RoadEdge { from: b, to: a, road_type: ty.into(), direction: back });
        };
        for r in 0..n {
            for c in 0..n - 1 {
                let ty = match r {
                    0 => "highway",
                    4 => "lane",
                    _ => "main_road",
                };
                add(idx(r, c), idx(r, c + 1), ty, Direction::Right, Direction::Left);
            }
        }
        for c in 0..n {
            for r in 0..n - 1 {
                let ty = match c {
                    4 => "highway",
                    0 => "lane",
                    _ => "street",
                };
                add(idx(r, c), idx(r + 1, c), ty, Direction::Down, Direction::Up);
            }
        }
        Self {
            junctions: (0..n * n).map(|i| format!("r{}c{}", i / n, i % n)).collect(),
            start: idx(0, 0),
            goal: idx(n - 1, n - 1),
            goal_reward: 80.0,
            horizon: 10,
            road_types: Self::standard_road_types(),
            edges,
        }
    }

    /// Largest number of outcomes of any road type.
    pub fn max_outcomes(&self) -> usize {
        self.road_types.iter().map(|t| t.outcomes.len()).max().unwrap_or(0)
    }

    /// MDP state for standing at `junction` after arriving via outcome
    /// `arrival` (`None` at the start).
    pub fn state_index(&self, junction: usize, arrival: Option<usize>) -> usize {
        junction * (1 + self.max_outcomes()) + arrival.map_or(0, |k| k + 1)
    }

    pub fn junction_of(&self, state: usize) -> usize {
        state / (1 + self.max_outcomes())
    }

    fn type_index(&self, name: &str) -> Option<usize> {
        self.road_types.iter().position(|t| t.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let nj = self.junctions.len();
        if nj == 0 || self.start >= nj || self.goal >= nj {
            return bad("start and goal must be existing junctions".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        for t in &self.road_types {
            if t.outcomes.is_empty() || t.outcomes.len() != t.prior.len() {
                return bad(format!("road type {} needs one prior weight per outcome", t.name));
            }
            DirichletParams::new(t.prior.clone())?;
        }
        let mut used = vec![[false; 4]; nj];
        for e in &self.edges {
            if e.from >= nj || e.to >= nj {
                return bad(format!("edge {} -> {} references a missing junction", e.from, e.to));
            }
            if self.type_index(&e.road_type).is_none() {
                return bad(format!("edge {} -> {} uses unknown road type {}", e.from, e.to, e.road_type));
            }
            if core::mem::replace(&mut used[e.from][e.direction.index()], true) {
                return bad(format!("junction {} has two roads in direction {:?}", e.from, e.direction));
            }
        }
        for j in 0..nj {
            if j != self.goal && !used[j].iter().any(|&u| u) {
                return bad(format!("junction {} has no outgoing road", self.junctions[j]));
            }
        }
        let mut seen = vec![false; nj];
        let mut stack = vec![self.start];
        seen[self.start] = true;
        while let Some(j) = stack.pop() {
            for e in self.edges.iter().filter(|e| e.from == j) {
                if !seen[e.to] {
                    seen[e.to] = true;
                    stack.push(e.to);
                }
            }
        }
        if !seen[self.goal] {
            return bad("goal is not reachable from the start".into());
        }
        Ok(())
    }
}

/// The road network as a BAMDP with one Dirichlet per road type.
pub fn road_network_bamdp(cfg: &RoadNetworkConfig) -> Result<Arc<BayesMdp>> {
    cfg.validate()?;
    let k = cfg.max_outcomes();
    let nj = cfg.junctions.len();
    let n = nj * (1 + k);
    let na = 4;
    let mut legal = vec![Vec::new(); n];
    let mut rows = vec![Vec::new(); n * na];
    let mut terminal = vec![false; n];
    for j in 0..nj {
        for arrival in 0..=k {
            let s = j * (1 + k) + arrival;
            if j == cfg.goal {
                terminal[s] = true;
                continue;
            }
            for e in cfg.edges.iter().filter(|e| e.from == j) {
                let a = e.direction.index();
                let group = cfg.type_index(&e.road_type).expect("validated");
                let bonus = if e.to == cfg.goal { cfg.goal_reward } else { 0.0 };
                legal[s].push(a);
                rows[s * na + a] = cfg.road_types[group]
                    .outcomes
                    .iter()
                    .enumerate()
                    .map(|(o, &(_, duration))| Branch {
                        next: cfg.state_index(e.to, Some(o)),
                        reward: bonus - duration,
                        source: ProbSource::Latent { group, outcome: o },
                    })
                    .collect();
            }
            legal[s].sort_unstable();
        }
    }
    let prior = cfg
        .road_types
        .iter()
        .map(|t| Ok(GroupPrior::Dirichlet(DirichletParams::new(t.prior.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    BayesMdp::new(n, na, legal, rows, terminal, cfg.horizon, cfg.state_index(cfg.start, None), Prior::Conjugate(prior))
}

/// The road network with known outcome probabilities per road type.
pub fn road_network_mdp(cfg: &RoadNetworkConfig, outcome_probs: &LatentParams) -> Result<MdpSpec> {
    if outcome_probs.len() != cfg.road_types.len() {
        return Err(Error::InvalidArgument("one probability vector per road type is required".into()));
    }
    for (t, p) in cfg.road_types.iter().zip(outcome_probs) {
        let total: f64 = p.iter().sum();
        if p.len() != t.outcomes.len() || (total - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidArgument(format!("outcome probabilities of {} must form a distribution", t.name)));
        }
    }
    Ok(road_network_bamdp(cfg)?.instantiate(outcome_probs))
}
