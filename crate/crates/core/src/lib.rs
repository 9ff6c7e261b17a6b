//! Risk-averse planning in Bayes-adaptive MDPs.
//!
//! The crate optimises the conditional value at risk (CVaR) of the total
//! return when the transition function of a finite-horizon MDP is only known
//! through a conjugate (or finite-support) prior. It contains:
//!
//! * tabular MDPs and the betting / road-network benchmark generators ([`mdp`], [`domains`]),
//! * posterior beliefs and the Bayes-adaptive transition model ([`belief`]),
//! * VaR/CVaR estimators and the risk-envelope dual ([`cvar`], [`lp`]),
//! * the CVaR stochastic game on the budget-augmented BAMDP ([`game`]),
//! * Gaussian-process lower-confidence-bound proposals ([`gp`]),
//! * the risk-averse MCTS planner ([`planner`]),
//! * CVaR value iteration ([`vi`]) and the CVaR policy-gradient baseline ([`pg`]).
//!
//! Everything here is `no_std` + `alloc`. File formats, the evaluation
//! harness and the command line live in the companion `rabamcp-cli` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![warn(rust_2018_idioms, unused_qualifications)]
#![allow(clippy::too_many_arguments, clippy::needless_range_loop)]

extern crate alloc;

pub mod belief;
pub mod cvar;
pub mod domains;
mod error;
pub mod game;
pub mod gp;
pub mod lp;
pub(crate) mod math;
pub mod mdp;
pub mod pg;
pub mod planner;
pub mod vi;

pub use belief::{BayesMdp, Belief, BetaParams, DirichletParams, GroupPrior, Prior};
pub use cvar::{empirical_cvar, empirical_var, exact_cvar, DiscreteDistribution};
pub use error::{Error, Result};
pub use game::{AugState, Perturbation, Turn};
pub use mdp::{MdpSpec, TrajectoryRecord};
pub use planner::{ExpansionMode, Planner, SearchConfig};
pub use vi::{CvarPolicy, ValueTable, YGrid};
