use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("action {action} is not legal in state {state}")]
    IllegalAction { state: usize, action: usize },

    #[error("transition ({state}, {action}, {next}) is not tracked by the belief")]
    UnmappedTransition { state: usize, action: usize, next: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("perturbation is outside the admissible set")]
    Inadmissible,

    #[error("state {0} is terminal")]
    TerminalState(usize),

    #[error("progressive widening condition does not hold at this node")]
    WideningNotAllowed,

    #[error("node has no expanded children")]
    Unexpanded,

    #[error("reachable state space exceeds the cap of {cap} (stage {stage} reached {reached})")]
    StateSpaceTooLarge { cap: usize, stage: usize, reached: usize },

    #[error("no policy entry for stage {stage}, state {state}")]
    UnknownState { stage: usize, state: usize },

    #[error("minibatch of {got} trajectories is smaller than the required {need}")]
    MinibatchTooSmall { got: usize, need: usize },

    #[error("training diverged after {sims} simulations: {detail}")]
    Diverged { sims: u64, detail: String },

    #[error("kernel matrix is not positive definite")]
    Factorization,

    #[error("linear program is {0}")]
    Lp(&'static str),
}
