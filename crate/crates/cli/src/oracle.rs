//! Brute-force checks on a two-state, two-step Bayes-adaptive MDP.
//!
//! The instance has states {0, 1}, actions {0, 1}, horizon 2 and a prior
//! with two support points of weight 0.6 and 0.4. The successor does not
//! depend on the current state: model `m` moves to state 1 under action `a`
//! with probability `Q[m][a]`. Three values are computed from scratch,
//! without the library's CVaR or game code:
//!
//! * the game value, with the adversary's perturbation searched on a grid,
//! * the best CVaR over all eight deterministic history-dependent policies,
//! * for every policy, the minimum expected return over perturbed priors and
//!   perturbed models subject to the path-product bound (grid search).
//!
//! The library's own answers (exact CVaR, value iteration) are reported
//! alongside.

use std::sync::Arc;

use rabamcp_core::belief::{Branch, FiniteSupportPrior, ProbSource};
use rabamcp_core::vi::{solve_bamdp, BeliefState, SolveOptions};
use rabamcp_core::{exact_cvar, BayesMdp, DiscreteDistribution, Prior, YGrid};
use serde::Serialize;

use crate::error::CliError;

pub const ALPHA: f64 = 0.3;
pub const PRIOR: [f64; 2] = [0.6, 0.4];
/// `Q[m][a]`: probability of reaching state 1.
pub const Q: [[f64; 2]; 2] = [[0.5, 0.8], [0.4, 0.3]];
/// `R[a][s']`.
pub const R: [[f64; 2]; 2] = [[1.0, 2.0], [-2.0, 4.0]];
pub const GRID_STEP: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-2;
/// Value iteration interpolates on a 20-point budget grid, so it gets a looser bound.
pub const VI_TOLERANCE: f64 = 0.05;

fn trans(m: usize, a: usize) -> [f64; 2] {
    [1.0 - Q[m][a], Q[m][a]]
}

fn predictive(w: [f64; 2], a: usize) -> [f64; 2] {
    let mut p = [0.0; 2];
    for m in 0..2 {
        for (j, t) in trans(m, a).iter().enumerate() {
            p[j] += w[m] * t;
        }
    }
    p
}

fn posterior(w: [f64; 2], a: usize, next: usize) -> [f64; 2] {
    let u = [w[0] * trans(0, a)[next], w[1] * trans(1, a)[next]];
    let z = u[0] + u[1];
    [u[0] / z, u[1] / z]
}

/// Grid over the first coordinate of a two-point perturbation `ξ`, with the
/// second fixed by `Σ p ξ = 1`; yields admissible `(ξ₀, ξ₁)` with `ξ ≤ cap`.
fn xi_grid(p: [f64; 2], cap: f64) -> Vec<[f64; 2]> {
    if p[1] == 0.0 {
        return vec![[1.0 / p[0], 0.0]];
    }
    if p[0] == 0.0 {
        return vec![[0.0, 1.0 / p[1]]];
    }
    let hi = cap.min(1.0 / p[0]);
    let steps = (hi / GRID_STEP).ceil() as usize;
    (0..=steps)
        .map(|i| (i as f64 * GRID_STEP).min(hi))
        .map(|x0| [x0, (1.0 - p[0] * x0) / p[1]])
        .filter(|x| x[1] >= -1e-12 && x[1] <= cap + 1e-12)
        .collect()
}

/// `min_ξ Σ_j p_j ξ_j v_j` over the grid.
fn grid_min(p: [f64; 2], cap: f64, v: impl Fn(usize, f64) -> f64) -> f64 {
    xi_grid(p, cap)
        .into_iter()
        .map(|xi| (0..2).filter(|&j| p[j] * xi[j] > 0.0).map(|j| p[j] * xi[j] * v(j, xi[j])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Game value of the last step at belief `w` and budget `y`.
fn game_last(w: [f64; 2], y: f64) -> f64 {
    (0..2).map(|a| grid_min(predictive(w, a), 1.0 / y, |j, _| R[a][j])).fold(f64::NEG_INFINITY, f64::max)
}

/// Game value at the root, both steps searched on the grid.
pub fn game_value() -> f64 {
    (0..2)
        .map(|a| {
            let p = predictive(PRIOR, a);
            grid_min(p, 1.0 / ALPHA, |j, xi| R[a][j] + game_last(posterior(PRIOR, a, j), (ALPHA * xi).min(1.0)))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A deterministic policy: first action, then the second action for each first successor.
pub type MicroPolicy = [usize; 3];

pub fn all_policies() -> Vec<MicroPolicy> {
    (0..8).map(|i| [i & 1, (i >> 1) & 1, (i >> 2) & 1]).collect()
}

/// Return distribution `(return, probability)` of `pi` in model `m`.
fn model_returns(pi: MicroPolicy, m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (s1, p1) in trans(m, pi[0]).into_iter().enumerate() {
        let a1 = pi[1 + s1];
        for (s2, p2) in trans(m, a1).into_iter().enumerate() {
            out.push((R[pi[0]][s1] + R[a1][s2], p1 * p2));
        }
    }
    out
}

/// Return distribution of `pi` in the Bayes-adaptive MDP.
pub fn policy_returns(pi: MicroPolicy) -> Vec<(f64, f64)> {
    (0..2).flat_map(|m| model_returns(pi, m).into_iter().map(move |(r, p)| (r, PRIOR[m] * p))).collect()
}

/// Lower-tail CVaR by sorting and filling mass `alpha`.
pub fn sorted_cvar(outcomes: &[(f64, f64)], alpha: f64) -> f64 {
    let mut o: Vec<(f64, f64)> = outcomes.iter().copied().filter(|x| x.1 > 0.0).collect();
    o.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut left = alpha;
    let mut acc = 0.0;
    for (v, p) in o {
        let take = p.min(left);
        acc += take * v;
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    acc / alpha
}

/// Minimum expected return of `pi` over the prior perturbation `δ` and the
/// per-model perturbations `ξ_m`, indexed by (step, state, action), such that
/// `δ(m) ξ_m(step 0) ξ_m(step 1) ≤ 1/α` on every path. `δ` and the first
/// step are searched on the grid.
pub fn perturbed_prior_value(pi: MicroPolicy) -> f64 {
    let inner = |m: usize, delta: f64| -> f64 {
        // the product bound leaves ξ_m(step 0) ξ_m(step 1) ≤ 1 / (α δ)
        let cap = 1.0 / (ALPHA * delta);
        grid_min(trans(m, pi[0]), cap, |s1, x0| {
            // the last step is linear in ξ, so its minimum is the sorted tail mean
            let a1 = pi[1 + s1];
            let t = trans(m, a1);
            R[pi[0]][s1] + sorted_cvar(&[(R[a1][0], t[0]), (R[a1][1], t[1])], (x0 / cap).min(1.0))
        })
    };
    let mut best = f64::INFINITY;
    for d in xi_grid(PRIOR, 1.0 / ALPHA) {
        let v: f64 = (0..2).filter(|&m| d[m] > 0.0).map(|m| PRIOR[m] * d[m] * inner(m, d[m])).sum();
        best = best.min(v);
    }
    best
}

/// The micro-instance as a library model.
pub fn micro_bamdp() -> Result<Arc<BayesMdp>, CliError> {
    let mut rows = Vec::new();
    for _s in 0..2 {
        for a in 0..2 {
            rows.push((0..2).map(|next| Branch { next, reward: R[a][next], source: ProbSource::Latent { group: a, outcome: next } }).collect());
        }
    }
    let models = (0..2).map(|m| (0..2).map(|a| trans(m, a).to_vec()).collect()).collect();
    let prior = Prior::FiniteSupport(FiniteSupportPrior { weights: PRIOR.to_vec(), models });
    Ok(BayesMdp::new(2, 2, vec![vec![0, 1]; 2], rows, vec![false; 2], 2, 0, prior)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub game_value: f64,
    pub best_policy: MicroPolicy,
    pub best_policy_cvar: f64,
    pub perturbed_prior_value: f64,
    /// Largest gap between the perturbed-prior minimum and the sorted CVaR over all policies.
    pub max_policy_gap: f64,
    pub library_exact_cvar: f64,
    pub library_vi_value: f64,
    pub passed: bool,
}

pub fn run() -> Result<OracleReport, CliError> {
    let game = game_value();
    let mut best = (f64::NEG_INFINITY, [0; 3]);
    let mut max_gap: f64 = 0.0;
    for pi in all_policies() {
        let c = sorted_cvar(&policy_returns(pi), ALPHA);
        max_gap = max_gap.max((perturbed_prior_value(pi) - c).abs());
        if c > best.0 {
            best = (c, pi);
        }
    }
    let prop1 = perturbed_prior_value(best.1);
    let dist = DiscreteDistribution::new(policy_returns(best.1))?;
    let library_exact = exact_cvar(&dist, ALPHA)?;
    let model = micro_bamdp()?;
    let vi = solve_bamdp(&model, ALPHA, YGrid::log_spaced(ALPHA, 20)?, &SolveOptions::default())?;
    let root = BeliefState { state: 0, counts: model.root_belief().counts().to_vec() };
    let library_vi = vi.root_value(&root).ok_or_else(|| CliError::Format("value iteration has no root entry".into()))?;
    let passed = (game - best.0).abs() <= TOLERANCE
        && (prop1 - best.0).abs() <= TOLERANCE
        && max_gap <= TOLERANCE
        && (library_exact - best.0).abs() <= 1e-9
        && (library_vi - game).abs() <= VI_TOLERANCE;
    Ok(OracleReport {
        game_value: game,
        best_policy: best.1,
        best_policy_cvar: best.0,
        perturbed_prior_value: prop1,
        max_policy_gap: max_gap,
        library_exact_cvar: library_exact,
        library_vi_value: library_vi,
        passed,
    })
}
