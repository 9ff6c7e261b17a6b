//! Invariant checks shared by the property tests and the acceptance run.
//! Each check draws its own random instance from `seed`.
#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use rabamcp_core::cvar::min_over_envelope;
use rabamcp_core::domains::betting::{betting_bamdp, BettingConfig};
use rabamcp_core::game::{is_admissible, random_perturbation};
use rabamcp_core::mdp::Outcome;
use rabamcp_core::pg::ParticleBelief;
use rabamcp_core::planner::{NodeKind, Tree};
use rabamcp_core::vi::{solve_mdp, SolveOptions};
use rabamcp_core::{AugState, BayesMdp, BetaParams, DiscreteDistribution, MdpSpec, Planner, SearchConfig, YGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = fn(u64) -> Result<(), String>;

pub const CHECKS: [(&str, Check); 6] = [
    ("envelope admissibility", envelope_weights_are_admissible),
    ("path perturbation product", path_perturbation_product_is_bounded),
    ("widening bound", widening_respects_the_visit_bound),
    ("backup-mean identity", backups_are_running_means),
    ("value table monotone in y", value_table_is_monotone_in_budget),
    ("particle weights normalised", particle_weights_stay_normalised),
];

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn small_betting() -> Arc<BayesMdp> {
    let cfg = BettingConfig {
        initial_money: 4,
        max_money: 20,
        stages: 3,
        bets: vec![0, 1, 2, 4],
        prior: BetaParams { alpha: 1.0, beta: 1.0 },
    };
    betting_bamdp(&cfg).unwrap()
}

fn random_mdp(rng: &mut ChaCha8Rng) -> MdpSpec {
    let n = rng.random_range(2..6);
    let a = rng.random_range(1..4);
    let mut rows = Vec::with_capacity(n * a);
    for _ in 0..n * a {
        let k = rng.random_range(1..=n);
        let p = simplex(rng, k);
        rows.push(
            p.into_iter()
                .enumerate()
                .map(|(next, prob)| Outcome { next, prob, reward: rng.random_range(-5.0..5.0) })
                .collect(),
        );
    }
    MdpSpec {
        num_states: n,
        num_actions: a,
        legal_actions: vec![(0..a).collect(); n],
        rows,
        terminal: vec![false; n],
        horizon: rng.random_range(1..4),
        initial_state: 0,
    }
}

pub fn envelope_weights_are_admissible(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = rng.random_range(0.01..=1.0);
    let n = rng.random_range(1..9);
    let probs = simplex(&mut rng, n);
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let dist = DiscreteDistribution::new(values.iter().copied().zip(probs.iter().copied()).collect()).unwrap();
    let (v, w) = min_over_envelope(&dist, alpha, &values).unwrap();
    ensure!(w.is_feasible(&probs, alpha), "minimiser {:?} outside the envelope", w.xi);
    let weighted: f64 = (0..n).map(|i| probs[i] * w.xi[i] * values[i]).sum();
    ensure!((weighted - v).abs() < 1e-9, "weights give {weighted}, reported {v}");
    let xi = random_perturbation(&probs, alpha, &mut rng);
    ensure!(is_admissible(&xi.xi, &probs, alpha), "random perturbation {:?} inadmissible", xi.xi);
    Ok(())
}

pub fn path_perturbation_product_is_bounded(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = rng.random_range(0.02..=1.0);
    let model = small_betting();
    let planner = Planner::new(model.clone(), SearchConfig { alpha, ..SearchConfig::default() }, None).unwrap();
    let mut tree = Tree::new(&planner, &AugState::root(model.root_belief(), alpha), &mut rng).unwrap();
    for _ in 0..30 {
        let trace = tree.simulate(&mut rng).unwrap();
        let nodes = tree.nodes();
        let mut product = 1.0;
        for w in trace.path.windows(2) {
            let (v, child) = (&nodes[w[0]], &nodes[w[1]]);
            if v.kind() != NodeKind::Chance {
                continue;
            }
            let k = v.outcomes().unwrap().iter().position(|o| o.next == child.state).unwrap();
            product *= v.perturbation().unwrap().xi[k];
            ensure!(product <= 1.0 / alpha + 1e-6, "product {product} at alpha {alpha}");
        }
    }
    Ok(())
}

pub fn widening_respects_the_visit_bound(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = rng.random_range(0.05..0.9);
    let model = small_betting();
    let planner = Planner::new(model.clone(), SearchConfig { alpha: 0.1, tau, ..SearchConfig::default() }, None).unwrap();
    let mut tree = Tree::new(&planner, &AugState::root(model.root_belief(), 0.1), &mut rng).unwrap();
    for _ in 0..60 {
        tree.simulate(&mut rng).unwrap();
    }
    for node in tree.nodes().iter().filter(|n| n.kind() == NodeKind::Adversary) {
        let k = node.children().len() as f64;
        ensure!(k <= (node.n as f64).powf(tau) + 1.0 + 1e-9, "{k} children after {} visits (tau {tau})", node.n);
    }
    Ok(())
}

pub fn backups_are_running_means(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = rng.random_range(0.02..=1.0);
    let model = small_betting();
    let planner = Planner::new(model.clone(), SearchConfig { alpha, ..SearchConfig::default() }, None).unwrap();
    let mut tree = Tree::new(&planner, &AugState::root(model.root_belief(), alpha), &mut rng).unwrap();
    let mut shadow: HashMap<usize, (u64, f64)> = HashMap::new();
    for _ in 0..40 {
        let trace = tree.simulate(&mut rng).unwrap();
        for (&v, &g) in trace.path.iter().zip(&trace.returns) {
            let e = shadow.entry(v).or_default();
            e.0 += 1;
            e.1 += g;
        }
    }
    for (i, node) in tree.nodes().iter().enumerate() {
        let (n, sum) = shadow.get(&i).copied().unwrap_or_default();
        ensure!(node.n == n, "node {i}: {} visits, {n} recorded", node.n);
        if n > 0 {
            let mean = sum / n as f64;
            ensure!((node.q - mean).abs() < 1e-9 * (1.0 + node.q.abs()), "node {i}: q {} vs mean {mean}", node.q);
        }
    }
    Ok(())
}

pub fn value_table_is_monotone_in_budget(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = rng.random_range(0.01..=1.0);
    let mdp = random_mdp(&mut rng);
    let policy = solve_mdp(&mdp, alpha, YGrid::log_spaced(alpha, 8).unwrap(), &SolveOptions::default()).unwrap();
    ensure!(policy.values.is_monotone(1e-9), "value table decreases in y (alpha {alpha})");
    Ok(())
}

pub fn particle_weights_stay_normalised(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut particles = vec![random_mdp(&mut rng)];
    let (n, a) = (particles[0].num_states, particles[0].num_actions);
    for _ in 0..rng.random_range(1..6) {
        let mut p = random_mdp(&mut rng);
        while p.num_states != n || p.num_actions != a {
            p = random_mdp(&mut rng);
        }
        particles.push(p);
    }
    let mut z = ParticleBelief::uniform(particles.len());
    for _ in 0..10 {
        let (s, act, next) = (rng.random_range(0..n), rng.random_range(0..a), rng.random_range(0..n));
        z.update(&particles, s, act, next);
        let total: f64 = z.z.iter().sum();
        ensure!((total - 1.0).abs() < 1e-9, "weights sum to {total}");
        ensure!(z.z.iter().all(|&w| w >= 0.0), "negative weight in {:?}", z.z);
    }
    Ok(())
}
