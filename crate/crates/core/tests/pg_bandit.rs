use rabamcp_core::mdp::Outcome;
use rabamcp_core::pg::{cvar_gradient, PgPolicy, PolicyParams};
use rabamcp_core::{exact_cvar, DiscreteDistribution, MdpSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Action 0 pays 0 or 10 (mean 7), action 1 pays 4 for sure.
fn bandit() -> MdpSpec {
    let rows = vec![
        vec![Outcome { next: 1, prob: 0.3, reward: 0.0 }, Outcome { next: 2, prob: 0.7, reward: 10.0 }],
        vec![Outcome { next: 3, prob: 1.0, reward: 4.0 }],
    ];
    let mut all = rows;
    all.resize(8, Vec::new());
    MdpSpec {
        num_states: 4,
        num_actions: 2,
        legal_actions: vec![vec![0, 1], vec![], vec![], vec![]],
        rows: all,
        terminal: vec![false, true, true, true],
        horizon: 1,
        initial_state: 0,
    }
}

fn policy_cvar(params: &PolicyParams, env: &MdpSpec, alpha: f64) -> f64 {
    let probs = params.action_probs(&[1.0], 0, &[0, 1]);
    let probs = &probs;
    let out = (0..2).flat_map(|a| env.row(0, a).iter().map(move |o| (o.reward, probs[a] * o.prob))).collect();
    exact_cvar(&DiscreteDistribution::new(out).unwrap(), alpha).unwrap()
}

#[test]
fn ascent_moves_to_the_safe_arm() {
    let env = bandit();
    let alpha = 0.2;
    let mut policy = PgPolicy { particles: vec![env.clone()], params: PolicyParams::constant(1, 4, 2, 0.0) };
    let start = policy_cvar(&policy.params, &env, alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let batch: Vec<_> = (0..200).map(|_| policy.run(&env, true, &mut rng).unwrap()).collect();
        let g = cvar_gradient(&batch, alpha, policy.params.len()).unwrap();
        for (w, gi) in policy.params.w.iter_mut().zip(&g) {
            *w += 0.05 * gi;
        }
    }
    let end = policy_cvar(&policy.params, &env, alpha);
    assert!(start <= 1.0 + 1e-9 && end > 3.6, "CVaR went from {start} to {end}");
    assert!(policy.params.action_probs(&[1.0], 0, &[0, 1])[1] > 0.9);
}

#[test]
fn expectation_case_prefers_the_risky_arm() {
    let env = bandit();
    let mut policy = PgPolicy { particles: vec![env.clone()], params: PolicyParams::constant(1, 4, 2, 0.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..300 {
        let batch: Vec<_> = (0..200).map(|_| policy.run(&env, true, &mut rng).unwrap()).collect();
        let g = cvar_gradient(&batch, 1.0, policy.params.len()).unwrap();
        for (w, gi) in policy.params.w.iter_mut().zip(&g) {
            *w += 0.05 * gi;
        }
    }
    assert!(policy.params.action_probs(&[1.0], 0, &[0, 1])[0] > 0.9);
}
