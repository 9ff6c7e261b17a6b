//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! By default the planner criteria run at the 10k/2.5k smoke budget with
//! reduced episode counts. `RABAMCP_FULL=1` switches to the full budget
//! (100k/25k simulations, 2000 episodes) and adds full-length policy-gradient
//! training. `RABAMCP_ONLY=6,7` runs a subset. Failing criteria are
//! reported and listed; `RABAMCP_STRICT=1` also makes them exit nonzero.

#[path = "../../core/tests/support/invariant_checks.rs"]
mod checks;

use std::time::Instant;

use rabamcp_cli::eval::{cvar_stat, mean_stat, paired_bootstrap_p, run_evaluation, EvalOptions, Evaluation, BOOTSTRAP_RESAMPLES};
use rabamcp_cli::{oracle, Method, RunConfig};
use rabamcp_core::cvar::empirical_var;
use rabamcp_core::gp::{propose, AcquisitionConfig, EnvelopeSpace, GpModel, PerturbationSpace};
use rabamcp_core::lp::{solve, LinearProgram};
use rabamcp_core::mdp::Outcome;
use rabamcp_core::pg::{cvar_gradient, PgPolicy, PolicyParams};
use rabamcp_core::{exact_cvar, DiscreteDistribution, ExpansionMode, MdpSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Budget {
    full: bool,
    sims: (u64, u64),
    /// Episodes for the betting CVaR₀.₀₃ gate.
    tail_episodes: usize,
    /// Episodes for orderings, the ablation and paired road comparisons.
    paired_episodes: usize,
    road_sims: (u64, u64),
}

impl Budget {
    fn from_env() -> Self {
        let full = std::env::var("RABAMCP_FULL").is_ok_and(|v| v == "1");
        if full {
            Budget { full, sims: (100_000, 25_000), tail_episodes: 2000, paired_episodes: 2000, road_sims: (100_000, 25_000) }
        } else {
            Budget { full, sims: (10_000, 2_500), tail_episodes: 2000, paired_episodes: 500, road_sims: (10_000, 2_500) }
        }
    }

    fn planner(&self, method: Method, alpha: f64, episodes: usize) -> RunConfig {
        let mut cfg = RunConfig { method, alpha, episodes, seed: 2024, ..Default::default() };
        (cfg.search.sims_initial, cfg.search.sims_step) = self.sims;
        cfg
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn evaluate(cfg: &RunConfig) -> Evaluation {
    run_evaluation(cfg, &EvalOptions::default()).unwrap_or_else(|e| panic!("{} failed: {e}", cfg.method.label()))
}

/// Exact minimum of `Σ m_i v_i / α` over masses `m_i ∈ {0, δ, ..., p_i}` with
/// `Σ m_i = α`, by dynamic programming over the 1e-3 mass grid. Probabilities
/// and `α` are multiples of `δ`, so the grid contains the envelope's vertices.
fn mass_grid_cvar(units: &[usize], values: &[f64], alpha_units: usize) -> f64 {
    let mut best = vec![f64::INFINITY; alpha_units + 1];
    best[0] = 0.0;
    for (&cap, &v) in units.iter().zip(values) {
        let mut next = vec![f64::INFINITY; alpha_units + 1];
        for used in 0..=alpha_units {
            if best[used].is_infinite() {
                continue;
            }
            for m in 0..=cap.min(alpha_units - used) {
                let c = best[used] + m as f64 * v;
                if c < next[used + m] {
                    next[used + m] = c;
                }
            }
        }
        best = next;
    }
    best[alpha_units] / alpha_units as f64
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut lp_gap, mut grid_gap) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let mut units = vec![1usize; n];
        for _ in 0..1000 - n {
            units[rng.random_range(0..n)] += 1;
        }
        let probs: Vec<f64> = units.iter().map(|&u| u as f64 / 1000.0).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let alpha_units = rng.random_range(10..=1000);
        let alpha = alpha_units as f64 / 1000.0;
        let dist = DiscreteDistribution::new(values.iter().copied().zip(probs.iter().copied()).collect()).unwrap();
        let greedy = exact_cvar(&dist, alpha).unwrap();
        let lp = LinearProgram {
            c: probs.iter().zip(&values).map(|(p, v)| p * v).collect(),
            a_eq: vec![probs.clone()],
            b_eq: vec![1.0],
            upper: vec![1.0 / alpha; n],
        };
        lp_gap = lp_gap.max((solve(&lp).unwrap().objective - greedy).abs());
        grid_gap = grid_gap.max((mass_grid_cvar(&units, &values, alpha_units) - greedy).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        lp_gap <= 1e-9 && grid_gap <= 1e-2 && secs < 10.0,
        format!("max |greedy - LP| = {lp_gap:.1e}, max |greedy - grid| = {grid_gap:.1e}, {secs:.1}s"),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let r = oracle::run().unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        r.passed && secs < 60.0,
        format!(
            "game {:.4}, best policy {:.4}, perturbed prior {:.4}, max policy gap {:.1e}, {secs:.1}s",
            r.game_value, r.best_policy_cvar, r.perturbed_prior_value, r.max_policy_gap
        ),
    )
}

fn criterion_3() -> Verdict {
    let ev = evaluate(&RunConfig { method: Method::CvarViBamdp, alpha: 0.03, episodes: 2000, ..Default::default() });
    verdict(ev.row.cvar_003 == 10.0 && ev.row.ev == 10.0, format!("CVaR0.03 {:.2}, EV {:.2}", ev.row.cvar_003, ev.row.ev))
}

fn criterion_4() -> Verdict {
    let ev = evaluate(&RunConfig { method: Method::CvarViBamdp, alpha: 0.2, episodes: 2000, ..Default::default() });
    let (lo, hi) = (20.77 - 3.0 * 1.02, 20.77 + 3.0 * 1.02);
    verdict(ev.row.cvar_02 >= lo && ev.row.cvar_02 <= hi, format!("CVaR0.2 {:.2} ({:.2}), band [{lo:.2}, {hi:.2}]", ev.row.cvar_02, ev.row.cvar_02_se))
}

fn criterion_5() -> Verdict {
    let ev = evaluate(&RunConfig { method: Method::CvarViEmdp, alpha: 0.03, episodes: 2000, ..Default::default() });
    verdict(ev.row.cvar_003.abs() <= 0.5, format!("CVaR0.03 {:.2}, EV {:.2}", ev.row.cvar_003, ev.row.ev))
}

fn criterion_6(b: &Budget) -> (Verdict, Evaluation) {
    let ev = evaluate(&b.planner(Method::Rabamcp, 0.03, b.tail_episodes));
    let gate = if b.full { 9.9 } else { 9.5 };
    let v = verdict(
        ev.row.cvar_003 >= gate,
        format!(
            "{}k/{}k sims, {} episodes: CVaR0.03 {:.2} ({:.2}), EV {:.2}, gate {gate}",
            b.sims.0 / 1000,
            b.sims.1 as f64 / 1000.0,
            ev.row.episodes,
            ev.row.cvar_003,
            ev.row.cvar_003_se,
            ev.row.ev
        ),
    );
    (v, ev)
}

fn criterion_7(b: &Budget, ra003: &Evaluation) -> Verdict {
    let n = b.paired_episodes;
    let bamcp = evaluate(&b.planner(Method::Bamcp, 1.0, n));
    let ra02 = evaluate(&b.planner(Method::Rabamcp, 0.2, n));
    let ev003 = mean_stat(&ra003.returns[..n.min(ra003.returns.len())]);
    let ordered = bamcp.row.ev > ra02.row.ev && ra02.row.ev > ev003;
    let mut detail = format!("EV: BAMCP {:.2}, RA-BAMCP(0.2) {:.2}, RA-BAMCP(0.03) {:.2}", bamcp.row.ev, ra02.row.ev, ev003);
    let mut pass = ordered;
    if b.full {
        let (lo, hi) = (59.36 - 3.0 * 0.52, 59.36 + 3.0 * 0.52);
        pass &= bamcp.row.ev >= lo && bamcp.row.ev <= hi;
        detail += &format!(", BAMCP band [{lo:.2}, {hi:.2}]");
    }
    verdict(pass, detail)
}

fn criterion_8(b: &Budget) -> Verdict {
    let mut bo = b.planner(Method::Rabamcp, 0.03, b.paired_episodes);
    bo.search.expansion_mode = ExpansionMode::BayesOpt;
    let mut random = bo.clone();
    random.search.expansion_mode = ExpansionMode::Random;
    random.search.sims_initial *= 2;
    random.search.sims_step *= 2;
    let a = evaluate(&bo);
    let r = evaluate(&random);
    let p = paired_bootstrap_p(&a.returns, &r.returns, cvar_stat(0.03), BOOTSTRAP_RESAMPLES, bo.seed);
    verdict(
        a.row.cvar_003 > r.row.cvar_003 && p < 0.05,
        format!(
            "CVaR0.03 BO {:.2} ({:.3}s/ep) vs random at 2x sims {:.2} ({:.3}s/ep), p = {p:.4}",
            a.row.cvar_003, a.row.time_mean, r.row.cvar_003, r.row.time_mean
        ),
    )
}

fn criterion_9() -> Verdict {
    const PROBS: [f64; 3] = [0.2, 0.3, 0.5];
    const Y: f64 = 0.4;
    let f = |xi: &[f64]| {
        let q: Vec<f64> = xi.iter().zip(PROBS).map(|(x, p)| x * p).collect();
        let d2 = (q[0] - 0.15).powi(2) + (q[1] - 0.55).powi(2) + (q[2] - 0.30).powi(2);
        q[0] - 0.5 * q[2] - 2.0 * (-d2 / (2.0 * 0.06f64.powi(2))).exp()
    };
    let (mut opt, mut worst) = (f64::INFINITY, f64::NEG_INFINITY);
    let steps = 1000;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let q = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
            if (0..3).all(|k| q[k] <= PROBS[k] / Y + 1e-12) {
                let v = f(&[q[0] / PROBS[0], q[1] / PROBS[1], q[2] / PROBS[2]]);
                opt = opt.min(v);
                worst = worst.max(v);
            }
        }
    }
    let tol = 0.05 * (worst - opt);
    let space = EnvelopeSpace { probs: PROBS.to_vec(), y: Y };
    let mut hits = 0;
    let mut used = Vec::new();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gp = GpModel::with_noise(1.0 / (5.0 * Y), 1e-4);
        let mut best = f64::INFINITY;
        for k in 1..=200 {
            let x = propose(&gp, &space, &AcquisitionConfig::default(), &mut rng).unwrap();
            assert!(space.contains(&x));
            let v = f(&x);
            best = best.min(v);
            gp.observe(x, v).unwrap();
            if best - opt <= tol {
                hits += 1;
                used.push(k);
                break;
            }
        }
    }
    let worst_used = used.iter().max().copied().unwrap_or(0);
    verdict(hits >= 18, format!("{hits}/20 seeds within 5% of the range of the grid optimum, at most {worst_used} proposals"))
}

fn bandit() -> MdpSpec {
    let mut rows = vec![
        vec![Outcome { next: 1, prob: 0.3, reward: 0.0 }, Outcome { next: 2, prob: 0.7, reward: 10.0 }],
        vec![Outcome { next: 3, prob: 1.0, reward: 4.0 }],
    ];
    rows.resize(8, Vec::new());
    MdpSpec {
        num_states: 4,
        num_actions: 2,
        legal_actions: vec![vec![0, 1], vec![], vec![], vec![]],
        rows,
        terminal: vec![false, true, true, true],
        horizon: 1,
        initial_state: 0,
    }
}

fn criterion_10(b: &Budget) -> Verdict {
    let env = bandit();
    let alpha = 0.2;
    // P(return 0) is about 0.11 here, so the empirical 0.2-quantile is 4 in essentially every batch
    let w = [-0.3, 0.2];
    let mut params = PolicyParams::constant(1, 4, 2, 0.0);
    params.w[..2].copy_from_slice(&w);
    let policy = PgPolicy { particles: vec![env.clone()], params };
    let mixture_cvar = |w: [f64; 2]| {
        let mut p = policy.params.clone();
        p.w[..2].copy_from_slice(&w);
        let probs = p.action_probs(&[1.0], 0, &[0, 1]);
        let out = (0..2).flat_map(|a| env.row(0, a).iter().map(|o| (o.reward, probs[a] * o.prob)).collect::<Vec<_>>()).collect();
        exact_cvar(&DiscreteDistribution::new(out).unwrap(), alpha).unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let reps = 400;
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    for _ in 0..reps {
        let eps: Vec<_> = (0..1000).map(|_| policy.run(&env, true, &mut rng).unwrap()).collect();
        let g = cvar_gradient(&eps, alpha, policy.params.len()).unwrap();
        for a in 0..2 {
            sum[a] += g[a];
            sq[a] += g[a] * g[a];
        }
    }
    let h = 1e-6;
    let mut ok = true;
    let mut parts = Vec::new();
    for a in 0..2 {
        let mean = sum[a] / reps as f64;
        let sd = ((sq[a] / reps as f64 - mean * mean).max(0.0) * reps as f64 / (reps - 1) as f64).sqrt();
        let se = sd / (reps as f64).sqrt();
        let (mut up, mut dn) = (w, w);
        up[a] += h;
        dn[a] -= h;
        let fd = (mixture_cvar(up) - mixture_cvar(dn)) / (2.0 * h);
        ok &= (mean - fd).abs() <= 3.0 * se;
        parts.push(format!("dW{a}: {mean:.4} vs {fd:.4} (3se {:.4})", 3.0 * se));
    }
    let mut detail = parts.join(", ");
    if b.full {
        let mut cfg = RunConfig { method: Method::CvarPg, alpha: 0.2, episodes: 2000, seed: 2024, ..Default::default() };
        cfg.pg.total_sims = 2_000_000;
        let ev = evaluate(&cfg);
        let (lo, hi) = (19.85 - 3.0 * 0.97, 19.85 + 3.0 * 0.97);
        ok &= ev.row.cvar_02 >= lo && ev.row.cvar_02 <= hi;
        detail += &format!("; trained CVaR0.2 {:.2}, band [{lo:.2}, {hi:.2}]", ev.row.cvar_02);
    } else {
        detail += "; full-budget training runs with RABAMCP_FULL=1";
    }
    verdict(ok, detail)
}

fn criterion_11(b: &Budget) -> Verdict {
    let n = b.paired_episodes;
    let road = |method, alpha| {
        let mut cfg = RunConfig { domain: "road".into(), method, alpha, episodes: n, seed: 2024, ..Default::default() };
        (cfg.search.sims_initial, cfg.search.sims_step) = b.road_sims;
        evaluate(&cfg)
    };
    let ra02 = road(Method::Rabamcp, 0.2);
    let bamcp = road(Method::Bamcp, 1.0);
    let ra003 = road(Method::Rabamcp, 0.03);
    let p_tail = paired_bootstrap_p(&ra02.returns, &bamcp.returns, cvar_stat(0.2), BOOTSTRAP_RESAMPLES, 11);
    let p_mean = paired_bootstrap_p(&bamcp.returns, &ra003.returns, mean_stat, BOOTSTRAP_RESAMPLES, 12);
    let q = |x: &[f64], a| empirical_var(x, a).unwrap();
    let shifted = q(&ra02.returns, 0.05) >= q(&bamcp.returns, 0.05) && q(&ra02.returns, 0.2) >= q(&bamcp.returns, 0.2);
    verdict(
        ra02.row.cvar_02 > bamcp.row.cvar_02 && p_tail < 0.05 && bamcp.row.ev > ra003.row.ev && p_mean < 0.05 && shifted,
        format!(
            "{n} episodes: CVaR0.2 RA(0.2) {:.2} vs BAMCP {:.2} (p = {p_tail:.4}); EV BAMCP {:.2} vs RA(0.03) {:.2} (p = {p_mean:.4}); \
             5%/20% quantiles RA(0.2) {:.1}/{:.1} vs BAMCP {:.1}/{:.1}",
            ra02.row.cvar_02,
            bamcp.row.cvar_02,
            bamcp.row.ev,
            ra003.row.ev,
            q(&ra02.returns, 0.05),
            q(&ra02.returns, 0.2),
            q(&bamcp.returns, 0.05),
            q(&bamcp.returns, 0.2)
        ),
    )
}

fn criterion_12() -> Verdict {
    let mut failures = Vec::new();
    for (name, check) in checks::CHECKS {
        let bad = (0..1000u64).filter_map(|seed| check(seed).err().map(|e| format!("{name} seed {seed}: {e}"))).next();
        failures.extend(bad);
    }
    let detail = if failures.is_empty() { "6 suites x 1000 cases".to_string() } else { failures.join("; ") };
    verdict(failures.is_empty(), detail)
}

fn main() {
    let b = Budget::from_env();
    println!("acceptance ({} budget)", if b.full { "full" } else { "smoke" });
    let mut results: Vec<(usize, Verdict)> = Vec::new();
    let mut report = |id: usize, v: Verdict| {
        println!("criterion {id:>2}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, v));
    };
    // RABAMCP_ONLY=6,7 runs a subset
    let only: Option<Vec<usize>> =
        std::env::var("RABAMCP_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let on = |id: usize| only.as_ref().is_none_or(|o| o.contains(&id));
    if on(1) {
        report(1, criterion_1());
    }
    if on(2) {
        report(2, criterion_2());
    }
    if on(3) {
        report(3, criterion_3());
    }
    if on(4) {
        report(4, criterion_4());
    }
    if on(5) {
        report(5, criterion_5());
    }
    if on(6) || on(7) {
        let (v6, ra003) = criterion_6(&b);
        if on(6) {
            report(6, v6);
        }
        if on(7) {
            report(7, criterion_7(&b, &ra003));
        }
    }
    if on(8) {
        report(8, criterion_8(&b));
    }
    if on(9) {
        report(9, criterion_9());
    }
    if on(10) {
        report(10, criterion_10(&b));
    }
    if on(11) {
        report(11, criterion_11(&b));
    }
    if on(12) {
        report(12, criterion_12());
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        // the report is the result; RABAMCP_STRICT=1 turns failures into a nonzero exit
        if std::env::var("RABAMCP_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
