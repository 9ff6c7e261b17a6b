//! Episode runner and metrics.
//!
//! Every episode draws a ground-truth MDP from the prior and lets the method
//! act in it online. Randomness comes from ChaCha streams keyed by
//! `(seed, episode, stream)`, so two methods run with the same seed face the
//! same ground-truth models, which makes per-episode comparisons paired.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rabamcp_core::cvar::{cvar_with_se, mean_with_se};
use rabamcp_core::domains::{betting_bamdp, road_network_bamdp};
use rabamcp_core::pg::{train, CurvePoint, PgPolicy, PolicyParams};
use rabamcp_core::planner::{SearchResult, StepObserver};
use rabamcp_core::vi::{solve_bamdp, solve_mdp, BeliefState, SolveOptions};
use rabamcp_core::{AugState, BayesMdp, CvarPolicy, ExpansionMode, Planner, YGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{DomainConfig, Method, RunConfig};
use crate::error::CliError;

pub const STREAM_MODEL: u64 = 0;
pub const STREAM_ENV: u64 = 1;
pub const STREAM_AGENT: u64 = 2;
const STREAMS_PER_EPISODE: u64 = 4;

/// Deterministic generator for one `(seed, episode, stream)` triple.
pub fn stream_rng(seed: u64, episode: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode.wrapping_mul(STREAMS_PER_EPISODE).wrapping_add(stream));
    rng
}

/// Generator for offline work (training, particle draws), disjoint from episode streams.
pub fn offline_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

pub fn build_model(domain: &DomainConfig) -> Result<Arc<BayesMdp>, CliError> {
    Ok(match domain {
        DomainConfig::Betting(c) => betting_bamdp(c)?,
        DomainConfig::Road(c) => road_network_bamdp(c)?,
    })
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub alpha: f64,
    pub episodes: usize,
    pub time_mean: f64,
    pub time_se: f64,
    pub cvar_003: f64,
    pub cvar_003_se: f64,
    pub cvar_02: f64,
    pub cvar_02_se: f64,
    pub ev: f64,
    pub ev_se: f64,
}

impl MetricsRow {
    pub fn from_samples(method: &str, alpha: f64, returns: &[f64], seconds: &[f64]) -> Result<Self, CliError> {
        let (cvar_003, cvar_003_se) = cvar_with_se(returns, 0.03)?;
        let (cvar_02, cvar_02_se) = cvar_with_se(returns, 0.2)?;
        let (ev, ev_se) = mean_with_se(returns)?;
        let (time_mean, time_se) = mean_with_se(seconds)?;
        Ok(Self {
            method: method.into(),
            alpha,
            episodes: returns.len(),
            time_mean,
            time_se,
            cvar_003,
            cvar_003_se,
            cvar_02,
            cvar_02_se,
            ev,
            ev_se,
        })
    }

    /// Tail means are ordered: CVaR₀.₀₃ ≤ CVaR₀.₂ ≤ mean.
    pub fn is_monotone(&self) -> bool {
        let tol = 1e-9 * (1.0 + self.ev.abs());
        self.cvar_003 <= self.cvar_02 + tol && self.cvar_02 <= self.ev + tol
    }
}

pub enum Agent {
    Planner(Planner),
    Emdp(CvarPolicy<usize>),
    Bamdp(CvarPolicy<BeliefState>),
    Pg(PgPolicy),
}

/// A method ready to act: solved or trained offline parts included.
pub struct PreparedMethod {
    pub model: Arc<BayesMdp>,
    pub agent: Agent,
    pub offline_seconds: f64,
    pub curve: Vec<CurvePoint>,
}

pub fn prepare(cfg: &RunConfig, domain: &DomainConfig) -> Result<PreparedMethod, CliError> {
    cfg.validate(domain)?;
    let model = build_model(domain)?;
    let start = Instant::now();
    let alpha = cfg.effective_alpha();
    let grid = || YGrid::log_spaced(alpha, cfg.grid_points);
    let opts = SolveOptions::default();
    let mut curve = Vec::new();
    let agent = match cfg.method {
        Method::Rabamcp | Method::Bamcp => {
            let rollout = solve_mdp(&model.root_belief().expected_mdp(), alpha, grid()?, &opts)?;
            Agent::Planner(Planner::new(Arc::clone(&model), cfg.search_config(), Some(Arc::new(rollout)))?)
        }
        Method::CvarViEmdp => Agent::Emdp(solve_mdp(&model.root_belief().expected_mdp(), alpha, grid()?, &opts)?),
        Method::CvarViBamdp => Agent::Bamdp(solve_bamdp(&model, alpha, grid()?, &opts)?),
        Method::CvarPg => {
            let pg = cfg.pg_config();
            let emdp = model.root_belief().expected_mdp();
            let init = solve_mdp(&emdp, alpha, grid()?, &opts)?;
            let mut rng = offline_rng(cfg.seed);
            let particles = PgPolicy::sample_particles(&model, pg.num_particles, &mut rng);
            let params = PolicyParams::from_policy(pg.num_particles, &emdp, &init, alpha);
            let mut policy = PgPolicy { particles, params };
            curve = train(&mut policy, &model, &pg, &mut rng)?;
            Agent::Pg(policy)
        }
    };
    Ok(PreparedMethod { model, agent, offline_seconds: start.elapsed().as_secs_f64(), curve })
}

/// Return and online compute time of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub ret: f64,
    pub seconds: f64,
}

struct Timer {
    episode: usize,
    debug: bool,
    started: Option<Instant>,
    total: f64,
}

impl StepObserver for Timer {
    fn before_search(&mut self, _t: usize) {
        self.started = Some(Instant::now());
    }

    fn after_search(&mut self, t: usize, root: &AugState, res: &SearchResult) {
        if let Some(s) = self.started.take() {
            self.total += s.elapsed().as_secs_f64();
        }
        if self.debug {
            let line = serde_json::json!({
                "episode": self.episode,
                "t": t,
                "state": root.state,
                "y": root.y,
                "action": res.action,
                "xi": res.xi.xi,
                "root": res.stats,
            });
            eprintln!("{line}");
        }
    }
}

pub fn run_episode(prep: &PreparedMethod, seed: u64, episode: usize, debug: bool) -> Result<EpisodeResult, CliError> {
    let ep = episode as u64;
    let env = prep.model.root_belief().sample_transition_fn(&mut stream_rng(seed, ep, STREAM_MODEL));
    let mut env_rng = stream_rng(seed, ep, STREAM_ENV);
    let wrap = |source| CliError::Episode { episode, seed, source };
    let start = Instant::now();
    let (traj, seconds) = match &prep.agent {
        Agent::Planner(p) => {
            let mut timer = Timer { episode, debug, started: None, total: 0.0 };
            let mut rng = stream_rng(seed, ep, STREAM_AGENT);
            let traj = p.act_online_observed(&env, &mut env_rng, &mut rng, &mut timer).map_err(wrap)?;
            (traj, timer.total)
        }
        Agent::Emdp(pol) => (pol.execute(&env, &mut env_rng).map_err(wrap)?, start.elapsed().as_secs_f64()),
        Agent::Bamdp(pol) => (pol.execute(&prep.model, &env, &mut env_rng).map_err(wrap)?, start.elapsed().as_secs_f64()),
        Agent::Pg(pol) => (pol.run(&env, false, &mut env_rng).map_err(wrap)?.trajectory, start.elapsed().as_secs_f64()),
    };
    Ok(EpisodeResult { ret: traj.total_return, seconds })
}

/// Runs `episodes` episodes on up to `workers` threads; results are in episode order.
pub fn run_episodes(prep: &PreparedMethod, seed: u64, episodes: usize, workers: usize, debug: bool) -> Result<Vec<EpisodeResult>, CliError> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<EpisodeResult, CliError>>>> = Mutex::new((0..episodes).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, episodes) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= episodes {
                    break;
                }
                let r = run_episode(prep, seed, i, debug);
                let failed = r.is_err();
                slots.lock().unwrap()[i] = Some(r);
                if failed {
                    next.store(episodes, Ordering::Relaxed);
                }
            });
        }
    });
    let slots = slots.into_inner().unwrap();
    let mut out = Vec::with_capacity(episodes);
    for (i, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(r) => out.push(r?),
            None => return Err(CliError::Format(format!("episode {i} was not run"))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Emit per-step search diagnostics as JSON lines on stderr.
    pub debug: bool,
    /// Label for the metrics row; the method name when empty.
    pub label: Option<String>,
}

/// Results of one evaluation run.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub config: RunConfig,
    pub row: MetricsRow,
    pub returns: Vec<f64>,
    /// Online compute per episode plus the amortised offline time.
    pub seconds: Vec<f64>,
    pub offline_seconds: f64,
    pub curve: Vec<CurvePoint>,
}

pub fn run_evaluation(cfg: &RunConfig, opts: &EvalOptions) -> Result<Evaluation, CliError> {
    let domain = DomainConfig::load(&cfg.domain)?;
    let prep = prepare(cfg, &domain)?;
    log::info!("{}: offline phase {:.2}s, running {} episodes", cfg.method.label(), prep.offline_seconds, cfg.episodes);
    let results = run_episodes(&prep, cfg.seed, cfg.episodes, cfg.workers, opts.debug)?;
    let amortised = prep.offline_seconds / cfg.episodes as f64;
    let returns: Vec<f64> = results.iter().map(|r| r.ret).collect();
    let seconds: Vec<f64> = results.iter().map(|r| r.seconds + amortised).collect();
    let label = opts.label.clone().unwrap_or_else(|| cfg.method.label().to_string());
    let row = MetricsRow::from_samples(&label, cfg.effective_alpha(), &returns, &seconds)?;
    Ok(Evaluation { config: cfg.clone(), row, returns, seconds, offline_seconds: prep.offline_seconds, curve: prep.curve })
}

/// One-sided paired bootstrap p-value for `stat(a) > stat(b)`: the share of
/// resamples of episode indices in which `stat(a*) - stat(b*) <= 0`.
pub fn paired_bootstrap_p(a: &[f64], b: &[f64], stat: impl Fn(&[f64]) -> f64, resamples: usize, seed: u64) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples");
    let n = a.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ra, mut rb) = (vec![0.0; n], vec![0.0; n]);
    let mut hits = 0usize;
    for _ in 0..resamples {
        for k in 0..n {
            let i = rng.random_range(0..n);
            ra[k] = a[i];
            rb[k] = b[i];
        }
        if stat(&ra) - stat(&rb) <= 0.0 {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (resamples + 1) as f64
}

pub fn cvar_stat(alpha: f64) -> impl Fn(&[f64]) -> f64 {
    move |x| cvar_with_se(x, alpha).map(|v| v.0).unwrap_or(f64::NAN)
}

pub fn mean_stat(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// BO expansion against random expansion with twice the simulations.
#[derive(Debug, Clone)]
pub struct Ablation {
    pub bayes_opt: Evaluation,
    pub random: Evaluation,
    /// Paired bootstrap p-value for `CVaR_α(BO) > CVaR_α(random)`.
    pub p_value: f64,
}

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;

pub fn ablation(cfg: &RunConfig, opts: &EvalOptions) -> Result<Ablation, CliError> {
    if cfg.method != Method::Rabamcp {
        return Err(CliError::Config("the expansion ablation applies to rabamcp only".into()));
    }
    let mut bo = cfg.clone();
    bo.search.expansion_mode = ExpansionMode::BayesOpt;
    let mut random = cfg.clone();
    random.search.expansion_mode = ExpansionMode::Random;
    random.search.sims_initial *= 2;
    random.search.sims_step *= 2;
    let bo_eval = run_evaluation(&bo, &EvalOptions { label: Some("rabamcp-bo".into()), ..opts.clone() })?;
    let random_eval = run_evaluation(&random, &EvalOptions { label: Some("rabamcp-random-2x".into()), ..opts.clone() })?;
    let p_value = paired_bootstrap_p(&bo_eval.returns, &random_eval.returns, cvar_stat(cfg.alpha), BOOTSTRAP_RESAMPLES, cfg.seed);
    Ok(Ablation { bayes_opt: bo_eval, random: random_eval, p_value })
}
