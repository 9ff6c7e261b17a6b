use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rabamcp_cli::eval::{self, EvalOptions};
use rabamcp_cli::{export, oracle, CliError, DomainConfig, Method, RunConfig};
use rabamcp_core::vi::{solve_bamdp, solve_mdp, BeliefState, SolveOptions};
use rabamcp_core::{ExpansionMode, YGrid};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rabamcp", version, about = "Risk-averse Bayes-adaptive planning experiments")]
struct Cli {
    /// Emit per-step search diagnostics as JSON lines on stderr.
    #[arg(long, global = true)]
    debug: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a method for a number of episodes and write metrics.
    Evaluate(RunArgs),
    /// Solve CVaR value iteration and report the root value.
    ViSolve(ViArgs),
    /// Train the CVaR policy-gradient baseline and write its learning curve.
    PgTrain(RunArgs),
    /// Compare BO expansion with random expansion at twice the simulations.
    Ablation(RunArgs),
    /// Run the brute-force checks on the two-state micro-instance.
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpansionArg {
    Bo,
    Random,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags given here take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `betting`, `road` or a domain TOML file.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    c_mcts: Option<f64>,
    #[arg(long)]
    c_bo: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sims_initial: Option<u64>,
    #[arg(long)]
    sims_step: Option<u64>,
    #[arg(long, value_enum)]
    expansion_mode: Option<ExpansionArg>,
    /// Return range that the confidence bonuses are scaled by.
    #[arg(long)]
    value_scale: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Policy-gradient training episodes.
    #[arg(long)]
    pg_sims: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v; })*
            };
        }
        set!(
            domain => domain, method => method, alpha => alpha, episodes => episodes, seed => seed,
            workers => workers, c_mcts => search.c_mcts, c_bo => search.c_bo, tau => search.tau,
            sims_initial => search.sims_initial, sims_step => search.sims_step, value_scale => search.value_scale,
            grid_points => grid_points, pg_sims => pg.total_sims,
        );
        if let Some(m) = self.expansion_mode {
            cfg.search.expansion_mode = match m {
                ExpansionArg::Bo => ExpansionMode::BayesOpt,
                ExpansionArg::Random => ExpansionMode::Random,
            };
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ViArgs {
    #[arg(long, default_value = "betting")]
    domain: String,
    #[arg(long, default_value_t = 0.03)]
    alpha: f64,
    #[arg(long, default_value_t = 20)]
    grid_points: usize,
    /// Solve the belief-augmented problem instead of the expected MDP.
    #[arg(long)]
    bamdp: bool,
}

fn print_row(row: &rabamcp_cli::MetricsRow) {
    println!(
        "{:<18} time {:.4}s ({:.4})  CVaR0.03 {:.2} ({:.2})  CVaR0.2 {:.2} ({:.2})  EV {:.2} ({:.2})",
        row.method, row.time_mean, row.time_se, row.cvar_003, row.cvar_003_se, row.cvar_02, row.cvar_02_se, row.ev, row.ev_se
    );
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = EvalOptions { debug: cli.debug, label: None };
    match cli.command {
        Command::Evaluate(args) => {
            let cfg = args.resolve()?;
            let ev = eval::run_evaluation(&cfg, &opts)?;
            export::write_evaluation(&args.out, &ev)?;
            print_row(&ev.row);
        }
        Command::PgTrain(args) => {
            let mut cfg = args.resolve()?;
            cfg.method = Method::CvarPg;
            let ev = eval::run_evaluation(&cfg, &opts)?;
            export::write_evaluation(&args.out, &ev)?;
            for p in &ev.curve {
                println!("{:>9} {:.3}", p.sims, p.cvar);
            }
            print_row(&ev.row);
        }
        Command::Ablation(args) => {
            let cfg = args.resolve()?;
            let ab = eval::ablation(&cfg, &opts)?;
            export::write_evaluation(&args.out.join("bo"), &ab.bayes_opt)?;
            export::write_evaluation(&args.out.join("random"), &ab.random)?;
            export::write_metrics_csv(&args.out.join("metrics.csv"), &[ab.bayes_opt.row.clone(), ab.random.row.clone()])?;
            export::write_json(
                &args.out.join("ablation.json"),
                &json!({ "bo": ab.bayes_opt.row, "random": ab.random.row, "p_value": ab.p_value, "environment": export::fingerprint() }),
            )?;
            print_row(&ab.bayes_opt.row);
            print_row(&ab.random.row);
            println!("paired bootstrap p = {:.4}", ab.p_value);
        }
        Command::ViSolve(args) => {
            let domain = DomainConfig::load(&args.domain)?;
            let model = eval::build_model(&domain)?;
            let grid = YGrid::log_spaced(args.alpha, args.grid_points)?;
            let opts = SolveOptions::default();
            let value = if args.bamdp {
                let pol = solve_bamdp(&model, args.alpha, grid, &opts)?;
                let root = BeliefState { state: model.initial_state, counts: model.root_belief().counts().to_vec() };
                pol.root_value(&root)
            } else {
                solve_mdp(&model.root_belief().expected_mdp(), args.alpha, grid, &opts)?.root_value(&model.initial_state)
            };
            println!("{}", json!({ "domain": args.domain, "alpha": args.alpha, "bamdp": args.bamdp, "root_value": value }));
        }
        Command::Oracle => {
            let report = oracle::run()?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            if !report.passed {
                return Err(CliError::Format("oracle checks disagree beyond tolerance".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.debug { "debug" } else { "warn" })).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
