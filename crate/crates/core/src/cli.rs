//! Command-line front end: `simulate`, `train`, `sweep`, `analyze`, `verify`.
//!
//! Every subcommand accepts the same flag set. `--config <file>` loads a flat
//! TOML document whose keys mirror the long flag names (`seed`, `profile`,
//! `out`, `yield`, `spoilage`, `agents`, `episodes`, ...); flags given on the
//! command line win over the file.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::a2c::{self, evaluate, evaluate_policy, train_agent, TrainConfig};
use crate::env::{Action, EnvParams, EnvState};
use crate::oracle;
use crate::report;
use crate::sweep::{self, Manifest, Profile, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "forage", version, about = "Food spoilage, hunting and cultural complexity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one environment under a fixed policy and print the daily trace.
    Simulate(Options),
    /// Train one agent and print its evaluated mean C, std C and starvation rate.
    Train(Options),
    /// Train and evaluate a population of agents over random (Y, p).
    Sweep(Options),
    /// Regression report and figures from a results.csv.
    Analyze(Options),
    /// Check the hunting/free-time orderings with the greedy oracle.
    Verify(Options),
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct Options {
    /// Flat TOML file with default values for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep size preset: desk (100 agents, 30 episodes) or paper (1000, 50).
    #[arg(long)]
    profile: Option<Profile>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Hunt yield Y.
    #[arg(long = "yield")]
    #[serde(rename = "yield")]
    yield_base: Option<f64>,
    /// Daily spoilage p.
    #[arg(long)]
    spoilage: Option<f64>,
    /// Number of agents in a sweep.
    #[arg(long)]
    agents: Option<usize>,
    /// Training episodes per agent.
    #[arg(long)]
    episodes: Option<usize>,
    /// Evaluation episodes per agent.
    #[arg(long)]
    eval_runs: Option<usize>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Discount factor.
    #[arg(long)]
    gamma: Option<f64>,
    /// Entropy bonus coefficient.
    #[arg(long)]
    entropy_coef: Option<f64>,
    /// Fixed policy for `simulate`: greedy, hunt, invest, culture or random.
    #[arg(long)]
    policy: Option<String>,
    /// results.csv to analyze (default: <out>/results.csv).
    #[arg(long)]
    results: Option<PathBuf>,
}

impl Options {
    /// Fills unset fields from the config file, if one was given.
    fn resolve(self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
        let file: Options = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(Options {
            config: self.config,
            seed: self.seed.or(file.seed),
            profile: self.profile.or(file.profile),
            out: self.out.or(file.out),
            yield_base: self.yield_base.or(file.yield_base),
            spoilage: self.spoilage.or(file.spoilage),
            agents: self.agents.or(file.agents),
            episodes: self.episodes.or(file.episodes),
            eval_runs: self.eval_runs.or(file.eval_runs),
            threads: self.threads.or(file.threads),
            lr: self.lr.or(file.lr),
            gamma: self.gamma.or(file.gamma),
            entropy_coef: self.entropy_coef.or(file.entropy_coef),
            policy: self.policy.or(file.policy),
            results: self.results.or(file.results),
        })
    }

    fn env(&self) -> Result<EnvParams> {
        let params = EnvParams::new(self.yield_base.unwrap_or(2000.0), self.spoilage.unwrap_or(0.3));
        params.validate()?;
        Ok(params)
    }

    fn train_config(&self, base: TrainConfig) -> TrainConfig {
        TrainConfig {
            episodes: self.episodes.unwrap_or(base.episodes),
            eval_runs: self.eval_runs.unwrap_or(base.eval_runs),
            lr: self.lr.unwrap_or(base.lr),
            gamma: self.gamma.unwrap_or(base.gamma),
            entropy_coef: self.entropy_coef.unwrap_or(base.entropy_coef),
            ..base
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Parses `argv` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Simulate(o) => simulate(o.resolve()?),
        Command::Train(o) => train(o.resolve()?),
        Command::Sweep(o) => run_sweep(o.resolve()?),
        Command::Analyze(o) => analyze(o.resolve()?),
        Command::Verify(o) => verify(o.resolve()?),
    }
}

fn simulate(opts: Options) -> Result<i32> {
    let params = opts.env()?;
    let policy = opts.policy.as_deref().unwrap_or("greedy");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.unwrap_or(0));
    let uniform = a2c::uniform_policy();
    let fixed = |a: Action| move |_: &EnvState| Ok(a);
    let mut choose: Box<dyn FnMut(&EnvState) -> Result<Action>> = match policy {
        "greedy" => Box::new(|s: &EnvState| Ok(oracle::greedy_action(s, &params))),
        "hunt" => Box::new(fixed(Action::Hunt)),
        "invest" => Box::new(fixed(Action::Invest)),
        "culture" => Box::new(fixed(Action::Culture)),
        "random" => Box::new(|s: &EnvState| {
            let probs = crate::mlp::softmax(&uniform.predict(s.observe(&params).as_slice())?)?;
            Ok(a2c::sample_action(&probs, &mut rng))
        }),
        other => bail!("unknown policy `{other}` (expected greedy, hunt, invest, culture or random)"),
    };

    let mut trace = String::from("day,action,food,skill,culture,reward,terminal\n");
    let mut state = EnvState::reset(&params);
    trace.push_str(&format!("{},start,{},{},{},0,0\n", state.day, state.food, state.skill, state.culture));
    while !state.is_terminal() {
        let action = choose(&state)?;
        let outcome = state.step(&params, action)?;
        trace.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            state.day,
            action,
            state.food,
            state.skill,
            state.culture,
            outcome.reward,
            u8::from(outcome.terminal)
        ));
    }
    match &opts.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("trace.csv");
            std::fs::write(&path, &trace).with_context(|| format!("writing {}", path.display()))?;
            println!(
                "policy {policy}: final C = {}, day {}, cause {:?}; trace written to {}",
                state.culture,
                state.day,
                state.cause,
                path.display()
            );
        }
        None => {
            std::io::stdout().write_all(trace.as_bytes())?;
        }
    }
    Ok(0)
}

fn train(opts: Options) -> Result<i32> {
    let params = opts.env()?;
    let cfg = opts.train_config(TrainConfig::default());
    let seed = opts.seed.unwrap_or(0);
    let agent = train_agent(&params, &cfg, seed)?;
    let eval = evaluate(&agent, &params, cfg.eval_runs, seed.wrapping_add(1))?;
    let baseline = evaluate_policy(&params, &a2c::uniform_policy(), cfg.eval_runs, seed.wrapping_add(1))?;
    println!(
        "Y={} p={} episodes={} seed={}",
        params.yield_base, params.spoilage, cfg.episodes, seed
    );
    println!(
        "mean_C={} std_C={} starvation_rate={}",
        eval.mean_culture, eval.std_culture, eval.starvation_rate
    );
    println!(
        "uniform-random baseline: mean_C={} starvation_rate={}",
        baseline.mean_culture, baseline.starvation_rate
    );
    if let Some(dir) = &opts.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        a2c::save_history(&agent.history, &dir.join("history.csv"))?;
        agent.actor.save_snapshot(&dir.join("actor.txt"))?;
        agent.critic.save_snapshot(&dir.join("critic.txt"))?;
    }
    Ok(0)
}

fn sweep_config(opts: &Options) -> SweepConfig {
    let base = SweepConfig::profile(opts.profile.unwrap_or(Profile::Desk));
    SweepConfig {
        n_agents: opts.agents.unwrap_or(base.n_agents),
        master_seed: opts.seed.unwrap_or(base.master_seed),
        threads: opts.threads.unwrap_or(base.threads),
        train: opts.train_config(base.train.clone()),
        ..base
    }
}

fn run_sweep(opts: Options) -> Result<i32> {
    let config = sweep_config(&opts);
    let out = opts.out_dir();
    let started = chrono::Utc::now().to_rfc3339();
    let results = sweep::run_sweep(&config)?;
    let finished = chrono::Utc::now().to_rfc3339();
    let manifest = Manifest::new(&config, started, finished, &results);
    sweep::write_results(&results, &manifest, &out)?;
    let fraction = sweep::diverged_fraction(&results);
    println!(
        "{} agents, {} episodes each, seed {}: wrote {}",
        results.len(),
        config.train.episodes,
        config.master_seed,
        out.join(sweep::RESULTS_FILE).display()
    );
    if fraction > sweep::MAX_DIVERGED_FRACTION {
        eprintln!(
            "error: {:.1}% of agents diverged (limit {:.0}%)",
            100.0 * fraction,
            100.0 * sweep::MAX_DIVERGED_FRACTION
        );
        return Ok(1);
    }
    Ok(0)
}

fn analyze(opts: Options) -> Result<i32> {
    let out = opts.out_dir();
    let results_path = opts.results.clone().unwrap_or_else(|| out.join(sweep::RESULTS_FILE));
    if !Path::new(&results_path).exists() {
        bail!("results file {} not found", results_path.display());
    }
    let results = sweep::read_results(&results_path)?;
    let analysis = report::analyze(&results, &out)?;
    let text = std::fs::read_to_string(out.join(report::REPORT_FILE))?;
    print!("{text}");
    println!("wrote {} files to {}", analysis.files.len(), out.display());
    Ok(0)
}

fn verify(opts: Options) -> Result<i32> {
    let base = EnvParams::default();
    let grid = oracle::default_grid();
    let report = oracle::verify_grid(&base, &grid);
    print!("{}", report.to_table());
    println!(
        "grid: {} environments, {} violations",
        grid.len(),
        report.total_violations()
    );
    if let Some(dir) = &opts.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(if report.passed() { 0 } else { 1 })
}
