//! Population experiment: one environment, one trained agent per row.
//!
//! Every agent draws from its own ChaCha8 stream seeded by
//! [`derive_agent_seed`], so the output depends only on the configuration and
//! not on how agents are scheduled across worker threads.

use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::a2c::{evaluate, train_agent, A2cError, TrainConfig};
use crate::env::EnvParams;

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const RESULTS_HEADER: [&str; 9] = [
    "agent_id",
    "Y",
    "p",
    "mean_C",
    "std_C",
    "starvation_rate",
    "agent_seed",
    "episodes_trained",
    "diverged",
];

/// Fraction of diverged agents above which a sweep counts as failed.
pub const MAX_DIVERGED_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 100 agents, 30 training episodes.
    Desk,
    /// 1000 agents, 50 training episodes.
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(format!("unknown profile `{other}` (expected desk or paper)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_agents: usize,
    pub yield_range: (f64, f64),
    pub spoilage_range: (f64, f64),
    pub master_seed: u64,
    pub train: TrainConfig,
    /// Template environment; yield and spoilage are overwritten per agent.
    pub env: EnvParams,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self::profile(Profile::Paper)
    }
}

impl SweepConfig {
    pub fn profile(profile: Profile) -> Self {
        let (n_agents, episodes) = match profile {
            Profile::Desk => (100, 30),
            Profile::Paper => (1000, 50),
        };
        Self {
            n_agents,
            yield_range: (1000.0, 3000.0),
            spoilage_range: (0.2, 0.5),
            master_seed: 0,
            train: TrainConfig {
                episodes,
                ..TrainConfig::default()
            },
            env: EnvParams::default(),
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::InvalidConfig(m));
        if self.n_agents < 1 {
            return bad("n_agents must be at least 1".into());
        }
        let (ylo, yhi) = self.yield_range;
        if !(ylo.is_finite() && yhi.is_finite() && 0.0 < ylo && ylo <= yhi) {
            return bad(format!("yield range [{ylo}, {yhi}] must be positive and ordered"));
        }
        let (plo, phi) = self.spoilage_range;
        if !(0.0 <= plo && plo <= phi && phi <= 1.0) {
            return bad(format!("spoilage range [{plo}, {phi}] must be ordered within [0, 1]"));
        }
        self.train
            .validate()
            .map_err(|e| SweepError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

/// One row of sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentResult {
    pub agent_id: usize,
    pub yield_base: f64,
    pub spoilage: f64,
    pub mean_culture: f64,
    pub std_culture: f64,
    pub starvation_rate: f64,
    pub agent_seed: u64,
    pub episodes_trained: usize,
    /// Training hit a non-finite value; the statistics are zero sentinels.
    pub diverged: bool,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `mix64(master_seed ^ mix64(agent_id + 0x9e3779b97f4a7c15))` with the
/// SplitMix64 finalizer. Injective in each argument when the other is fixed.
pub fn derive_agent_seed(master_seed: u64, agent_id: u64) -> u64 {
    mix64(master_seed ^ mix64(agent_id.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn uniform_in<R: Rng + ?Sized>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

fn agent_stream(config: &SweepConfig, agent_id: usize) -> (u64, ChaCha8Rng) {
    let seed = derive_agent_seed(config.master_seed, agent_id as u64);
    (seed, ChaCha8Rng::seed_from_u64(seed))
}

/// `(Y, p)` drawn uniformly from the configured ranges for this agent.
pub fn sample_params(config: &SweepConfig, agent_id: usize) -> (f64, f64) {
    let (_, mut rng) = agent_stream(config, agent_id);
    let y = uniform_in(config.yield_range, &mut rng);
    let p = uniform_in(config.spoilage_range, &mut rng);
    (y, p)
}

/// Samples, trains and evaluates one agent. Divergence becomes a flagged row.
pub fn run_agent(config: &SweepConfig, agent_id: usize) -> AgentResult {
    let (agent_seed, mut rng) = agent_stream(config, agent_id);
    let yield_base = uniform_in(config.yield_range, &mut rng);
    let spoilage = uniform_in(config.spoilage_range, &mut rng);
    let train_seed = rng.next_u64();
    let eval_seed = rng.next_u64();
    let params = EnvParams {
        yield_base,
        spoilage,
        ..config.env.clone()
    };
    let row = |mean_culture, std_culture, starvation_rate, episodes_trained, diverged| AgentResult {
        agent_id,
        yield_base,
        spoilage,
        mean_culture,
        std_culture,
        starvation_rate,
        agent_seed,
        episodes_trained,
        diverged,
    };
    let outcome = train_agent(&params, &config.train, train_seed)
        .and_then(|agent| evaluate(&agent, &params, config.train.eval_runs, eval_seed));
    match outcome {
        Ok(ev) => row(ev.mean_culture, ev.std_culture, ev.starvation_rate, config.train.episodes, false),
        Err(A2cError::Divergence { episode, .. }) => row(0.0, 0.0, 0.0, episode, true),
        Err(_) => row(0.0, 0.0, 0.0, 0, true),
    }
}

/// Runs every agent on `config.threads` workers; rows are ordered by id.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<AgentResult>, SweepError> {
    run_sweep_with_progress(config, |_| {})
}

/// Like [`run_sweep`], calling `progress` after each finished agent.
pub fn run_sweep_with_progress<F>(config: &SweepConfig, progress: F) -> Result<Vec<AgentResult>, SweepError>
where
    F: Fn(&AgentResult) + Sync,
{
    config.validate()?;
    config
        .env
        .validate()
        .map_err(|e| SweepError::InvalidConfig(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        (0..config.n_agents)
            .into_par_iter()
            .map(|id| {
                let r = run_agent(config, id);
                progress(&r);
                r
            })
            .collect()
    }))
}

pub fn diverged_fraction(results: &[AgentResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.diverged).count() as f64 / results.len() as f64
}

/// Run metadata written next to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub config: SweepConfig,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub agents_diverged: usize,
}

impl Manifest {
    pub fn new(config: &SweepConfig, started_at: String, finished_at: String, results: &[AgentResult]) -> Self {
        Self {
            master_seed: config.master_seed,
            config: config.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at,
            finished_at,
            agents_diverged: results.iter().filter(|r| r.diverged).count(),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Serializes rows as CSV. Floats use the shortest decimal that round-trips.
pub fn results_to_csv(results: &[AgentResult]) -> String {
    let mut out = RESULTS_HEADER.join(",");
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.agent_id,
            r.yield_base,
            r.spoilage,
            r.mean_culture,
            r.std_culture,
            r.starvation_rate,
            r.agent_seed,
            r.episodes_trained,
            u8::from(r.diverged)
        ));
    }
    out
}

/// Writes `results.csv` and `manifest.json` into `dir`, creating it if needed.
pub fn write_results(results: &[AgentResult], manifest: &Manifest, dir: &Path) -> Result<(), SweepError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let csv_path = dir.join(RESULTS_FILE);
    std::fs::write(&csv_path, results_to_csv(results)).map_err(io_error(&csv_path))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest).map_err(|e| SweepError::Format {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;
    std::fs::write(&manifest_path, json + "\n").map_err(io_error(&manifest_path))?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest, SweepError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| SweepError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Inverse of [`results_to_csv`].
pub fn read_results(path: &Path) -> Result<Vec<AgentResult>, SweepError> {
    let file = std::fs::File::open(path).map_err(io_error(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse_err = |line: u64, message: String| SweepError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", RESULTS_HEADER.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<&str, SweepError> {
            record
                .get(i)
                .ok_or_else(|| parse_err(line, format!("missing column `{}`", RESULTS_HEADER[i])))
        };
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            s.trim().parse::<T>().map_err(|e| format!("column `{name}`: `{s}`: {e}"))
        }
        let parse = || -> Result<AgentResult, String> {
            let get = |i| field(i).map_err(|e| e.to_string());
            let diverged: u8 = num(get(8)?, RESULTS_HEADER[8])?;
            if diverged > 1 {
                return Err(format!("column `diverged` must be 0 or 1, found {diverged}"));
            }
            Ok(AgentResult {
                agent_id: num(get(0)?, RESULTS_HEADER[0])?,
                yield_base: num(get(1)?, RESULTS_HEADER[1])?,
                spoilage: num(get(2)?, RESULTS_HEADER[2])?,
                mean_culture: num(get(3)?, RESULTS_HEADER[3])?,
                std_culture: num(get(4)?, RESULTS_HEADER[4])?,
                starvation_rate: num(get(5)?, RESULTS_HEADER[5])?,
                agent_seed: num(get(6)?, RESULTS_HEADER[6])?,
                episodes_trained: num(get(7)?, RESULTS_HEADER[7])?,
                diverged: diverged == 1,
            })
        };
        rows.push(parse().map_err(|m| parse_err(line, m))?);
    }
    Ok(rows)
}
