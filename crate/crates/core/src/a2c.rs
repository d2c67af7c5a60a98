//! Advantage actor-critic: rollouts, one-step TD advantages, updates and
//! frozen-policy evaluation.
//!
//! Actor and critic are separate networks. Each training episode produces one
//! trajectory and one clipped Adam step per network. The actor minimizes
//! `-mean_t[log pi(a_t|s_t) A_t] - beta * mean_t[H(pi(.|s_t))]` with the
//! advantages held constant; the critic minimizes
//! `mean_t[(V(s_t) - (R_t + gamma V(s_{t+1})))^2]` with the target held constant.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, EnvError, EnvParams, EnvState, Observation, TerminalCause, NUM_ACTIONS, OBS_DIM};
use crate::mlp::{
    clip_global_norm, log_softmax, softmax, AdamConfig, Gradients, Mlp, MlpError, ACTOR_OUTPUT_GAIN,
    CRITIC_OUTPUT_GAIN,
};

#[derive(Debug, Error)]
pub enum A2cError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("training diverged at episode {episode}: {reason}")]
    Divergence { episode: usize, reason: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Mlp(MlpError),
    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl From<MlpError> for A2cError {
    fn from(e: MlpError) -> Self {
        match e {
            MlpError::NonFinite(what) => A2cError::NonFinite(what),
            other => A2cError::Mlp(other),
        }
    }
}

impl A2cError {
    fn at_episode(self, episode: usize) -> Self {
        match self {
            A2cError::NonFinite(what) => A2cError::Divergence {
                episode,
                reason: format!("non-finite {what}"),
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    pub entropy_coef: f64,
    pub eval_runs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            episodes: 50,
            gamma: 0.99,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            clip_norm: 0.5,
            entropy_coef: 0.01,
            eval_runs: 100,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<(), A2cError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(A2cError::InvalidConfig(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.eval_runs < 1 {
            return Err(A2cError::InvalidConfig("eval_runs must be at least 1".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(A2cError::InvalidConfig("clip_norm must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(A2cError::InvalidConfig("lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: Action,
    pub reward: f64,
    pub value: f64,
    /// Critic estimate of the next state, exactly 0 when the step was terminal.
    pub next_value: f64,
    pub log_prob: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    pub final_culture: f64,
    pub final_skill: f64,
    pub starved: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Action {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return Action::ALL[i];
        }
    }
    Action::ALL[last_positive]
}

fn critic_value(critic: &Mlp, obs: &Observation) -> Result<f64, A2cError> {
    let v = critic.predict(obs.as_slice())?[0];
    if !v.is_finite() {
        return Err(A2cError::NonFinite("value estimate"));
    }
    Ok(v)
}

/// One episode from the reset state, sampling actions from the actor.
pub fn collect_episode<R: Rng + ?Sized>(
    params: &EnvParams,
    actor: &Mlp,
    critic: &Mlp,
    rng: &mut R,
) -> Result<Trajectory, A2cError> {
    let mut state = EnvState::reset_seeded(params, rng.next_u64());
    let mut traj = Trajectory::default();
    if state.is_terminal() {
        return Ok(traj);
    }
    let mut obs = state.observe(params);
    let mut value = critic_value(critic, &obs)?;
    loop {
        let logits = actor.predict(obs.as_slice())?;
        let log_probs = log_softmax(&logits)?;
        let probs = softmax(&logits)?;
        let action = sample_action(&probs, rng);
        let outcome = state.step(params, action)?;
        let next_obs = state.observe(params);
        let next_value = if outcome.terminal {
            0.0
        } else {
            critic_value(critic, &next_obs)?
        };
        traj.steps.push(Transition {
            observation: obs,
            action,
            reward: outcome.reward,
            value,
            next_value,
            log_prob: log_probs[action.index()],
        });
        if outcome.terminal {
            traj.starved = outcome.cause == Some(TerminalCause::Starved);
            break;
        }
        obs = next_obs;
        value = next_value;
    }
    traj.final_culture = state.culture;
    traj.final_skill = state.skill;
    Ok(traj)
}

/// `A_t = R_t + gamma V(s_{t+1}) - V(s_t)`.
pub fn compute_advantages(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    traj.steps
        .iter()
        .map(|s| s.reward + gamma * s.next_value - s.value)
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub mean_entropy: f64,
    /// Pre-clipping norms.
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
}

/// Actor loss and its gradient for fixed advantages.
pub fn actor_gradients(
    actor: &Mlp,
    traj: &Trajectory,
    advantages: &[f64],
    entropy_coef: f64,
) -> Result<(Gradients, f64, f64), A2cError> {
    let mut grads = Gradients::zeros(actor.sizes());
    let n = traj.len() as f64;
    let mut loss = 0.0;
    let mut entropy_sum = 0.0;
    for (step, adv) in traj.steps.iter().zip(advantages) {
        let cache = actor.forward(step.observation.as_slice())?;
        let log_probs = log_softmax(&cache.output)?;
        let probs: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
        let entropy: f64 = -probs.iter().zip(&log_probs).map(|(p, l)| p * l).sum::<f64>();
        let a = step.action.index();
        loss += -(log_probs[a] * adv) / n - entropy_coef * entropy / n;
        entropy_sum += entropy;

        // d(-log pi(a)) / dz_k = pi_k - [k = a];  dH / dz_k = -pi_k (log pi_k + H)
        let d_logits: Vec<f64> = (0..NUM_ACTIONS)
            .map(|k| {
                let indicator = if k == a { 1.0 } else { 0.0 };
                let policy_term = -adv * (indicator - probs[k]);
                let entropy_term = entropy_coef * probs[k] * (log_probs[k] + entropy);
                (policy_term + entropy_term) / n
            })
            .collect();
        actor.backward_into(&cache, &d_logits, &mut grads)?;
    }
    if !loss.is_finite() || !grads.is_finite() {
        return Err(A2cError::NonFinite("actor loss"));
    }
    Ok((grads, loss, entropy_sum / n))
}

/// Critic squared-error loss against the bootstrapped one-step target.
pub fn critic_gradients(critic: &Mlp, traj: &Trajectory, gamma: f64) -> Result<(Gradients, f64), A2cError> {
    let mut grads = Gradients::zeros(critic.sizes());
    let n = traj.len() as f64;
    let mut loss = 0.0;
    for step in &traj.steps {
        let cache = critic.forward(step.observation.as_slice())?;
        let target = step.reward + gamma * step.next_value;
        let residual = cache.output[0] - target;
        loss += residual * residual / n;
        critic.backward_into(&cache, &[2.0 * residual / n], &mut grads)?;
    }
    if !loss.is_finite() || !grads.is_finite() {
        return Err(A2cError::NonFinite("critic loss"));
    }
    Ok((grads, loss))
}

/// One clipped Adam step for each network from a single trajectory.
pub fn update(actor: &mut Mlp, critic: &mut Mlp, traj: &Trajectory, cfg: &TrainConfig) -> Result<LossReport, A2cError> {
    if traj.is_empty() {
        return Ok(LossReport::default());
    }
    let advantages = compute_advantages(traj, cfg.gamma);
    let (actor_grads, actor_loss, mean_entropy) = actor_gradients(actor, traj, &advantages, cfg.entropy_coef)?;
    let (critic_grads, critic_loss) = critic_gradients(critic, traj, cfg.gamma)?;
    let report = LossReport {
        actor_loss,
        critic_loss,
        mean_entropy,
        actor_grad_norm: actor_grads.norm(),
        critic_grad_norm: critic_grads.norm(),
    };
    let adam = cfg.adam();
    actor.adam_step(&clip_global_norm(actor_grads, cfg.clip_norm), &adam)?;
    critic.adam_step(&clip_global_norm(critic_grads, cfg.clip_norm), &adam)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub final_culture: f64,
    pub starved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainedAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub history: Vec<EpisodeRecord>,
}

impl TrainedAgent {
    /// Freshly initialized, untrained networks drawn from `rng`.
    pub fn initialize<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let actor = Mlp::init_orthogonal(OBS_DIM, NUM_ACTIONS, ACTOR_OUTPUT_GAIN, rng);
        let critic = Mlp::init_orthogonal(OBS_DIM, 1, CRITIC_OUTPUT_GAIN, rng);
        Self {
            actor,
            critic,
            history: Vec::new(),
        }
    }
}

/// Trains one agent; a pure function of its arguments.
pub fn train_agent(params: &EnvParams, cfg: &TrainConfig, seed: u64) -> Result<TrainedAgent, A2cError> {
    params.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = TrainedAgent::initialize(&mut rng);
    for episode in 0..cfg.episodes {
        let traj = collect_episode(params, &agent.actor, &agent.critic, &mut rng)
            .map_err(|e| e.at_episode(episode))?;
        update(&mut agent.actor, &mut agent.critic, &traj, cfg).map_err(|e| e.at_episode(episode))?;
        agent.history.push(EpisodeRecord {
            episode,
            total_reward: traj.total_reward(),
            final_culture: traj.final_culture,
            starved: traj.starved,
        });
    }
    Ok(agent)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean_culture: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_culture: f64,
    pub starvation_rate: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub culture: f64,
    pub skill: f64,
    pub days: u32,
    pub starved: bool,
    pub total_reward: f64,
}

/// Plays one episode with a frozen policy.
pub fn run_policy_episode<R: Rng + ?Sized>(
    params: &EnvParams,
    actor: &Mlp,
    rng: &mut R,
) -> Result<EpisodeSummary, A2cError> {
    let mut state = EnvState::reset_seeded(params, rng.next_u64());
    let mut total_reward = 0.0;
    while !state.is_terminal() {
        let probs = softmax(&actor.predict(state.observe(params).as_slice())?)?;
        total_reward += state.step(params, sample_action(&probs, rng))?.reward;
    }
    Ok(EpisodeSummary {
        culture: state.culture,
        skill: state.skill,
        days: state.day,
        starved: state.cause == Some(TerminalCause::Starved),
        total_reward,
    })
}

/// Complexity at termination over `runs` stochastic episodes of `actor`.
pub fn evaluate_policy(params: &EnvParams, actor: &Mlp, runs: usize, seed: u64) -> Result<Evaluation, A2cError> {
    if runs < 1 {
        return Err(A2cError::InvalidConfig("eval_runs must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cultures = Vec::with_capacity(runs);
    let mut starved = 0usize;
    for _ in 0..runs {
        let ep = run_policy_episode(params, actor, &mut rng)?;
        cultures.push(ep.culture);
        starved += usize::from(ep.starved);
    }
    let n = runs as f64;
    let mean = cultures.iter().sum::<f64>() / n;
    let std = if runs > 1 {
        (cultures.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(Evaluation {
        mean_culture: mean,
        std_culture: std,
        starvation_rate: starved as f64 / n,
        runs,
    })
}

pub fn evaluate(agent: &TrainedAgent, params: &EnvParams, runs: usize, seed: u64) -> Result<Evaluation, A2cError> {
    evaluate_policy(params, &agent.actor, runs, seed)
}

/// Uniform policy over the three actions.
pub fn uniform_policy() -> Mlp {
    Mlp::constant(OBS_DIM, &[0.0; NUM_ACTIONS])
}

/// Policy that always picks `action`.
pub fn fixed_policy(action: Action) -> Mlp {
    let mut logits = [-1000.0; NUM_ACTIONS];
    logits[action.index()] = 1000.0;
    Mlp::constant(OBS_DIM, &logits)
}

/// CSV with columns `episode,total_reward,final_C,starved`.
pub fn write_history<W: Write>(history: &[EpisodeRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "total_reward", "final_C", "starved"])?;
    for r in history {
        w.write_record([
            r.episode.to_string(),
            r.total_reward.to_string(),
            r.final_culture.to_string(),
            u8::from(r.starved).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_history(history: &[EpisodeRecord], path: &Path) -> Result<(), A2cError> {
    let io_err = |source| A2cError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_history(history, file).map_err(|e| io_err(std::io::Error::other(e)))
}
