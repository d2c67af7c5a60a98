//! Daily-step foraging environment.
//!
//! A group holds a food store that pays a fixed daily ration and then loses a
//! fraction `p` of what is left overnight: `f' = (f - c)(1 - p)`. Each decision
//! is one of three actions. Hunting occupies `hunt_days` days and credits the
//! effective yield `Y (1 + 0.1 G)(1 + 0.01 C)` once the last hunting day's
//! spoilage has been applied. Investing raises the management skill `G`,
//! culture raises the complexity count `C` and pays a small reward. A day that
//! ends with a negative balance terminates the episode with a penalty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length of the observation vector fed to the networks.
pub const OBS_DIM: usize = 6;

/// Number of discrete actions.
pub const NUM_ACTIONS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called on a finished episode (day {day}, alive = {alive})")]
    Finished { day: u32, alive: bool },
    #[error("invalid environment parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("unknown action index {0}")]
    UnknownAction(usize),
}

/// How overnight spoilage is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpoilageMode {
    /// `f' = (f - c)(1 - p)` every night.
    #[default]
    Multiplicative,
    /// `f' = f - c`, then with probability `p` the whole remaining store is lost.
    Bernoulli,
}

/// How skill and complexity enter the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationScaling {
    /// `0.1 G` and `C / T`.
    #[default]
    Scaled,
    /// Raw `G` and `C`.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    /// Food per completed hunt before multipliers (Y).
    pub yield_base: f64,
    /// Daily spoilage fraction (p).
    pub spoilage: f64,
    /// Daily ration (c).
    pub consumption: f64,
    /// Episode length in days (T).
    pub horizon: u32,
    /// Annual requirement, `consumption * horizon` (F).
    pub requirement: f64,
    pub hunt_days: u32,
    pub invest_days: u32,
    pub culture_days: u32,
    /// Skill gained per invest action (ΔG).
    pub skill_increment: f64,
    pub initial_food: f64,
    pub culture_reward: f64,
    pub starvation_penalty: f64,
    /// Divisor for the yield entry of the observation.
    pub yield_norm: f64,
    #[serde(default)]
    pub spoilage_mode: SpoilageMode,
    #[serde(default)]
    pub observation_scaling: ObservationScaling,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self::new(2000.0, 0.3)
    }
}

impl EnvParams {
    pub const DEFAULT_CONSUMPTION: f64 = 10.0;
    pub const DEFAULT_HORIZON: u32 = 365;

    /// Default environment at the given yield and spoilage.
    pub fn new(yield_base: f64, spoilage: f64) -> Self {
        let consumption = Self::DEFAULT_CONSUMPTION;
        let horizon = Self::DEFAULT_HORIZON;
        Self {
            yield_base,
            spoilage,
            consumption,
            horizon,
            requirement: consumption * f64::from(horizon),
            hunt_days: 2,
            invest_days: 1,
            culture_days: 1,
            skill_increment: 1.0,
            initial_food: 10.0 * consumption,
            culture_reward: 5.0,
            starvation_penalty: -100.0,
            yield_norm: 3000.0,
            spoilage_mode: SpoilageMode::Multiplicative,
            observation_scaling: ObservationScaling::Scaled,
        }
    }

    /// Sets the horizon and keeps `requirement = consumption * horizon`.
    pub fn with_horizon(mut self, horizon: u32) -> Self {
        self.horizon = horizon;
        self.requirement = self.consumption * f64::from(horizon);
        self
    }

    /// Sets the daily ration and keeps `requirement = consumption * horizon`.
    pub fn with_consumption(mut self, consumption: f64) -> Self {
        self.consumption = consumption;
        self.requirement = consumption * f64::from(self.horizon);
        self
    }

    pub fn with_initial_food(mut self, food: f64) -> Self {
        self.initial_food = food;
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        fn bad(field: &'static str, reason: impl Into<String>) -> Result<(), EnvError> {
            Err(EnvError::InvalidParam {
                field,
                reason: reason.into(),
            })
        }
        if !(self.yield_base > 0.0 && self.yield_base.is_finite()) {
            return bad("yield_base", format!("must be positive, got {}", self.yield_base));
        }
        if !(0.0..=1.0).contains(&self.spoilage) {
            return bad("spoilage", format!("must lie in [0, 1], got {}", self.spoilage));
        }
        if !(self.consumption > 0.0 && self.consumption.is_finite()) {
            return bad("consumption", format!("must be positive, got {}", self.consumption));
        }
        if self.horizon < 1 {
            return bad("horizon", "must be at least one day");
        }
        if self.hunt_days < 1 || self.invest_days < 1 || self.culture_days < 1 {
            return bad("hunt_days", "action durations must be at least one day");
        }
        if !(self.initial_food >= 0.0 && self.initial_food.is_finite()) {
            return bad("initial_food", format!("must be non-negative, got {}", self.initial_food));
        }
        if !(self.requirement > 0.0) {
            return bad("requirement", format!("must be positive, got {}", self.requirement));
        }
        if !(self.yield_norm > 0.0) {
            return bad("yield_norm", format!("must be positive, got {}", self.yield_norm));
        }
        if !(self.skill_increment >= 0.0) {
            return bad("skill_increment", "must be non-negative");
        }
        Ok(())
    }

    /// Days taken by `action`.
    pub fn duration(&self, action: Action) -> u32 {
        match action {
            Action::Hunt => self.hunt_days,
            Action::Invest => self.invest_days,
            Action::Culture => self.culture_days,
        }
    }
}

/// `Y (1 + 0.1 G)(1 + 0.01 C)`.
pub fn effective_yield(params: &EnvParams, skill: f64, culture: f64) -> f64 {
    debug_assert!(skill >= 0.0 && culture >= 0.0);
    params.yield_base * (1.0 + 0.1 * skill) * (1.0 + 0.01 * culture)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Hunt,
    Invest,
    Culture,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [Action::Hunt, Action::Invest, Action::Culture];

    pub fn index(self) -> usize {
        match self {
            Action::Hunt => 0,
            Action::Invest => 1,
            Action::Culture => 2,
        }
    }

    pub fn from_index(index: usize) -> Result<Self, EnvError> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or(EnvError::UnknownAction(index))
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Hunt => "hunt",
            Action::Invest => "invest",
            Action::Culture => "culture",
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalCause {
    Starved,
    HorizonReached,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub days_elapsed: u32,
    pub terminal: bool,
    pub cause: Option<TerminalCause>,
}

/// Mutable episode state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub day: u32,
    pub food: f64,
    pub skill: f64,
    pub culture: f64,
    pub alive: bool,
    pub cause: Option<TerminalCause>,
    spoil_rng: Option<ChaCha8Rng>,
}

impl EnvState {
    /// Initial state: `initial_food`, zero skill and complexity, day 0.
    pub fn reset(params: &EnvParams) -> Self {
        Self::reset_seeded(params, 0)
    }

    /// Like [`EnvState::reset`], seeding the spoilage draws in Bernoulli mode.
    /// The seed is ignored in multiplicative mode.
    pub fn reset_seeded(params: &EnvParams, seed: u64) -> Self {
        let finished = params.horizon == 0;
        Self {
            day: 0,
            food: params.initial_food,
            skill: 0.0,
            culture: 0.0,
            alive: !finished,
            cause: finished.then_some(TerminalCause::HorizonReached),
            spoil_rng: match params.spoilage_mode {
                SpoilageMode::Multiplicative => None,
                SpoilageMode::Bernoulli => Some(ChaCha8Rng::seed_from_u64(seed)),
            },
        }
    }

    pub fn is_terminal(&self) -> bool {
        !self.alive || self.cause.is_some()
    }

    fn ensure_running(&self, params: &EnvParams) -> Result<(), EnvError> {
        if !self.alive || self.day >= params.horizon {
            return Err(EnvError::Finished {
                day: self.day,
                alive: self.alive,
            });
        }
        Ok(())
    }

    /// Pays one day's ration and applies overnight spoilage.
    ///
    /// The day is lost when the ration exceeds the store; for `p < 1` this is
    /// the same as the post-spoilage balance going negative. Returns `true`
    /// when the episode ended on this day.
    pub fn advance_one_day(&mut self, params: &EnvParams) -> Result<bool, EnvError> {
        self.ensure_running(params)?;
        let balance = self.food - params.consumption;
        self.food = match self.spoil_rng.as_mut() {
            None => balance * (1.0 - params.spoilage),
            Some(rng) => {
                if balance > 0.0 && rng.random::<f64>() < params.spoilage {
                    0.0
                } else {
                    balance
                }
            }
        };
        self.day += 1;
        if balance < 0.0 {
            self.alive = false;
            self.cause = Some(TerminalCause::Starved);
            return Ok(true);
        }
        if self.day >= params.horizon {
            self.alive = false;
            self.cause = Some(TerminalCause::HorizonReached);
            return Ok(true);
        }
        Ok(false)
    }

    /// Applies one action and returns its reward and termination status.
    pub fn step(&mut self, params: &EnvParams, action: Action) -> Result<StepOutcome, EnvError> {
        self.ensure_running(params)?;
        let start_day = self.day;
        let duration = params.duration(action);
        let mut terminal = false;
        for _ in 0..duration {
            terminal = self.advance_one_day(params)?;
            if terminal {
                break;
            }
        }
        let days_elapsed = self.day - start_day;
        let starved = self.cause == Some(TerminalCause::Starved);
        let completed = !starved && days_elapsed == duration;

        let mut reward = 0.0;
        if completed {
            match action {
                Action::Hunt => {
                    self.food += effective_yield(params, self.skill, self.culture);
                }
                Action::Invest => self.skill += params.skill_increment,
                Action::Culture => {
                    self.culture += 1.0;
                    reward += params.culture_reward;
                }
            }
        }
        if starved {
            reward += params.starvation_penalty;
        }
        Ok(StepOutcome {
            reward,
            days_elapsed,
            terminal,
            cause: self.cause,
        })
    }

    /// Network input for this state.
    pub fn observe(&self, params: &EnvParams) -> Observation {
        let horizon = f64::from(params.horizon.max(1));
        let (skill, culture) = match params.observation_scaling {
            ObservationScaling::Scaled => (0.1 * self.skill, self.culture / horizon),
            ObservationScaling::Raw => (self.skill, self.culture),
        };
        let remaining = f64::from(params.horizon.saturating_sub(self.day)) / horizon;
        Observation([
            self.food / params.requirement,
            skill,
            culture,
            remaining,
            params.yield_base / params.yield_norm,
            params.spoilage,
        ])
    }
}

/// `(food / F, skill, complexity, remaining fraction, Y / yield_norm, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}
