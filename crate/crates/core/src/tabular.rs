//! Independent tabular Q-learners sharing the team reward. Only practical on
//! tiny networks; serves as a reference for the deep variant.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::association::UserAction;
use crate::env::{Env, EnvError, StepResult};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum TabularError {
    #[error("invalid hyperparameter {name}: {reason}")]
    Hyper {
        name: &'static str,
        reason: &'static str,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Q-values keyed by packed QoS state and flat action. Missing entries
/// read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    values: HashMap<u64, Vec<T>>,
    num_actions: usize,
    pub learning_rate: T,
    pub discount: T,
    pub epsilon: T,
}

impl<T: Scalar> QTable<T> {
    pub fn new(
        num_actions: usize,
        learning_rate: T,
        discount: T,
        epsilon: T,
    ) -> Result<Self, TabularError> {
        if num_actions == 0 {
            return Err(TabularError::Hyper {
                name: "num_actions",
                reason: "must be positive",
            });
        }
        if !(learning_rate > T::zero() && learning_rate <= T::one()) {
            return Err(TabularError::Hyper {
                name: "learning_rate",
                reason: "must lie in (0, 1]",
            });
        }
        if !(discount >= T::zero() && discount < T::one()) {
            return Err(TabularError::Hyper {
                name: "discount",
                reason: "must lie in [0, 1)",
            });
        }
        if !(epsilon >= T::zero() && epsilon <= T::one()) {
            return Err(TabularError::Hyper {
                name: "epsilon",
                reason: "must lie in [0, 1]",
            });
        }
        Ok(Self {
            values: HashMap::new(),
            num_actions,
            learning_rate,
            discount,
            epsilon,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, state: u64, action: usize) -> T {
        self.values
            .get(&state)
            .map_or(T::zero(), |row| row[action])
    }

    pub fn set(&mut self, state: u64, action: usize, value: T) {
        let n = self.num_actions;
        self.values
            .entry(state)
            .or_insert_with(|| vec![T::zero(); n])[action] = value;
    }

    pub fn max_value(&self, state: u64) -> T {
        match self.values.get(&state) {
            Some(row) => row.iter().copied().fold(T::neg_infinity(), T::max),
            None => T::zero(),
        }
    }

    /// Lowest-index argmax of `Q(state, .)`.
    pub fn greedy(&self, state: u64) -> usize {
        match self.values.get(&state) {
            Some(row) => argmax(row),
            None => 0,
        }
    }

    /// `Q(s,a) += alpha [u + gamma max_a' Q(s',a') - Q(s,a)]`.
    pub fn q_update(&mut self, state: u64, action: usize, reward: T, next_state: u64) {
        let target = reward + self.discount * self.max_value(next_state);
        let q = self.get(state, action);
        self.set(state, action, q + self.learning_rate * (target - q));
    }

    pub fn epsilon_greedy<R: Rng + ?Sized>(&self, state: u64, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.epsilon.as_f64() {
            rng.random_range(0..self.num_actions)
        } else {
            self.greedy(state)
        }
    }

    pub fn visited_states(&self) -> usize {
        self.values.len()
    }
}

/// First index of the maximum; NaN entries never win.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Rewards are multiplied by this before entering the tables.
    pub reward_scale: f64,
    /// Steps of the closing greedy rollout averaged for the reported utility.
    pub eval_window: usize,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            episodes: 2500,
            steps_per_episode: 20,
            learning_rate: 0.1,
            discount: 0.9,
            epsilon_start: 0.99,
            epsilon_end: 0.01,
            reward_scale: 1e-6,
            eval_window: 50,
        }
    }
}

/// Linear interpolation of epsilon over episodes, inclusive of both ends.
pub fn linear_epsilon(start: f64, end: f64, episode: usize, episodes: usize) -> f64 {
    if episodes <= 1 {
        return start;
    }
    start + (end - start) * episode as f64 / (episodes - 1) as f64
}

#[derive(Debug, Clone)]
pub struct TabularOutcome<T> {
    pub tables: Vec<QTable<T>>,
    /// Summed unscaled reward of every episode.
    pub episode_rewards: Vec<T>,
    /// Mean utility over the last `eval_window` steps of a greedy rollout.
    pub greedy_utility: T,
    /// Per-user rates averaged over the same window.
    pub greedy_user_rates: Vec<T>,
    pub total_steps: usize,
}

/// Trains one table per user on `env` with a shared team reward.
pub fn train_tabular<T: Scalar>(
    env: &mut Env<T>,
    config: &TabularConfig,
    seed: u64,
) -> Result<TabularOutcome<T>, TabularError> {
    let n = env.num_users();
    let num_aps = env.topology().num_aps();
    let l = env.config().num_subcarriers;
    let mut tables = (0..n)
        .map(|_| {
            QTable::new(
                num_aps * l,
                T::of(config.learning_rate),
                T::of(config.discount),
                T::of(config.epsilon_start),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = T::of(config.reward_scale);
    let mut episode_rewards = Vec::with_capacity(config.episodes);
    let mut total_steps = 0;
    let mut flat = vec![0usize; n];
    let mut joint = vec![UserAction::new(0, 0); n];

    for episode in 0..config.episodes {
        let eps = T::of(linear_epsilon(
            config.epsilon_start,
            config.epsilon_end,
            episode,
            config.episodes,
        ));
        for t in tables.iter_mut() {
            t.epsilon = eps;
        }
        let mut state = env.reset().key();
        let mut sum = T::zero();
        for _ in 0..config.steps_per_episode {
            for (i, table) in tables.iter().enumerate() {
                flat[i] = table.epsilon_greedy(state, &mut rng);
                joint[i] = UserAction::from_flat(flat[i], num_aps, l).map_err(EnvError::from)?;
            }
            let result = env.step(&joint)?;
            let next = result.next_state.key();
            let u = result.reward * scale;
            for (i, table) in tables.iter_mut().enumerate() {
                table.q_update(state, flat[i], u, next);
            }
            state = next;
            sum += result.reward;
            total_steps += 1;
        }
        episode_rewards.push(sum);
    }

    let window = config.eval_window.max(1);
    let trace = greedy_rollout(env, &tables, window * 2)?;
    let tail = &trace[window..];
    let w = T::of(window as f64);
    let greedy_utility = tail.iter().map(|r| r.reward).sum::<T>() / w;
    let greedy_user_rates = (0..n)
        .map(|i| tail.iter().map(|r| r.per_user_rates[i]).sum::<T>() / w)
        .collect();
    Ok(TabularOutcome {
        tables,
        episode_rewards,
        greedy_utility,
        greedy_user_rates,
        total_steps,
    })
}

/// Step results of the purely greedy joint policy from a reset.
pub fn greedy_rollout<T: Scalar>(
    env: &mut Env<T>,
    tables: &[QTable<T>],
    steps: usize,
) -> Result<Vec<StepResult<T>>, EnvError> {
    let num_aps = env.topology().num_aps();
    let l = env.config().num_subcarriers;
    let mut state = env.reset().key();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let joint = tables
            .iter()
            .map(|t| UserAction::from_flat(t.greedy(state), num_aps, l))
            .collect::<Result<Vec<_>, _>>()?;
        let r = env.step(&joint)?;
        state = r.next_state.key();
        out.push(r);
    }
    Ok(out)
}
