use ndarray::Axis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::QNetwork;
use super::replay::{ReplayMemory, Transition};
use super::rmsprop::RmsProp;
use super::DqnError;
use crate::association::UserAction;
use crate::env::Env;
use crate::scalar::Scalar;
use crate::tabular::{argmax, linear_epsilon};

/// Hyperparameters of the multi-agent DQN loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Target network sync period in environment steps.
    pub target_sync: usize,
    pub minibatch: usize,
    pub replay_capacity: usize,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub hidden: Vec<usize>,
    /// Rewards are multiplied by this before entering replay (bits/s to Mbps).
    pub reward_scale: f64,
    /// Closing steps of the final episode averaged into the reported throughput.
    pub eval_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            discount: 0.9,
            epsilon_start: 0.99,
            epsilon_end: 1e-4,
            episodes: 400,
            steps_per_episode: 500,
            target_sync: 100,
            minibatch: 32,
            replay_capacity: 10_000,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            hidden: vec![100, 200, 50],
            reward_scale: 1e-6,
            eval_window: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DqnError> {
        let bad = |msg: &str| Err(DqnError::Config(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon endpoints must lie in [0, 1]");
        }
        if self.epsilon_end > self.epsilon_start {
            return bad("epsilon must not increase");
        }
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return bad("episodes and steps_per_episode must be positive");
        }
        if self.target_sync == 0 || self.minibatch == 0 || self.replay_capacity == 0 {
            return bad("target_sync, minibatch and replay_capacity must be positive");
        }
        if !(0.0..1.0).contains(&self.rms_decay) || !(self.rms_epsilon > 0.0) {
            return bad("rms_decay must lie in [0, 1) and rms_epsilon be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be positive");
        }
        if self.eval_window == 0 || self.eval_window > self.steps_per_episode {
            return bad("eval_window must lie in 1..=steps_per_episode");
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        linear_epsilon(self.epsilon_start, self.epsilon_end, episode, self.episodes)
    }
}

/// `u + gamma max_a' Q(s', a'; theta^-)`. No terminal cut-off.
pub fn td_target<T: Scalar>(reward: T, next_q: &[T], gamma: T) -> T {
    let best = next_q.iter().copied().fold(T::neg_infinity(), T::max);
    reward + gamma * best
}

/// One learner: evaluated and target networks, optimizer and memory.
#[derive(Debug, Clone)]
pub struct Agent<T> {
    pub online: QNetwork<T>,
    pub target: QNetwork<T>,
    pub optimizer: RmsProp<T>,
    pub memory: ReplayMemory<T>,
}

impl<T: Scalar> Agent<T> {
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        config: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self, DqnError> {
        let online = QNetwork::new(sizes, rng)?;
        Ok(Self::from_network(online, config))
    }

    pub fn from_network(online: QNetwork<T>, config: &TrainConfig) -> Self {
        let target = online.clone();
        let optimizer = RmsProp::new(
            &online,
            T::of(config.learning_rate),
            T::of(config.rms_decay),
            T::of(config.rms_epsilon),
        );
        let memory = ReplayMemory::new(config.replay_capacity, online.input_dim());
        Self {
            online,
            target,
            optimizer,
            memory,
        }
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        features: &[T],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize, DqnError> {
        if rng.random::<f64>() < epsilon {
            Ok(rng.random_range(0..self.online.output_dim()))
        } else {
            Ok(argmax(&self.online.forward(features)?))
        }
    }

    /// Samples a minibatch, bootstraps targets from the target network and
    /// takes one optimizer step. Returns the loss.
    pub fn learn<R: Rng + ?Sized>(
        &mut self,
        minibatch: usize,
        gamma: T,
        rng: &mut R,
    ) -> Result<T, DqnError> {
        let batch = self.memory.sample(minibatch, rng);
        let next_q = self.target.forward_batch(batch.next_states.view())?;
        let targets: Vec<T> = next_q
            .axis_iter(Axis(0))
            .zip(&batch.rewards)
            .map(|(row, &u)| td_target(u, row.as_slice().expect("row-major"), gamma))
            .collect();
        let (loss, grads) =
            self.online
                .loss_and_gradients(batch.states.view(), &batch.actions, &targets)?;
        self.optimizer.step(&mut self.online, &grads);
        Ok(loss)
    }

    /// Copies online parameters into the target network if they are all
    /// finite. Returns whether the sync happened.
    pub fn sync_target(&mut self) -> bool {
        if self.online.is_finite() {
            self.target.copy_from(&self.online);
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub agents: Vec<Agent<T>>,
    /// Summed unscaled reward (bits/s) of each episode.
    pub episode_rewards: Vec<T>,
    /// Mean per-step utility over the last `eval_window` steps of the
    /// final episode, bits/s.
    pub final_utility: T,
    /// Per-user rates averaged over the same window.
    pub final_user_rates: Vec<T>,
    /// Syncs skipped because an online network held non-finite values.
    pub skipped_syncs: usize,
    pub total_steps: usize,
}

/// Multi-agent DQN training on a single drop.
///
/// Per step every user acts epsilon-greedily on its own network, the joint
/// action is applied, each user stores its transition, samples a minibatch
/// from its memory and descends the squared TD error. Target networks are
/// synced every `target_sync` steps.
pub fn train<T: Scalar>(
    env: &mut Env<T>,
    config: &TrainConfig,
    seed: u64,
    initial: Option<Vec<QNetwork<T>>>,
) -> Result<TrainOutcome<T>, DqnError> {
    config.validate()?;
    let n = env.num_users();
    let num_aps = env.topology().num_aps();
    let l = env.config().num_subcarriers;
    let mut sizes = vec![n];
    sizes.extend(&config.hidden);
    sizes.push(num_aps * l);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = match initial {
        Some(nets) => {
            if nets.len() != n {
                return Err(DqnError::Config(format!(
                    "{} initial networks for {n} users",
                    nets.len()
                )));
            }
            if let Some(bad) = nets.iter().find(|q| q.sizes() != sizes) {
                return Err(DqnError::Config(format!(
                    "initial network has layers {:?}, expected {sizes:?}",
                    bad.sizes()
                )));
            }
            nets.into_iter()
                .map(|q| Agent::from_network(q, config))
                .collect()
        }
        None => (0..n)
            .map(|_| Agent::new(&sizes, config, &mut rng))
            .collect::<Result<Vec<_>, _>>()?,
    };

    let gamma = T::of(config.discount);
    let scale = T::of(config.reward_scale);
    let mut episode_rewards = Vec::with_capacity(config.episodes);
    let mut flat = vec![0usize; n];
    let mut joint = vec![UserAction::new(0, 0); n];
    let mut total_steps = 0usize;
    let mut skipped_syncs = 0usize;
    let mut window_utility = T::zero();
    let mut window_rates = vec![T::zero(); n];
    let window_start = config.steps_per_episode - config.eval_window;

    for episode in 0..config.episodes {
        let epsilon = config.epsilon(episode);
        let last_episode = episode + 1 == config.episodes;
        let mut state = env.reset();
        let mut sum = T::zero();
        for step in 0..config.steps_per_episode {
            let features = state.features::<T>();
            for (i, agent) in agents.iter().enumerate() {
                flat[i] = agent.act(&features, epsilon, &mut rng)?;
                joint[i] = UserAction::from_flat(flat[i], num_aps, l)
                    .map_err(|e| DqnError::Env(e.into()))?;
            }
            let result = env.step(&joint)?;
            let (s, s_next) = (state.key(), result.next_state.key());
            let u = result.reward * scale;
            for (i, agent) in agents.iter_mut().enumerate() {
                agent.memory.push(Transition {
                    state: s,
                    action: flat[i],
                    reward: u,
                    next_state: s_next,
                });
                agent.learn(config.minibatch, gamma, &mut rng)?;
            }
            total_steps += 1;
            if total_steps % config.target_sync == 0 {
                for agent in &mut agents {
                    if !agent.sync_target() {
                        skipped_syncs += 1;
                        log::warn!("non-finite parameters at step {total_steps}; target sync skipped");
                    }
                }
            }
            sum += result.reward;
            if last_episode && step >= window_start {
                window_utility += result.reward;
                for (acc, &r) in window_rates.iter_mut().zip(&result.per_user_rates) {
                    *acc += r;
                }
            }
            state = result.next_state;
        }
        log::debug!("episode {episode}: reward {sum} (epsilon {epsilon:.4})");
        episode_rewards.push(sum);
    }

    let w = T::of(config.eval_window as f64);
    Ok(TrainOutcome {
        agents,
        episode_rewards,
        final_utility: window_utility / w,
        final_user_rates: window_rates.into_iter().map(|r| r / w).collect(),
        skipped_syncs,
        total_steps,
    })
}
