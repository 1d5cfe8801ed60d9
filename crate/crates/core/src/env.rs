//! The multi-agent environment: QoS-bit observations, simultaneous
//! application of one action per user, and the shared utility reward.

use thiserror::Error;

use crate::association::{ActionOutcome, AssociationError, AssociationState, UserAction};
use crate::geometry::Topology;
use crate::link_rate::{LinkMetrics, RadioParams};
use crate::scalar::Scalar;

/// Default episode length in steps.
pub const DEFAULT_EPISODE_STEPS: usize = 500;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("joint action has {got} entries, expected one per user ({expected})")]
    Arity { expected: usize, got: usize },
    #[error("at most 64 users are supported by the packed state key (got {0})")]
    TooManyUsers(usize),
    #[error(transparent)]
    Association(#[from] AssociationError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig<T> {
    pub num_subcarriers: usize,
    pub k_max: usize,
    pub f_max: usize,
    pub radio: RadioParams<T>,
    /// Minimum rate in bits/s for a user's QoS bit to be set.
    pub r_qos: T,
}

/// Observation shared by all agents plus the association behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvState {
    pub qos_bits: Vec<bool>,
    pub association: AssociationState,
    pub step_index: usize,
}

impl EnvState {
    /// The QoS vector packed into an integer, user 0 in the lowest bit.
    pub fn key(&self) -> u64 {
        pack_bits(&self.qos_bits)
    }

    /// The QoS vector as network input.
    pub fn features<T: Scalar>(&self) -> Vec<T> {
        self.qos_bits
            .iter()
            .map(|&b| if b { T::one() } else { T::zero() })
            .collect()
    }
}

pub fn pack_bits(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<T> {
    pub next_state: EnvState,
    /// Network utility of the resulting state in bits/s.
    pub reward: T,
    pub per_user_rates: Vec<T>,
    pub outcomes: Vec<ActionOutcome>,
}

#[derive(Debug, Clone)]
pub struct Env<T> {
    topology: Topology<T>,
    config: EnvConfig<T>,
    state: EnvState,
}

impl<T: Scalar> Env<T> {
    pub fn new(topology: Topology<T>, config: EnvConfig<T>) -> Result<Self, EnvError> {
        if topology.num_users() > 64 {
            return Err(EnvError::TooManyUsers(topology.num_users()));
        }
        let state = initial_state(&topology, &config)?;
        Ok(Self {
            topology,
            config,
            state,
        })
    }

    pub fn topology(&self) -> &Topology<T> {
        &self.topology
    }

    pub fn config(&self) -> &EnvConfig<T> {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn num_users(&self) -> usize {
        self.topology.num_users()
    }

    pub fn num_actions(&self) -> usize {
        self.topology.num_aps() * self.config.num_subcarriers
    }

    /// Empty association, all QoS bits clear, step counter at zero.
    pub fn reset(&mut self) -> EnvState {
        self.state = initial_state(&self.topology, &self.config)
            .expect("configuration was validated in Env::new");
        self.state.clone()
    }

    /// Successor of `state` under `joint_action`, without touching `self`.
    /// Actions are applied in user-index order.
    pub fn transition(
        &self,
        state: &EnvState,
        joint_action: &[UserAction],
    ) -> Result<StepResult<T>, EnvError> {
        let n = self.num_users();
        if joint_action.len() != n {
            return Err(EnvError::Arity {
                expected: n,
                got: joint_action.len(),
            });
        }
        let mut association = state.association.clone();
        let outcomes = joint_action
            .iter()
            .enumerate()
            .map(|(user, &a)| association.apply_action(user, a, &self.topology))
            .collect::<Result<Vec<_>, _>>()?;
        let metrics = LinkMetrics::compute(&self.topology, &association, &self.config.radio);
        let qos_bits = metrics
            .user_rates
            .iter()
            .map(|&r| r >= self.config.r_qos)
            .collect();
        Ok(StepResult {
            next_state: EnvState {
                qos_bits,
                association,
                step_index: state.step_index + 1,
            },
            reward: metrics.network_utility,
            per_user_rates: metrics.user_rates,
            outcomes,
        })
    }

    pub fn step(&mut self, joint_action: &[UserAction]) -> Result<StepResult<T>, EnvError> {
        let result = self.transition(&self.state, joint_action)?;
        self.state = result.next_state.clone();
        Ok(result)
    }

    /// Network utility of an arbitrary association on this topology.
    pub fn utility_of(&self, association: &AssociationState) -> T {
        LinkMetrics::compute(&self.topology, association, &self.config.radio).network_utility
    }
}

fn initial_state<T: Scalar>(
    topology: &Topology<T>,
    config: &EnvConfig<T>,
) -> Result<EnvState, EnvError> {
    let association = AssociationState::new(
        topology.num_users(),
        topology.num_aps(),
        config.num_subcarriers,
        config.k_max,
        config.f_max,
    )?;
    Ok(EnvState {
        qos_bits: vec![false; topology.num_users()],
        association,
        step_index: 0,
    })
}

/// `sum_{t>=1} gamma^t u_t`; the first reward is already discounted once.
pub fn discounted_return<T: Scalar>(rewards: &[T], gamma: T) -> T {
    let mut weight = T::one();
    let mut total = T::zero();
    for &u in rewards {
        weight *= gamma;
        total += weight * u;
    }
    total
}
