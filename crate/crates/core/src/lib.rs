//! Ultra-dense network simulator and multi-agent Q-learning for joint
//! user-AP association and subcarrier allocation.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision for the common cases.

pub mod association;
pub mod baselines;
pub mod config;
pub mod dqn;
pub mod env;
pub mod experiments;
pub mod geometry;
pub mod link_rate;
pub mod scalar;
pub mod tabular;

pub use association::{ActionOutcome, AssociationState, RejectReason, UserAction, Violation};
pub use baselines::{brute_force_optimum, max_rsrp_policy, random_policy, PolicyVerdict};
pub use config::ExperimentConfig;
pub use dqn::{QNetwork, TrainConfig};
pub use env::{discounted_return, Env, EnvConfig, EnvState, StepResult};
pub use geometry::{generate_topology, ChannelModel, DropParams, PathlossParams, Topology};
pub use link_rate::{InterferenceMode, LinkMetrics, RadioParams};
pub use scalar::Scalar;
pub use tabular::QTable;

pub type Topology64 = Topology<f64>;
pub type Topology32 = Topology<f32>;
pub type Env64 = Env<f64>;
pub type Env32 = Env<f32>;
pub type EnvConfig64 = EnvConfig<f64>;
pub type EnvConfig32 = EnvConfig<f32>;
pub type QNetwork64 = QNetwork<f64>;
pub type QNetwork32 = QNetwork<f32>;
pub type QTable64 = QTable<f64>;
pub type LinkMetrics64 = LinkMetrics<f64>;
