//! Scenario configuration and its flat `key=value` text form.
//!
//! Every field has a key; [`ExperimentConfig::to_kv_string`] writes all of
//! them and [`ExperimentConfig::parse_kv`] reads them back onto the
//! defaults. Lines starting with `#` and blank lines are ignored.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::dqn::TrainConfig;
use crate::env::EnvConfig;
use crate::geometry::{dbm_to_watts, noise_power, ChannelModel, DropParams, DEFAULT_MAX_REDROPS};
use crate::link_rate::{InterferenceMode, RadioParams};
use crate::scalar::Scalar;
use crate::tabular::TabularConfig;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("config field '{field}': {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Floating-point precision used for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            other => Err(format!("unknown precision '{other}' (expected f32 or f64)")),
        }
    }
}

/// Methods that can be run on a drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Madqn,
    Tabular,
    MaxRsrp,
    Random,
    BruteForce,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Madqn,
        Method::Tabular,
        Method::MaxRsrp,
        Method::Random,
        Method::BruteForce,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Madqn => "madqn",
            Method::Tabular => "tabular",
            Method::MaxRsrp => "max_rsrp",
            Method::Random => "random",
            Method::BruteForce => "brute_force",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

/// AP counts used when sweeping the number of APs.
pub const AP_GRID: [usize; 2] = [5, 10];
/// `(k, f)` pairs used when sweeping connectivity.
pub const KF_GRID: [(usize, usize); 3] = [(1, 1), (2, 2), (4, 4)];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Label only; the pathloss constants already correspond to 28 GHz.
    pub carrier_ghz: f64,
    pub num_subcarriers: usize,
    pub subcarrier_bandwidth_hz: f64,
    pub num_aps: usize,
    pub num_users: usize,
    pub user_counts: Vec<usize>,
    pub ap_counts: Vec<usize>,
    pub kf_pairs: Vec<(usize, usize)>,
    pub area_side_m: f64,
    pub radius_m: f64,
    pub p_ap_dbm: f64,
    pub antenna_gain_dbi: f64,
    pub k_max: usize,
    pub f_max: usize,
    pub noise_density_dbm_hz: f64,
    pub r_qos_bps: f64,
    pub los_probability: f64,
    pub interference: InterferenceMode,
    pub max_redrops: usize,
    pub train: TrainConfig,
    pub tabular_episodes: usize,
    pub tabular_steps_per_episode: usize,
    pub tabular_learning_rate: f64,
    pub tabular_epsilon_end: f64,
    pub drops: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub precision: Precision,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: 28.0,
            num_subcarriers: 4,
            subcarrier_bandwidth_hz: 180_000.0,
            num_aps: 10,
            num_users: 10,
            user_counts: vec![2, 4, 6, 8, 10],
            ap_counts: vec![10],
            kf_pairs: vec![(4, 4)],
            area_side_m: 50.0,
            radius_m: 15.0,
            p_ap_dbm: 23.0,
            antenna_gain_dbi: 5.0,
            k_max: 4,
            f_max: 4,
            noise_density_dbm_hz: -174.0,
            r_qos_bps: 2e6,
            los_probability: 0.5,
            interference: InterferenceMode::CoSubcarrier,
            max_redrops: DEFAULT_MAX_REDROPS,
            train: TrainConfig::default(),
            tabular_episodes: 2500,
            tabular_steps_per_episode: 20,
            tabular_learning_rate: 0.1,
            tabular_epsilon_end: 0.01,
            drops: 50,
            seed: 1,
            methods: vec![Method::Madqn, Method::MaxRsrp],
            precision: Precision::F32,
            threads: 0,
        }
    }
}

/// Every configuration key with a short description.
pub const KEYS: &[(&str, &str)] = &[
    ("carrier_ghz", "carrier frequency label in GHz"),
    ("num_subcarriers", "subcarriers L"),
    ("subcarrier_bandwidth_hz", "subcarrier bandwidth W in Hz"),
    ("num_aps", "APs M for single-scenario commands"),
    ("num_users", "users N for single-scenario commands"),
    ("user_counts", "comma-separated user counts swept"),
    ("ap_counts", "comma-separated AP counts swept"),
    ("kf_pairs", "comma-separated k:f pairs swept"),
    ("area_side_m", "side of the square area in meters"),
    ("radius_m", "AP coverage radius in meters"),
    ("p_ap_dbm", "AP transmit power in dBm"),
    ("antenna_gain_dbi", "antenna gain in dBi"),
    ("k_max", "max APs per user k"),
    ("f_max", "max users per AP f"),
    ("noise_density_dbm_hz", "noise power density in dBm/Hz"),
    ("r_qos_bps", "QoS rate threshold in bits/s"),
    ("los_probability", "per-link LOS probability"),
    ("interference", "co-subcarrier | all-aps"),
    ("max_redrops", "re-drop bound for uncovered users"),
    ("learning_rate", "DQN learning rate"),
    ("discount", "discount factor gamma"),
    ("epsilon_start", "initial exploration rate"),
    ("epsilon_end", "final exploration rate"),
    ("episodes", "training episodes"),
    ("steps_per_episode", "steps per episode"),
    ("target_sync", "target network sync period in steps"),
    ("minibatch", "minibatch size"),
    ("replay_capacity", "replay memory capacity"),
    ("rms_decay", "RMSProp decay rho"),
    ("rms_epsilon", "RMSProp stabilizer delta"),
    ("hidden", "comma-separated hidden layer widths"),
    ("reward_scale", "reward multiplier fed to learners"),
    ("eval_window", "final-episode steps averaged for throughput"),
    ("tabular_episodes", "tabular training episodes"),
    ("tabular_steps_per_episode", "tabular steps per episode"),
    ("tabular_learning_rate", "tabular Q-learning rate"),
    ("tabular_epsilon_end", "tabular final exploration rate"),
    ("drops", "independent topologies per scenario"),
    ("seed", "base random seed"),
    ("methods", "comma-separated methods: madqn,tabular,max_rsrp,random,brute_force"),
    ("precision", "f32 | f64"),
    ("threads", "worker threads (0 = automatic)"),
];

fn parse_one<V: FromStr>(key: &str, value: &str) -> Result<V, ConfigError>
where
    V::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e: V::Err| ConfigError::new(key, format!("cannot parse '{value}': {e}")))
}

fn parse_list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>, ConfigError>
where
    V::Err: std::fmt::Display,
{
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

fn join<V: ToString>(items: &[V]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Reduced profile for quick runs: 10 drops, 100 episodes of 100 steps.
    pub fn apply_fast(&mut self) {
        self.drops = 10;
        self.train.episodes = 100;
        self.train.steps_per_episode = 100;
        self.train.eval_window = self.train.eval_window.min(100);
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "carrier_ghz" => self.carrier_ghz = parse_one(key, v)?,
            "num_subcarriers" => self.num_subcarriers = parse_one(key, v)?,
            "subcarrier_bandwidth_hz" => self.subcarrier_bandwidth_hz = parse_one(key, v)?,
            "num_aps" => self.num_aps = parse_one(key, v)?,
            "num_users" => self.num_users = parse_one(key, v)?,
            "user_counts" => self.user_counts = parse_list(key, v)?,
            "ap_counts" => self.ap_counts = parse_list(key, v)?,
            "kf_pairs" => {
                self.kf_pairs = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|pair| {
                        let (k, f) = pair.split_once(':').ok_or_else(|| {
                            ConfigError::new(key, format!("'{pair}' is not of the form k:f"))
                        })?;
                        Ok((parse_one(key, k)?, parse_one(key, f)?))
                    })
                    .collect::<Result<_, ConfigError>>()?
            }
            "area_side_m" => self.area_side_m = parse_one(key, v)?,
            "radius_m" => self.radius_m = parse_one(key, v)?,
            "p_ap_dbm" => self.p_ap_dbm = parse_one(key, v)?,
            "antenna_gain_dbi" => self.antenna_gain_dbi = parse_one(key, v)?,
            "k_max" => self.k_max = parse_one(key, v)?,
            "f_max" => self.f_max = parse_one(key, v)?,
            "noise_density_dbm_hz" => self.noise_density_dbm_hz = parse_one(key, v)?,
            "r_qos_bps" => self.r_qos_bps = parse_one(key, v)?,
            "los_probability" => self.los_probability = parse_one(key, v)?,
            "interference" => self.interference = parse_one(key, v)?,
            "max_redrops" => self.max_redrops = parse_one(key, v)?,
            "learning_rate" => self.train.learning_rate = parse_one(key, v)?,
            "discount" => self.train.discount = parse_one(key, v)?,
            "epsilon_start" => self.train.epsilon_start = parse_one(key, v)?,
            "epsilon_end" => self.train.epsilon_end = parse_one(key, v)?,
            "episodes" => self.train.episodes = parse_one(key, v)?,
            "steps_per_episode" => self.train.steps_per_episode = parse_one(key, v)?,
            "target_sync" => self.train.target_sync = parse_one(key, v)?,
            "minibatch" => self.train.minibatch = parse_one(key, v)?,
            "replay_capacity" => self.train.replay_capacity = parse_one(key, v)?,
            "rms_decay" => self.train.rms_decay = parse_one(key, v)?,
            "rms_epsilon" => self.train.rms_epsilon = parse_one(key, v)?,
            "hidden" => self.train.hidden = parse_list(key, v)?,
            "reward_scale" => self.train.reward_scale = parse_one(key, v)?,
            "eval_window" => self.train.eval_window = parse_one(key, v)?,
            "tabular_episodes" => self.tabular_episodes = parse_one(key, v)?,
            "tabular_steps_per_episode" => self.tabular_steps_per_episode = parse_one(key, v)?,
            "tabular_learning_rate" => self.tabular_learning_rate = parse_one(key, v)?,
            "tabular_epsilon_end" => self.tabular_epsilon_end = parse_one(key, v)?,
            "drops" => self.drops = parse_one(key, v)?,
            "seed" => self.seed = parse_one(key, v)?,
            "methods" => self.methods = parse_list(key, v)?,
            "precision" => self.precision = parse_one(key, v)?,
            "threads" => self.threads = parse_one(key, v)?,
            other => return Err(ConfigError::new(other, "unknown key")),
        }
        Ok(())
    }

    /// Current value of `key` in its text form.
    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        Some(match key {
            "carrier_ghz" => self.carrier_ghz.to_string(),
            "num_subcarriers" => self.num_subcarriers.to_string(),
            "subcarrier_bandwidth_hz" => self.subcarrier_bandwidth_hz.to_string(),
            "num_aps" => self.num_aps.to_string(),
            "num_users" => self.num_users.to_string(),
            "user_counts" => join(&self.user_counts),
            "ap_counts" => join(&self.ap_counts),
            "kf_pairs" => self
                .kf_pairs
                .iter()
                .map(|(k, f)| format!("{k}:{f}"))
                .collect::<Vec<_>>()
                .join(","),
            "area_side_m" => self.area_side_m.to_string(),
            "radius_m" => self.radius_m.to_string(),
            "p_ap_dbm" => self.p_ap_dbm.to_string(),
            "antenna_gain_dbi" => self.antenna_gain_dbi.to_string(),
            "k_max" => self.k_max.to_string(),
            "f_max" => self.f_max.to_string(),
            "noise_density_dbm_hz" => self.noise_density_dbm_hz.to_string(),
            "r_qos_bps" => self.r_qos_bps.to_string(),
            "los_probability" => self.los_probability.to_string(),
            "interference" => self.interference.as_str().to_string(),
            "max_redrops" => self.max_redrops.to_string(),
            "learning_rate" => t.learning_rate.to_string(),
            "discount" => t.discount.to_string(),
            "epsilon_start" => t.epsilon_start.to_string(),
            "epsilon_end" => t.epsilon_end.to_string(),
            "episodes" => t.episodes.to_string(),
            "steps_per_episode" => t.steps_per_episode.to_string(),
            "target_sync" => t.target_sync.to_string(),
            "minibatch" => t.minibatch.to_string(),
            "replay_capacity" => t.replay_capacity.to_string(),
            "rms_decay" => t.rms_decay.to_string(),
            "rms_epsilon" => t.rms_epsilon.to_string(),
            "hidden" => join(&t.hidden),
            "reward_scale" => t.reward_scale.to_string(),
            "eval_window" => t.eval_window.to_string(),
            "tabular_episodes" => self.tabular_episodes.to_string(),
            "tabular_steps_per_episode" => self.tabular_steps_per_episode.to_string(),
            "tabular_learning_rate" => self.tabular_learning_rate.to_string(),
            "tabular_epsilon_end" => self.tabular_epsilon_end.to_string(),
            "drops" => self.drops.to_string(),
            "seed" => self.seed.to_string(),
            "methods" => self
                .methods
                .iter()
                .map(Method::as_str)
                .collect::<Vec<_>>()
                .join(","),
            "precision" => self.precision.as_str().to_string(),
            "threads" => self.threads.to_string(),
            _ => return None,
        })
    }

    /// Applies `key=value` lines onto `self`.
    pub fn apply_kv(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::new(
                    format!("line {}", lineno + 1),
                    format!("expected key=value, got '{line}'"),
                )
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn parse_kv(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            let value = self.get(key).expect("every listed key has a value");
            writeln!(out, "{key}={value}").expect("writing to a String");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("must be positive (got {v})")))
            }
        }
        fn nonzero(key: &str, v: usize) -> Result<(), ConfigError> {
            if v > 0 {
                Ok(())
            } else {
                Err(ConfigError::new(key, "must be at least 1"))
            }
        }
        positive("carrier_ghz", self.carrier_ghz)?;
        nonzero("num_subcarriers", self.num_subcarriers)?;
        positive("subcarrier_bandwidth_hz", self.subcarrier_bandwidth_hz)?;
        nonzero("num_aps", self.num_aps)?;
        nonzero("num_users", self.num_users)?;
        for (key, list) in [("user_counts", &self.user_counts), ("ap_counts", &self.ap_counts)] {
            if list.is_empty() || list.contains(&0) {
                return Err(ConfigError::new(key, "must be a non-empty list of positive counts"));
            }
        }
        if self.user_counts.iter().chain([&self.num_users]).any(|&n| n > 64) {
            return Err(ConfigError::new("user_counts", "at most 64 users are supported"));
        }
        if self.kf_pairs.is_empty() || self.kf_pairs.iter().any(|&(k, f)| k == 0 || f == 0) {
            return Err(ConfigError::new("kf_pairs", "must be a non-empty list of positive k:f pairs"));
        }
        positive("area_side_m", self.area_side_m)?;
        if !(self.radius_m >= 0.0 && self.radius_m.is_finite()) {
            return Err(ConfigError::new("radius_m", "must be non-negative"));
        }
        if !self.p_ap_dbm.is_finite() {
            return Err(ConfigError::new("p_ap_dbm", "must be finite"));
        }
        if !self.antenna_gain_dbi.is_finite() {
            return Err(ConfigError::new("antenna_gain_dbi", "must be finite"));
        }
        nonzero("k_max", self.k_max)?;
        nonzero("f_max", self.f_max)?;
        if !self.noise_density_dbm_hz.is_finite() {
            return Err(ConfigError::new("noise_density_dbm_hz", "must be finite"));
        }
        if !(self.r_qos_bps >= 0.0 && self.r_qos_bps.is_finite()) {
            return Err(ConfigError::new("r_qos_bps", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.los_probability) {
            return Err(ConfigError::new("los_probability", "must lie in [0, 1]"));
        }
        self.train
            .validate()
            .map_err(|e| ConfigError::new("train", e.to_string()))?;
        if self.tabular_episodes == 0 {
            return Err(ConfigError::new("tabular_episodes", "must be positive"));
        }
        if self.tabular_steps_per_episode == 0 {
            return Err(ConfigError::new("tabular_steps_per_episode", "must be positive"));
        }
        if !(self.tabular_learning_rate > 0.0 && self.tabular_learning_rate <= 1.0) {
            return Err(ConfigError::new("tabular_learning_rate", "must lie in (0, 1]"));
        }
        if !(0.0..=self.train.epsilon_start).contains(&self.tabular_epsilon_end) {
            return Err(ConfigError::new(
                "tabular_epsilon_end",
                "must lie in [0, epsilon_start]",
            ));
        }
        nonzero("drops", self.drops)?;
        if self.methods.is_empty() {
            return Err(ConfigError::new("methods", "must name at least one method"));
        }
        Ok(())
    }

    pub fn drop_params<T: Scalar>(&self, num_aps: usize, num_users: usize) -> DropParams<T> {
        DropParams {
            num_aps,
            num_users,
            area_side: T::of(self.area_side_m),
            radius: T::of(self.radius_m),
            channel: ChannelModel {
                los_probability: T::of(self.los_probability),
                antenna_gain: T::of(self.antenna_gain_dbi),
                ..ChannelModel::default()
            },
            max_redrops: self.max_redrops,
        }
    }

    pub fn radio<T: Scalar>(&self) -> RadioParams<T> {
        RadioParams {
            p_ap: dbm_to_watts(T::of(self.p_ap_dbm)),
            noise: noise_power(
                T::of(self.noise_density_dbm_hz),
                T::of(self.subcarrier_bandwidth_hz),
            ),
            bandwidth: T::of(self.subcarrier_bandwidth_hz),
            interference: self.interference,
        }
    }

    pub fn env_config<T: Scalar>(&self, k_max: usize, f_max: usize) -> EnvConfig<T> {
        EnvConfig {
            num_subcarriers: self.num_subcarriers,
            k_max,
            f_max,
            radio: self.radio(),
            r_qos: T::of(self.r_qos_bps),
        }
    }

    pub fn tabular_config(&self) -> TabularConfig {
        TabularConfig {
            episodes: self.tabular_episodes,
            steps_per_episode: self.tabular_steps_per_episode,
            learning_rate: self.tabular_learning_rate,
            discount: self.train.discount,
            epsilon_start: self.train.epsilon_start,
            epsilon_end: self.tabular_epsilon_end,
            reward_scale: self.train.reward_scale,
            eval_window: self.train.eval_window,
        }
    }
}
