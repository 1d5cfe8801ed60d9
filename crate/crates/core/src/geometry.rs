//! Random drops of access points and users, and the mmWave link budget.
//!
//! A drop is static: positions, LOS/NLOS state and shadow fading are drawn
//! once and the resulting gain is used on every subcarrier of the link.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::scalar::Scalar;

/// Distances below this are clamped before taking the logarithm.
pub const MIN_DISTANCE_M: f64 = 0.1;

/// Default bound on re-drops of a single user without candidate APs.
pub const DEFAULT_MAX_REDROPS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("need at least one AP and one user (got M={num_aps}, N={num_users})")]
    EmptyNetwork { num_aps: usize, num_users: usize },
    #[error("area side must be positive and finite (got {0})")]
    BadArea(f64),
    #[error("coverage radius must be non-negative and finite (got {0})")]
    BadRadius(f64),
    #[error("invalid pathloss parameters: {0}")]
    BadPathloss(&'static str),
    #[error("user {user} has no AP within {radius} m after {attempts} re-drops")]
    Uncovered {
        user: usize,
        radius: f64,
        attempts: usize,
    },
    #[error("expected {expected} gains, got {got}")]
    GainShape { expected: usize, got: usize },
    #[error("gain for user {user}, AP {ap} is not strictly positive and finite")]
    BadGain { user: usize, ap: usize },
    #[error("distance must be positive (got {0})")]
    NonPositiveDistance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Log-distance pathloss `alpha + 10 beta log10(d) + xi`, `xi ~ N(0, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossParams<T> {
    /// Intercept in dB.
    pub alpha: T,
    /// Pathloss exponent.
    pub beta: T,
    /// Shadow-fading standard deviation in dB.
    pub sigma: T,
}

impl<T: Scalar> PathlossParams<T> {
    pub fn los() -> Self {
        Self {
            alpha: T::of(61.4),
            beta: T::of(2.0),
            sigma: T::of(5.8),
        }
    }

    pub fn nlos() -> Self {
        Self {
            alpha: T::of(72.0),
            beta: T::of(2.92),
            sigma: T::of(8.7),
        }
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        if !(self.beta > T::zero()) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(GeometryError::BadPathloss("beta must be positive"));
        }
        if !(self.sigma >= T::zero()) || !self.sigma.is_finite() {
            return Err(GeometryError::BadPathloss("sigma must be non-negative"));
        }
        Ok(())
    }
}

/// Per-link channel model: LOS and NLOS parameter sets mixed by a
/// per-link Bernoulli draw, plus the AP antenna gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel<T> {
    pub los: PathlossParams<T>,
    pub nlos: PathlossParams<T>,
    pub los_probability: T,
    /// dBi
    pub antenna_gain: T,
}

impl<T: Scalar> Default for ChannelModel<T> {
    fn default() -> Self {
        Self {
            los: PathlossParams::los(),
            nlos: PathlossParams::nlos(),
            los_probability: T::of(0.5),
            antenna_gain: T::of(5.0),
        }
    }
}

impl<T: Scalar> ChannelModel<T> {
    pub fn check(&self) -> Result<(), GeometryError> {
        self.los.check()?;
        self.nlos.check()?;
        let p = self.los_probability;
        if !(p >= T::zero() && p <= T::one()) {
            return Err(GeometryError::BadPathloss(
                "LOS probability must lie in [0, 1]",
            ));
        }
        if !self.antenna_gain.is_finite() {
            return Err(GeometryError::BadPathloss("antenna gain must be finite"));
        }
        Ok(())
    }
}

/// Everything needed to draw one topology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropParams<T> {
    pub num_aps: usize,
    pub num_users: usize,
    /// Side of the square simulation area in meters.
    pub area_side: T,
    /// AP coverage radius in meters.
    pub radius: T,
    pub channel: ChannelModel<T>,
    pub max_redrops: usize,
}

impl<T: Scalar> DropParams<T> {
    pub fn new(num_aps: usize, num_users: usize) -> Self {
        Self {
            num_aps,
            num_users,
            area_side: T::of(50.0),
            radius: T::of(15.0),
            channel: ChannelModel::default(),
            max_redrops: DEFAULT_MAX_REDROPS,
        }
    }

    fn check(&self) -> Result<(), GeometryError> {
        if self.num_aps == 0 || self.num_users == 0 {
            return Err(GeometryError::EmptyNetwork {
                num_aps: self.num_aps,
                num_users: self.num_users,
            });
        }
        if !(self.area_side > T::zero()) || !self.area_side.is_finite() {
            return Err(GeometryError::BadArea(self.area_side.as_f64()));
        }
        if !(self.radius >= T::zero()) || !self.radius.is_finite() {
            return Err(GeometryError::BadRadius(self.radius.as_f64()));
        }
        self.channel.check()
    }
}

/// One drop: positions, linear gains and the candidate sets derived from
/// the coverage radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology<T> {
    ap_positions: Vec<Point<T>>,
    user_positions: Vec<Point<T>>,
    area_side: T,
    radius: T,
    /// Row-major `N x M`.
    gains: Vec<T>,
    candidate_aps: Vec<Vec<usize>>,
    candidate_users: Vec<Vec<usize>>,
}

impl<T: Scalar> Topology<T> {
    /// Builds a topology from explicit positions and gains. Candidate sets
    /// follow the radius rule.
    pub fn from_parts(
        ap_positions: Vec<Point<T>>,
        user_positions: Vec<Point<T>>,
        area_side: T,
        radius: T,
        gains: Vec<T>,
    ) -> Result<Self, GeometryError> {
        let (m, n) = (ap_positions.len(), user_positions.len());
        if m == 0 || n == 0 {
            return Err(GeometryError::EmptyNetwork {
                num_aps: m,
                num_users: n,
            });
        }
        if gains.len() != n * m {
            return Err(GeometryError::GainShape {
                expected: n * m,
                got: gains.len(),
            });
        }
        for (idx, g) in gains.iter().enumerate() {
            if !(*g > T::zero()) || !g.is_finite() {
                return Err(GeometryError::BadGain {
                    user: idx / m,
                    ap: idx % m,
                });
            }
        }
        let (candidate_aps, candidate_users) =
            candidate_sets(&ap_positions, &user_positions, radius);
        Ok(Self {
            ap_positions,
            user_positions,
            area_side,
            radius,
            gains,
            candidate_aps,
            candidate_users,
        })
    }

    /// Replaces the gain matrix, keeping positions and candidate sets.
    pub fn with_gains(self, gains: Vec<T>) -> Result<Self, GeometryError> {
        Self::from_parts(
            self.ap_positions,
            self.user_positions,
            self.area_side,
            self.radius,
            gains,
        )
    }

    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn area_side(&self) -> T {
        self.area_side
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn ap_positions(&self) -> &[Point<T>] {
        &self.ap_positions
    }

    pub fn user_positions(&self) -> &[Point<T>] {
        &self.user_positions
    }

    pub fn distance(&self, user: usize, ap: usize) -> T {
        self.user_positions[user].distance(&self.ap_positions[ap])
    }

    /// Linear gain between `user` and `ap`.
    #[inline]
    pub fn gain(&self, user: usize, ap: usize) -> T {
        self.gains[user * self.num_aps() + ap]
    }

    pub fn gains(&self) -> &[T] {
        &self.gains
    }

    /// `S_i`: APs within the coverage radius of `user`, ascending.
    pub fn candidate_aps(&self, user: usize) -> &[usize] {
        &self.candidate_aps[user]
    }

    /// `U_j`: users within the coverage radius of `ap`, ascending.
    pub fn candidate_users(&self, ap: usize) -> &[usize] {
        &self.candidate_users[ap]
    }

    pub fn is_candidate(&self, user: usize, ap: usize) -> bool {
        self.candidate_aps[user].binary_search(&ap).is_ok()
    }
}

fn candidate_sets<T: Scalar>(
    aps: &[Point<T>],
    users: &[Point<T>],
    radius: T,
) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut by_user = vec![Vec::new(); users.len()];
    let mut by_ap = vec![Vec::new(); aps.len()];
    for (i, u) in users.iter().enumerate() {
        for (j, a) in aps.iter().enumerate() {
            if u.distance(a) <= radius {
                by_user[i].push(j);
                by_ap[j].push(i);
            }
        }
    }
    (by_user, by_ap)
}

/// `alpha + 10 beta log10(d) + shadow`, in dB.
pub fn pathloss_db<T: Scalar>(
    distance: T,
    params: &PathlossParams<T>,
    shadow_draw: T,
) -> Result<T, GeometryError> {
    if !(distance > T::zero()) {
        return Err(GeometryError::NonPositiveDistance(distance.as_f64()));
    }
    Ok(params.alpha + T::of(10.0) * params.beta * distance.log10() + shadow_draw)
}

/// dB budget to linear power gain, `10^((antenna_gain - pathloss) / 10)`.
pub fn channel_gain<T: Scalar>(pathloss_db: T, antenna_gain_dbi: T) -> T {
    T::of(10.0).powf((antenna_gain_dbi - pathloss_db) / T::of(10.0))
}

/// Thermal noise in watts over `bandwidth_hz` for a density in dBm/Hz.
pub fn noise_power<T: Scalar>(density_dbm_per_hz: T, bandwidth_hz: T) -> T {
    let dbm = density_dbm_per_hz + T::of(10.0) * bandwidth_hz.log10();
    dbm_to_watts(dbm)
}

pub fn dbm_to_watts<T: Scalar>(dbm: T) -> T {
    T::of(10.0).powf((dbm - T::of(30.0)) / T::of(10.0))
}

/// Draws a topology. APs and users are uniform over the square; a user with
/// no AP in range is re-dropped up to `max_redrops` times. Each link then
/// draws its LOS state and shadow fading once.
pub fn generate_topology<T: Scalar>(
    params: &DropParams<T>,
    seed: u64,
) -> Result<Topology<T>, GeometryError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = params.area_side.as_f64();
    let uniform_point = |rng: &mut ChaCha8Rng| {
        Point::new(
            T::of(rng.random::<f64>() * side),
            T::of(rng.random::<f64>() * side),
        )
    };

    let aps: Vec<Point<T>> = (0..params.num_aps)
        .map(|_| uniform_point(&mut rng))
        .collect();
    let mut users = Vec::with_capacity(params.num_users);
    for user in 0..params.num_users {
        let mut attempts = 0;
        loop {
            let p = uniform_point(&mut rng);
            if aps.iter().any(|a| p.distance(a) <= params.radius) {
                users.push(p);
                break;
            }
            if attempts == params.max_redrops {
                return Err(GeometryError::Uncovered {
                    user,
                    radius: params.radius.as_f64(),
                    attempts,
                });
            }
            attempts += 1;
        }
    }

    let ch = &params.channel;
    let p_los = ch.los_probability.as_f64();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let min_d = T::of(MIN_DISTANCE_M);
    let mut gains = Vec::with_capacity(params.num_users * params.num_aps);
    for u in &users {
        for a in &aps {
            let set = if rng.random::<f64>() < p_los {
                &ch.los
            } else {
                &ch.nlos
            };
            let shadow = T::of(unit.sample(&mut rng)) * set.sigma;
            let d = u.distance(a).max(min_d);
            let pl = pathloss_db(d, set, shadow)?;
            gains.push(channel_gain(pl, ch.antenna_gain));
        }
    }
    Topology::from_parts(aps, users, params.area_side, params.radius, gains)
}
