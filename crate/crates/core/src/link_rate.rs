//! SINR, Shannon capacity and network utility of an association state.

use thiserror::Error;

use crate::association::{transmit_power, AssociationState};
use crate::geometry::Topology;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkRateError {
    #[error("link (user {user}, AP {ap}, subcarrier {subcarrier}) is not active")]
    InactiveLink {
        user: usize,
        ap: usize,
        subcarrier: usize,
    },
}

/// Which APs count as interferers on a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterferenceMode {
    /// Only APs transmitting on the same subcarrier.
    #[default]
    CoSubcarrier,
    /// Every transmitting AP regardless of subcarrier.
    AllAps,
}

impl InterferenceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            InterferenceMode::CoSubcarrier => "co-subcarrier",
            InterferenceMode::AllAps => "all-aps",
        }
    }
}

impl std::str::FromStr for InterferenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "co-subcarrier" => Ok(Self::CoSubcarrier),
            "all-aps" => Ok(Self::AllAps),
            other => Err(format!(
                "unknown interference mode '{other}' (expected co-subcarrier or all-aps)"
            )),
        }
    }
}

/// Radio constants shared by every link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams<T> {
    /// Maximum AP transmit power in watts, split evenly over served users.
    pub p_ap: T,
    /// Noise power per subcarrier in watts.
    pub noise: T,
    /// Subcarrier bandwidth in Hz.
    pub bandwidth: T,
    pub interference: InterferenceMode,
}

/// Per-AP transmit power and subcarrier occupancy of one state.
struct Snapshot<T> {
    power: Vec<T>,
    busy: Vec<bool>,
    num_subcarriers: usize,
}

impl<T: Scalar> Snapshot<T> {
    fn new(state: &AssociationState, p_ap: T) -> Self {
        let (m, l) = (state.num_aps(), state.num_subcarriers());
        let power = (0..m).map(|j| transmit_power(state, j, p_ap)).collect();
        let mut busy = vec![false; m * l];
        for (_, j, s) in state.active_links() {
            busy[j * l + s] = true;
        }
        Self {
            power,
            busy,
            num_subcarriers: l,
        }
    }

    fn sinr(
        &self,
        topology: &Topology<T>,
        state: &AssociationState,
        user: usize,
        ap: usize,
        subcarrier: usize,
        radio: &RadioParams<T>,
    ) -> T {
        let mut interference = T::zero();
        for other in 0..topology.num_aps() {
            if other == ap || state.x(user, other) {
                continue;
            }
            let active = match radio.interference {
                InterferenceMode::CoSubcarrier => self.busy[other * self.num_subcarriers + subcarrier],
                InterferenceMode::AllAps => self.power[other] > T::zero(),
            };
            if active {
                interference += self.power[other] * topology.gain(user, other);
            }
        }
        self.power[ap] * topology.gain(user, ap) / (interference + radio.noise)
    }
}

/// SINR of an active link.
pub fn sinr<T: Scalar>(
    topology: &Topology<T>,
    state: &AssociationState,
    user: usize,
    ap: usize,
    subcarrier: usize,
    radio: &RadioParams<T>,
) -> Result<T, LinkRateError> {
    if !(state.x(user, ap) && state.y(user, ap, subcarrier)) {
        return Err(LinkRateError::InactiveLink {
            user,
            ap,
            subcarrier,
        });
    }
    let snap = Snapshot::new(state, radio.p_ap);
    Ok(snap.sinr(topology, state, user, ap, subcarrier, radio))
}

/// `W log2(1 + sinr)` in bits/s.
#[inline]
pub fn link_capacity<T: Scalar>(sinr: T, bandwidth: T) -> T {
    bandwidth * sinr.ln_1p() / T::of(std::f64::consts::LN_2)
}

/// Linear utility: the sum of user rates.
pub fn network_utility<T: Scalar>(user_rates: &[T]) -> T {
    user_rates.iter().copied().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRecord<T> {
    pub user: usize,
    pub ap: usize,
    pub subcarrier: usize,
    pub sinr: T,
    pub rate: T,
}

/// Every active link with its SINR and capacity, per-user totals and the
/// network utility.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics<T> {
    pub links: Vec<LinkRecord<T>>,
    pub user_rates: Vec<T>,
    pub network_utility: T,
}

impl<T: Scalar> LinkMetrics<T> {
    pub fn compute(topology: &Topology<T>, state: &AssociationState, radio: &RadioParams<T>) -> Self {
        let snap = Snapshot::new(state, radio.p_ap);
        let mut user_rates = vec![T::zero(); state.num_users()];
        let links: Vec<LinkRecord<T>> = state
            .active_links()
            .filter(|&(i, j, _)| state.x(i, j))
            .map(|(user, ap, subcarrier)| {
                let sinr = snap.sinr(topology, state, user, ap, subcarrier, radio);
                let rate = link_capacity(sinr, radio.bandwidth);
                user_rates[user] += rate;
                LinkRecord {
                    user,
                    ap,
                    subcarrier,
                    sinr,
                    rate,
                }
            })
            .collect();
        let network_utility = network_utility(&user_rates);
        Self {
            links,
            user_rates,
            network_utility,
        }
    }
}

/// Total capacity of every user, zero for unassociated users.
pub fn user_rates<T: Scalar>(
    topology: &Topology<T>,
    state: &AssociationState,
    radio: &RadioParams<T>,
) -> Vec<T> {
    LinkMetrics::compute(topology, state, radio).user_rates
}
