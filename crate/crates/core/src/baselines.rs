//! Non-learning policies: strongest-RSRP association, uniformly random
//! actions, and an exhaustive one-shot optimum for tiny networks.

use rand::seq::IndexedRandom;
use rand::Rng;
use thiserror::Error;

use crate::association::{AssociationError, AssociationState, UserAction};
use crate::env::EnvConfig;
use crate::geometry::Topology;
use crate::link_rate::LinkMetrics;
use crate::scalar::Scalar;

/// Largest joint search space the exhaustive oracle accepts.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BaselineError {
    #[error("exhaustive search over {size} joint assignments exceeds the limit of {limit}")]
    SearchSpace { size: u128, limit: u128 },
    #[error(transparent)]
    Association(#[from] AssociationError),
}

/// A joint assignment and what it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyVerdict<T> {
    pub association: AssociationState,
    pub user_rates: Vec<T>,
    /// Network utility in bits/s.
    pub utility: T,
}

impl<T: Scalar> PolicyVerdict<T> {
    fn evaluate(topology: &Topology<T>, association: AssociationState, config: &EnvConfig<T>) -> Self {
        let metrics = LinkMetrics::compute(topology, &association, &config.radio);
        Self {
            association,
            user_rates: metrics.user_rates,
            utility: metrics.network_utility,
        }
    }
}

fn empty_state<T: Scalar>(
    topology: &Topology<T>,
    config: &EnvConfig<T>,
) -> Result<AssociationState, AssociationError> {
    AssociationState::new(
        topology.num_users(),
        topology.num_aps(),
        config.num_subcarriers,
        config.k_max,
        config.f_max,
    )
}

/// APs `user` would pick under the RSRP rule given current loads: candidates
/// below `f_max` ranked by `P_ap / (n_j + 1) * G_ij`, best `k_max` kept.
/// Ties go to the lower AP index.
pub fn rsrp_ranking<T: Scalar>(
    topology: &Topology<T>,
    state: &AssociationState,
    user: usize,
    config: &EnvConfig<T>,
) -> Vec<usize> {
    let mut ranked: Vec<(usize, T)> = topology
        .candidate_aps(user)
        .iter()
        .filter_map(|&j| {
            let load = state.load(j);
            (load < config.f_max).then(|| {
                let power = config.radio.p_ap / T::of((load + 1) as f64);
                (j, power * topology.gain(user, j))
            })
        })
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    ranked.truncate(config.k_max);
    ranked.into_iter().map(|(j, _)| j).collect()
}

/// Users in index order join their strongest-RSRP APs and draw one
/// subcarrier uniformly, applied on all chosen APs through action
/// projection (so clashes displace earlier users).
pub fn max_rsrp_policy<T: Scalar, R: Rng + ?Sized>(
    topology: &Topology<T>,
    config: &EnvConfig<T>,
    rng: &mut R,
) -> Result<PolicyVerdict<T>, BaselineError> {
    let mut state = empty_state(topology, config)?;
    for user in 0..topology.num_users() {
        let chosen = rsrp_ranking(topology, &state, user, config);
        let sub = rng.random_range(0..config.num_subcarriers);
        for ap in chosen {
            state.apply_action(user, UserAction::new(ap, sub), topology)?;
        }
    }
    Ok(PolicyVerdict::evaluate(topology, state, config))
}

/// `k_max` rounds in which every user, in index order, applies an action
/// with AP uniform over its candidates and subcarrier uniform over `L`.
pub fn random_policy<T: Scalar, R: Rng + ?Sized>(
    topology: &Topology<T>,
    config: &EnvConfig<T>,
    rng: &mut R,
) -> Result<PolicyVerdict<T>, BaselineError> {
    let mut state = empty_state(topology, config)?;
    for _ in 0..config.k_max {
        for user in 0..topology.num_users() {
            let Some(&ap) = topology.candidate_aps(user).choose(rng) else {
                continue;
            };
            let sub = rng.random_range(0..config.num_subcarriers);
            state.apply_action(user, UserAction::new(ap, sub), topology)?;
        }
    }
    Ok(PolicyVerdict::evaluate(topology, state, config))
}

/// APs a user joins together with the subcarrier it holds on all of them.
#[derive(Debug, Clone)]
struct UserOption {
    aps: Vec<usize>,
    subcarrier: usize,
}

fn user_options<T: Scalar>(
    topology: &Topology<T>,
    user: usize,
    config: &EnvConfig<T>,
) -> Vec<Option<UserOption>> {
    let cands = topology.candidate_aps(user);
    let mut out = vec![None];
    for mask in 1u64..(1u64 << cands.len()) {
        if mask.count_ones() as usize > config.k_max {
            continue;
        }
        let aps: Vec<usize> = (0..cands.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| cands[b])
            .collect();
        for subcarrier in 0..config.num_subcarriers {
            out.push(Some(UserOption {
                aps: aps.clone(),
                subcarrier,
            }));
        }
    }
    out
}

/// Size of the joint space `brute_force_optimum` would enumerate.
pub fn search_space_size<T: Scalar>(topology: &Topology<T>, config: &EnvConfig<T>) -> u128 {
    (0..topology.num_users())
        .map(|i| {
            let c = topology.candidate_aps(i).len() as u128;
            let mut subsets = 0u128;
            let mut binom = 1u128;
            for s in 1..=c.min(config.k_max as u128) {
                binom = binom * (c - s + 1) / s;
                subsets += binom;
            }
            1 + subsets * config.num_subcarriers as u128
        })
        .try_fold(1u128, |acc, v| acc.checked_mul(v))
        .unwrap_or(u128::MAX)
}

/// Exhaustive maximum of the one-shot network utility over every feasible
/// joint assignment in which each associated link carries the user's
/// single subcarrier. Ties keep the first assignment found.
pub fn brute_force_optimum<T: Scalar>(
    topology: &Topology<T>,
    config: &EnvConfig<T>,
) -> Result<PolicyVerdict<T>, BaselineError> {
    let size = search_space_size(topology, config);
    if size > BRUTE_FORCE_LIMIT {
        return Err(BaselineError::SearchSpace {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let options: Vec<Vec<Option<UserOption>>> = (0..topology.num_users())
        .map(|i| user_options(topology, i, config))
        .collect();
    let mut search = Search {
        topology,
        config,
        options: &options,
        load: vec![0; topology.num_aps()],
        busy: vec![false; topology.num_aps() * config.num_subcarriers],
        choice: vec![0; topology.num_users()],
        best: None,
    };
    search.descend(0)?;
    let (_, state) = search.best.expect("the empty assignment is always feasible");
    Ok(PolicyVerdict::evaluate(topology, state, config))
}

struct Search<'a, T> {
    topology: &'a Topology<T>,
    config: &'a EnvConfig<T>,
    options: &'a [Vec<Option<UserOption>>],
    load: Vec<usize>,
    busy: Vec<bool>,
    choice: Vec<usize>,
    best: Option<(T, AssociationState)>,
}

impl<T: Scalar> Search<'_, T> {
    fn descend(&mut self, user: usize) -> Result<(), AssociationError> {
        let l = self.config.num_subcarriers;
        if user == self.options.len() {
            let state = self.build()?;
            let u = LinkMetrics::compute(self.topology, &state, &self.config.radio).network_utility;
            if self.best.as_ref().is_none_or(|(b, _)| u > *b) {
                self.best = Some((u, state));
            }
            return Ok(());
        }
        for (idx, opt) in self.options[user].iter().enumerate() {
            if let Some(o) = opt {
                let fits = o
                    .aps
                    .iter()
                    .all(|&j| self.load[j] < self.config.f_max && !self.busy[j * l + o.subcarrier]);
                if !fits {
                    continue;
                }
                for &j in &o.aps {
                    self.load[j] += 1;
                    self.busy[j * l + o.subcarrier] = true;
                }
            }
            self.choice[user] = idx;
            self.descend(user + 1)?;
            if let Some(o) = opt {
                for &j in &o.aps {
                    self.load[j] -= 1;
                    self.busy[j * l + o.subcarrier] = false;
                }
            }
        }
        Ok(())
    }

    fn build(&self) -> Result<AssociationState, AssociationError> {
        let (n, m, l) = (
            self.topology.num_users(),
            self.topology.num_aps(),
            self.config.num_subcarriers,
        );
        let mut x = vec![false; n * m];
        let mut y = vec![false; n * m * l];
        for (i, &c) in self.choice.iter().enumerate() {
            if let Some(o) = &self.options[i][c] {
                for &j in &o.aps {
                    x[i * m + j] = true;
                    y[(i * m + j) * l + o.subcarrier] = true;
                }
            }
        }
        AssociationState::from_raw(n, m, l, self.config.k_max, self.config.f_max, x, y)
    }
}
