//! User-AP association matrix `x`, subcarrier allocation tensor `y`, the
//! feasibility rules that bind them, and per-user action projection.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::geometry::Topology;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssociationError {
    #[error("user {user} out of range (N={num_users})")]
    UserOutOfBounds { user: usize, num_users: usize },
    #[error("AP {ap} out of range (M={num_aps})")]
    ApOutOfBounds { ap: usize, num_aps: usize },
    #[error("subcarrier {subcarrier} out of range (L={num_subcarriers})")]
    SubcarrierOutOfBounds {
        subcarrier: usize,
        num_subcarriers: usize,
    },
    #[error("flat action {index} out of range (M*L={size})")]
    FlatOutOfBounds { index: usize, size: usize },
    #[error("state is {got:?} but topology is {expected:?} (N, M)")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("raw {what} has {got} entries, expected {expected}")]
    RawShape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("k_max and f_max must be at least 1")]
    ZeroCapacity,
}

/// One agent's action: serve me from `ap` on `subcarrier` (both 0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UserAction {
    pub ap: usize,
    pub subcarrier: usize,
}

impl UserAction {
    pub fn new(ap: usize, subcarrier: usize) -> Self {
        Self { ap, subcarrier }
    }

    /// One-hot index `ap * L + subcarrier` in `0..M*L`.
    pub fn flat_index(&self, num_subcarriers: usize) -> usize {
        self.ap * num_subcarriers + self.subcarrier
    }

    pub fn from_flat(
        index: usize,
        num_aps: usize,
        num_subcarriers: usize,
    ) -> Result<Self, AssociationError> {
        let size = num_aps * num_subcarriers;
        if index >= size {
            return Err(AssociationError::FlatOutOfBounds { index, size });
        }
        Ok(Self::new(index / num_subcarriers, index % num_subcarriers))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// The AP is not in the user's candidate set.
    OutOfRange,
    /// The AP already serves `f_max` other users.
    ApFull,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionOutcome {
    Rejected(RejectReason),
    Applied {
        /// AP dropped from the user's own list to respect `k_max`.
        evicted: Option<usize>,
        /// `(user, ap)` links of other users removed by a subcarrier clash.
        displaced: Vec<(usize, usize)>,
    },
}

impl ActionOutcome {
    pub fn is_applied(&self) -> bool {
        matches!(self, ActionOutcome::Applied { .. })
    }
}

/// A broken feasibility rule together with the offending indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Violation {
    /// Association outside the candidate set `S_i`.
    NotCandidate { user: usize, ap: usize },
    /// More than `k_max` serving APs.
    TooManyAps { user: usize, count: usize },
    /// More than `f_max` users on one AP.
    TooManyUsers { ap: usize, count: usize },
    /// More than one subcarrier on one link.
    MultipleSubcarriers { user: usize, ap: usize },
    /// Two users of one AP on the same subcarrier.
    SubcarrierClash {
        ap: usize,
        subcarrier: usize,
        users: (usize, usize),
    },
    /// A user served on different subcarriers by its APs.
    InconsistentSubcarrier { user: usize, aps: (usize, usize) },
    /// Subcarrier allocated on a link that is not associated.
    AllocationWithoutAssociation {
        user: usize,
        ap: usize,
        subcarrier: usize,
    },
}

impl Violation {
    /// Short name of the broken rule.
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::NotCandidate { .. } => "candidate_set",
            Violation::TooManyAps { .. } => "aps_per_user",
            Violation::TooManyUsers { .. } => "users_per_ap",
            Violation::MultipleSubcarriers { .. } => "subcarriers_per_link",
            Violation::SubcarrierClash { .. } => "subcarrier_clash",
            Violation::InconsistentSubcarrier { .. } => "subcarrier_consistency",
            Violation::AllocationWithoutAssociation { .. } => "allocation_without_association",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotCandidate { user, ap } => {
                write!(f, "user {user} associated with non-candidate AP {ap}")
            }
            Violation::TooManyAps { user, count } => {
                write!(f, "user {user} served by {count} APs")
            }
            Violation::TooManyUsers { ap, count } => {
                write!(f, "AP {ap} serves {count} users")
            }
            Violation::MultipleSubcarriers { user, ap } => {
                write!(f, "user {user} holds several subcarriers on AP {ap}")
            }
            Violation::SubcarrierClash {
                ap,
                subcarrier,
                users,
            } => write!(
                f,
                "users {} and {} share subcarrier {subcarrier} on AP {ap}",
                users.0, users.1
            ),
            Violation::InconsistentSubcarrier { user, aps } => write!(
                f,
                "user {user} uses different subcarriers on APs {} and {}",
                aps.0, aps.1
            ),
            Violation::AllocationWithoutAssociation {
                user,
                ap,
                subcarrier,
            } => write!(
                f,
                "user {user} holds subcarrier {subcarrier} on unassociated AP {ap}"
            ),
        }
    }
}

/// Association and allocation of an `N x M x L` network.
///
/// `x` and `y` are the source of truth for validation. The per-user FIFO
/// of serving APs records association order so that the oldest link is
/// evicted when a user exceeds `k_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationState {
    num_users: usize,
    num_aps: usize,
    num_subcarriers: usize,
    k_max: usize,
    f_max: usize,
    x: Vec<bool>,
    y: Vec<bool>,
    order: Vec<VecDeque<usize>>,
    subcarrier: Vec<Option<usize>>,
}

impl AssociationState {
    /// The empty association.
    pub fn new(
        num_users: usize,
        num_aps: usize,
        num_subcarriers: usize,
        k_max: usize,
        f_max: usize,
    ) -> Result<Self, AssociationError> {
        if k_max == 0 || f_max == 0 {
            return Err(AssociationError::ZeroCapacity);
        }
        Ok(Self {
            num_users,
            num_aps,
            num_subcarriers,
            k_max,
            f_max,
            x: vec![false; num_users * num_aps],
            y: vec![false; num_users * num_aps * num_subcarriers],
            order: vec![VecDeque::new(); num_users],
            subcarrier: vec![None; num_users],
        })
    }

    /// Wraps arbitrary (possibly infeasible) `x` (`N*M`, row-major) and `y`
    /// (`N*M*L`, user-major then AP then subcarrier). Bookkeeping is
    /// derived: APs in ascending order, the lowest allocated subcarrier.
    pub fn from_raw(
        num_users: usize,
        num_aps: usize,
        num_subcarriers: usize,
        k_max: usize,
        f_max: usize,
        x: Vec<bool>,
        y: Vec<bool>,
    ) -> Result<Self, AssociationError> {
        let mut state = Self::new(num_users, num_aps, num_subcarriers, k_max, f_max)?;
        if x.len() != state.x.len() {
            return Err(AssociationError::RawShape {
                what: "x",
                expected: state.x.len(),
                got: x.len(),
            });
        }
        if y.len() != state.y.len() {
            return Err(AssociationError::RawShape {
                what: "y",
                expected: state.y.len(),
                got: y.len(),
            });
        }
        state.x = x;
        state.y = y;
        for i in 0..num_users {
            state.order[i] = (0..num_aps).filter(|&j| state.x(i, j)).collect();
            state.subcarrier[i] = state
                .order[i]
                .iter()
                .find_map(|&j| (0..num_subcarriers).find(|&l| state.y(i, j, l)));
        }
        Ok(state)
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn f_max(&self) -> usize {
        self.f_max
    }

    pub fn num_actions(&self) -> usize {
        self.num_aps * self.num_subcarriers
    }

    #[inline]
    pub fn x(&self, user: usize, ap: usize) -> bool {
        self.x[user * self.num_aps + ap]
    }

    #[inline]
    pub fn y(&self, user: usize, ap: usize, subcarrier: usize) -> bool {
        self.y[(user * self.num_aps + ap) * self.num_subcarriers + subcarrier]
    }

    /// Serving APs of `user`, oldest first.
    pub fn serving_aps(&self, user: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.order[user].iter().copied()
    }

    /// Subcarrier shared by all of the user's links, if it has any.
    pub fn user_subcarrier(&self, user: usize) -> Option<usize> {
        self.subcarrier[user]
    }

    /// `n_j`, users associated with `ap`.
    pub fn load(&self, ap: usize) -> usize {
        (0..self.num_users).filter(|&i| self.x(i, ap)).count()
    }

    /// User holding `subcarrier` on `ap`, lowest index first.
    pub fn occupant(&self, ap: usize, subcarrier: usize) -> Option<usize> {
        (0..self.num_users).find(|&i| self.y(i, ap, subcarrier))
    }

    /// Whether `ap` has `subcarrier` allocated to at least one user.
    pub fn ap_uses_subcarrier(&self, ap: usize, subcarrier: usize) -> bool {
        self.occupant(ap, subcarrier).is_some()
    }

    /// Active `(user, ap, subcarrier)` links.
    pub fn active_links(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (m, l) = (self.num_aps, self.num_subcarriers);
        self.y
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(move |(idx, _)| (idx / (m * l), (idx / l) % m, idx % l))
    }

    fn set_x(&mut self, user: usize, ap: usize, on: bool) {
        self.x[user * self.num_aps + ap] = on;
    }

    fn set_y(&mut self, user: usize, ap: usize, subcarrier: usize, on: bool) {
        self.y[(user * self.num_aps + ap) * self.num_subcarriers + subcarrier] = on;
    }

    fn clear_link(&mut self, user: usize, ap: usize) {
        self.set_x(user, ap, false);
        for l in 0..self.num_subcarriers {
            self.set_y(user, ap, l, false);
        }
        self.order[user].retain(|&j| j != ap);
        if self.order[user].is_empty() {
            self.subcarrier[user] = None;
        }
    }

    fn check_dims<T: Scalar>(&self, topology: &Topology<T>) -> Result<(), AssociationError> {
        let expected = (topology.num_users(), topology.num_aps());
        let got = (self.num_users, self.num_aps);
        if expected != got {
            return Err(AssociationError::ShapeMismatch { expected, got });
        }
        Ok(())
    }

    /// Lists every violated feasibility rule. Empty means feasible.
    pub fn validate<T: Scalar>(
        &self,
        topology: &Topology<T>,
    ) -> Result<Vec<Violation>, AssociationError> {
        self.check_dims(topology)?;
        let (n, m, nl) = (self.num_users, self.num_aps, self.num_subcarriers);
        let mut out = Vec::new();

        for i in 0..n {
            let mut count = 0;
            for j in 0..m {
                if self.x(i, j) {
                    count += 1;
                    if !topology.is_candidate(i, j) {
                        out.push(Violation::NotCandidate { user: i, ap: j });
                    }
                }
            }
            if count > self.k_max {
                out.push(Violation::TooManyAps { user: i, count });
            }
        }
        for j in 0..m {
            let count = self.load(j);
            if count > self.f_max {
                out.push(Violation::TooManyUsers { ap: j, count });
            }
        }
        for i in 0..n {
            for j in 0..m {
                let held = (0..nl).filter(|&l| self.y(i, j, l)).count();
                if held > 1 {
                    out.push(Violation::MultipleSubcarriers { user: i, ap: j });
                }
                if !self.x(i, j) {
                    for l in (0..nl).filter(|&l| self.y(i, j, l)) {
                        out.push(Violation::AllocationWithoutAssociation {
                            user: i,
                            ap: j,
                            subcarrier: l,
                        });
                    }
                }
            }
        }
        for j in 0..m {
            for l in 0..nl {
                let holders: Vec<usize> = (0..n).filter(|&i| self.y(i, j, l)).collect();
                for (a, &first) in holders.iter().enumerate() {
                    for &second in &holders[a + 1..] {
                        out.push(Violation::SubcarrierClash {
                            ap: j,
                            subcarrier: l,
                            users: (first, second),
                        });
                    }
                }
            }
        }
        for i in 0..n {
            let serving: Vec<usize> = (0..m).filter(|&j| self.x(i, j)).collect();
            for (a, &j1) in serving.iter().enumerate() {
                for &j2 in &serving[a + 1..] {
                    if (0..nl).any(|l| self.y(i, j1, l) != self.y(i, j2, l)) {
                        out.push(Violation::InconsistentSubcarrier {
                            user: i,
                            aps: (j1, j2),
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// Applies one agent's action by projection onto the feasible set.
    ///
    /// Out-of-range and full-AP requests are no-ops. Otherwise the AP joins
    /// the user's list (evicting the oldest beyond `k_max`), the user moves
    /// to `subcarrier` on all its APs, and any other user holding that
    /// subcarrier on one of those APs loses its link there.
    pub fn apply_action<T: Scalar>(
        &mut self,
        user: usize,
        action: UserAction,
        topology: &Topology<T>,
    ) -> Result<ActionOutcome, AssociationError> {
        self.check_dims(topology)?;
        if user >= self.num_users {
            return Err(AssociationError::UserOutOfBounds {
                user,
                num_users: self.num_users,
            });
        }
        if action.ap >= self.num_aps {
            return Err(AssociationError::ApOutOfBounds {
                ap: action.ap,
                num_aps: self.num_aps,
            });
        }
        if action.subcarrier >= self.num_subcarriers {
            return Err(AssociationError::SubcarrierOutOfBounds {
                subcarrier: action.subcarrier,
                num_subcarriers: self.num_subcarriers,
            });
        }
        let (ap, sub) = (action.ap, action.subcarrier);
        if !topology.is_candidate(user, ap) {
            return Ok(ActionOutcome::Rejected(RejectReason::OutOfRange));
        }
        let already = self.x(user, ap);
        if !already && self.load(ap) >= self.f_max {
            return Ok(ActionOutcome::Rejected(RejectReason::ApFull));
        }

        let mut evicted = None;
        if !already {
            self.set_x(user, ap, true);
            self.order[user].push_back(ap);
            if self.order[user].len() > self.k_max {
                let oldest = self.order[user][0];
                self.clear_link(user, oldest);
                evicted = Some(oldest);
            }
        }

        let mut displaced = Vec::new();
        let serving: Vec<usize> = self.order[user].iter().copied().collect();
        for j in serving {
            for l in 0..self.num_subcarriers {
                self.set_y(user, j, l, false);
            }
            for other in 0..self.num_users {
                if other != user && self.y(other, j, sub) {
                    self.clear_link(other, j);
                    displaced.push((other, j));
                }
            }
            self.set_y(user, j, sub, true);
        }
        self.subcarrier[user] = Some(sub);
        Ok(ActionOutcome::Applied { evicted, displaced })
    }
}

/// Per-user transmit power `P_ap / n_j` of `ap`; an idle AP transmits nothing.
pub fn transmit_power<T: Scalar>(state: &AssociationState, ap: usize, p_ap: T) -> T {
    match state.load(ap) {
        0 => T::zero(),
        n => p_ap / T::of(n as f64),
    }
}
