#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use udn_core::association::{AssociationState, UserAction, Violation};
use udn_core::geometry::{noise_power, Point, Topology};
use udn_core::link_rate::{InterferenceMode, RadioParams};

pub const BANDWIDTH: f64 = 180e3;

pub fn radio(mode: InterferenceMode) -> RadioParams<f64> {
    RadioParams {
        p_ap: 10f64.powf((23.0 - 30.0) / 10.0),
        noise: noise_power(-174.0, BANDWIDTH),
        bandwidth: BANDWIDTH,
        interference: mode,
    }
}

/// Small random topology in a 20 m square. The radius varies so some
/// links fall outside the candidate sets; gains span 60 dB.
pub fn tiny_topology<R: Rng>(rng: &mut R, n: usize, m: usize) -> Topology<f64> {
    let pt = |rng: &mut R| Point::new(rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0);
    let aps = (0..m).map(|_| pt(rng)).collect();
    let users = (0..n).map(|_| pt(rng)).collect();
    let gains = (0..n * m)
        .map(|_| 10f64.powf(-rng.random_range(6.0..12.0)))
        .collect();
    let radius = rng.random_range(5.0..30.0);
    Topology::from_parts(aps, users, 20.0, radius, gains).unwrap()
}

/// Topology in which every user can reach every AP.
pub fn full_topology<R: Rng>(rng: &mut R, n: usize, m: usize) -> Topology<f64> {
    let pt = |rng: &mut R| Point::new(rng.random::<f64>() * 5.0, rng.random::<f64>() * 5.0);
    let aps = (0..m).map(|_| pt(rng)).collect();
    let users = (0..n).map(|_| pt(rng)).collect();
    let gains = (0..n * m)
        .map(|_| 10f64.powf(-rng.random_range(6.0..12.0)))
        .collect();
    Topology::from_parts(aps, users, 5.0, 100.0, gains).unwrap()
}

/// Uniformly random raw `(x, y)` pair, infeasible most of the time.
pub fn random_raw<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    l: usize,
    k: usize,
    f: usize,
) -> AssociationState {
    let density = rng.random_range(0.1..0.7);
    let x: Vec<bool> = (0..n * m).map(|_| rng.random_bool(density)).collect();
    let y: Vec<bool> = (0..n * m * l).map(|_| rng.random_bool(density * 0.6)).collect();
    AssociationState::from_raw(n, m, l, k, f, x, y).unwrap()
}

/// Feasible state reached by a random action sequence.
pub fn random_valid<R: Rng>(
    rng: &mut R,
    topo: &Topology<f64>,
    l: usize,
    k: usize,
    f: usize,
) -> AssociationState {
    let (n, m) = (topo.num_users(), topo.num_aps());
    let mut s = AssociationState::new(n, m, l, k, f).unwrap();
    for _ in 0..rng.random_range(0..4 * n * m) {
        let user = rng.random_range(0..n);
        let a = UserAction::new(rng.random_range(0..m), rng.random_range(0..l));
        s.apply_action(user, a, topo).unwrap();
    }
    s
}

/// Every violated rule, found by direct enumeration over index tuples.
pub fn oracle_violations(s: &AssociationState, topo: &Topology<f64>) -> BTreeSet<Violation> {
    let (n, m, l) = (s.num_users(), s.num_aps(), s.num_subcarriers());
    let within = |i: usize, j: usize| {
        topo.user_positions()[i].distance(&topo.ap_positions()[j]) <= topo.radius()
    };
    let mut out = BTreeSet::new();
    for i in 0..n {
        let aps = (0..m).filter(|&j| s.x(i, j)).count();
        if aps > s.k_max() {
            out.insert(Violation::TooManyAps { user: i, count: aps });
        }
        for j in 0..m {
            if s.x(i, j) && !within(i, j) {
                out.insert(Violation::NotCandidate { user: i, ap: j });
            }
        }
    }
    for j in 0..m {
        let users = (0..n).filter(|&i| s.x(i, j)).count();
        if users > s.f_max() {
            out.insert(Violation::TooManyUsers { ap: j, count: users });
        }
    }
    for i in 0..n {
        for j in 0..m {
            let mut held = 0;
            for c in 0..l {
                if s.y(i, j, c) {
                    held += 1;
                    if !s.x(i, j) {
                        out.insert(Violation::AllocationWithoutAssociation {
                            user: i,
                            ap: j,
                            subcarrier: c,
                        });
                    }
                }
            }
            if held > 1 {
                out.insert(Violation::MultipleSubcarriers { user: i, ap: j });
            }
        }
    }
    for j in 0..m {
        for c in 0..l {
            for a in 0..n {
                for b in a + 1..n {
                    if s.y(a, j, c) && s.y(b, j, c) {
                        out.insert(Violation::SubcarrierClash {
                            ap: j,
                            subcarrier: c,
                            users: (a, b),
                        });
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j1 in 0..m {
            for j2 in j1 + 1..m {
                if s.x(i, j1) && s.x(i, j2) && (0..l).any(|c| s.y(i, j1, c) != s.y(i, j2, c)) {
                    out.insert(Violation::InconsistentSubcarrier {
                        user: i,
                        aps: (j1, j2),
                    });
                }
            }
        }
    }
    out
}

/// Per-user rates by a direct triple loop over users, APs and subcarriers.
pub fn oracle_rates(
    s: &AssociationState,
    topo: &Topology<f64>,
    radio: &RadioParams<f64>,
) -> Vec<f64> {
    let (n, m, l) = (s.num_users(), s.num_aps(), s.num_subcarriers());
    let served = |j: usize| (0..n).filter(|&i| s.x(i, j)).count();
    let power = |j: usize| match served(j) {
        0 => 0.0,
        c => radio.p_ap / c as f64,
    };
    let transmits_on = |j: usize, c: usize| (0..n).any(|i| s.x(i, j) && s.y(i, j, c));
    let mut rates = vec![0.0; n];
    for i in 0..n {
        for j in 0..m {
            for c in 0..l {
                if !(s.x(i, j) && s.y(i, j, c)) {
                    continue;
                }
                let signal = power(j) * topo.gain(i, j);
                let mut interference = 0.0;
                for jj in 0..m {
                    if s.x(i, jj) {
                        continue;
                    }
                    let active = match radio.interference {
                        InterferenceMode::CoSubcarrier => transmits_on(jj, c),
                        InterferenceMode::AllAps => served(jj) > 0,
                    };
                    if active {
                        interference += power(jj) * topo.gain(i, jj);
                    }
                }
                let sinr = signal / (interference + radio.noise);
                rates[i] += radio.bandwidth * sinr.ln_1p() / std::f64::consts::LN_2;
            }
        }
    }
    rates
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Chi-square statistic of observed counts against a uniform expectation.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

/// One random gradient check: a small network, a random batch, and the
/// relative error `|g - g_fd| / (|g| + |g_fd|)` over all parameters.
pub fn finite_difference_error<R: Rng>(rng: &mut R) -> f64 {
    use ndarray::Array2;
    use udn_core::dqn::QNetwork;

    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=5)];
    for _ in 0..depth {
        sizes.push(rng.random_range(1..=6));
    }
    sizes.push(rng.random_range(1..=4));
    let mut net = QNetwork::<f64>::new(&sizes, rng).unwrap();
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    let batch = rng.random_range(1..=6);
    let states = Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-1.0..1.0));
    let out = *sizes.last().unwrap();
    let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..out)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();

    let (_, grads) = net.loss_and_gradients(states.view(), &actions, &targets).unwrap();
    let loss = |n: &QNetwork<f64>| n.loss_and_gradients(states.view(), &actions, &targets).unwrap().0;
    let h = 1e-6;
    let (mut diff, mut norm_a, mut norm_b) = (0.0, 0.0, 0.0);
    for li in 0..net.layers().len() {
        let (rows, cols) = net.layers()[li].weights.dim();
        for p in 0..rows * cols + rows {
            let analytic = if p < rows * cols {
                grads[li].weights[[p / cols, p % cols]]
            } else {
                grads[li].bias[p - rows * cols]
            };
            let probe = |delta: f64| {
                let mut n = net.clone();
                let layer = &mut n.layers_mut()[li];
                if p < rows * cols {
                    layer.weights[[p / cols, p % cols]] += delta;
                } else {
                    layer.bias[p - rows * cols] += delta;
                }
                loss(&n)
            };
            let numeric = (probe(h) - probe(-h)) / (2.0 * h);
            diff += (analytic - numeric).powi(2);
            norm_a += analytic * analytic;
            norm_b += numeric * numeric;
        }
    }
    if norm_a + norm_b == 0.0 {
        return 0.0;
    }
    diff.sqrt() / (norm_a.sqrt() + norm_b.sqrt())
}

/// Highest one-step utility reachable from the reset state under any
/// sequence of joint actions, by breadth-first search over associations.
pub fn reachable_optimum(env: &mut udn_core::env::Env<f64>) -> f64 {
    use std::collections::{HashSet, VecDeque};

    let start = env.reset();
    let (n, acts) = (env.num_users(), env.num_actions());
    let (m, l) = (env.topology().num_aps(), env.config().num_subcarriers);
    let mut seen = HashSet::from([format!("{:?}", start.association)]);
    let mut queue = VecDeque::from([start]);
    let mut best = 0.0f64;
    while let Some(s) = queue.pop_front() {
        for code in 0..acts.pow(n as u32) {
            let joint: Vec<UserAction> = (0..n)
                .map(|i| UserAction::from_flat(code / acts.pow(i as u32) % acts, m, l).unwrap())
                .collect();
            let r = env.transition(&s, &joint).unwrap();
            best = best.max(r.reward);
            if seen.insert(format!("{:?}", r.next_state.association)) {
                queue.push_back(r.next_state);
            }
        }
    }
    best
}
