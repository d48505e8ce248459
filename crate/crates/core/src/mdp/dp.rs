use super::{enumerate_trajectories, LayeredMdp, RewardTable, SaTable, TabularPolicy, Trajectory};
use crate::error::Result;

/// Values within this distance of the maximum count as ties; ties go to the
/// lowest index.
pub const TIE_TOL: f64 = 1e-12;

/// Index of the first entry within [`TIE_TOL`] of the maximum.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v >= max - TIE_TOL || (max.is_infinite() && v == max))
        .unwrap_or(0)
}

/// State and state-action occupancies `d^pi`, optionally with the full
/// trajectory law.
#[derive(Clone, Debug)]
pub struct OccupancyTables {
    /// `state[h][s] = d^pi(s_h)`.
    pub state: Vec<Vec<f64>>,
    pub state_action: SaTable,
    pub trajectories: Option<Vec<(Trajectory, f64)>>,
}

/// Forward recursion for `d^pi(s)` and `d^pi(s, a)`; trajectory law by
/// enumeration when requested (bounded by `cap`).
pub fn occupancy_measures(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    with_trajectories: bool,
    cap: usize,
) -> Result<OccupancyTables> {
    let (state, state_action) = forward(mdp, pi);
    let trajectories = if with_trajectories {
        Some(enumerate_trajectories(mdp, pi, cap)?)
    } else {
        None
    };
    Ok(OccupancyTables {
        state,
        state_action,
        trajectories,
    })
}

/// `d^pi(s, a)` for every layer.
pub fn state_action_occupancy(mdp: &LayeredMdp, pi: &TabularPolicy) -> SaTable {
    forward(mdp, pi).1
}

fn forward(mdp: &LayeredMdp, pi: &TabularPolicy) -> (Vec<Vec<f64>>, SaTable) {
    let shape = mdp.shape();
    let mut state: Vec<Vec<f64>> = shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
    state[0][mdp.initial_state()] = 1.0;
    let mut sa = SaTable::zeros(shape);
    for h in 0..mdp.horizon() {
        for s in 0..mdp.layer_size(h) {
            let ds = state[h][s];
            if ds == 0.0 {
                continue;
            }
            for a in 0..mdp.num_actions() {
                let dsa = ds * pi.prob(h, s, a);
                sa.set(h, s, a, dsa);
                if dsa > 0.0 && h + 1 < mdp.horizon() {
                    for (next, &p) in mdp.transition(h, s, a).iter().enumerate() {
                        state[h + 1][next] += dsa * p;
                    }
                }
            }
        }
    }
    (state, sa)
}

/// `V^mu`, `Q^mu` and `A^mu = Q^mu - V^mu` under reward `r`.
#[derive(Clone, Debug)]
pub struct ValueTables {
    /// `v[h][s]`.
    pub v: Vec<Vec<f64>>,
    pub q: SaTable,
    pub advantage: SaTable,
}

/// Backward recursion with `V_{H+1} = 0`.
pub fn value_tables(mdp: &LayeredMdp, mu: &TabularPolicy, r: &RewardTable) -> ValueTables {
    let shape = mdp.shape();
    let horizon = mdp.horizon();
    let mut v: Vec<Vec<f64>> = shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut q = SaTable::zeros(shape);
    for h in (0..horizon).rev() {
        for s in 0..mdp.layer_size(h) {
            let mut vs = 0.0;
            for a in 0..mdp.num_actions() {
                let qsa = r.get(h, s, a) + continuation(mdp, &v, h, s, a);
                q.set(h, s, a, qsa);
                vs += mu.prob(h, s, a) * qsa;
            }
            v[h][s] = vs;
        }
    }
    let advantage = SaTable::from_fn(shape, |h, s, a| q.get(h, s, a) - v[h][s]);
    ValueTables { v, q, advantage }
}

#[inline]
fn continuation(mdp: &LayeredMdp, v: &[Vec<f64>], h: usize, s: usize, a: usize) -> f64 {
    if h + 1 == mdp.horizon() {
        return 0.0;
    }
    mdp.transition(h, s, a)
        .iter()
        .zip(&v[h + 1])
        .map(|(p, x)| p * x)
        .sum()
}

/// `J_r(pi) = sum_h sum_{s,a} d^pi(s_h, a_h) r(s_h, a_h)`.
pub fn policy_return(mdp: &LayeredMdp, pi: &TabularPolicy, r: &RewardTable) -> f64 {
    state_action_occupancy(mdp, pi)
        .iter()
        .map(|(h, s, a, d)| if d == 0.0 { 0.0 } else { d * r.get(h, s, a) })
        .sum()
}

/// Result of backward-induction planning.
#[derive(Clone, Debug)]
pub struct OptimalPlan {
    pub policy: TabularPolicy,
    /// `v[h][s] = max_pi V^pi_h(s)`.
    pub v: Vec<Vec<f64>>,
    pub q: SaTable,
    /// Optimal value from the initial state.
    pub value: f64,
}

/// Backward induction with lowest-index tie-breaking.
pub fn optimal_plan(mdp: &LayeredMdp, r: &RewardTable) -> OptimalPlan {
    let shape = mdp.shape();
    let mut v: Vec<Vec<f64>> = shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut q = SaTable::zeros(shape);
    let mut actions: Vec<Vec<usize>> = shape.layer_sizes.iter().map(|&n| vec![0; n]).collect();
    for h in (0..mdp.horizon()).rev() {
        for s in 0..mdp.layer_size(h) {
            let row: Vec<f64> = (0..mdp.num_actions())
                .map(|a| r.get(h, s, a) + continuation(mdp, &v, h, s, a))
                .collect();
            let best = argmax_lowest(&row);
            actions[h][s] = best;
            v[h][s] = row[best];
            for (a, x) in row.into_iter().enumerate() {
                q.set(h, s, a, x);
            }
        }
    }
    let policy = TabularPolicy::deterministic(shape, &actions)
        .expect("planner actions are in range by construction");
    let value = v[0][mdp.initial_state()];
    OptimalPlan {
        policy,
        v,
        q,
        value,
    }
}

pub fn optimal_policy(mdp: &LayeredMdp, r: &RewardTable) -> TabularPolicy {
    optimal_plan(mdp, r).policy
}

/// `max_pi J_r(pi)`.
pub fn optimal_value(mdp: &LayeredMdp, r: &RewardTable) -> f64 {
    optimal_plan(mdp, r).value
}

/// Minimum and maximum of `r(tau)` over all trajectories with positive
/// transition probability, by a min/max path-sum recursion.
pub fn reward_range(mdp: &LayeredMdp, r: &RewardTable) -> (f64, f64) {
    let horizon = mdp.horizon();
    let mut lo: Vec<f64> = vec![0.0; mdp.layer_size(horizon - 1)];
    let mut hi = lo.clone();
    for h in (0..horizon).rev() {
        let mut new_lo = vec![f64::INFINITY; mdp.layer_size(h)];
        let mut new_hi = vec![f64::NEG_INFINITY; mdp.layer_size(h)];
        for s in 0..mdp.layer_size(h) {
            for a in 0..mdp.num_actions() {
                let (mut tail_lo, mut tail_hi) = (0.0, 0.0);
                if h + 1 < horizon {
                    tail_lo = f64::INFINITY;
                    tail_hi = f64::NEG_INFINITY;
                    for (next, &p) in mdp.transition(h, s, a).iter().enumerate() {
                        if p > 0.0 {
                            tail_lo = tail_lo.min(lo[next]);
                            tail_hi = tail_hi.max(hi[next]);
                        }
                    }
                }
                let x = r.get(h, s, a);
                new_lo[s] = new_lo[s].min(x + tail_lo);
                new_hi[s] = new_hi[s].max(x + tail_hi);
            }
        }
        lo = new_lo;
        hi = new_hi;
    }
    let s0 = mdp.initial_state();
    (lo[s0], hi[s0])
}

/// `sup_pi d^pi(s, a)` over all policies, for every pair.
///
/// For a target state the best policy steers towards it, so the supremum is
/// a backward max-probability recursion; any action at the target then
/// carries the full state mass.
pub fn max_reach(mdp: &LayeredMdp) -> SaTable {
    let shape = mdp.shape();
    let mut reach: Vec<Vec<f64>> = shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
    for (target_layer, layer) in reach.iter_mut().enumerate() {
        for (target, slot) in layer.iter_mut().enumerate() {
            let mut g = vec![0.0; mdp.layer_size(target_layer)];
            g[target] = 1.0;
            for h in (0..target_layer).rev() {
                g = (0..mdp.layer_size(h))
                    .map(|s| {
                        (0..mdp.num_actions())
                            .map(|a| {
                                mdp.transition(h, s, a)
                                    .iter()
                                    .zip(&g)
                                    .map(|(p, x)| p * x)
                                    .sum::<f64>()
                            })
                            .fold(0.0, f64::max)
                    })
                    .collect();
            }
            *slot = g[mdp.initial_state()];
        }
    }
    SaTable::from_fn(shape, |h, s, _| reach[h][s])
}

/// `(E_pi[g(tau)], E_pi[g(tau)^2])` for a per-step table `g`, by a backward
/// recursion on the first two moments of the remaining path sum.
pub fn path_sum_moments(mdp: &LayeredMdp, pi: &TabularPolicy, g: &SaTable) -> (f64, f64) {
    let horizon = mdp.horizon();
    let mut m1 = vec![0.0; mdp.layer_size(horizon - 1)];
    let mut m2 = m1.clone();
    for h in (0..horizon).rev() {
        let mut n1 = vec![0.0; mdp.layer_size(h)];
        let mut n2 = vec![0.0; mdp.layer_size(h)];
        for s in 0..mdp.layer_size(h) {
            for a in 0..mdp.num_actions() {
                let p = pi.prob(h, s, a);
                if p == 0.0 {
                    continue;
                }
                let (t1, t2) = if h + 1 < horizon {
                    let row = mdp.transition(h, s, a);
                    (
                        row.iter().zip(&m1).map(|(p, x)| p * x).sum::<f64>(),
                        row.iter().zip(&m2).map(|(p, x)| p * x).sum::<f64>(),
                    )
                } else {
                    (0.0, 0.0)
                };
                let x = g.get(h, s, a);
                n1[s] += p * (x + t1);
                n2[s] += p * (x * x + 2.0 * x * t1 + t2);
            }
        }
        m1 = n1;
        m2 = n2;
    }
    let s0 = mdp.initial_state();
    (m1[s0], m2[s0])
}
