//! Finite layered MDPs, tabular policies, trajectories and exact dynamic
//! programming.
//!
//! States are addressed by `(layer, index)` with layer-local indices, so the
//! layer sets are disjoint by construction. Layer `H` (one past the last) is a
//! notional terminal with value zero.

mod dp;
pub mod policy;
pub mod random;
pub mod spec;
mod table;
pub mod trajectory;

pub use dp::{
    argmax_lowest, max_reach, occupancy_measures, optimal_plan, optimal_policy, optimal_value,
    path_sum_moments, policy_return, reward_range, state_action_occupancy, value_tables,
    OccupancyTables,
    OptimalPlan, ValueTables, TIE_TOL,
};
pub use policy::{deterministic_policies, deterministic_policy_count, TabularPolicy};
pub use spec::MdpSpec;
pub use table::{RewardTable, SaTable};
pub use trajectory::{
    enumerate_trajectories, feasible_trajectories, sample_return_from, sample_trajectory,
    trajectory_probability, Step, Trajectory,
};

use crate::error::{Error, Result};

/// Tolerance for probability rows and reward-sum identities.
pub const PROB_TOL: f64 = 1e-12;

/// Default bound on the number of trajectories or policies any exhaustive
/// enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// Environment variable overriding [`DEFAULT_ENUMERATION_CAP`].
pub const CAP_ENV_VAR: &str = "OUTCOME_RL_ENUM_CAP";

/// The enumeration cap, honouring [`CAP_ENV_VAR`] when it parses.
pub fn default_cap() -> usize {
    std::env::var(CAP_ENV_VAR)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUMERATION_CAP)
}

/// State and action skeleton shared by an MDP, its policies and tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MdpShape {
    pub layer_sizes: Vec<usize>,
    pub num_actions: usize,
    pub initial_state: usize,
}

impl MdpShape {
    pub fn new(layer_sizes: Vec<usize>, num_actions: usize, initial_state: usize) -> Result<Self> {
        let shape = Self {
            layer_sizes,
            num_actions,
            initial_state,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn horizon(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn num_states(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states() * self.num_actions
    }

    fn validate(&self) -> Result<()> {
        if self.layer_sizes.is_empty() {
            return Err(Error::LayerMismatch("horizon must be positive".into()));
        }
        if let Some(h) = self.layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::LayerMismatch(format!("layer {h} is empty")));
        }
        if self.num_actions == 0 {
            return Err(Error::LayerMismatch("action set is empty".into()));
        }
        if self.initial_state >= self.layer_sizes[0] {
            return Err(Error::LayerMismatch(format!(
                "initial state {} not in first layer of size {}",
                self.initial_state, self.layer_sizes[0]
            )));
        }
        Ok(())
    }
}

/// A finite-horizon layered MDP `(S, A, P, r*, H)` with fixed initial state.
///
/// Invariants checked at construction: every transition row is a
/// probability vector over the next layer (within [`PROB_TOL`]), every
/// reward lies in `[0, 1]`, and every feasible trajectory has total reward
/// in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredMdp {
    shape: MdpShape,
    /// `[h][s][a][s']` for `h < H - 1`.
    transitions: Vec<Vec<Vec<Vec<f64>>>>,
    rewards: RewardTable,
}

impl LayeredMdp {
    pub fn new(
        shape: MdpShape,
        transitions: Vec<Vec<Vec<Vec<f64>>>>,
        rewards: RewardTable,
    ) -> Result<Self> {
        shape.validate()?;
        let horizon = shape.horizon();
        if transitions.len() != horizon - 1 {
            return Err(Error::LayerMismatch(format!(
                "{} transition layers for horizon {horizon}",
                transitions.len()
            )));
        }
        for (h, layer) in transitions.iter().enumerate() {
            if layer.len() != shape.layer_sizes[h] {
                return Err(Error::LayerMismatch(format!(
                    "transition layer {h} has {} states, expected {}",
                    layer.len(),
                    shape.layer_sizes[h]
                )));
            }
            for (s, rows) in layer.iter().enumerate() {
                if rows.len() != shape.num_actions {
                    return Err(Error::LayerMismatch(format!(
                        "transition (h={h}, s={s}) has {} actions",
                        rows.len()
                    )));
                }
                for (a, row) in rows.iter().enumerate() {
                    if row.len() != shape.layer_sizes[h + 1] {
                        return Err(Error::LayerMismatch(format!(
                            "transition (h={h}, s={s}, a={a}) has {} entries, next layer has {}",
                            row.len(),
                            shape.layer_sizes[h + 1]
                        )));
                    }
                    if let Some(next) = row.iter().position(|p| !p.is_finite() || *p < 0.0) {
                        return Err(Error::InvalidProbability {
                            layer: h,
                            state: s,
                            action: a,
                            next,
                        });
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > PROB_TOL {
                        return Err(Error::NonStochasticRow {
                            layer: h,
                            state: s,
                            action: a,
                            sum,
                        });
                    }
                }
            }
        }
        let mdp = Self {
            shape,
            transitions,
            rewards: RewardTable::zeros(&MdpShape {
                layer_sizes: vec![1],
                num_actions: 1,
                initial_state: 0,
            }),
        };
        mdp.with_rewards(rewards)
    }

    /// Same transitions, new reward table (validated).
    pub fn with_rewards(&self, rewards: RewardTable) -> Result<Self> {
        if !rewards.matches(&self.shape) {
            return Err(Error::LayerMismatch(
                "reward table does not match the state-action layout".into(),
            ));
        }
        for (h, s, a, v) in rewards.iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::RewardOutOfRange {
                    layer: h,
                    state: s,
                    action: a,
                    value: v,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        let mdp = Self {
            shape: self.shape.clone(),
            transitions: self.transitions.clone(),
            rewards,
        };
        let (min, max) = reward_range(&mdp, &mdp.rewards);
        if min < -PROB_TOL || max > 1.0 + PROB_TOL {
            return Err(Error::TotalRewardOutOfRange {
                min,
                max,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(mdp)
    }

    pub fn shape(&self) -> &MdpShape {
        &self.shape
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon()
    }

    pub fn layer_size(&self, layer: usize) -> usize {
        self.shape.layer_sizes[layer]
    }

    pub fn num_actions(&self) -> usize {
        self.shape.num_actions
    }

    pub fn initial_state(&self) -> usize {
        self.shape.initial_state
    }

    /// `P_h(. | s, a)` over layer `h + 1`. Panics for the last layer.
    #[inline]
    pub fn transition(&self, layer: usize, state: usize, action: usize) -> &[f64] {
        &self.transitions[layer][state][action]
    }

    pub fn transitions(&self) -> &Vec<Vec<Vec<Vec<f64>>>> {
        &self.transitions
    }

    #[inline]
    pub fn reward(&self, layer: usize, state: usize, action: usize) -> f64 {
        self.rewards.get(layer, state, action)
    }

    pub fn rewards(&self) -> &RewardTable {
        &self.rewards
    }

    /// True when every transition row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.transitions
            .iter()
            .flatten()
            .flatten()
            .all(|row| row.contains(&1.0))
    }

    /// The unique successor under a point-mass transition row.
    pub fn deterministic_next(&self, layer: usize, state: usize, action: usize) -> Option<usize> {
        self.transitions[layer][state][action]
            .iter()
            .position(|&p| p == 1.0)
    }
}
