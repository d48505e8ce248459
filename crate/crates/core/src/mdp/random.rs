//! Seeded generators for small random instances.

use rand::Rng;

use super::{reward_range, LayeredMdp, MdpShape, RewardTable, SaTable, TabularPolicy};

/// Size limits and structure knobs for [`random_mdp`].
#[derive(Clone, Debug)]
pub struct RandomMdpConfig {
    pub max_horizon: usize,
    pub max_states: usize,
    pub max_actions: usize,
    /// Probability that a transition weight is forced to zero (at least one
    /// entry per row survives).
    pub sparsity: f64,
    /// Point-mass transitions only.
    pub deterministic: bool,
}

impl Default for RandomMdpConfig {
    fn default() -> Self {
        Self {
            max_horizon: 4,
            max_states: 4,
            max_actions: 3,
            sparsity: 0.3,
            deterministic: false,
        }
    }
}

pub fn random_shape<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomMdpConfig) -> MdpShape {
    let horizon = rng.gen_range(1..=cfg.max_horizon);
    let layer_sizes: Vec<usize> = (0..horizon)
        .map(|h| if h == 0 { 1 } else { rng.gen_range(1..=cfg.max_states) })
        .collect();
    let num_actions = rng.gen_range(1..=cfg.max_actions);
    MdpShape {
        layer_sizes,
        num_actions,
        initial_state: 0,
    }
}

/// A random MDP whose rewards are uniform on `[0, 1]` and then scaled down
/// so that every trajectory total lies in `[0, 1]`.
pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomMdpConfig) -> LayeredMdp {
    let shape = random_shape(rng, cfg);
    random_mdp_with_shape(rng, &shape, cfg)
}

pub fn random_mdp_with_shape<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &MdpShape,
    cfg: &RandomMdpConfig,
) -> LayeredMdp {
    let horizon = shape.horizon();
    let transitions: Vec<Vec<Vec<Vec<f64>>>> = (0..horizon - 1)
        .map(|h| {
            let next = shape.layer_sizes[h + 1];
            (0..shape.layer_sizes[h])
                .map(|_| {
                    (0..shape.num_actions)
                        .map(|_| random_row(rng, next, cfg))
                        .collect()
                })
                .collect()
        })
        .collect();
    let raw = random_table(rng, shape, 0.0, 1.0);
    let zero = LayeredMdp::new(shape.clone(), transitions, SaTable::zeros(shape))
        .expect("generated transitions are stochastic");
    let (_, max) = reward_range(&zero, &raw);
    let rewards = if max > 1.0 { raw.scale(1.0 / max) } else { raw };
    // Scaling can overshoot 1 by an ulp; clamp the per-step values instead of
    // trusting the product.
    let rewards = rewards.map(|v| v.clamp(0.0, 1.0));
    match zero.with_rewards(rewards.clone()) {
        Ok(mdp) => mdp,
        Err(_) => zero
            .with_rewards(rewards.scale(1.0 - 1e-9))
            .expect("shrunk rewards satisfy the total-reward bound"),
    }
}

fn random_row<R: Rng + ?Sized>(rng: &mut R, len: usize, cfg: &RandomMdpConfig) -> Vec<f64> {
    if cfg.deterministic {
        let mut row = vec![0.0; len];
        row[rng.gen_range(0..len)] = 1.0;
        return row;
    }
    let keep = rng.gen_range(0..len);
    let mut row: Vec<f64> = (0..len)
        .map(|i| {
            if i != keep && rng.gen::<f64>() < cfg.sparsity {
                0.0
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    row
}

/// Uniform entries on `[lo, hi)`.
pub fn random_table<R: Rng + ?Sized>(rng: &mut R, shape: &MdpShape, lo: f64, hi: f64) -> SaTable {
    SaTable::from_fn(shape, |_, _, _| rng.gen_range(lo..hi))
}

/// A random reward table for `mdp` with totals in `[0, 1]`.
pub fn random_reward<R: Rng + ?Sized>(rng: &mut R, mdp: &LayeredMdp) -> RewardTable {
    let raw = random_table(rng, mdp.shape(), 0.0, 1.0);
    let (_, max) = reward_range(mdp, &raw);
    if max > 1.0 {
        raw.scale((1.0 - 1e-12) / max)
    } else {
        raw
    }
}

/// A random Markov policy. With `full_support` every action keeps positive
/// probability; otherwise each row may drop actions (never all of them).
pub fn random_policy<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &MdpShape,
    full_support: bool,
) -> TabularPolicy {
    let probs = shape
        .layer_sizes
        .iter()
        .map(|&n| {
            (0..n)
                .map(|_| {
                    let keep = rng.gen_range(0..shape.num_actions);
                    let mut row: Vec<f64> = (0..shape.num_actions)
                        .map(|a| {
                            if !full_support && a != keep && rng.gen::<f64>() < 0.3 {
                                0.0
                            } else {
                                rng.gen_range(0.05..1.0)
                            }
                        })
                        .collect();
                    let total: f64 = row.iter().sum();
                    row.iter_mut().for_each(|p| *p /= total);
                    row
                })
                .collect()
        })
        .collect();
    TabularPolicy::new(probs).expect("normalised rows are probability vectors")
}

/// A uniformly random deterministic policy.
pub fn random_deterministic_policy<R: Rng + ?Sized>(rng: &mut R, shape: &MdpShape) -> TabularPolicy {
    let actions: Vec<Vec<usize>> = shape
        .layer_sizes
        .iter()
        .map(|&n| (0..n).map(|_| rng.gen_range(0..shape.num_actions)).collect())
        .collect();
    TabularPolicy::deterministic(shape, &actions).expect("actions drawn in range")
}
