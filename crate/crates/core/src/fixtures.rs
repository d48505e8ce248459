//! Small named instances used by tests, examples and the experiment runner.

use crate::error::Result;
use crate::mdp::{
    enumerate_trajectories, state_action_occupancy, LayeredMdp, MdpShape, RewardTable, SaTable,
    TabularPolicy, Trajectory,
};
use crate::outcome::RewardClass;
use crate::preference::{kl_objective, kl_optimal_policy, preference_deficit, KlConfig};
use crate::solvers::ModelClass;

/// Layer sizes `1, A, A^2, ...` for a full tree of `depth` layers.
pub fn tree_shape(depth: usize, actions: usize) -> MdpShape {
    let sizes = (0..depth).map(|h| actions.pow(h as u32)).collect();
    MdpShape::new(sizes, actions, 0).expect("depth and actions are positive")
}

/// Deterministic tree: action `a` at state `s` leads to child `s * A + a`.
/// Rewards are zero.
pub fn tree_mdp(depth: usize, actions: usize) -> LayeredMdp {
    let shape = tree_shape(depth, actions);
    let transitions = (0..depth.saturating_sub(1))
        .map(|h| {
            let next = shape.layer_sizes[h + 1];
            (0..shape.layer_sizes[h])
                .map(|s| {
                    (0..actions)
                        .map(|a| {
                            let mut row = vec![0.0; next];
                            row[s * actions + a] = 1.0;
                            row
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    LayeredMdp::new(shape.clone(), transitions, SaTable::zeros(&shape)).expect("valid tree")
}

pub fn binary_tree(depth: usize) -> LayeredMdp {
    tree_mdp(depth, 2)
}

/// One step, two actions with rewards `r0` and `r1`.
pub fn two_armed_bandit(r0: f64, r1: f64) -> LayeredMdp {
    let shape = MdpShape::new(vec![1], 2, 0).expect("static shape");
    LayeredMdp::new(shape, vec![], SaTable::from_nested(vec![vec![vec![r0, r1]]]))
        .expect("rewards in [0, 1]")
}

/// One state per layer and two actions: a sequence of independent binary
/// choices with zero reward.
pub fn independent_coordinates(horizon: usize) -> LayeredMdp {
    let shape = MdpShape::new(vec![1; horizon], 2, 0).expect("positive horizon");
    let transitions = vec![vec![vec![vec![1.0]; 2]]; horizon.saturating_sub(1)];
    LayeredMdp::new(shape.clone(), transitions, SaTable::zeros(&shape)).expect("valid chain")
}

/// Action 0 with probability `p0` everywhere, the rest spread evenly.
pub fn biased_policy(shape: &MdpShape, p0: f64) -> TabularPolicy {
    let rest = if shape.num_actions > 1 {
        (1.0 - p0) / (shape.num_actions - 1) as f64
    } else {
        0.0
    };
    let row: Vec<f64> = (0..shape.num_actions)
        .map(|a| if a == 0 { p0 } else { rest })
        .collect();
    TabularPolicy::new(
        shape
            .layer_sizes
            .iter()
            .map(|&n| vec![row.clone(); n])
            .collect(),
    )
    .expect("valid probability row")
}

/// See [`crate::advantage::counterexample_mdp`].
pub fn counterexample() -> (LayeredMdp, TabularPolicy) {
    crate::advantage::counterexample_mdp()
}

/// A fixed MDP, behaviour policy and finite reward class for rate sweeps.
#[derive(Clone, Debug)]
pub struct RewardLadder {
    pub mdp: LayeredMdp,
    pub pi_off: TabularPolicy,
    pub class: RewardClass,
    /// `pi_off`-occupancy of the pair each alternative perturbs.
    pub visitation: Vec<f64>,
}

/// Behaviour rows for the ladder instance, states in order
/// `s0, b0, b1, b2, c0, c1, c2`.
const LADDER_BEHAVIOUR: [[f64; 3]; 7] = [
    [0.93359375, 0.00390625, 0.0625],
    [0.96875, 0.015625, 0.015625],
    [0.98828125, 0.0078125, 0.00390625],
    [0.98828125, 0.00390625, 0.0078125],
    [0.6875, 0.25, 0.0625],
    [0.98828125, 0.0078125, 0.00390625],
    [0.98046875, 0.015625, 0.00390625],
];

/// Three layers of sizes `1, 3, 3` with three actions and deterministic
/// moves `(s0, a) -> b_a`, `(b_i, a) -> c_{(i + a) mod 3}`. The behaviour
/// policy is skewed so that the 15 rarest pairs have occupancies spread
/// roughly one octave apart between `2^-4` and `2^-16`.
///
/// The class holds 15 alternatives followed by the truth. Alternative `j`
/// adds `sqrt(p_j)` to the true reward on the pair with occupancy `p_j`,
/// ordered from most to least visited. Since every pair is reachable with
/// probability one by some policy, the alternative's worst-case evaluation
/// error is exactly `sqrt(p_j)`, and it is indistinguishable from the truth
/// until its pair appears in the data.
pub fn reward_ladder() -> RewardLadder {
    let shape = MdpShape::new(vec![1, 3, 3], 3, 0).expect("static shape");
    let row = |next: usize| {
        let mut r = vec![0.0; 3];
        r[next] = 1.0;
        r
    };
    let transitions = vec![
        vec![(0..3).map(row).collect()],
        (0..3)
            .map(|i| (0..3).map(|a| row((i + a) % 3)).collect())
            .collect(),
    ];
    let truth = SaTable::from_fn(&shape, |h, s, a| 0.0625 * ((h + s + 2 * a) % 5) as f64);
    let mdp = LayeredMdp::new(shape.clone(), transitions, truth.clone()).expect("valid ladder");
    let pi_off = TabularPolicy::new(vec![
        vec![LADDER_BEHAVIOUR[0].to_vec()],
        LADDER_BEHAVIOUR[1..4].iter().map(|r| r.to_vec()).collect(),
        LADDER_BEHAVIOUR[4..7].iter().map(|r| r.to_vec()).collect(),
    ])
    .expect("rows are probability vectors");
    let occupancy = state_action_occupancy(&mdp, &pi_off);
    let mut pairs: Vec<(usize, usize, usize, f64)> = occupancy.iter().collect();
    pairs.sort_by(|x, y| x.3.total_cmp(&y.3));
    let mut rungs: Vec<_> = pairs.into_iter().take(15).collect();
    rungs.reverse();
    let mut members: Vec<(String, RewardTable)> = rungs
        .iter()
        .enumerate()
        .map(|(j, &(h, s, a, p))| {
            let mut r = truth.clone();
            r.set(h, s, a, truth.get(h, s, a) + p.sqrt());
            (format!("bump{j}"), r)
        })
        .collect();
    members.push(("truth".into(), truth.clone()));
    let class = RewardClass::new(&mdp, members)
        .expect("bumped rewards stay in range")
        .mark_realizable(&truth);
    RewardLadder {
        mdp,
        pi_off,
        class,
        visitation: rungs.iter().map(|r| r.3).collect(),
    }
}

/// Deterministic tree, reference policy, reward and finite policy class for
/// DPO sweeps.
#[derive(Clone, Debug)]
pub struct DpoLadder {
    /// The tree; its own reward table is `reward / v_max`.
    pub mdp: LayeredMdp,
    /// True reward with totals in `[0, v_max]`.
    pub reward: RewardTable,
    pub pi_ref: TabularPolicy,
    pub cfg: KlConfig,
    /// 15 alternatives followed by the regularized optimum.
    pub class: Vec<TabularPolicy>,
    /// Expected per-pair log-likelihood deficit of each member.
    pub deficits: Vec<f64>,
    /// `J_beta(pi*_beta) - J_beta(member)`.
    pub gaps: Vec<f64>,
}

impl DpoLadder {
    pub fn optimum_index(&self) -> usize {
        self.class.len() - 1
    }
}

/// Reference rows as `(a, b)` with probabilities `(1 - 2^-a - 2^-b, 2^-a,
/// 2^-b)`, states in order root, layer 1, layer 2.
const DPO_REFERENCE: [(i32, i32); 13] = [
    (2, 3),
    (2, 2),
    (9, 3),
    (6, 5),
    (3, 2),
    (2, 2),
    (2, 2),
    (4, 2),
    (8, 6),
    (8, 9),
    (4, 7),
    (3, 9),
    (7, 8),
];

/// Rewards of the 12 most likely trajectories, in increasing order of
/// reference probability; the 15 rarest get reward 0.
const DPO_COMMON_REWARDS: [f64; 12] = [1.0, 0.25, 0.75, 0.5, 1.5, 0.0, 1.25, 2.0, 0.5, 1.0, 0.75, 0.25];

/// Three-layer ternary tree with `v_max = 2`; the acceptance setting is
/// `beta = 1`.
///
/// The class is built as the hardest alternative at each of 15 information
/// levels: for level `j` the target deficit is `D_j = 2^-(j+4)`; every
/// single-trajectory reward bump (either sign, staying inside `[0, v_max]`)
/// is tuned by bisection to have deficit `D_j`, and the one with the largest
/// regularized-value gap is kept. The regularized optimum comes last.
pub fn dpo_ladder(beta: f64, cap: usize) -> Result<DpoLadder> {
    let mdp0 = tree_mdp(3, 3);
    let shape = mdp0.shape().clone();
    let rows: Vec<Vec<f64>> = DPO_REFERENCE
        .iter()
        .map(|&(a, b)| {
            let (x, y) = (2f64.powi(-a), 2f64.powi(-b));
            vec![1.0 - x - y, x, y]
        })
        .collect();
    let pi_ref = TabularPolicy::new(vec![
        vec![rows[0].clone()],
        rows[1..4].to_vec(),
        rows[4..13].to_vec(),
    ])?;
    let cfg = KlConfig::new(beta, 2.0)?;

    let mut trajs: Vec<(Trajectory, f64)> = enumerate_trajectories(&mdp0, &pi_ref, cap)?;
    trajs.sort_by(|x, y| x.1.total_cmp(&y.1));
    let final_pair = |t: &Trajectory| {
        let last = t.steps()[2];
        (last.state, last.action)
    };
    let mut reward = SaTable::zeros(&shape);
    for ((t, _), &v) in trajs[15..].iter().zip(&DPO_COMMON_REWARDS) {
        let (s, a) = final_pair(t);
        reward.set(2, s, a, v);
    }
    let mdp = mdp0.with_rewards(reward.scale(1.0 / cfg.v_max))?;
    let pi_star = kl_optimal_policy(&mdp, &reward, &pi_ref, cfg.beta)?;
    let best = kl_objective(&mdp, &pi_star, &pi_ref, &cfg, &reward, cap)?;

    let bumped = |s: usize, a: usize, e: f64| -> Result<TabularPolicy> {
        let mut r = reward.clone();
        r.set(2, s, a, reward.get(2, s, a) + e);
        kl_optimal_policy(&mdp, &r, &pi_ref, cfg.beta)
    };
    let deficit = |pi: &TabularPolicy| preference_deficit(&mdp, &pi_ref, &reward, pi, cfg.beta, cap);

    let mut class = Vec::with_capacity(16);
    let mut deficits = Vec::with_capacity(16);
    let mut gaps = Vec::with_capacity(16);
    for j in 1..=15 {
        let target = 2f64.powi(-(j + 4));
        let mut chosen: Option<(f64, f64, TabularPolicy)> = None;
        for (t, _) in &trajs {
            let (s, a) = final_pair(t);
            let base = reward.get(2, s, a);
            for limit in [cfg.v_max - base, -base] {
                if limit == 0.0 || deficit(&bumped(s, a, limit)?)? < target {
                    continue;
                }
                let (mut lo, mut hi) = (0.0, limit);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if deficit(&bumped(s, a, mid)?)? < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let pi = bumped(s, a, hi)?;
                let gap = best - kl_objective(&mdp, &pi, &pi_ref, &cfg, &reward, cap)?;
                if chosen.as_ref().map_or(true, |c| gap > c.0) {
                    chosen = Some((gap, deficit(&pi)?, pi));
                }
            }
        }
        let (gap, d, pi) = chosen.expect("the largest bumps exceed every target deficit");
        class.push(pi);
        deficits.push(d);
        gaps.push(gap);
    }
    class.push(pi_star);
    deficits.push(0.0);
    gaps.push(0.0);
    Ok(DpoLadder {
        mdp,
        reward,
        pi_ref,
        cfg,
        class,
        deficits,
        gaps,
    })
}

/// Partial-coverage instance for pessimistic learning.
#[derive(Clone, Debug)]
pub struct ArmorInstance {
    pub mdp: LayeredMdp,
    pub pi_off: TabularPolicy,
    /// Nine candidates: left-branch split `{0.5, 0.7, 0.9}` times rewards
    /// `{optimistic, true, swapped}`.
    pub models: ModelClass,
    /// The three reward tables on their own, for the outcome-to-process
    /// pipeline.
    pub rewards: RewardClass,
}

/// Two layers: the root's action 0 leads to `L1` w.p. 0.7 and `L2`
/// otherwise; action 1 leads to `R`, which the behaviour policy never
/// visits. True rewards pay on `L1` and `L2` only (optimal value 0.74); the
/// optimistic candidate also pays 1 for both actions at `R`.
pub fn armor_instance() -> ArmorInstance {
    let shape = MdpShape::new(vec![1, 3], 2, 0).expect("static shape");
    let reward = |r: [[f64; 2]; 3]| {
        SaTable::from_nested(vec![
            vec![vec![0.0, 0.0]],
            r.iter().map(|x| x.to_vec()).collect(),
        ])
    };
    let optimistic = reward([[0.8, 0.2], [0.3, 0.6], [1.0, 1.0]]);
    let truth = reward([[0.8, 0.2], [0.3, 0.6], [0.0, 0.0]]);
    let swapped = reward([[0.2, 0.8], [0.6, 0.3], [0.0, 0.0]]);
    let model = |p: f64, r: &SaTable| {
        let transitions = vec![vec![vec![vec![p, 1.0 - p, 0.0], vec![0.0, 0.0, 1.0]]]];
        LayeredMdp::new(shape.clone(), transitions, r.clone()).expect("valid candidate")
    };
    let tables = [&optimistic, &truth, &swapped];
    let mut candidates = Vec::with_capacity(9);
    for p in [0.5, 0.7, 0.9] {
        for r in tables {
            candidates.push(model(p, r));
        }
    }
    let mdp = model(0.7, &truth);
    let models = ModelClass::new(candidates, Some(4)).expect("compatible candidates");
    let pi_off = TabularPolicy::new(vec![
        vec![vec![1.0, 0.0]],
        vec![vec![0.5, 0.5]; 3],
    ])
    .expect("valid behaviour");
    let rewards = RewardClass::new(
        &mdp,
        vec![
            ("optimistic".into(), optimistic),
            ("truth".into(), truth.clone()),
            ("swapped".into(), swapped),
        ],
    )
    .expect("rewards in range")
    .mark_realizable(&truth);
    ArmorInstance {
        mdp,
        pi_off,
        models,
        rewards,
    }
}

/// Rescales rewards so that `Q*` lies in `[0, 1]` at every pair, including
/// pairs unreachable from the initial state; then every `Q^mu` lies in
/// `[0, 1]` and every advantage in `[-1, 1]`.
pub fn with_bounded_suffixes(mdp: &LayeredMdp) -> LayeredMdp {
    let q_max = crate::mdp::optimal_plan(mdp, mdp.rewards()).q.max_abs();
    if q_max <= 1.0 {
        return mdp.clone();
    }
    mdp.with_rewards(mdp.rewards().scale((1.0 - 1e-12) / q_max))
        .expect("scaling down keeps rewards in range")
}

/// Realizable class for the advantage pipeline: the true advantage of `mu`,
/// its `Q` and reward tables, and one perturbation of the advantage per
/// pair (`+0.2`, or `-0.2` where that would leave `[-1, 1]`).
pub fn advantage_reward_class(mdp: &LayeredMdp, mu: &TabularPolicy) -> Result<RewardClass> {
    let values = crate::mdp::value_tables(mdp, mu, mdp.rewards());
    let truth = values.advantage.clone();
    let mut members = vec![
        ("advantage".to_string(), truth.clone()),
        ("q".to_string(), values.q.clone()),
        ("reward".to_string(), mdp.rewards().clone()),
    ];
    for (h, s, a, x) in truth.iter() {
        let mut r = truth.clone();
        r.set(h, s, a, if x + 0.2 <= 1.0 { x + 0.2 } else { x - 0.2 });
        members.push((format!("shift_{h}_{s}_{a}"), r));
    }
    Ok(crate::advantage::advantage_class(mdp, members)?.mark_realizable(&truth))
}
