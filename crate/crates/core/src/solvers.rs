//! Offline RL procedures: tabular FQI and model-based planning on process
//! data, and pessimistic model-based learning from total rewards over a
//! finite model class.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{
    argmax_lowest, optimal_plan, policy_return, LayeredMdp, MdpShape, MdpSpec, RewardTable,
    SaTable, TabularPolicy,
};
use crate::outcome::{argmax_tolerant, OutcomeDataset, ProcessDataset};

/// Offline RL procedure consumed by the outcome-to-process transformation.
///
/// Unseen `(s, a)` pairs get empirical reward 0 and a uniform transition over
/// the next layer; ties go to the lowest action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    /// Sample-based backward regression of `r_h + V_{h+1}(s_{h+1})`.
    Fqi,
    /// Maximum-likelihood model and empirical mean rewards, then planning.
    ModelBasedGreedy,
    /// Maximum-likelihood model planned against the fitted reward table on
    /// every pair, including pairs the data never visits.
    PlugInGreedy,
}

impl Solver {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "fqi" => Ok(Self::Fqi),
            "model_based_greedy" => Ok(Self::ModelBasedGreedy),
            "plug_in_greedy" => Ok(Self::PlugInGreedy),
            other => Err(Error::InvalidArgument(format!("unknown solver `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fqi => "fqi",
            Self::ModelBasedGreedy => "model_based_greedy",
            Self::PlugInGreedy => "plug_in_greedy",
        }
    }

    /// `reward_model` is only read by [`Solver::PlugInGreedy`], which
    /// requires it.
    pub fn solve(
        self,
        data: &ProcessDataset,
        shape: &MdpShape,
        reward_model: Option<&RewardTable>,
    ) -> Result<TabularPolicy> {
        match self {
            Self::Fqi => fqi(data, shape),
            Self::ModelBasedGreedy => model_based_greedy(data, shape),
            Self::PlugInGreedy => {
                let r = reward_model.ok_or_else(|| {
                    Error::InvalidArgument("plug_in_greedy needs a reward model".into())
                })?;
                plug_in_greedy(data, shape, r)
            }
        }
    }
}

/// Visit counts, reward sums and next-state counts per pair.
struct Counts {
    visits: SaTable,
    reward_sums: SaTable,
    /// `next[h][s][a][s']`.
    next: Vec<Vec<Vec<Vec<f64>>>>,
}

fn counts(data: &ProcessDataset, shape: &MdpShape) -> Result<Counts> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let horizon = shape.horizon();
    let mut visits = SaTable::zeros(shape);
    let mut reward_sums = SaTable::zeros(shape);
    let mut next: Vec<Vec<Vec<Vec<f64>>>> = (0..horizon.saturating_sub(1))
        .map(|h| vec![vec![vec![0.0; shape.layer_sizes[h + 1]]; shape.num_actions]; shape.layer_sizes[h]])
        .collect();
    for t in &data.records {
        check_in_shape(t.steps(), shape)?;
        let rewards = t
            .rewards()
            .ok_or_else(|| Error::InvalidTrajectory("process record without step rewards".into()))?;
        for (h, st) in t.steps().iter().enumerate() {
            visits.set(h, st.state, st.action, visits.get(h, st.state, st.action) + 1.0);
            reward_sums.set(
                h,
                st.state,
                st.action,
                reward_sums.get(h, st.state, st.action) + rewards[h],
            );
            if h + 1 < horizon {
                next[h][st.state][st.action][t.steps()[h + 1].state] += 1.0;
            }
        }
    }
    Ok(Counts {
        visits,
        reward_sums,
        next,
    })
}

fn check_in_shape(steps: &[crate::mdp::Step], shape: &MdpShape) -> Result<()> {
    if steps.len() != shape.horizon() {
        return Err(Error::InvalidTrajectory(format!(
            "length {} for horizon {}",
            steps.len(),
            shape.horizon()
        )));
    }
    for (h, st) in steps.iter().enumerate() {
        if st.state >= shape.layer_sizes[h] || st.action >= shape.num_actions {
            return Err(Error::InvalidTrajectory(format!(
                "step {h} ({}, {}) out of range",
                st.state, st.action
            )));
        }
    }
    Ok(())
}

/// Maximum-likelihood transitions with the uniform rule for unseen pairs,
/// wrapped in a zero-reward MDP.
fn empirical_model(c: &Counts, shape: &MdpShape) -> Result<LayeredMdp> {
    let transitions = c
        .next
        .iter()
        .enumerate()
        .map(|(h, layer)| {
            layer
                .iter()
                .enumerate()
                .map(|(s, rows)| {
                    rows.iter()
                        .enumerate()
                        .map(|(a, row)| {
                            let n = c.visits.get(h, s, a);
                            if n == 0.0 {
                                vec![1.0 / row.len() as f64; row.len()]
                            } else {
                                row.iter().map(|k| k / n).collect()
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    LayeredMdp::new(shape.clone(), transitions, SaTable::zeros(shape))
}

fn empirical_rewards(c: &Counts, shape: &MdpShape) -> RewardTable {
    SaTable::from_fn(shape, |h, s, a| {
        let n = c.visits.get(h, s, a);
        if n == 0.0 {
            0.0
        } else {
            c.reward_sums.get(h, s, a) / n
        }
    })
}

/// Certainty-equivalence planning on the maximum-likelihood model.
pub fn model_based_greedy(data: &ProcessDataset, shape: &MdpShape) -> Result<TabularPolicy> {
    let c = counts(data, shape)?;
    let model = empirical_model(&c, shape)?;
    Ok(optimal_plan(&model, &empirical_rewards(&c, shape)).policy)
}

/// Planning on the maximum-likelihood model with `r_hat` on every pair.
pub fn plug_in_greedy(
    data: &ProcessDataset,
    shape: &MdpShape,
    r_hat: &RewardTable,
) -> Result<TabularPolicy> {
    if !r_hat.matches(shape) {
        return Err(Error::LayerMismatch("reward model does not match the layout".into()));
    }
    let c = counts(data, shape)?;
    let model = empirical_model(&c, shape)?;
    Ok(optimal_plan(&model, r_hat).policy)
}

/// Tabular fitted Q-iteration: at each layer, regress `r_h + V_{h+1}(s_{h+1})`
/// onto `(s_h, a_h)` by per-cell sample means, then act greedily.
pub fn fqi(data: &ProcessDataset, shape: &MdpShape) -> Result<TabularPolicy> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for t in &data.records {
        check_in_shape(t.steps(), shape)?;
        if t.rewards().is_none() {
            return Err(Error::InvalidTrajectory("process record without step rewards".into()));
        }
    }
    let horizon = shape.horizon();
    let mut actions: Vec<Vec<usize>> = shape.layer_sizes.iter().map(|&n| vec![0; n]).collect();
    let mut v_next: Vec<f64> = Vec::new();
    for h in (0..horizon).rev() {
        let n_states = shape.layer_sizes[h];
        let mut sums = vec![vec![0.0; shape.num_actions]; n_states];
        let mut hits = vec![vec![0usize; shape.num_actions]; n_states];
        for t in &data.records {
            let st = t.steps()[h];
            let target = t.rewards().expect("checked above")[h]
                + if h + 1 < horizon {
                    v_next[t.steps()[h + 1].state]
                } else {
                    0.0
                };
            sums[st.state][st.action] += target;
            hits[st.state][st.action] += 1;
        }
        let unseen = if h + 1 < horizon {
            v_next.iter().sum::<f64>() / v_next.len() as f64
        } else {
            0.0
        };
        let mut v = vec![0.0; n_states];
        for s in 0..n_states {
            let q: Vec<f64> = (0..shape.num_actions)
                .map(|a| {
                    if hits[s][a] == 0 {
                        unseen
                    } else {
                        sums[s][a] / hits[s][a] as f64
                    }
                })
                .collect();
            let best = argmax_lowest(&q);
            actions[h][s] = best;
            v[s] = q[best];
        }
        v_next = v;
    }
    TabularPolicy::deterministic(shape, &actions)
}

/// A finite set of candidate MDPs sharing one state-action layout.
#[derive(Clone, Debug)]
pub struct ModelClass {
    candidates: Vec<LayeredMdp>,
    /// Index of the ground-truth model, when it is a member.
    pub true_index: Option<usize>,
}

/// On-disk form: `true_index` plus a `[[candidates]]` array of MDP specs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelClassSpec {
    #[serde(default)]
    pub true_index: Option<usize>,
    pub candidates: Vec<MdpSpec>,
}

impl ModelClass {
    pub fn new(candidates: Vec<LayeredMdp>, true_index: Option<usize>) -> Result<Self> {
        let first = candidates.first().ok_or(Error::EmptyClass)?;
        if candidates.iter().any(|m| m.shape() != first.shape()) {
            return Err(Error::LayerMismatch("model class members differ in layout".into()));
        }
        if let Some(i) = true_index {
            if i >= candidates.len() {
                return Err(Error::InvalidArgument(format!(
                    "true_index {i} out of range for {} candidates",
                    candidates.len()
                )));
            }
        }
        Ok(Self {
            candidates,
            true_index,
        })
    }

    pub fn from_spec(spec: &ModelClassSpec) -> Result<Self> {
        let candidates = spec
            .candidates
            .iter()
            .map(MdpSpec::build)
            .collect::<Result<Vec<_>>>()?;
        Self::new(candidates, spec.true_index)
    }

    pub fn to_spec(&self) -> ModelClassSpec {
        ModelClassSpec {
            true_index: self.true_index,
            candidates: self.candidates.iter().map(LayeredMdp::to_spec).collect(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ModelClassSpec =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_spec()).expect("model class specs always serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::UnresolvableSpec {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[LayeredMdp] {
        &self.candidates
    }

    pub fn shape(&self) -> &MdpShape {
        self.candidates[0].shape()
    }
}

/// `L_D(M) = sum_i [sum_h log P_M(s_{h+1} | s_h, a_h) - (r_M(tau_i) - R_i)^2]`;
/// `-inf` when `M` gives some observed transition probability zero.
pub fn total_reward_score(model: &LayeredMdp, data: &OutcomeDataset) -> f64 {
    let mut score = 0.0;
    for rec in &data.records {
        let steps = rec.trajectory.steps();
        for h in 0..steps.len().saturating_sub(1) {
            let p = model.transition(h, steps[h].state, steps[h].action)[steps[h + 1].state];
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            score += p.ln();
        }
        let e = model.rewards().trajectory_sum(&rec.trajectory) - rec.total;
        score -= e * e;
    }
    score
}

/// Models whose score is within `alpha` of the best.
#[derive(Clone, Debug)]
pub struct VersionSpace {
    pub members: Vec<usize>,
    pub alpha: f64,
    pub scores: Vec<f64>,
}

impl VersionSpace {
    pub fn build(mc: &ModelClass, data: &OutcomeDataset, alpha: f64) -> Result<Self> {
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
        }
        let scores: Vec<f64> = mc
            .candidates()
            .iter()
            .map(|m| total_reward_score(m, data))
            .collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return Err(Error::AllModelsExcluded);
        }
        let members = (0..scores.len())
            .filter(|&i| best - scores[i] <= alpha)
            .collect();
        Ok(Self {
            members,
            alpha,
            scores,
        })
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }

    /// `max_M L_D(M) - L_D(M_index)`.
    pub fn deficit(&self, index: usize) -> f64 {
        let best = self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best - self.scores[index]
    }
}

/// What the pessimistic learner returns.
#[derive(Clone, Debug)]
pub struct ArmorOutput {
    pub policy: TabularPolicy,
    pub policy_index: usize,
    /// `min_{M in version space} J_M(pi)` for every policy in the class.
    pub worst_case_values: Vec<f64>,
    pub version_space: VersionSpace,
}

/// `argmax_{pi in class} min_{M in version space} J_M(pi)` by exhaustive
/// evaluation; ties to the lowest policy index.
pub fn armor_total_reward(
    data: &OutcomeDataset,
    mc: &ModelClass,
    alpha: f64,
    policies: &[TabularPolicy],
) -> Result<ArmorOutput> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if policies.is_empty() {
        return Err(Error::EmptyClass);
    }
    let version_space = VersionSpace::build(mc, data, alpha)?;
    let worst_case_values: Vec<f64> = policies
        .iter()
        .map(|pi| {
            version_space
                .members
                .iter()
                .map(|&i| {
                    let m = &mc.candidates()[i];
                    policy_return(m, pi, m.rewards())
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let policy_index = argmax_tolerant(&worst_case_values);
    Ok(ArmorOutput {
        policy: policies[policy_index].clone(),
        policy_index,
        worst_case_values,
        version_space,
    })
}

/// Default multiplier in [`choose_alpha`].
pub const DEFAULT_ALPHA_CONSTANT: f64 = 2.0;

/// `alpha = c * ln(|M| / delta)`.
pub fn choose_alpha(mc_size: usize, delta: f64, c: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if mc_size == 0 {
        return Err(Error::EmptyClass);
    }
    Ok(c * (mc_size as f64 / delta).ln())
}

/// Smallest `c` in `grid` (ascending order is not assumed) for which the
/// true model stays in the version space on at least `coverage` of the
/// seeds, given the true model's per-seed score deficits.
pub fn calibrate_alpha_constant(
    deficits: &[f64],
    mc_size: usize,
    delta: f64,
    grid: &[f64],
    coverage: f64,
) -> Result<Option<f64>> {
    if deficits.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    for c in sorted {
        let alpha = choose_alpha(mc_size, delta, c)?;
        let kept = deficits.iter().filter(|&&d| d <= alpha).count();
        if kept as f64 >= coverage * deficits.len() as f64 {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fixtures;
    use crate::mdp::random::{random_mdp, random_policy, RandomMdpConfig};
    use crate::mdp::{
        deterministic_policies, optimal_policy, optimal_value, sample_trajectory,
        DEFAULT_ENUMERATION_CAP,
    };
    use crate::outcome::collect_outcome_dataset;

    fn process_data(mdp: &LayeredMdp, pi: &TabularPolicy, n: usize, seed: u64) -> ProcessDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ProcessDataset {
            records: (0..n).map(|_| sample_trajectory(mdp, pi, &mut rng)).collect(),
        }
    }

    #[test]
    fn full_coverage_deterministic_data_recovers_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let mdp = random_mdp(
                &mut rng,
                &RandomMdpConfig {
                    deterministic: true,
                    ..RandomMdpConfig::default()
                },
            );
            let pi = TabularPolicy::uniform(mdp.shape());
            let data = process_data(&mdp, &pi, 3000, 2);
            let best = optimal_value(&mdp, mdp.rewards());
            for solver in [Solver::Fqi, Solver::ModelBasedGreedy] {
                let got = solver.solve(&data, mdp.shape(), None).unwrap();
                let value = policy_return(&mdp, &got, mdp.rewards());
                assert!((value - best).abs() < 1e-12, "{solver:?}: {value} vs {best}");
            }
        }
    }

    #[test]
    fn fqi_and_model_based_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..50 {
            let mdp = random_mdp(&mut rng, &RandomMdpConfig::default());
            let pi = random_policy(&mut rng, mdp.shape(), false);
            let data = process_data(&mdp, &pi, 40, seed);
            let a = fqi(&data, mdp.shape()).unwrap();
            let b = model_based_greedy(&data, mdp.shape()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn unvisited_state_defaults_to_action_zero() {
        let mdp = fixtures::binary_tree(2);
        let pi = TabularPolicy::deterministic(mdp.shape(), &[vec![0], vec![1, 1]]).unwrap();
        let data = process_data(&mdp, &pi, 5, 4);
        for solver in [Solver::Fqi, Solver::ModelBasedGreedy] {
            let got = solver.solve(&data, mdp.shape(), None).unwrap();
            assert_eq!(got.action(1, 1), Some(0));
        }
    }

    #[test]
    fn plug_in_uses_fitted_reward_off_support() {
        let (mdp, mu) = fixtures::counterexample();
        let data = process_data(&mdp, &mu, 10, 5);
        // mu never tries action 1 at the root; the reward model says it pays.
        let mut r = mdp.rewards().clone();
        r.set(0, 0, 1, 1.0);
        let plug = plug_in_greedy(&data, mdp.shape(), &r).unwrap();
        assert_eq!(plug.action(0, 0), Some(1));
        let greedy = model_based_greedy(&data, mdp.shape()).unwrap();
        assert_eq!(greedy.action(0, 0), Some(0));
        assert!(Solver::PlugInGreedy.solve(&data, mdp.shape(), None).is_err());
    }

    #[test]
    fn solver_names_round_trip() {
        for s in [Solver::Fqi, Solver::ModelBasedGreedy, Solver::PlugInGreedy] {
            assert_eq!(Solver::from_name(s.name()).unwrap(), s);
        }
        assert!(Solver::from_name("sarsa").is_err());
    }

    #[test]
    fn singleton_class_returns_its_optimal_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mdp = random_mdp(
            &mut rng,
            &RandomMdpConfig {
                max_horizon: 3,
                max_states: 2,
                max_actions: 2,
                ..RandomMdpConfig::default()
            },
        );
        let mc = ModelClass::new(vec![mdp.clone()], Some(0)).unwrap();
        let pi_off = TabularPolicy::uniform(mdp.shape());
        let data = collect_outcome_dataset(&mdp, &pi_off, 20, &mut rng).unwrap();
        let policies = deterministic_policies(mdp.shape(), DEFAULT_ENUMERATION_CAP).unwrap();
        let out = armor_total_reward(&data, &mc, 0.0, &policies).unwrap();
        let best = optimal_value(&mdp, mdp.rewards());
        assert!((policy_return(&mdp, &out.policy, mdp.rewards()) - best).abs() < 1e-12);
    }

    #[test]
    fn equal_scores_both_enter_at_alpha_zero() {
        let inst = fixtures::armor_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = collect_outcome_dataset(&inst.mdp, &inst.pi_off, 200, &mut rng).unwrap();
        let vs = VersionSpace::build(&inst.models, &data, 0.0).unwrap();
        // The optimistic and the true reward agree on everything the data sees.
        let truth = inst.models.true_index.unwrap();
        assert!(vs.contains(truth));
        assert!(vs.members.len() >= 2);
        assert_eq!(vs.scores[vs.members[0]], vs.scores[vs.members[1]]);
    }

    #[test]
    fn pessimism_invariants_hold() {
        let inst = fixtures::armor_instance();
        let policies = deterministic_policies(inst.mdp.shape(), DEFAULT_ENUMERATION_CAP).unwrap();
        let alpha = choose_alpha(inst.models.len(), 0.05, DEFAULT_ALPHA_CONSTANT).unwrap();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = collect_outcome_dataset(&inst.mdp, &inst.pi_off, 500, &mut rng).unwrap();
            let out = armor_total_reward(&data, &inst.models, alpha, &policies).unwrap();
            let mine = out.worst_case_values[out.policy_index];
            assert!(out.worst_case_values.iter().all(|&v| mine >= v));
            let truth = inst.models.true_index.unwrap();
            if out.version_space.contains(truth) {
                let pi_star = optimal_policy(&inst.mdp, inst.mdp.rewards());
                let worst_at_star = out
                    .version_space
                    .members
                    .iter()
                    .map(|&i| {
                        let m = &inst.models.candidates()[i];
                        policy_return(m, &pi_star, m.rewards())
                    })
                    .fold(f64::INFINITY, f64::min);
                let achieved = policy_return(&inst.mdp, &out.policy, inst.mdp.rewards());
                assert!(achieved >= worst_at_star - 1e-12);
            }
        }
    }

    #[test]
    fn impossible_transitions_exclude_a_model() {
        let (mdp, mu) = fixtures::counterexample();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = collect_outcome_dataset(&mdp, &mu, 5, &mut rng).unwrap();
        // Swap the successors of the root actions: mu's path a -> b becomes impossible.
        let spec = mdp.to_spec();
        let mut swapped = spec.clone();
        for e in &mut swapped.transitions {
            e.next.reverse();
        }
        let other = swapped.build().unwrap();
        assert_eq!(total_reward_score(&other, &data), f64::NEG_INFINITY);
        let mc = ModelClass::new(vec![other.clone(), mdp.clone()], Some(1)).unwrap();
        let vs = VersionSpace::build(&mc, &data, 1e9).unwrap();
        assert_eq!(vs.members, vec![1]);
        let mc = ModelClass::new(vec![other], None).unwrap();
        assert!(matches!(
            VersionSpace::build(&mc, &data, 1.0),
            Err(Error::AllModelsExcluded)
        ));
    }

    #[test]
    fn alpha_arithmetic() {
        assert!((choose_alpha(1, (-1.0f64).exp(), 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(choose_alpha(8, 0.05, 2.0).unwrap(), 2.0 * 160f64.ln());
        assert!(choose_alpha(8, 0.0, 2.0).is_err());
        assert!(choose_alpha(8, 1.0, 2.0).is_err());
    }

    #[test]
    fn calibration_picks_smallest_sufficient_constant() {
        let deficits: Vec<f64> = (0..100).map(|i| if i == 0 { 50.0 } else { 1.0 }).collect();
        let unit = (4.0f64 / 0.1).ln();
        let c = calibrate_alpha_constant(&deficits, 4, 0.1, &[2.0, 0.1, 0.5], 0.99).unwrap();
        assert_eq!(c, Some(0.5));
        assert!(0.5 * unit >= 1.0 && 0.1 * unit < 1.0);
        let none = calibrate_alpha_constant(&[100.0; 10], 4, 0.1, &[0.1], 0.99).unwrap();
        assert_eq!(none, None);
    }

    #[test]
    fn model_class_toml_round_trip() {
        let inst = fixtures::armor_instance();
        let text = inst.models.to_toml_string();
        let back = ModelClass::from_toml_str(&text).unwrap();
        assert_eq!(back.true_index, inst.models.true_index);
        assert_eq!(back.candidates(), inst.models.candidates());
    }
}
