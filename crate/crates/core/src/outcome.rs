//! Outcome and process datasets, least-squares reward imputation and the
//! outcome-to-process transformation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::format::{fields, format_real, format_real_list, parse_header, parse_real, parse_real_list};
use crate::mdp::{
    deterministic_policies, optimal_value, path_sum_moments, policy_return, reward_range,
    sample_trajectory, LayeredMdp, MdpShape, RewardTable, TabularPolicy, Trajectory, PROB_TOL,
};
use crate::solvers::Solver;

/// One outcome-supervised record: the path and its total reward only.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeRecord {
    pub trajectory: Trajectory,
    pub total: f64,
}

/// Trajectories with total rewards, `D_O = {(tau_i, R_i)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDataset {
    pub records: Vec<OutcomeRecord>,
    /// Identifier of the generating policy.
    pub policy: String,
    pub seed: u64,
}

/// Trajectories with per-step rewards, `D_P = {(tau_i, r_{i,1..H})}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessDataset {
    /// Each trajectory carries its step rewards.
    pub records: Vec<Trajectory>,
}

impl OutcomeDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.records.iter().map(|r| &r.trajectory)
    }

    /// Header comment plus one `traj=(s,a;...) R=<real>` line per record.
    pub fn to_text(&self) -> String {
        let mut out = format!("# outcome policy={} seed={}\n", self.policy, self.seed);
        for r in &self.records {
            writeln!(out, "traj={} R={}", r.trajectory, format_real(r.total)).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut data = OutcomeDataset {
            records: Vec::new(),
            policy: String::new(),
            seed: 0,
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if line.starts_with('#') {
                if let Some((policy, seed)) = parse_header(line, "outcome") {
                    data.policy = policy;
                    data.seed = seed;
                }
                continue;
            }
            let mut traj = None;
            let mut total = None;
            for (k, v) in fields(line)? {
                match k {
                    "traj" => traj = Some(v.parse::<Trajectory>()?),
                    "R" => total = Some(parse_real(v)?),
                    other => return Err(Error::Parse(format!("unknown field `{other}`"))),
                }
            }
            match (traj, total) {
                (Some(trajectory), Some(total)) => data.records.push(OutcomeRecord { trajectory, total }),
                _ => return Err(Error::Parse(format!("record `{line}` needs traj and R"))),
            }
        }
        Ok(data)
    }
}

impl ProcessDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One `traj=(s,a;...) r=(r_1,...,r_H)` line per record.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# process\n");
        for t in &self.records {
            let rewards = t.rewards().unwrap_or(&[]);
            writeln!(out, "traj={} r={}", t, format_real_list(rewards)).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let mut traj = None;
            let mut rewards = None;
            for (k, v) in fields(line)? {
                match k {
                    "traj" => traj = Some(v.parse::<Trajectory>()?),
                    "r" => rewards = Some(parse_real_list(v)?),
                    other => return Err(Error::Parse(format!("unknown field `{other}`"))),
                }
            }
            match (traj, rewards) {
                (Some(t), Some(r)) if r.len() == t.len() => records.push(t.with_rewards(r)),
                (Some(_), Some(_)) => {
                    return Err(Error::Parse(format!("record `{line}`: reward count != length")))
                }
                _ => return Err(Error::Parse(format!("record `{line}` needs traj and r"))),
            }
        }
        Ok(Self { records })
    }
}

/// `n` i.i.d. trajectories from `pi_off`, keeping only the total reward.
pub fn collect_outcome_dataset<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    pi_off: &TabularPolicy,
    n: usize,
    rng: &mut R,
) -> Result<OutcomeDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be at least 1".into()));
    }
    let records = (0..n)
        .map(|_| {
            let t = sample_trajectory(mdp, pi_off, rng);
            let total = t.total().expect("sampled trajectories carry totals");
            OutcomeRecord {
                trajectory: t.stripped(),
                total,
            }
        })
        .collect();
    Ok(OutcomeDataset {
        records,
        policy: "pi_off".into(),
        seed: 0,
    })
}

/// A finite set of named reward tables.
#[derive(Clone, Debug)]
pub struct RewardClass {
    members: Vec<RewardTable>,
    names: Vec<String>,
    /// Whether the ground-truth reward is a member, when known.
    pub realizable: Option<bool>,
}

impl RewardClass {
    /// Checks that every member has per-step values in `[0, 1]` and totals in
    /// `[0, 1]` on every feasible trajectory of `mdp`.
    pub fn new(mdp: &LayeredMdp, members: Vec<(String, RewardTable)>) -> Result<Self> {
        Self::with_bounds(mdp, members, (0.0, 1.0), Some((0.0, 1.0)))
    }

    /// Same with explicit per-step and (optional) total ranges.
    pub fn with_bounds(
        mdp: &LayeredMdp,
        members: Vec<(String, RewardTable)>,
        step: (f64, f64),
        total: Option<(f64, f64)>,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyClass);
        }
        for (_, r) in &members {
            if !r.matches(mdp.shape()) {
                return Err(Error::LayerMismatch("class member has the wrong shape".into()));
            }
            for (h, s, a, v) in r.iter() {
                if !(step.0..=step.1).contains(&v) {
                    return Err(Error::RewardOutOfRange {
                        layer: h,
                        state: s,
                        action: a,
                        value: v,
                        lo: step.0,
                        hi: step.1,
                    });
                }
            }
            if let Some((lo, hi)) = total {
                let (min, max) = reward_range(mdp, r);
                if min < lo - PROB_TOL || max > hi + PROB_TOL {
                    return Err(Error::TotalRewardOutOfRange { min, max, lo, hi });
                }
            }
        }
        let (names, members) = members.into_iter().unzip();
        Ok(Self {
            members,
            names,
            realizable: None,
        })
    }

    /// Records whether `truth` is (up to `1e-12`) one of the members.
    pub fn mark_realizable(mut self, truth: &RewardTable) -> Self {
        self.realizable = Some(self.members.iter().any(|m| m.max_abs_diff(truth) <= 1e-12));
        self
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &RewardTable {
        &self.members[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn members(&self) -> &[RewardTable] {
        &self.members
    }
}

/// Result of the least-squares fit.
#[derive(Clone, Debug)]
pub struct LeastSquaresFit {
    pub index: usize,
    pub reward: RewardTable,
    /// Training loss `sum_i (r(tau_i) - R_i)^2` of every member.
    pub losses: Vec<f64>,
    /// `E_{pi_off}[(rhat(tau) - r*(tau))^2]`, when evaluated against a known MDP.
    pub excess_risk: Option<f64>,
}

impl LeastSquaresFit {
    pub fn loss(&self) -> f64 {
        self.losses[self.index]
    }
}

/// Relative tolerance under which two objective values count as tied.
pub const OBJECTIVE_TIE_TOL: f64 = 1e-9;

/// Lowest index whose value is within [`OBJECTIVE_TIE_TOL`] (relative) of the
/// minimum.
pub(crate) fn argmin_tolerant(values: &[f64]) -> usize {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = OBJECTIVE_TIE_TOL * (1.0 + min.abs());
    values.iter().position(|&v| v <= min + tol).unwrap_or(0)
}

/// Lowest index whose value is within tolerance of the maximum.
pub(crate) fn argmax_tolerant(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0;
    }
    let tol = OBJECTIVE_TIE_TOL * (1.0 + max.abs());
    values.iter().position(|&v| v >= max - tol).unwrap_or(0)
}

/// `argmin_{r in class} sum_i (r(tau_i) - R_i)^2`, ties to the lowest index.
pub fn least_squares_reward(data: &OutcomeDataset, class: &RewardClass) -> Result<LeastSquaresFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let losses: Vec<f64> = class
        .members()
        .iter()
        .map(|r| {
            data.records
                .iter()
                .map(|rec| {
                    let e = r.trajectory_sum(&rec.trajectory) - rec.total;
                    e * e
                })
                .sum()
        })
        .collect();
    let index = argmin_tolerant(&losses);
    Ok(LeastSquaresFit {
        index,
        reward: class.member(index).clone(),
        losses,
        excess_risk: None,
    })
}

/// `E_{pi_off}[(rhat(tau) - r*(tau))^2]`, exact.
pub fn population_excess_risk(mdp: &LayeredMdp, pi_off: &TabularPolicy, r_hat: &RewardTable) -> f64 {
    path_sum_moments(mdp, pi_off, &r_hat.sub(mdp.rewards())).1
}

/// Replaces each total with the per-step rewards `rhat(s_h, a_h)`.
pub fn impute_process(data: &OutcomeDataset, r_hat: &RewardTable) -> Result<ProcessDataset> {
    let records = data
        .records
        .iter()
        .map(|rec| {
            let rewards = rec
                .trajectory
                .steps()
                .iter()
                .enumerate()
                .map(|(h, st)| {
                    let v = r_hat
                        .as_nested()
                        .get(h)
                        .and_then(|l| l.get(st.state))
                        .and_then(|r| r.get(st.action))
                        .copied()
                        .filter(|v| v.is_finite());
                    v.ok_or(Error::UndefinedReward {
                        layer: h,
                        state: st.state,
                        action: st.action,
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(rec.trajectory.stripped().with_rewards(rewards))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProcessDataset { records })
}

/// Shuffles with `seed`, then sends even positions to the first half and odd
/// positions to the second (an odd record count favours the first half).
pub fn split_dataset(data: &OutcomeDataset, seed: u64) -> (OutcomeDataset, OutcomeDataset) {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut first = Vec::with_capacity(data.len().div_ceil(2));
    let mut second = Vec::with_capacity(data.len() / 2);
    for (pos, &i) in order.iter().enumerate() {
        let rec = data.records[i].clone();
        if pos % 2 == 0 {
            first.push(rec);
        } else {
            second.push(rec);
        }
    }
    let half = |records| OutcomeDataset {
        records,
        policy: data.policy.clone(),
        seed: data.seed,
    };
    (half(first), half(second))
}

/// Everything the transformation produced.
#[derive(Clone, Debug)]
pub struct TransformOutput {
    pub policy: TabularPolicy,
    pub fit: LeastSquaresFit,
    pub imputed: ProcessDataset,
}

/// Fit a reward on one half of the outcome data, impute per-step rewards on
/// the other half, and hand the process data to an offline RL solver.
pub fn outcome_to_process(
    data: &OutcomeDataset,
    class: &RewardClass,
    solver: Solver,
    shape: &MdpShape,
    split_seed: u64,
) -> Result<TransformOutput> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(
            "the transformation needs at least two records".into(),
        ));
    }
    let (first, second) = split_dataset(data, split_seed);
    let fit = least_squares_reward(&first, class)?;
    let imputed = impute_process(&second, &fit.reward)?;
    let policy = solver.solve(&imputed, shape, Some(&fit.reward))?;
    Ok(TransformOutput {
        policy,
        fit,
        imputed,
    })
}

/// `|J_rhat(pi) - J(pi)|`, exact.
pub fn reward_evaluation_gap(mdp: &LayeredMdp, r_hat: &RewardTable, pi: &TabularPolicy) -> f64 {
    (policy_return(mdp, pi, r_hat) - policy_return(mdp, pi, mdp.rewards())).abs()
}

/// `sup_pi |J_rhat(pi) - J(pi)|` over all policies: planning on the
/// difference table and its negation.
pub fn sup_reward_evaluation_gap(mdp: &LayeredMdp, r_hat: &RewardTable) -> f64 {
    let diff = r_hat.sub(mdp.rewards());
    let up = optimal_value(mdp, &diff);
    let down = optimal_value(mdp, &diff.scale(-1.0));
    up.max(down).max(0.0)
}

/// The same supremum by enumerating deterministic policies (cap-guarded).
pub fn sup_reward_evaluation_gap_enumerated(
    mdp: &LayeredMdp,
    r_hat: &RewardTable,
    cap: usize,
) -> Result<f64> {
    Ok(deterministic_policies(mdp.shape(), cap)?
        .iter()
        .map(|pi| reward_evaluation_gap(mdp, r_hat, pi))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mdp::random::{random_mdp, random_policy, random_reward, RandomMdpConfig};
    use crate::mdp::{optimal_policy, DEFAULT_ENUMERATION_CAP};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn counterexample_records_have_behaviour_totals() {
        let (mdp, mu) = fixtures::counterexample();
        let data = collect_outcome_dataset(&mdp, &mu, 4, &mut rng(1)).unwrap();
        for r in &data.records {
            assert!(r.total == 0.0 || r.total == 0.5, "{}", r.total);
        }
    }

    #[test]
    fn deterministic_instance_repeats_the_same_record() {
        let mdp = fixtures::binary_tree(3)
            .with_rewards(crate::mdp::SaTable::from_fn(
                &fixtures::tree_shape(3, 2),
                |h, _, a| if a == 1 { 0.25 * (h as f64 + 1.0) / 2.0 } else { 0.0 },
            ))
            .unwrap();
        let pi = TabularPolicy::deterministic(mdp.shape(), &[vec![1], vec![0, 1], vec![1; 4]]).unwrap();
        let data = collect_outcome_dataset(&mdp, &pi, 10, &mut rng(2)).unwrap();
        assert!(data.records.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn empirical_mean_matches_dp() {
        let mut g = rng(3);
        let mdp = random_mdp(&mut g, &RandomMdpConfig::default());
        let pi = random_policy(&mut g, mdp.shape(), false);
        let n = 100_000;
        let data = collect_outcome_dataset(&mdp, &pi, n, &mut g).unwrap();
        let totals: Vec<f64> = data.records.iter().map(|r| r.total).collect();
        let mean = totals.iter().sum::<f64>() / n as f64;
        let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let exact = policy_return(&mdp, &pi, mdp.rewards());
        assert!((mean - exact).abs() <= 3.0 * se + 1e-12, "{mean} vs {exact}");
    }

    #[test]
    fn singleton_class_returns_truth_with_zero_loss() {
        let (mdp, mu) = fixtures::counterexample();
        let class = RewardClass::new(&mdp, vec![("truth".into(), mdp.rewards().clone())]).unwrap();
        let data = collect_outcome_dataset(&mdp, &mu, 20, &mut rng(4)).unwrap();
        let fit = least_squares_reward(&data, &class).unwrap();
        assert_eq!(fit.index, 0);
        assert_eq!(fit.loss(), 0.0);
    }

    #[test]
    fn off_support_difference_ties_to_lower_index() {
        let (mdp, mu) = fixtures::counterexample();
        // mu never reaches state c, so changing rewards there is invisible.
        let mut alt = mdp.rewards().clone();
        alt.set(1, 1, 0, 0.25);
        let class = RewardClass::new(
            &mdp,
            vec![("alt".into(), alt.clone()), ("truth".into(), mdp.rewards().clone())],
        )
        .unwrap();
        let data = collect_outcome_dataset(&mdp, &mu, 50, &mut rng(5)).unwrap();
        let fit = least_squares_reward(&data, &class).unwrap();
        assert_eq!(fit.losses, vec![0.0, 0.0]);
        assert_eq!(fit.index, 0);
    }

    #[test]
    fn on_support_perturbation_is_rejected_in_most_seeds() {
        let mdp = fixtures::binary_tree(2);
        let truth = crate::mdp::SaTable::from_fn(mdp.shape(), |h, s, a| {
            0.1 * (h + s + a) as f64 / 4.0
        });
        let mdp = mdp.with_rewards(truth.clone()).unwrap();
        let mut bumped = truth.clone();
        bumped.set(1, 1, 0, truth.get(1, 1, 0) + 0.1);
        let class = RewardClass::new(
            &mdp,
            vec![("truth".into(), truth), ("bumped".into(), bumped)],
        )
        .unwrap();
        let pi = TabularPolicy::uniform(mdp.shape());
        let hits = (0..100)
            .filter(|&seed| {
                let data = collect_outcome_dataset(&mdp, &pi, 200, &mut rng(seed)).unwrap();
                least_squares_reward(&data, &class).unwrap().index == 0
            })
            .count();
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn chosen_member_has_minimal_training_loss() {
        let mut g = rng(6);
        for _ in 0..30 {
            let mdp = random_mdp(&mut g, &RandomMdpConfig::default());
            let members: Vec<(String, RewardTable)> = (0..5)
                .map(|i| (format!("m{i}"), random_reward(&mut g, &mdp)))
                .collect();
            let class = RewardClass::new(&mdp, members).unwrap();
            let pi = random_policy(&mut g, mdp.shape(), true);
            let data = collect_outcome_dataset(&mdp, &pi, 30, &mut g).unwrap();
            let fit = least_squares_reward(&data, &class).unwrap();
            assert!(fit.losses.iter().all(|&l| fit.loss() <= l + 1e-12));
        }
    }

    #[test]
    fn empty_inputs_are_errors() {
        let (mdp, _) = fixtures::counterexample();
        let class = RewardClass::new(&mdp, vec![("t".into(), mdp.rewards().clone())]).unwrap();
        let empty = OutcomeDataset {
            records: vec![],
            policy: String::new(),
            seed: 0,
        };
        assert!(matches!(least_squares_reward(&empty, &class), Err(Error::EmptyDataset)));
        assert!(matches!(RewardClass::new(&mdp, vec![]), Err(Error::EmptyClass)));
    }

    #[test]
    fn imputation_preserves_paths_and_sums() {
        let mut g = rng(7);
        let mdp = random_mdp(&mut g, &RandomMdpConfig::default());
        let pi = random_policy(&mut g, mdp.shape(), false);
        let data = collect_outcome_dataset(&mdp, &pi, 50, &mut g).unwrap();
        let truth = impute_process(&data, mdp.rewards()).unwrap();
        for (rec, imp) in data.records.iter().zip(&truth.records) {
            let sum: f64 = imp.rewards().unwrap().iter().sum();
            assert!((sum - rec.total).abs() < 1e-12);
            assert_eq!(imp.steps(), rec.trajectory.steps());
        }
        let zero = impute_process(&data, &RewardTable::zeros(mdp.shape())).unwrap();
        assert!(zero.records.iter().all(|t| t.rewards().unwrap().iter().all(|&r| r == 0.0)));
        let other = random_reward(&mut g, &mdp);
        let imp = impute_process(&data, &other).unwrap();
        for (rec, t) in data.records.iter().zip(&imp.records) {
            let sum: f64 = t.rewards().unwrap().iter().sum();
            assert_eq!(sum, other.trajectory_sum(&rec.trajectory));
        }
    }

    #[test]
    fn imputation_rejects_missing_pairs() {
        let (mdp, mu) = fixtures::counterexample();
        let data = collect_outcome_dataset(&mdp, &mu, 3, &mut rng(8)).unwrap();
        let short = RewardTable::from_nested(vec![vec![vec![0.0, 0.0]]]);
        assert!(matches!(impute_process(&data, &short), Err(Error::UndefinedReward { .. })));
    }

    #[test]
    fn split_is_deterministic_and_balanced() {
        let (mdp, mu) = fixtures::counterexample();
        let data = collect_outcome_dataset(&mdp, &mu, 7, &mut rng(9)).unwrap();
        let (a, b) = split_dataset(&data, 42);
        assert_eq!((a.len(), b.len()), (4, 3));
        assert_eq!(split_dataset(&data, 42), (a, b));
    }

    #[test]
    fn realizable_transformation_is_optimal_on_full_coverage() {
        let mdp = fixtures::binary_tree(2);
        let truth = crate::mdp::SaTable::from_fn(mdp.shape(), |h, s, a| {
            if h == 1 && s == 1 && a == 1 { 0.75 } else { 0.05 * a as f64 }
        });
        let mdp = mdp.with_rewards(truth.clone()).unwrap();
        let class = RewardClass::new(&mdp, vec![("truth".into(), truth.clone())]).unwrap();
        let pi = TabularPolicy::uniform(mdp.shape());
        let data = collect_outcome_dataset(&mdp, &pi, 400, &mut rng(10)).unwrap();
        let out = outcome_to_process(&data, &class, Solver::ModelBasedGreedy, mdp.shape(), 1).unwrap();
        let best = optimal_value(&mdp, &truth);
        assert!((policy_return(&mdp, &out.policy, &truth) - best).abs() < 1e-12);
        let pi_star = optimal_policy(&mdp, &truth);
        assert_eq!(out.policy, pi_star);
    }

    #[test]
    fn minimal_transformation_runs() {
        let (mdp, mu) = fixtures::counterexample();
        let class = RewardClass::new(&mdp, vec![("t".into(), mdp.rewards().clone())]).unwrap();
        let data = collect_outcome_dataset(&mdp, &mu, 2, &mut rng(11)).unwrap();
        assert!(outcome_to_process(&data, &class, Solver::Fqi, mdp.shape(), 0).is_ok());
        let one = OutcomeDataset {
            records: data.records[..1].to_vec(),
            ..data.clone()
        };
        assert!(outcome_to_process(&one, &class, Solver::Fqi, mdp.shape(), 0).is_err());
    }

    #[test]
    fn gap_is_zero_for_truth_and_dp_matches_enumeration() {
        let mut g = rng(12);
        for _ in 0..40 {
            let mdp = random_mdp(
                &mut g,
                &RandomMdpConfig {
                    max_horizon: 3,
                    max_states: 3,
                    max_actions: 2,
                    ..RandomMdpConfig::default()
                },
            );
            assert_eq!(sup_reward_evaluation_gap(&mdp, mdp.rewards()), 0.0);
            let r_hat = random_reward(&mut g, &mdp);
            let fast = sup_reward_evaluation_gap(&mdp, &r_hat);
            let slow =
                sup_reward_evaluation_gap_enumerated(&mdp, &r_hat, DEFAULT_ENUMERATION_CAP).unwrap();
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn q_table_as_reward_has_zero_gap_at_optimum() {
        let (mdp, mu) = fixtures::counterexample();
        let q = crate::mdp::value_tables(&mdp, &mu, mdp.rewards()).q;
        let pi_star = optimal_policy(&mdp, mdp.rewards());
        assert!((policy_return(&mdp, &pi_star, &q) - 1.0).abs() < 1e-15);
        assert!(reward_evaluation_gap(&mdp, &q, &pi_star).abs() < 1e-15);
    }

    #[test]
    fn excess_risk_is_zero_for_truth() {
        let (mdp, mu) = fixtures::counterexample();
        assert_eq!(population_excess_risk(&mdp, &mu, mdp.rewards()), 0.0);
    }

    #[test]
    fn text_round_trip() {
        let (mdp, mu) = fixtures::counterexample();
        let mut data = collect_outcome_dataset(&mdp, &mu, 5, &mut rng(13)).unwrap();
        data.seed = 13;
        data.policy = "mu".into();
        assert_eq!(OutcomeDataset::from_text(&data.to_text()).unwrap(), data);
        let proc = impute_process(&data, &crate::mdp::value_tables(&mdp, &mu, mdp.rewards()).q).unwrap();
        assert_eq!(ProcessDataset::from_text(&proc.to_text()).unwrap(), proc);
    }
}
