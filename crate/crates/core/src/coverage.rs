//! Exact concentrability coefficients.
//!
//! Pairs unreachable under both policies (0/0) are skipped; mass the target
//! puts where the reference has none gives `+inf`, reported with a witness.

use crate::error::{Error, Result};
use crate::mdp::{
    deterministic_policies, enumerate_trajectories, max_reach, state_action_occupancy,
    trajectory_probability, LayeredMdp, SaTable, TabularPolicy, Trajectory,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverageKind {
    StateAction,
    Trajectory,
    Distribution,
    Class,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    Pair {
        layer: usize,
        state: usize,
        action: usize,
    },
    Trajectory(Trajectory),
}

/// A concentrability coefficient together with where it is attained.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    /// May be `f64::INFINITY`.
    pub value: f64,
    pub witness: Option<Witness>,
    pub kind: CoverageKind,
    /// Index of the attaining policy when a set of policies was searched.
    pub policy_index: Option<usize>,
}

impl CoverageReport {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Running maximum of `num / den` with the 0/0 and x/0 conventions.
struct RatioMax {
    value: f64,
    witness: Option<(usize, usize, usize)>,
}

impl RatioMax {
    fn new() -> Self {
        Self {
            value: 0.0,
            witness: None,
        }
    }

    fn push(&mut self, num: f64, den: f64, at: (usize, usize, usize)) {
        if num <= 0.0 {
            return;
        }
        let ratio = if den <= 0.0 { f64::INFINITY } else { num / den };
        if self.witness.is_none() || ratio > self.value {
            self.value = ratio;
            self.witness = Some(at);
        }
    }

    fn pair_witness(&self) -> Option<Witness> {
        self.witness.map(|(layer, state, action)| Witness::Pair {
            layer,
            state,
            action,
        })
    }
}

/// `C_sa(pi, pi_off) = max_h max_{s,a} d^pi(s,a) / d^{pi_off}(s,a)`.
pub fn state_action_concentrability(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    pi_off: &TabularPolicy,
) -> CoverageReport {
    let d = state_action_occupancy(mdp, pi);
    let d_off = state_action_occupancy(mdp, pi_off);
    let mut best = RatioMax::new();
    for (h, s, a, num) in d.iter() {
        best.push(num, d_off.get(h, s, a), (h, s, a));
    }
    CoverageReport {
        value: best.value,
        witness: best.pair_witness(),
        kind: CoverageKind::StateAction,
        policy_index: None,
    }
}

/// `C_traj(pi, pi_off) = sup_tau d^pi(tau) / d^{pi_off}(tau)`, by enumerating
/// the support of `pi`.
pub fn trajectory_concentrability(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    pi_off: &TabularPolicy,
    cap: usize,
) -> Result<CoverageReport> {
    let mut value = 0.0;
    let mut witness = None;
    for (traj, p) in enumerate_trajectories(mdp, pi, cap)? {
        let q = trajectory_probability(mdp, pi_off, &traj);
        let ratio = if q <= 0.0 { f64::INFINITY } else { p / q };
        if witness.is_none() || ratio > value {
            value = ratio;
            witness = Some(Witness::Trajectory(traj));
        }
    }
    Ok(CoverageReport {
        value,
        witness,
        kind: CoverageKind::Trajectory,
        policy_index: None,
    })
}

/// Which policies a distribution coefficient ranges over.
#[derive(Clone, Copy, Debug)]
pub enum PolicySet<'a> {
    /// A finite list; the report names the attaining index.
    Class(&'a [TabularPolicy]),
    /// Every deterministic Markov policy, enumerated (cap-guarded).
    AllDeterministic,
    /// Every policy, via the max-reach recursion.
    All,
}

/// Layer-averaged occupancy `d^pi(s,a) / H`, a distribution over all pairs.
pub fn layer_averaged_occupancy(mdp: &LayeredMdp, pi: &TabularPolicy) -> SaTable {
    state_action_occupancy(mdp, pi).scale(1.0 / mdp.horizon() as f64)
}

/// `C_sa(nu) = sup_pi max_{(s,a)} dbar^pi(s,a) / nu(s,a)` where `dbar^pi` is
/// the layer-averaged occupancy and `nu` sums to one over all pairs.
pub fn distribution_concentrability(
    mdp: &LayeredMdp,
    nu: &SaTable,
    policies: PolicySet<'_>,
    cap: usize,
) -> Result<CoverageReport> {
    if !nu.matches(mdp.shape()) {
        return Err(Error::LayerMismatch(
            "sampling distribution does not match the MDP".into(),
        ));
    }
    let horizon = mdp.horizon() as f64;
    let scan = |d: &SaTable| {
        let mut best = RatioMax::new();
        for (h, s, a, num) in d.iter() {
            best.push(num / horizon, nu.get(h, s, a), (h, s, a));
        }
        best
    };
    let over_list = |list: &[TabularPolicy]| -> Result<CoverageReport> {
        if list.is_empty() {
            return Err(Error::EmptyClass);
        }
        let mut out: Option<CoverageReport> = None;
        for (i, pi) in list.iter().enumerate() {
            let best = scan(&state_action_occupancy(mdp, pi));
            if out.as_ref().map_or(true, |o| best.value > o.value) {
                out = Some(CoverageReport {
                    value: best.value,
                    witness: best.pair_witness(),
                    kind: CoverageKind::Distribution,
                    policy_index: Some(i),
                });
            }
        }
        Ok(out.expect("list is nonempty"))
    };
    match policies {
        PolicySet::Class(list) => over_list(list),
        PolicySet::AllDeterministic => over_list(&deterministic_policies(mdp.shape(), cap)?),
        PolicySet::All => {
            let best = scan(&max_reach(mdp));
            Ok(CoverageReport {
                value: best.value,
                witness: best.pair_witness(),
                kind: CoverageKind::Distribution,
                policy_index: None,
            })
        }
    }
}

/// `C_sa(Pi, pi_off) = max_{pi in Pi} C_sa(pi, pi_off)`.
pub fn class_concentrability(
    mdp: &LayeredMdp,
    class: &[TabularPolicy],
    pi_off: &TabularPolicy,
) -> Result<CoverageReport> {
    let mut out: Option<CoverageReport> = None;
    for (i, pi) in class.iter().enumerate() {
        let report = state_action_concentrability(mdp, pi, pi_off);
        if out.as_ref().map_or(true, |o| report.value > o.value) {
            out = Some(CoverageReport {
                kind: CoverageKind::Class,
                policy_index: Some(i),
                ..report
            });
        }
    }
    out.ok_or(Error::EmptyClass)
}

/// `sup_pi C_sa(pi, pi_off)` over all policies, via max-reach.
pub fn all_policy_concentrability(mdp: &LayeredMdp, pi_off: &TabularPolicy) -> CoverageReport {
    let reach = max_reach(mdp);
    let d_off = state_action_occupancy(mdp, pi_off);
    let mut best = RatioMax::new();
    for (h, s, a, num) in reach.iter() {
        best.push(num, d_off.get(h, s, a), (h, s, a));
    }
    CoverageReport {
        value: best.value,
        witness: best.pair_witness(),
        kind: CoverageKind::Class,
        policy_index: None,
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fixtures;
    use crate::mdp::random::{random_mdp, random_policy, RandomMdpConfig};
    use crate::mdp::{MdpShape, DEFAULT_ENUMERATION_CAP};

    const CAP: usize = DEFAULT_ENUMERATION_CAP;

    #[test]
    fn identical_policies_give_one() {
        let mdp = fixtures::binary_tree(3);
        let pi = TabularPolicy::uniform(mdp.shape());
        assert_eq!(state_action_concentrability(&mdp, &pi, &pi).value, 1.0);
        let t = trajectory_concentrability(&mdp, &pi, &pi, CAP).unwrap();
        assert!((t.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_armed_bandit_point_mass() {
        let mdp = fixtures::two_armed_bandit(0.5, 0.5);
        let off = TabularPolicy::uniform(mdp.shape());
        let pi = TabularPolicy::deterministic(mdp.shape(), &[vec![0]]).unwrap();
        let r = state_action_concentrability(&mdp, &pi, &off);
        assert_eq!(r.value, 2.0);
        assert_eq!(
            r.witness,
            Some(Witness::Pair {
                layer: 0,
                state: 0,
                action: 0
            })
        );
    }

    /// Independent binary choices on a chain: `C_traj = (3/2)^H`, `C_sa = 3/2`.
    #[test]
    fn exponential_gap_on_independent_choices() {
        for depth in 1..=5 {
            let mdp = fixtures::independent_coordinates(depth);
            let off = TabularPolicy::uniform(mdp.shape());
            let pi = fixtures::biased_policy(mdp.shape(), 0.75);
            let c_sa = state_action_concentrability(&mdp, &pi, &off).value;
            let c_traj = trajectory_concentrability(&mdp, &pi, &off, CAP).unwrap().value;
            assert!((c_sa - 1.5).abs() < 1e-12);
            assert!((c_traj - 1.5f64.powi(depth as i32)).abs() < 1e-9);
        }
    }

    #[test]
    fn uncovered_pair_is_infinite_with_witness() {
        let mdp = fixtures::two_armed_bandit(0.5, 0.5);
        let off = TabularPolicy::deterministic(mdp.shape(), &[vec![0]]).unwrap();
        let pi = TabularPolicy::deterministic(mdp.shape(), &[vec![1]]).unwrap();
        let r = state_action_concentrability(&mdp, &pi, &off);
        assert!(r.value.is_infinite());
        assert_eq!(
            r.witness,
            Some(Witness::Pair {
                layer: 0,
                state: 0,
                action: 1
            })
        );
    }

    /// Oracle: aggregate enumerated trajectory mass through each pair.
    fn enumerated_occupancy(mdp: &LayeredMdp, pi: &TabularPolicy) -> SaTable {
        let mut d = SaTable::zeros(mdp.shape());
        for (traj, p) in enumerate_trajectories(mdp, pi, CAP).unwrap() {
            for (h, st) in traj.steps().iter().enumerate() {
                d.set(h, st.state, st.action, d.get(h, st.state, st.action) + p);
            }
        }
        d
    }

    #[test]
    fn matches_enumeration_and_dominated_by_trajectory_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = RandomMdpConfig::default();
        for _ in 0..100 {
            let mdp = random_mdp(&mut rng, &cfg);
            let pi = random_policy(&mut rng, mdp.shape(), false);
            let off = random_policy(&mut rng, mdp.shape(), false);
            let d = enumerated_occupancy(&mdp, &pi);
            let d_off = enumerated_occupancy(&mdp, &off);
            let mut oracle: f64 = 0.0;
            for (h, s, a, num) in d.iter() {
                if num > 1e-15 {
                    let den = d_off.get(h, s, a);
                    oracle = oracle.max(if den <= 1e-15 { f64::INFINITY } else { num / den });
                }
            }
            let c_sa = state_action_concentrability(&mdp, &pi, &off).value;
            if oracle.is_finite() {
                assert!((c_sa - oracle).abs() <= 1e-9 * oracle.max(1.0));
            } else {
                assert!(c_sa.is_infinite());
            }
            let c_traj = trajectory_concentrability(&mdp, &pi, &off, CAP).unwrap().value;
            assert!(c_sa <= c_traj * (1.0 + 1e-12));
        }
    }

    #[test]
    fn one_layer_uniform_reference_gives_two() {
        let mdp = fixtures::two_armed_bandit(0.3, 0.7);
        let nu = layer_averaged_occupancy(&mdp, &TabularPolicy::uniform(mdp.shape()));
        for set in [PolicySet::All, PolicySet::AllDeterministic] {
            let r = distribution_concentrability(&mdp, &nu, set, CAP).unwrap();
            assert!((r.value - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mass_in_nu_is_infinite() {
        let mdp = fixtures::two_armed_bandit(0.3, 0.7);
        let nu = SaTable::from_nested(vec![vec![vec![1.0, 0.0]]]);
        let r = distribution_concentrability(&mdp, &nu, PolicySet::All, CAP).unwrap();
        assert!(r.value.is_infinite());
        assert_eq!(
            r.witness,
            Some(Witness::Pair {
                layer: 0,
                state: 0,
                action: 1
            })
        );
    }

    #[test]
    fn max_reach_agrees_with_deterministic_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = RandomMdpConfig {
            max_horizon: 3,
            max_states: 3,
            max_actions: 2,
            ..RandomMdpConfig::default()
        };
        for _ in 0..100 {
            let mdp = random_mdp(&mut rng, &cfg);
            let nu = layer_averaged_occupancy(&mdp, &random_policy(&mut rng, mdp.shape(), true));
            let fast = distribution_concentrability(&mdp, &nu, PolicySet::All, CAP).unwrap();
            let slow =
                distribution_concentrability(&mdp, &nu, PolicySet::AllDeterministic, CAP).unwrap();
            assert!((fast.value - slow.value).abs() <= 1e-9 * fast.value.max(1.0));
        }
    }

    #[test]
    fn reference_occupancy_as_nu_equals_class_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = RandomMdpConfig {
            max_horizon: 3,
            max_states: 3,
            max_actions: 2,
            ..RandomMdpConfig::default()
        };
        for _ in 0..50 {
            let mdp = random_mdp(&mut rng, &cfg);
            let off = random_policy(&mut rng, mdp.shape(), true);
            let nu = layer_averaged_occupancy(&mdp, &off);
            let all = deterministic_policies(mdp.shape(), CAP).unwrap();
            let via_nu =
                distribution_concentrability(&mdp, &nu, PolicySet::Class(&all), CAP).unwrap();
            let via_class = class_concentrability(&mdp, &all, &off).unwrap();
            assert!((via_nu.value - via_class.value).abs() <= 1e-9 * via_class.value);
            let via_reach = all_policy_concentrability(&mdp, &off);
            assert!((via_reach.value - via_class.value).abs() <= 1e-9 * via_class.value);
        }
    }

    #[test]
    fn class_of_reference_alone_is_one() {
        let mdp = fixtures::binary_tree(2);
        let off = TabularPolicy::uniform(mdp.shape());
        let r = class_concentrability(&mdp, std::slice::from_ref(&off), &off).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.policy_index, Some(0));
        let shape = MdpShape::new(vec![1], 2, 0).unwrap();
        assert!(matches!(
            class_concentrability(&fixtures::two_armed_bandit(0.0, 1.0), &[], &TabularPolicy::uniform(&shape)),
            Err(Error::EmptyClass)
        ));
    }
}
