use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::policy::sample_index;
use super::{LayeredMdp, TabularPolicy, PROB_TOL};
use crate::error::{Error, Result};

/// One `(s_h, a_h)` step; `state` is a layer-local index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub state: usize,
    pub action: usize,
}

/// A full trajectory `(s_1, a_1, ..., s_H, a_H)` with optional per-step
/// rewards and an optional total reward.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    steps: Vec<Step>,
    rewards: Option<Vec<f64>>,
    total: Option<f64>,
}

impl Trajectory {
    pub fn new(steps: Vec<Step>) -> Self {
        Self {
            steps,
            rewards: None,
            total: None,
        }
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        Self::new(
            pairs
                .iter()
                .map(|&(state, action)| Step { state, action })
                .collect(),
        )
    }

    pub fn with_rewards(mut self, rewards: Vec<f64>) -> Self {
        self.rewards = Some(rewards);
        self
    }

    pub fn with_total(mut self, total: f64) -> Self {
        self.total = Some(total);
        self
    }

    /// Drops per-step rewards and total, keeping only the state-action path.
    pub fn stripped(&self) -> Self {
        Self::new(self.steps.clone())
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Option<&[f64]> {
        self.rewards.as_deref()
    }

    pub fn total(&self) -> Option<f64> {
        self.total
    }

    /// Checks length, layer bounds, transition support under `mdp`, and the
    /// consistency of per-step rewards with the total when both are present.
    pub fn validate(&self, mdp: &LayeredMdp) -> Result<()> {
        let shape = mdp.shape();
        if self.steps.len() != shape.horizon() {
            return Err(Error::InvalidTrajectory(format!(
                "length {} but horizon {}",
                self.steps.len(),
                shape.horizon()
            )));
        }
        if self.steps[0].state != shape.initial_state {
            return Err(Error::InvalidTrajectory("does not start at s_1".into()));
        }
        for (h, st) in self.steps.iter().enumerate() {
            if st.state >= shape.layer_sizes[h] || st.action >= shape.num_actions {
                return Err(Error::InvalidTrajectory(format!("step {h} out of range")));
            }
            if h + 1 < self.steps.len() {
                let next = self.steps[h + 1].state;
                if mdp.transition(h, st.state, st.action)[next] <= 0.0 {
                    return Err(Error::InvalidTrajectory(format!(
                        "transition at step {h} has zero probability"
                    )));
                }
            }
        }
        if let Some(r) = &self.rewards {
            if r.len() != self.steps.len() {
                return Err(Error::InvalidTrajectory("reward count != horizon".into()));
            }
            if let Some(total) = self.total {
                let sum: f64 = r.iter().sum();
                if (sum - total).abs() > PROB_TOL {
                    return Err(Error::InvalidTrajectory(format!(
                        "step rewards sum to {sum}, total is {total}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Path-only text form: `(s,a;s,a;...)`.
impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, st) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{},{}", st.state, st.action)?;
        }
        f.write_str(")")
    }
}

impl FromStr for Trajectory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("trajectory `{s}` must be parenthesised")))?;
        let mut steps = Vec::new();
        for part in inner.split(';').filter(|p| !p.trim().is_empty()) {
            let (st, ac) = part
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad step `{part}`")))?;
            let state = st
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad state `{st}`")))?;
            let action = ac
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad action `{ac}`")))?;
            steps.push(Step { state, action });
        }
        Ok(Trajectory::new(steps))
    }
}

/// Samples `tau ~ pi` in `mdp`, filling per-step rewards and the total from
/// the MDP's own reward table.
pub fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    rng: &mut R,
) -> Trajectory {
    let horizon = mdp.horizon();
    let mut steps = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut state = mdp.initial_state();
    for h in 0..horizon {
        let action = pi.sample_action(h, state, rng);
        steps.push(Step { state, action });
        rewards.push(mdp.reward(h, state, action));
        if h + 1 < horizon {
            state = sample_index(mdp.transition(h, state, action), rng);
        }
    }
    let total = rewards.iter().sum();
    Trajectory::new(steps).with_rewards(rewards).with_total(total)
}

/// Return accumulated from layer `layer` onward, starting in `state`, taking
/// `first_action` (if given) and then following `mu`. Only the total is
/// observed, as with an outcome verifier.
pub fn sample_return_from<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    mu: &TabularPolicy,
    layer: usize,
    state: usize,
    first_action: Option<usize>,
    rng: &mut R,
) -> f64 {
    let mut total = 0.0;
    let mut s = state;
    for h in layer..mdp.horizon() {
        let a = match (h == layer, first_action) {
            (true, Some(a)) => a,
            _ => mu.sample_action(h, s, rng),
        };
        total += mdp.reward(h, s, a);
        if h + 1 < mdp.horizon() {
            s = sample_index(mdp.transition(h, s, a), rng);
        }
    }
    total
}

/// `d^pi(tau)`: policy probabilities times transition probabilities.
pub fn trajectory_probability(mdp: &LayeredMdp, pi: &TabularPolicy, traj: &Trajectory) -> f64 {
    let steps = traj.steps();
    let mut p = 1.0;
    for (h, st) in steps.iter().enumerate() {
        p *= pi.prob(h, st.state, st.action);
        if h + 1 < steps.len() {
            p *= mdp.transition(h, st.state, st.action)[steps[h + 1].state];
        }
        if p == 0.0 {
            return 0.0;
        }
    }
    p
}

/// Exact trajectory law `d^pi(tau)` over the support of `pi`, by depth-first
/// enumeration. Fails rather than truncating when the support exceeds `cap`.
pub fn enumerate_trajectories(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    cap: usize,
) -> Result<Vec<(Trajectory, f64)>> {
    enumerate_with(mdp, cap, |h, s, a| pi.prob(h, s, a))
}

/// Every trajectory with positive transition probability under some policy,
/// weighted by its transition probability alone.
pub fn feasible_trajectories(mdp: &LayeredMdp, cap: usize) -> Result<Vec<(Trajectory, f64)>> {
    enumerate_with(mdp, cap, |_, _, _| 1.0)
}

fn enumerate_with(
    mdp: &LayeredMdp,
    cap: usize,
    action_weight: impl Fn(usize, usize, usize) -> f64,
) -> Result<Vec<(Trajectory, f64)>> {
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(mdp.horizon());
    descend(
        mdp,
        cap,
        &action_weight,
        (0, mdp.initial_state(), 1.0),
        &mut path,
        &mut out,
    )?;
    Ok(out)
}

fn descend(
    mdp: &LayeredMdp,
    cap: usize,
    action_weight: &impl Fn(usize, usize, usize) -> f64,
    (h, s, w): (usize, usize, f64),
    path: &mut Vec<Step>,
    out: &mut Vec<(Trajectory, f64)>,
) -> Result<()> {
    for a in 0..mdp.num_actions() {
        let pa = action_weight(h, s, a);
        if pa <= 0.0 {
            continue;
        }
        path.push(Step { state: s, action: a });
        if h + 1 == mdp.horizon() {
            if out.len() >= cap {
                return Err(Error::CapExceeded {
                    cap,
                    what: "trajectory enumeration".into(),
                });
            }
            out.push((Trajectory::new(path.clone()), w * pa));
        } else {
            for (next, &p) in mdp.transition(h, s, a).iter().enumerate() {
                if p > 0.0 {
                    descend(mdp, cap, action_weight, (h + 1, next, w * pa * p), path, out)?;
                }
            }
        }
        path.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fixtures;
    use crate::mdp::state_action_occupancy;

    #[test]
    fn counterexample_behaviour_trajectory() {
        let (mdp, mu) = fixtures::counterexample();
        let t = sample_trajectory(&mdp, &mu, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(t, Trajectory::from_pairs(&[(0, 0), (0, 1)]).with_rewards(vec![0.0, 0.0]).with_total(0.0));
    }

    #[test]
    fn deterministic_policy_has_one_trajectory() {
        let mdp = fixtures::binary_tree(3);
        let pi = TabularPolicy::deterministic(mdp.shape(), &[vec![1], vec![0, 1], vec![1, 0, 0, 1]]).unwrap();
        let trajs = enumerate_trajectories(&mdp, &pi, 100).unwrap();
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].0, Trajectory::from_pairs(&[(0, 1), (1, 1), (3, 1)]));
        assert_eq!(trajs[0].1, 1.0);
    }

    #[test]
    fn enumeration_refuses_to_truncate() {
        let mdp = fixtures::binary_tree(4);
        let pi = TabularPolicy::uniform(mdp.shape());
        assert!(matches!(
            enumerate_trajectories(&mdp, &pi, 15),
            Err(crate::Error::CapExceeded { cap: 15, .. })
        ));
        assert_eq!(enumerate_trajectories(&mdp, &pi, 16).unwrap().len(), 16);
    }

    #[test]
    fn empirical_frequencies_match_occupancy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mdp = crate::mdp::random::random_mdp(
            &mut rng,
            &crate::mdp::random::RandomMdpConfig {
                max_horizon: 2,
                ..Default::default()
            },
        );
        let pi = crate::mdp::random::random_policy(&mut rng, mdp.shape(), false);
        let n = 100_000;
        let mut counts = crate::mdp::SaTable::zeros(mdp.shape());
        for _ in 0..n {
            let t = sample_trajectory(&mdp, &pi, &mut rng);
            for (h, s) in t.steps().iter().enumerate() {
                counts.set(h, s.state, s.action, counts.get(h, s.state, s.action) + 1.0);
            }
        }
        let exact = state_action_occupancy(&mdp, &pi);
        for (h, s, a, p) in exact.iter() {
            let freq = counts.get(h, s, a) / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
            assert!((freq - p).abs() <= 4.0 * se, "({h},{s},{a}) {freq} vs {p}");
        }
    }

    #[test]
    fn validation_rejects_infeasible_paths() {
        let (mdp, _) = fixtures::counterexample();
        assert!(Trajectory::from_pairs(&[(0, 0), (1, 0)]).validate(&mdp).is_err());
        assert!(Trajectory::from_pairs(&[(0, 0), (0, 0)]).validate(&mdp).is_ok());
        assert!(Trajectory::from_pairs(&[(0, 0)]).validate(&mdp).is_err());
    }

    #[test]
    fn text_form_round_trips() {
        let t = Trajectory::from_pairs(&[(0, 1), (2, 0), (1, 1)]);
        assert_eq!(t.to_string().parse::<Trajectory>().unwrap(), t);
    }
}
