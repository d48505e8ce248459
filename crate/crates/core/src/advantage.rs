//! Monte-Carlo advantage estimation, advantage-as-reward learning, and the
//! failure of the Q-function as a process reward.

use std::fmt::Write as _;

use rand::Rng;

use crate::coverage::{distribution_concentrability, PolicySet};
use crate::error::{Error, Result};
use crate::format::{format_sig17, parse_real};
use crate::mdp::{
    argmax_lowest, optimal_plan, optimal_value, policy_return, sample_return_from,
    value_tables, LayeredMdp, MdpShape, RewardTable, SaTable, TabularPolicy,
};
use crate::outcome::{argmin_tolerant, RewardClass};

/// Two-step instance on which planning against `Q^mu` is suboptimal by 1/3.
///
/// Layer 0 holds `a`; layer 1 holds `b` (index 0) and `c` (index 1). Action
/// 0 at `a` leads to `b`, action 1 to `c`. Rewards: `r(a, .) = 0`,
/// `r(b, 0) = 1`, `r(b, 1) = 0`, `r(c, 0) = 2/3`, `r(c, 1) = 1/2`. The
/// behaviour policy plays 0 at `a` and 1 at `b` and `c`.
pub fn counterexample_mdp() -> (LayeredMdp, TabularPolicy) {
    let shape = MdpShape::new(vec![1, 2], 2, 0).expect("static shape");
    let transitions = vec![vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]];
    let rewards = SaTable::from_nested(vec![
        vec![vec![0.0, 0.0]],
        vec![vec![1.0, 0.0], vec![2.0 / 3.0, 0.5]],
    ]);
    let mdp = LayeredMdp::new(shape.clone(), transitions, rewards).expect("static instance");
    let mu = TabularPolicy::deterministic(&shape, &[vec![0], vec![1, 1]]).expect("static policy");
    (mdp, mu)
}

/// Greedy planning on reward `Q^mu`; returns the plan and
/// `max_pi J(pi) - J(pi_hat)` under the true reward.
pub fn q_as_reward_gap(mdp: &LayeredMdp, mu: &TabularPolicy) -> (TabularPolicy, f64) {
    let q = value_tables(mdp, mu, mdp.rewards()).q;
    let pi_hat = optimal_plan(mdp, &q).policy;
    let gap = optimal_value(mdp, mdp.rewards()) - policy_return(mdp, &pi_hat, mdp.rewards());
    (pi_hat, gap)
}

/// `A_hat = mean of k returns from (s, a) then mu - mean of k independent
/// returns from s under mu`. Only rollout totals are observed.
pub fn monte_carlo_advantage<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    mu: &TabularPolicy,
    layer: usize,
    state: usize,
    action: usize,
    k: usize,
    rng: &mut R,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one rollout".into()));
    }
    if layer >= mdp.horizon() || state >= mdp.layer_size(layer) || action >= mdp.num_actions() {
        return Err(Error::InvalidArgument(format!(
            "pair (h={layer}, s={state}, a={action}) out of range"
        )));
    }
    let q: f64 = (0..k)
        .map(|_| sample_return_from(mdp, mu, layer, state, Some(action), rng))
        .sum();
    let v: f64 = (0..k)
        .map(|_| sample_return_from(mdp, mu, layer, state, None, rng))
        .sum();
    Ok((q - v) / k as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvantageSample {
    pub layer: usize,
    pub state: usize,
    pub action: usize,
    pub k: usize,
    pub estimate: f64,
}

/// Advantage estimates together with the pair distribution they were drawn
/// for.
#[derive(Clone, Debug, PartialEq)]
pub struct AdvantageSamples {
    pub samples: Vec<AdvantageSample>,
    pub nu: SaTable,
    pub policy: String,
    pub seed: u64,
}

impl AdvantageSamples {
    /// CSV with header `h,s,a,k,estimate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,s,a,k,estimate\n");
        for x in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{}",
                x.layer,
                x.state,
                x.action,
                x.k,
                format_sig17(x.estimate)
            )
            .unwrap();
        }
        out
    }

    /// Parses rows written by [`AdvantageSamples::to_csv`]; `nu` is not part
    /// of the file and must be supplied.
    pub fn from_csv(text: &str, nu: SaTable) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "h,s,a,k,estimate" => {}
            _ => return Err(Error::Parse("missing header h,s,a,k,estimate".into())),
        }
        let int = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad integer `{v}`")))
        };
        let samples = lines
            .map(|line| {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 5 {
                    return Err(Error::Parse(format!("expected 5 columns in `{line}`")));
                }
                Ok(AdvantageSample {
                    layer: int(cols[0])?,
                    state: int(cols[1])?,
                    action: int(cols[2])?,
                    k: int(cols[3])?,
                    estimate: parse_real(cols[4])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            nu,
            policy: String::new(),
            seed: 0,
        })
    }
}

/// Layer-averaged occupancy of the uniform policy, the default `nu`.
pub fn default_nu(mdp: &LayeredMdp) -> SaTable {
    crate::coverage::layer_averaged_occupancy(mdp, &TabularPolicy::uniform(mdp.shape()))
}

/// One estimate with `k` rollouts for every pair with `nu > 0`.
pub fn collect_advantage_samples<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    mu: &TabularPolicy,
    nu: &SaTable,
    k: usize,
    rng: &mut R,
) -> Result<AdvantageSamples> {
    if !nu.matches(mdp.shape()) {
        return Err(Error::LayerMismatch("nu does not match the MDP".into()));
    }
    let mut samples = Vec::new();
    for (h, s, a, w) in nu.iter() {
        if w > 0.0 {
            let estimate = monte_carlo_advantage(mdp, mu, h, s, a, k, rng)?;
            samples.push(AdvantageSample {
                layer: h,
                state: s,
                action: a,
                k,
                estimate,
            });
        }
    }
    Ok(AdvantageSamples {
        samples,
        nu: nu.clone(),
        policy: "mu".into(),
        seed: 0,
    })
}

/// `E_{(s,a) ~ nu}[(r_hat(s,a) - A(s,a))^2]`.
pub fn eps_stat(nu: &SaTable, r_hat: &RewardTable, advantage: &SaTable) -> f64 {
    nu.iter()
        .filter(|&(_, _, _, w)| w > 0.0)
        .map(|(h, s, a, w)| w * (r_hat.get(h, s, a) - advantage.get(h, s, a)).powi(2))
        .sum()
}

#[derive(Clone, Debug)]
pub struct AdvantageFit {
    pub index: usize,
    pub reward: RewardTable,
    /// `nu`-weighted squared error against the estimates, per member.
    pub losses: Vec<f64>,
    /// Exact population error, when the true MDP was supplied.
    pub eps_stat: Option<f64>,
}

/// Builds a class of per-step tables with values in `[-1, 1]` (no total
/// constraint).
pub fn advantage_class(mdp: &LayeredMdp, members: Vec<(String, RewardTable)>) -> Result<RewardClass> {
    RewardClass::with_bounds(mdp, members, (-1.0, 1.0), None)
}

/// `nu`-weighted least squares over a finite class; ties to the lowest index.
pub fn fit_advantage_reward(
    samples: &AdvantageSamples,
    class: &RewardClass,
    truth: Option<(&LayeredMdp, &TabularPolicy)>,
) -> Result<AdvantageFit> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    if samples.samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let losses: Vec<f64> = class
        .members()
        .iter()
        .map(|r| {
            samples
                .samples
                .iter()
                .map(|x| {
                    let w = samples.nu.get(x.layer, x.state, x.action);
                    w * (r.get(x.layer, x.state, x.action) - x.estimate).powi(2)
                })
                .sum()
        })
        .collect();
    let index = argmin_tolerant(&losses);
    let reward = class.member(index).clone();
    let eps_stat = truth.map(|(mdp, mu)| {
        let adv = value_tables(mdp, mu, mdp.rewards()).advantage;
        eps_stat(&samples.nu, &reward, &adv)
    });
    Ok(AdvantageFit {
        index,
        reward,
        losses,
        eps_stat,
    })
}

/// Planner applied to the MDP with the fitted reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Planner {
    /// Backward induction; no optimization error.
    Exact,
    /// Optimizes only the last `depth` layers and plays action 0 before
    /// them, which leaves a nonzero optimization error in general.
    Truncated { depth: usize },
}

impl Planner {
    pub fn plan(self, mdp: &LayeredMdp, r: &RewardTable) -> TabularPolicy {
        match self {
            Self::Exact => optimal_plan(mdp, r).policy,
            Self::Truncated { depth } => truncated_plan(mdp, r, depth),
        }
    }
}

fn truncated_plan(mdp: &LayeredMdp, r: &RewardTable, depth: usize) -> TabularPolicy {
    let horizon = mdp.horizon();
    let shape = mdp.shape();
    let mut actions: Vec<Vec<usize>> = shape.layer_sizes.iter().map(|&n| vec![0; n]).collect();
    let mut v_next: Vec<f64> = Vec::new();
    for h in (0..horizon).rev() {
        let optimize = horizon - h <= depth;
        let mut v = vec![0.0; mdp.layer_size(h)];
        for s in 0..mdp.layer_size(h) {
            let q: Vec<f64> = (0..mdp.num_actions())
                .map(|a| {
                    let tail = if h + 1 < horizon {
                        mdp.transition(h, s, a).iter().zip(&v_next).map(|(p, x)| p * x).sum()
                    } else {
                        0.0
                    };
                    r.get(h, s, a) + tail
                })
                .collect();
            let a = if optimize { argmax_lowest(&q) } else { 0 };
            actions[h][s] = a;
            v[s] = q[a];
        }
        v_next = v;
    }
    TabularPolicy::deterministic(shape, &actions).expect("actions in range")
}

/// Outcome of one run of the advantage-as-reward pipeline.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub policy: TabularPolicy,
    pub class_index: usize,
    /// `max_pi J(pi) - J(pi_hat)`.
    pub suboptimality: f64,
    pub eps_stat: f64,
    /// `max_pi J_rhat(pi) - J_rhat(pi_hat)`.
    pub eps_alg: f64,
    pub c_nu: f64,
    /// `2H sqrt(C(nu) eps_stat) + eps_alg`.
    pub bound_sqrt: f64,
    /// `2H sqrt(C(nu)) eps_stat + eps_alg`.
    pub bound_linear: f64,
    pub pass_sqrt: bool,
    pub pass_linear: bool,
}

/// Estimate advantages with `k` rollouts per `nu`-supported pair, fit a
/// reward from the class, plan on the true transitions with it, and evaluate
/// exactly.
#[allow(clippy::too_many_arguments)]
pub fn advantage_pipeline<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    mu: &TabularPolicy,
    class: &RewardClass,
    nu: &SaTable,
    k: usize,
    planner: Planner,
    cap: usize,
    rng: &mut R,
) -> Result<PipelineReport> {
    let samples = collect_advantage_samples(mdp, mu, nu, k, rng)?;
    let fit = fit_advantage_reward(&samples, class, Some((mdp, mu)))?;
    let policy = planner.plan(mdp, &fit.reward);
    let suboptimality =
        optimal_value(mdp, mdp.rewards()) - policy_return(mdp, &policy, mdp.rewards());
    let eps_alg = optimal_value(mdp, &fit.reward) - policy_return(mdp, &policy, &fit.reward);
    let c_nu = distribution_concentrability(mdp, nu, PolicySet::All, cap)?.value;
    let eps_stat = fit.eps_stat.expect("truth supplied");
    let two_h = 2.0 * mdp.horizon() as f64;
    let bound_sqrt = two_h * (c_nu * eps_stat).sqrt() + eps_alg;
    let bound_linear = two_h * c_nu.sqrt() * eps_stat + eps_alg;
    // Rounding slack for runs where both sides are exactly zero in theory.
    let slack = 1e-12;
    Ok(PipelineReport {
        policy,
        class_index: fit.index,
        suboptimality,
        eps_stat,
        eps_alg,
        c_nu,
        bound_sqrt,
        bound_linear,
        pass_sqrt: suboptimality <= bound_sqrt + slack,
        pass_linear: suboptimality <= bound_linear + slack,
    })
}
