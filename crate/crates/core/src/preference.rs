//! Bradley-Terry preferences, maximum-likelihood reward fitting, the
//! KL-regularized objective and its closed-form optimum, tabular DPO, and the
//! paired-MDP construction for pairwise-difference moments.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::format::{fields, parse_header};
use crate::mdp::{
    enumerate_trajectories, feasible_trajectories, sample_trajectory, LayeredMdp, MdpShape,
    RewardTable, SaTable, TabularPolicy, Trajectory, PROB_TOL,
};
use crate::outcome::{argmax_tolerant, RewardClass};

/// `1 / (1 + e^{-x})`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(x)` without overflow for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// An ordered pair: `win` preferred over `lose`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferencePair {
    pub win: Trajectory,
    pub lose: Trajectory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceDataset {
    pub pairs: Vec<PreferencePair>,
    /// Identifier of the reference policy that drew both trajectories.
    pub policy: String,
    pub seed: u64,
}

impl PreferenceDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Header comment plus one `win=(s,a;...) lose=(s,a;...)` line per pair.
    pub fn to_text(&self) -> String {
        let mut out = format!("# preference policy={} seed={}\n", self.policy, self.seed);
        for p in &self.pairs {
            writeln!(out, "win={} lose={}", p.win, p.lose).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut data = PreferenceDataset {
            pairs: Vec::new(),
            policy: String::new(),
            seed: 0,
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if line.starts_with('#') {
                if let Some((policy, seed)) = parse_header(line, "preference") {
                    data.policy = policy;
                    data.seed = seed;
                }
                continue;
            }
            let (mut win, mut lose) = (None, None);
            for (k, v) in fields(line)? {
                match k {
                    "win" => win = Some(v.parse::<Trajectory>()?),
                    "lose" => lose = Some(v.parse::<Trajectory>()?),
                    other => return Err(Error::Parse(format!("unknown field `{other}`"))),
                }
            }
            match (win, lose) {
                (Some(win), Some(lose)) => data.pairs.push(PreferencePair { win, lose }),
                _ => return Err(Error::Parse(format!("record `{line}` needs win and lose"))),
            }
        }
        Ok(data)
    }
}

/// Draws `tau, tau'` i.i.d. from `pi_ref` and orders them with
/// `P(tau wins) = sigmoid(r(tau) - r(tau'))`.
pub fn sample_preference<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    pi_ref: &TabularPolicy,
    r: &RewardTable,
    rng: &mut R,
) -> PreferencePair {
    let a = sample_trajectory(mdp, pi_ref, rng).stripped();
    let b = sample_trajectory(mdp, pi_ref, rng).stripped();
    let p = sigmoid(r.trajectory_sum(&a) - r.trajectory_sum(&b));
    if rng.gen::<f64>() < p {
        PreferencePair { win: a, lose: b }
    } else {
        PreferencePair { win: b, lose: a }
    }
}

pub fn collect_preferences<R: Rng + ?Sized>(
    mdp: &LayeredMdp,
    pi_ref: &TabularPolicy,
    r: &RewardTable,
    n: usize,
    rng: &mut R,
) -> PreferenceDataset {
    PreferenceDataset {
        pairs: (0..n).map(|_| sample_preference(mdp, pi_ref, r, rng)).collect(),
        policy: "pi_ref".into(),
        seed: 0,
    }
}

/// `sum_i ln sigmoid(r(win_i) - r(lose_i))`.
pub fn bt_log_likelihood(data: &PreferenceDataset, r: &RewardTable) -> f64 {
    data.pairs
        .iter()
        .map(|p| log_sigmoid(r.trajectory_sum(&p.win) - r.trajectory_sum(&p.lose)))
        .sum()
}

#[derive(Clone, Debug)]
pub struct MleFit {
    pub index: usize,
    pub reward: RewardTable,
    pub log_likelihoods: Vec<f64>,
}

/// Maximum-likelihood member of a finite reward class under the
/// Bradley-Terry model; ties to the lowest index.
pub fn mle_reward(data: &PreferenceDataset, class: &RewardClass) -> Result<MleFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let log_likelihoods: Vec<f64> = class
        .members()
        .iter()
        .map(|r| bt_log_likelihood(data, r))
        .collect();
    let index = argmax_tolerant(&log_likelihoods);
    Ok(MleFit {
        index,
        reward: class.member(index).clone(),
        log_likelihoods,
    })
}

/// Regularization strength and reward scale for the KL-regularized
/// objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlConfig {
    pub beta: f64,
    /// Every trajectory total lies in `[0, v_max]`.
    pub v_max: f64,
}

impl KlConfig {
    pub fn new(beta: f64, v_max: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("v_max must be positive, got {v_max}")));
        }
        Ok(Self { beta, v_max })
    }

    /// Bound on `|ln(pi(tau) / pi_ref(tau))|` for admissible policies.
    pub fn implicit_bound(&self) -> f64 {
        self.v_max / self.beta
    }
}

/// `J_beta(pi) = E_{tau ~ pi}[r(tau) - beta ln(pi(tau) / pi_ref(tau))]` by
/// enumeration; `-inf` when `pi` puts mass where `pi_ref` has none.
pub fn kl_objective(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    pi_ref: &TabularPolicy,
    cfg: &KlConfig,
    r: &RewardTable,
    cap: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (traj, d) in enumerate_trajectories(mdp, pi, cap)? {
        let p = pi.trajectory_probability(&traj);
        let q = pi_ref.trajectory_probability(&traj);
        if q <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += d * (r.trajectory_sum(&traj) - cfg.beta * (p / q).ln());
    }
    Ok(total)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// The Markov policy whose trajectory law is proportional to
/// `pi_ref(tau) exp(r(tau) / beta)`, by a soft backward recursion.
/// Requires deterministic transitions.
pub fn kl_optimal_policy(
    mdp: &LayeredMdp,
    r: &RewardTable,
    pi_ref: &TabularPolicy,
    beta: f64,
) -> Result<TabularPolicy> {
    if !mdp.is_deterministic() {
        return Err(Error::StochasticTransitions);
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let horizon = mdp.horizon();
    let mut probs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(horizon);
    // Soft value `W_{h+1}` of the next layer; zero past the horizon.
    let mut w_next: Vec<f64> = Vec::new();
    for h in (0..horizon).rev() {
        let mut layer = Vec::with_capacity(mdp.layer_size(h));
        let mut w = vec![0.0; mdp.layer_size(h)];
        for (s, ws) in w.iter_mut().enumerate() {
            let logits: Vec<f64> = (0..mdp.num_actions())
                .map(|a| {
                    let p = pi_ref.prob(h, s, a);
                    if p <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    let tail = if h + 1 < horizon {
                        let next = mdp.deterministic_next(h, s, a).expect("checked deterministic");
                        w_next[next]
                    } else {
                        0.0
                    };
                    p.ln() + r.get(h, s, a) / beta + tail
                })
                .collect();
            *ws = log_sum_exp(&logits);
            let mut row: Vec<f64> = logits.iter().map(|l| (l - *ws).exp()).collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
            layer.push(row);
        }
        probs.push(layer);
        w_next = w;
    }
    probs.reverse();
    TabularPolicy::new(probs)
}

/// `sum_i ln sigmoid(beta ln(pi/pi_ref)(win_i) - beta ln(pi/pi_ref)(lose_i))`;
/// `-inf` when `pi` gives an observed trajectory probability zero.
pub fn dpo_log_likelihood(
    data: &PreferenceDataset,
    pi: &TabularPolicy,
    pi_ref: &TabularPolicy,
    beta: f64,
) -> f64 {
    let implicit = |t: &Trajectory| {
        pi.trajectory_log_probability(t) - pi_ref.trajectory_log_probability(t)
    };
    let mut total = 0.0;
    for p in &data.pairs {
        let (w, l) = (implicit(&p.win), implicit(&p.lose));
        if w == f64::NEG_INFINITY || l == f64::NEG_INFINITY || w.is_nan() || l.is_nan() {
            return f64::NEG_INFINITY;
        }
        total += log_sigmoid(beta * (w - l));
    }
    total
}

#[derive(Clone, Debug)]
pub struct DpoFit {
    pub index: usize,
    pub policy: TabularPolicy,
    pub log_likelihoods: Vec<f64>,
}

/// Maximum-likelihood policy in a finite class under the DPO implicit
/// reward `beta ln(pi / pi_ref)`; ties to the lowest index.
pub fn dpo_fit(
    data: &PreferenceDataset,
    class: &[TabularPolicy],
    pi_ref: &TabularPolicy,
    beta: f64,
) -> Result<DpoFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let log_likelihoods: Vec<f64> = class
        .iter()
        .map(|pi| dpo_log_likelihood(data, pi, pi_ref, beta))
        .collect();
    let index = argmax_tolerant(&log_likelihoods);
    Ok(DpoFit {
        index,
        policy: class[index].clone(),
        log_likelihoods,
    })
}

/// `max_tau |ln(pi(tau) / pi_ref(tau))|` over feasible trajectories where
/// either policy puts mass; `+inf` if exactly one of them does.
pub fn implicit_value_range(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    pi_ref: &TabularPolicy,
    cap: usize,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (traj, _) in feasible_trajectories(mdp, cap)? {
        let p = pi.trajectory_probability(&traj);
        let q = pi_ref.trajectory_probability(&traj);
        match (p > 0.0, q > 0.0) {
            (false, false) => {}
            (true, true) => worst = worst.max((p / q).ln().abs()),
            _ => return Ok(f64::INFINITY),
        }
    }
    Ok(worst)
}

/// Whether `pi` satisfies `|ln(pi/pi_ref)| <= v_max / beta` everywhere.
pub fn satisfies_implicit_bound(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    pi_ref: &TabularPolicy,
    cfg: &KlConfig,
    cap: usize,
) -> Result<bool> {
    Ok(implicit_value_range(mdp, pi, pi_ref, cap)? <= cfg.implicit_bound() + PROB_TOL)
}

/// Expected per-pair log-likelihood deficit of `pi`'s implicit reward against
/// the true Bradley-Terry labels: `E_{tau, tau' ~ pi_ref}[KL(Bern(sigma(r*
/// diff)) || Bern(sigma(implicit diff)))]`, by enumeration.
pub fn preference_deficit(
    mdp: &LayeredMdp,
    pi_ref: &TabularPolicy,
    r: &RewardTable,
    pi: &TabularPolicy,
    beta: f64,
    cap: usize,
) -> Result<f64> {
    let trajs = enumerate_trajectories(mdp, pi_ref, cap)?;
    let rows: Vec<(f64, f64, f64)> = trajs
        .iter()
        .map(|(t, d)| {
            let implicit =
                beta * (pi.trajectory_log_probability(t) - pi_ref.trajectory_log_probability(t));
            (*d, r.trajectory_sum(t), implicit)
        })
        .collect();
    let mut total = 0.0;
    for &(d1, r1, i1) in &rows {
        for &(d2, r2, i2) in &rows {
            let p = sigmoid(r1 - r2);
            let diff = i1 - i2;
            if diff.is_nan() || diff.is_infinite() {
                return Ok(f64::INFINITY);
            }
            // KL of Bernoullis in log-sigmoid form for stability.
            let kl = p * (log_sigmoid(r1 - r2) - log_sigmoid(diff))
                + (1.0 - p) * (log_sigmoid(r2 - r1) - log_sigmoid(-diff));
            total += d1 * d2 * kl;
        }
    }
    Ok(total)
}

/// Two copies of `mdp` in sequence: after the last step of the first copy
/// every action restarts at the initial state of the second. Rewards are
/// zero; pair with [`paired_reward`] and [`product_policy`].
pub fn paired_mdp(mdp: &LayeredMdp) -> Result<LayeredMdp> {
    let horizon = mdp.horizon();
    let shape = mdp.shape();
    let mut layer_sizes = shape.layer_sizes.clone();
    layer_sizes.extend_from_slice(&shape.layer_sizes);
    let paired_shape = MdpShape::new(layer_sizes, shape.num_actions, shape.initial_state)?;
    let mut restart = vec![0.0; shape.layer_sizes[0]];
    restart[shape.initial_state] = 1.0;
    let bridge = vec![vec![restart; shape.num_actions]; mdp.layer_size(horizon - 1)];
    let mut transitions = mdp.transitions().clone();
    transitions.push(bridge);
    transitions.extend(mdp.transitions().iter().cloned());
    LayeredMdp::new(
        paired_shape.clone(),
        transitions,
        SaTable::zeros(&paired_shape),
    )
}

/// `g = f` on the first copy and `-f` on the second.
pub fn paired_reward(f: &SaTable) -> SaTable {
    let mut layers = f.as_nested().clone();
    layers.extend(f.scale(-1.0).into_nested());
    SaTable::from_nested(layers)
}

/// `pi` on the first copy, `pi_tilde` on the second.
pub fn product_policy(pi: &TabularPolicy, pi_tilde: &TabularPolicy) -> TabularPolicy {
    let mut probs = pi.as_nested().clone();
    probs.extend(pi_tilde.as_nested().iter().cloned());
    TabularPolicy::new(probs).expect("rows copied from valid policies")
}
