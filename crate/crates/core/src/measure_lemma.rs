//! Exhaustive checks of the change-of-trajectory-measure bound
//! `E_pi[f(tau)^2] <= 7425 H^3 C_sa(pi, pi_off) E_{pi_off}[f(tau)^2]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::state_action_concentrability;
use crate::error::{Error, Result};
use crate::mdp::random::{random_mdp, random_policy, random_table, RandomMdpConfig};
use crate::mdp::{
    enumerate_trajectories, reward_range, LayeredMdp, MdpSpec, SaTable, TabularPolicy,
};

/// The lemma's explicit constant.
pub const LEMMA_CONSTANT: f64 = 7425.0;

/// Absolute slack for bound comparisons whose two sides are equal in exact
/// arithmetic.
const BOUND_SLACK: f64 = 1e-12;

/// Per-pair table `f(s, a) in [-1, 1]`, summed along trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryFunctional {
    table: SaTable,
}

impl TrajectoryFunctional {
    pub fn new(table: SaTable) -> Result<Self> {
        for (h, s, a, v) in table.iter() {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::RewardOutOfRange {
                    layer: h,
                    state: s,
                    action: a,
                    value: v,
                    lo: -1.0,
                    hi: 1.0,
                });
            }
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &SaTable {
        &self.table
    }

    /// `max_tau |f(tau)|` over feasible trajectories.
    pub fn max_abs_total(&self, mdp: &LayeredMdp) -> f64 {
        let (lo, hi) = reward_range(mdp, &self.table);
        lo.abs().max(hi.abs())
    }

    /// Whether every feasible trajectory has `f(tau) in [-1, 1]`.
    pub fn is_normalized(&self, mdp: &LayeredMdp) -> bool {
        self.max_abs_total(mdp) <= 1.0 + BOUND_SLACK
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.table.scale(c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentKind {
    /// `E[f(tau)^2]`.
    Second,
    /// `E[|f(tau)|]`.
    Abs,
}

/// Exact `sum_tau d^pi(tau) g(f(tau))` by enumeration.
pub fn trajectory_moment(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    f: &TrajectoryFunctional,
    kind: MomentKind,
    cap: usize,
) -> Result<f64> {
    Ok(enumerate_trajectories(mdp, pi, cap)?
        .iter()
        .map(|(t, p)| {
            let x = f.table.trajectory_sum(t);
            p * match kind {
                MomentKind::Second => x * x,
                MomentKind::Abs => x.abs(),
            }
        })
        .sum())
}

/// Moments, coverage and both bound checks for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaCertificate {
    pub horizon: usize,
    pub second_pi: f64,
    pub second_off: f64,
    pub abs_pi: f64,
    /// `second_pi / second_off`; `None` when `second_off = 0`.
    pub ratio: Option<f64>,
    pub c_sa: f64,
    /// `7425 H^3 C_sa`.
    pub bound_ratio: f64,
    /// `sqrt(7425 H^3 C_sa E_{pi_off}[f^2])`.
    pub bound_abs: f64,
    /// `None` when the ratio is undefined.
    pub pass_ratio: Option<bool>,
    pub pass_abs: bool,
    /// `E_pi|f| <= sqrt(E_pi f^2)`.
    pub pass_cauchy_schwarz: bool,
    /// `C_sa = +inf`: the bound says nothing.
    pub vacuous: bool,
}

impl LemmaCertificate {
    /// Both bounds hold (the ratio form only where it is defined).
    pub fn passes(&self) -> bool {
        self.pass_abs && self.pass_ratio.unwrap_or(true)
    }
}

pub fn lemma_certificate(
    mdp: &LayeredMdp,
    pi: &TabularPolicy,
    pi_off: &TabularPolicy,
    f: &TrajectoryFunctional,
    cap: usize,
) -> Result<LemmaCertificate> {
    let second_pi = trajectory_moment(mdp, pi, f, MomentKind::Second, cap)?;
    let second_off = trajectory_moment(mdp, pi_off, f, MomentKind::Second, cap)?;
    let abs_pi = trajectory_moment(mdp, pi, f, MomentKind::Abs, cap)?;
    let c_sa = state_action_concentrability(mdp, pi, pi_off).value;
    let h3 = (mdp.horizon() as f64).powi(3);
    let bound_ratio = LEMMA_CONSTANT * h3 * c_sa;
    let vacuous = c_sa.is_infinite();
    let bound_abs = if vacuous {
        f64::INFINITY
    } else {
        (bound_ratio * second_off).sqrt()
    };
    let ratio = (second_off > 0.0).then(|| second_pi / second_off);
    Ok(LemmaCertificate {
        horizon: mdp.horizon(),
        second_pi,
        second_off,
        abs_pi,
        ratio,
        c_sa,
        bound_ratio,
        bound_abs,
        pass_ratio: ratio.map(|r| vacuous || r <= bound_ratio * (1.0 + BOUND_SLACK)),
        pass_abs: vacuous || abs_pi <= bound_abs + BOUND_SLACK,
        pass_cauchy_schwarz: abs_pi <= second_pi.sqrt() + BOUND_SLACK,
        vacuous,
    })
}

/// Uniform `[-1, 1]` entries, rescaled so that `max_tau |f(tau)| <= 1`.
pub fn random_functional<R: Rng + ?Sized>(rng: &mut R, mdp: &LayeredMdp) -> TrajectoryFunctional {
    normalize(mdp, random_table(rng, mdp.shape(), -1.0, 1.0))
}

/// Sign-cancelling family: a telescoping potential difference along each
/// transition plus a sparse bump, so that path sums mostly cancel while
/// individual steps are large.
pub fn cancellation_functional<R: Rng + ?Sized>(
    rng: &mut R,
    mdp: &LayeredMdp,
) -> TrajectoryFunctional {
    let shape = mdp.shape();
    let phi: Vec<Vec<f64>> = shape
        .layer_sizes
        .iter()
        .map(|&n| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let horizon = mdp.horizon();
    let mut table = SaTable::from_fn(shape, |h, s, a| {
        let next = if h + 1 < horizon {
            mdp.transition(h, s, a)
                .iter()
                .zip(&phi[h + 1])
                .map(|(p, x)| p * x)
                .sum()
        } else {
            0.0
        };
        next - phi[h][s]
    });
    let h = rng.gen_range(0..horizon);
    let s = rng.gen_range(0..shape.layer_sizes[h]);
    let a = rng.gen_range(0..shape.num_actions);
    table.set(h, s, a, table.get(h, s, a) + rng.gen_range(-0.5..0.5));
    normalize(mdp, table)
}

fn normalize(mdp: &LayeredMdp, table: SaTable) -> TrajectoryFunctional {
    let (lo, hi) = reward_range(mdp, &table);
    let peak = lo.abs().max(hi.abs()).max(table.max_abs());
    let table = if peak > 1.0 { table.scale(1.0 / peak) } else { table };
    TrajectoryFunctional::new(table.map(|v| v.clamp(-1.0, 1.0)))
        .expect("entries clamped into range")
}

/// One state per layer, two actions, `f = +1/H` for action 0 and `-1/H` for
/// action 1. With `pi_off` uniform and `pi` playing action 0 w.p. 3/4,
/// `C_sa = 3/2` while the moment ratio is `H/4 + 3/4`.
pub fn independent_coordinates(
    horizon: usize,
) -> (LayeredMdp, TabularPolicy, TabularPolicy, TrajectoryFunctional) {
    let mdp = crate::fixtures::independent_coordinates(horizon);
    let pi_off = TabularPolicy::uniform(mdp.shape());
    let pi = crate::fixtures::biased_policy(mdp.shape(), 0.75);
    let step = 1.0 / horizon as f64;
    let f = SaTable::from_fn(mdp.shape(), |_, _, a| if a == 0 { step } else { -step });
    let f = TrajectoryFunctional::new(f).expect("entries are at most 1 in size");
    (mdp, pi, pi_off, f)
}

/// Instance generator for the tightness probe.
#[derive(Clone, Debug)]
pub enum ProbeFamily {
    /// Random MDPs, random policies, random or cancelling functionals.
    Random(RandomMdpConfig),
    /// [`independent_coordinates`] at a fixed horizon, with random biases.
    IndependentCoordinates { horizon: usize },
}

/// Everything needed to replay one probe instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeWitness {
    pub trial: usize,
    pub spec: MdpSpec,
    pub f: Vec<Vec<Vec<f64>>>,
    pub pi: Vec<Vec<Vec<f64>>>,
    pub pi_off: Vec<Vec<Vec<f64>>>,
    /// `ratio / (H^3 C_sa)`.
    pub score: f64,
}

impl ProbeWitness {
    /// Rebuilds the instance and recomputes its score.
    pub fn replay(&self, cap: usize) -> Result<f64> {
        let mdp = self.spec.build()?;
        let pi = TabularPolicy::new(self.pi.clone())?;
        let pi_off = TabularPolicy::new(self.pi_off.clone())?;
        let f = TrajectoryFunctional::new(SaTable::from_nested(self.f.clone()))?;
        let cert = lemma_certificate(&mdp, &pi, &pi_off, &f, cap)?;
        Ok(probe_score(&cert).unwrap_or(0.0))
    }
}

#[derive(Clone, Debug, Default)]
pub struct TightnessReport {
    pub trials: usize,
    /// Trials with finite coverage and a defined ratio.
    pub scored: usize,
    /// Largest `ratio / C_sa` seen.
    pub max_ratio_over_c: f64,
    pub worst: Option<ProbeWitness>,
}

impl TightnessReport {
    /// Largest `ratio / (H^3 C_sa)` seen.
    pub fn max_score(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.score)
    }
}

fn probe_score(cert: &LemmaCertificate) -> Option<f64> {
    if cert.vacuous {
        return None;
    }
    let h3 = (cert.horizon as f64).powi(3);
    cert.ratio.map(|r| r / (h3 * cert.c_sa))
}

/// Sub-seed for trial `i` of a probe started from `seed`.
fn trial_seed(seed: u64, i: usize) -> u64 {
    crate::experiment::sub_seed(seed, i as u64)
}

/// Random search for instances where the moment ratio is large relative to
/// `H^3 C_sa`; reproducible from `seed`.
pub fn tightness_probe(
    family: &ProbeFamily,
    seed: u64,
    trials: usize,
    cap: usize,
) -> Result<TightnessReport> {
    let mut report = TightnessReport {
        trials,
        ..TightnessReport::default()
    };
    for i in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, i));
        let (mdp, pi, pi_off, f) = probe_instance(family, &mut rng);
        let cert = lemma_certificate(&mdp, &pi, &pi_off, &f, cap)?;
        let Some(score) = probe_score(&cert) else {
            continue;
        };
        report.scored += 1;
        report.max_ratio_over_c = report.max_ratio_over_c.max(cert.ratio.unwrap() / cert.c_sa);
        if report.worst.as_ref().map_or(true, |w| score > w.score) {
            report.worst = Some(ProbeWitness {
                trial: i,
                spec: mdp.to_spec(),
                f: f.table().as_nested().clone(),
                pi: pi.as_nested().clone(),
                pi_off: pi_off.as_nested().clone(),
                score,
            });
        }
    }
    Ok(report)
}

/// A random `(mdp, pi, pi_off, f)` from the family.
pub fn probe_instance<R: Rng + ?Sized>(
    family: &ProbeFamily,
    rng: &mut R,
) -> (LayeredMdp, TabularPolicy, TabularPolicy, TrajectoryFunctional) {
    match family {
        ProbeFamily::Random(cfg) => {
            let mdp = random_mdp(rng, cfg);
            let pi = random_policy(rng, mdp.shape(), false);
            let full_support = rng.gen_bool(0.5);
            let pi_off = random_policy(rng, mdp.shape(), full_support);
            let f = if rng.gen_bool(0.5) {
                random_functional(rng, &mdp)
            } else {
                cancellation_functional(rng, &mdp)
            };
            (mdp, pi, pi_off, f)
        }
        ProbeFamily::IndependentCoordinates { horizon } => {
            let (mdp, _, pi_off, f) = independent_coordinates(*horizon);
            let bias = rng.gen_range(0.5..0.95);
            let pi = crate::fixtures::biased_policy(mdp.shape(), bias);
            (mdp, pi, pi_off, f)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mdp::{sample_trajectory, DEFAULT_ENUMERATION_CAP};

    const CAP: usize = DEFAULT_ENUMERATION_CAP;

    #[test]
    fn zero_functional_has_zero_moments() {
        let mdp = fixtures::binary_tree(3);
        let pi = TabularPolicy::uniform(mdp.shape());
        let f = TrajectoryFunctional::new(SaTable::zeros(mdp.shape())).unwrap();
        for kind in [MomentKind::Second, MomentKind::Abs] {
            assert_eq!(trajectory_moment(&mdp, &pi, &f, kind, CAP).unwrap(), 0.0);
        }
    }

    #[test]
    fn point_mass_moment() {
        let mdp = fixtures::binary_tree(2);
        let pi = TabularPolicy::deterministic(mdp.shape(), &[vec![1], vec![0, 0]]).unwrap();
        let f = SaTable::from_fn(mdp.shape(), |_, _, _| 0.25);
        let f = TrajectoryFunctional::new(f).unwrap();
        assert_eq!(trajectory_moment(&mdp, &pi, &f, MomentKind::Second, CAP).unwrap(), 0.25);
    }

    #[test]
    fn range_is_enforced() {
        let mdp = fixtures::binary_tree(1);
        let bad = SaTable::from_nested(vec![vec![vec![1.5, 0.0]]]);
        assert!(TrajectoryFunctional::new(bad).is_err());
        let _ = mdp;
    }

    #[test]
    fn moments_match_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = random_mdp(&mut rng, &RandomMdpConfig::default());
        let pi = random_policy(&mut rng, mdp.shape(), false);
        let f = random_functional(&mut rng, &mdp);
        let exact = trajectory_moment(&mdp, &pi, &f, MomentKind::Second, CAP).unwrap();
        let n = 50_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| f.table().trajectory_sum(&sample_trajectory(&mdp, &pi, &mut rng)).powi(2))
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - exact).abs() <= 3.0 * (var / n as f64).sqrt() + 1e-12);
    }

    #[test]
    fn identical_policies_give_ratio_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mdp = random_mdp(&mut rng, &RandomMdpConfig::default());
        let pi = random_policy(&mut rng, mdp.shape(), true);
        let f = random_functional(&mut rng, &mdp);
        let cert = lemma_certificate(&mdp, &pi, &pi, &f, CAP).unwrap();
        if let Some(r) = cert.ratio {
            assert!((r - 1.0).abs() < 1e-12);
        }
        assert!(cert.passes());
    }

    /// Root action 0 adds +1/2 and the left child's action 0 adds -1/2, so
    /// the behaviour path sums to zero; the target takes the child's other
    /// action, which adds +1/2 instead.
    #[test]
    fn cancellation_instance_passes() {
        let mdp = fixtures::binary_tree(2);
        let eps = 1.0 / 64.0;
        let pi_off = TabularPolicy::new(vec![
            vec![vec![1.0, 0.0]],
            vec![vec![1.0 - eps, eps], vec![0.5, 0.5]],
        ])
        .unwrap();
        let pi = TabularPolicy::deterministic(mdp.shape(), &[vec![0], vec![1, 0]]).unwrap();
        let f = SaTable::from_nested(vec![
            vec![vec![0.5, 0.0]],
            vec![vec![-0.5, 0.5], vec![0.0, 0.0]],
        ]);
        let f = TrajectoryFunctional::new(f).unwrap();
        assert!(f.is_normalized(&mdp));
        let cert = lemma_certificate(&mdp, &pi, &pi_off, &f, CAP).unwrap();
        assert_eq!(cert.second_pi, 1.0);
        assert_eq!(cert.second_off, eps);
        assert_eq!(cert.c_sa, 1.0 / eps);
        assert_eq!(cert.ratio, Some(1.0 / eps));
        assert!(cert.passes());
    }

    #[test]
    fn random_instances_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let family = ProbeFamily::Random(RandomMdpConfig {
            max_states: 3,
            ..RandomMdpConfig::default()
        });
        let mut certified = 0;
        for _ in 0..200 {
            let (mdp, pi, pi_off, f) = probe_instance(&family, &mut rng);
            assert!(f.is_normalized(&mdp));
            let cert = lemma_certificate(&mdp, &pi, &pi_off, &f, CAP).unwrap();
            assert!(cert.pass_cauchy_schwarz);
            if !cert.vacuous {
                certified += 1;
                assert!(cert.passes(), "{cert:?}");
            }
        }
        assert!(certified > 50);
    }

    #[test]
    fn scaling_is_covariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mdp = random_mdp(&mut rng, &RandomMdpConfig::default());
        let pi = random_policy(&mut rng, mdp.shape(), true);
        let off = random_policy(&mut rng, mdp.shape(), true);
        let f = random_functional(&mut rng, &mdp);
        let a = lemma_certificate(&mdp, &pi, &off, &f, CAP).unwrap();
        let b = lemma_certificate(&mdp, &pi, &off, &f.scaled(-0.5).unwrap(), CAP).unwrap();
        assert!((b.second_pi - 0.25 * a.second_pi).abs() < 1e-14);
        assert!((b.second_off - 0.25 * a.second_off).abs() < 1e-14);
        if let (Some(x), Some(y)) = (a.ratio, b.ratio) {
            assert!((x - y).abs() <= 1e-9 * x);
        }
    }

    #[test]
    fn zero_off_moment_uses_absolute_check() {
        let mdp = fixtures::binary_tree(1);
        let pi = TabularPolicy::uniform(mdp.shape());
        let f = TrajectoryFunctional::new(SaTable::zeros(mdp.shape())).unwrap();
        let cert = lemma_certificate(&mdp, &pi, &pi, &f, CAP).unwrap();
        assert_eq!(cert.ratio, None);
        assert_eq!(cert.pass_ratio, None);
        assert!(cert.pass_abs);
    }

    #[test]
    fn uncovered_instance_is_vacuous() {
        let mdp = fixtures::two_armed_bandit(0.0, 1.0);
        let off = TabularPolicy::deterministic(mdp.shape(), &[vec![0]]).unwrap();
        let pi = TabularPolicy::deterministic(mdp.shape(), &[vec![1]]).unwrap();
        let f = TrajectoryFunctional::new(SaTable::from_nested(vec![vec![vec![0.0, 1.0]]])).unwrap();
        let cert = lemma_certificate(&mdp, &pi, &off, &f, CAP).unwrap();
        assert!(cert.vacuous);
    }

    #[test]
    fn independent_coordinates_closed_form() {
        for horizon in 1..=6 {
            let (mdp, pi, off, f) = independent_coordinates(horizon);
            let cert = lemma_certificate(&mdp, &pi, &off, &f, CAP).unwrap();
            let h = horizon as f64;
            assert!((cert.c_sa - 1.5).abs() < 1e-12);
            assert!((cert.ratio.unwrap() - (0.25 * h + 0.75)).abs() < 1e-9);
        }
    }

    #[test]
    fn probe_empty_and_growing() {
        let empty = tightness_probe(&ProbeFamily::IndependentCoordinates { horizon: 2 }, 0, 0, CAP).unwrap();
        assert!(empty.worst.is_none());
        let small = tightness_probe(&ProbeFamily::IndependentCoordinates { horizon: 2 }, 1, 20, CAP).unwrap();
        let large = tightness_probe(&ProbeFamily::IndependentCoordinates { horizon: 8 }, 1, 20, CAP).unwrap();
        assert!(large.max_ratio_over_c > small.max_ratio_over_c);
    }

    #[test]
    fn witness_replays_exactly() {
        let family = ProbeFamily::Random(RandomMdpConfig::default());
        let report = tightness_probe(&family, 7, 50, CAP).unwrap();
        let w = report.worst.unwrap();
        let spec_text = w.spec.to_toml_string();
        let back = ProbeWitness {
            spec: MdpSpec::from_toml_str(&spec_text).unwrap(),
            ..w.clone()
        };
        assert_eq!(back.replay(CAP).unwrap(), w.score);
    }
}
