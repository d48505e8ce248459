use rand::Rng;

use super::{MdpShape, Trajectory, PROB_TOL};
use crate::error::{Error, Result};

/// A Markov policy: one action distribution per `(layer, state)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    probs: Vec<Vec<Vec<f64>>>,
}

impl TabularPolicy {
    /// Validates that every row is a probability vector.
    pub fn new(probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for (h, layer) in probs.iter().enumerate() {
            for (s, row) in layer.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                let bad = row.iter().any(|p| !p.is_finite() || *p < 0.0);
                if bad || row.is_empty() || (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidPolicyRow { layer: h, state: s, sum });
                }
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(shape: &MdpShape) -> Self {
        let p = 1.0 / shape.num_actions as f64;
        Self {
            probs: shape
                .layer_sizes
                .iter()
                .map(|&n| vec![vec![p; shape.num_actions]; n])
                .collect(),
        }
    }

    /// Deterministic policy from `actions[layer][state]`.
    pub fn deterministic(shape: &MdpShape, actions: &[Vec<usize>]) -> Result<Self> {
        if actions.len() != shape.horizon() {
            return Err(Error::LayerMismatch(format!(
                "{} action layers for horizon {}",
                actions.len(),
                shape.horizon()
            )));
        }
        let mut probs = Vec::with_capacity(actions.len());
        for (h, layer) in actions.iter().enumerate() {
            if layer.len() != shape.layer_sizes[h] {
                return Err(Error::LayerMismatch(format!(
                    "layer {h} has {} actions listed for {} states",
                    layer.len(),
                    shape.layer_sizes[h]
                )));
            }
            let mut rows = Vec::with_capacity(layer.len());
            for &a in layer {
                if a >= shape.num_actions {
                    return Err(Error::InvalidArgument(format!("action {a} out of range")));
                }
                let mut row = vec![0.0; shape.num_actions];
                row[a] = 1.0;
                rows.push(row);
            }
            probs.push(rows);
        }
        Ok(Self { probs })
    }

    #[inline]
    pub fn prob(&self, layer: usize, state: usize, action: usize) -> f64 {
        self.probs[layer][state][action]
    }

    pub fn row(&self, layer: usize, state: usize) -> &[f64] {
        &self.probs[layer][state]
    }

    pub fn as_nested(&self) -> &Vec<Vec<Vec<f64>>> {
        &self.probs
    }

    pub fn matches(&self, shape: &MdpShape) -> bool {
        self.probs.len() == shape.horizon()
            && self.probs.iter().zip(&shape.layer_sizes).all(|(layer, &n)| {
                layer.len() == n && layer.iter().all(|r| r.len() == shape.num_actions)
            })
    }

    /// The chosen action if the row at `(layer, state)` is a point mass.
    pub fn action(&self, layer: usize, state: usize) -> Option<usize> {
        let row = &self.probs[layer][state];
        row.iter().position(|&p| p == 1.0)
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs
            .iter()
            .enumerate()
            .all(|(h, l)| (0..l.len()).all(|s| self.action(h, s).is_some()))
    }

    /// `actions[layer][state]` for a deterministic policy.
    pub fn actions(&self) -> Option<Vec<Vec<usize>>> {
        self.probs
            .iter()
            .enumerate()
            .map(|(h, l)| (0..l.len()).map(|s| self.action(h, s)).collect())
            .collect()
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, layer: usize, state: usize, rng: &mut R) -> usize {
        sample_index(&self.probs[layer][state], rng)
    }

    /// `pi(tau) = prod_h pi(a_h | s_h)`; ignores the transition kernel.
    pub fn trajectory_probability(&self, traj: &Trajectory) -> f64 {
        traj.steps()
            .iter()
            .enumerate()
            .map(|(h, st)| self.probs[h][st.state][st.action])
            .product()
    }

    /// `log pi(tau)`, `-inf` when some step has zero probability.
    pub fn trajectory_log_probability(&self, traj: &Trajectory) -> f64 {
        traj.steps()
            .iter()
            .enumerate()
            .map(|(h, st)| self.probs[h][st.state][st.action].ln())
            .sum()
    }

    pub fn max_abs_diff(&self, other: &TabularPolicy) -> f64 {
        self.probs
            .iter()
            .flatten()
            .flatten()
            .zip(other.probs.iter().flatten().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Inverse-CDF draw from a probability vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Number of deterministic Markov policies, `|A|^{|S|}`, saturating.
pub fn deterministic_policy_count(shape: &MdpShape) -> usize {
    let states = shape.num_states() as u32;
    shape.num_actions.checked_pow(states).unwrap_or(usize::MAX)
}

/// All deterministic Markov policies in lexicographic order of their action
/// assignments (first state most significant), so index 0 is "always action 0".
pub fn deterministic_policies(shape: &MdpShape, cap: usize) -> Result<Vec<TabularPolicy>> {
    let count = deterministic_policy_count(shape);
    if count > cap {
        return Err(Error::CapExceeded {
            cap,
            what: format!("{count} deterministic policies"),
        });
    }
    let cells: Vec<(usize, usize)> = shape
        .layer_sizes
        .iter()
        .enumerate()
        .flat_map(|(h, &n)| (0..n).map(move |s| (h, s)))
        .collect();
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; cells.len()];
    for _ in 0..count {
        let mut actions: Vec<Vec<usize>> =
            shape.layer_sizes.iter().map(|&n| vec![0; n]).collect();
        for (&(h, s), &d) in cells.iter().zip(&digits) {
            actions[h][s] = d;
        }
        out.push(TabularPolicy::deterministic(shape, &actions)?);
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < shape.num_actions {
                break;
            }
            *d = 0;
        }
    }
    Ok(out)
}
