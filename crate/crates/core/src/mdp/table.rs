use super::{MdpShape, Trajectory};

/// Real-valued table indexed by `(layer, state, action)`.
///
/// Used for rewards, Q-functions, advantages, occupancies and sampling
/// distributions over state-action pairs. States are layer-local indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SaTable {
    values: Vec<Vec<Vec<f64>>>,
}

/// A per-step reward function `r: S x A -> R`.
pub type RewardTable = SaTable;

impl SaTable {
    pub fn zeros(shape: &MdpShape) -> Self {
        Self::from_fn(shape, |_, _, _| 0.0)
    }

    pub fn from_fn(shape: &MdpShape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let values = shape
            .layer_sizes
            .iter()
            .enumerate()
            .map(|(h, &n)| {
                (0..n)
                    .map(|s| (0..shape.num_actions).map(|a| f(h, s, a)).collect())
                    .collect()
            })
            .collect();
        Self { values }
    }

    /// Wraps nested `[layer][state][action]` values. Shape consistency with a
    /// particular MDP is checked by [`SaTable::matches`].
    pub fn from_nested(values: Vec<Vec<Vec<f64>>>) -> Self {
        Self { values }
    }

    pub fn as_nested(&self) -> &Vec<Vec<Vec<f64>>> {
        &self.values
    }

    pub fn into_nested(self) -> Vec<Vec<Vec<f64>>> {
        self.values
    }

    #[inline]
    pub fn get(&self, layer: usize, state: usize, action: usize) -> f64 {
        self.values[layer][state][action]
    }

    #[inline]
    pub fn set(&mut self, layer: usize, state: usize, action: usize, value: f64) {
        self.values[layer][state][action] = value;
    }

    pub fn row(&self, layer: usize, state: usize) -> &[f64] {
        &self.values[layer][state]
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn matches(&self, shape: &MdpShape) -> bool {
        self.values.len() == shape.horizon()
            && self
                .values
                .iter()
                .zip(&shape.layer_sizes)
                .all(|(layer, &n)| {
                    layer.len() == n && layer.iter().all(|row| row.len() == shape.num_actions)
                })
    }

    /// Iterates `(layer, state, action, value)` in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.values.iter().enumerate().flat_map(|(h, layer)| {
            layer.iter().enumerate().flat_map(move |(s, row)| {
                row.iter().enumerate().map(move |(a, &v)| (h, s, a, v))
            })
        })
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|l| l.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect())
                .collect(),
        }
    }

    /// Element-wise combination of two tables of identical shape.
    pub fn zip_with(&self, other: &SaTable, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "table shape mismatch");
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(l1, l2)| {
                    l1.iter()
                        .zip(l2)
                        .map(|(r1, r2)| r1.iter().zip(r2).map(|(&x, &y)| f(x, y)).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn sub(&self, other: &SaTable) -> Self {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn add(&self, other: &SaTable) -> Self {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn sum(&self) -> f64 {
        self.iter().map(|(_, _, _, v)| v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, (_, _, _, v)| m.max(v.abs()))
    }

    /// `r(tau) = sum_h r(s_h, a_h)`.
    pub fn trajectory_sum(&self, traj: &Trajectory) -> f64 {
        traj.steps()
            .iter()
            .enumerate()
            .map(|(h, st)| self.values[h][st.state][st.action])
            .sum()
    }

    pub fn max_abs_diff(&self, other: &SaTable) -> f64 {
        self.sub(other).max_abs()
    }
}
