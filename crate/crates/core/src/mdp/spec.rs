//! Human-editable TOML description of a layered MDP.
//!
//! ```toml
//! horizon = 2
//! layers = [1, 2]
//! actions = 2
//! initial_state = 0
//! rewards = [[[0.0, 0.0]], [[1.0, 0.0], [0.5, 0.25]]]
//!
//! [[transitions]]
//! h = 0
//! s = 0
//! a = 0
//! next = [1.0, 0.0]
//! ```
//!
//! Layers, states and actions are zero-based; states are indexed within
//! their layer. `rewards[h][s][a]` is the per-step reward. Every `(h, s, a)`
//! with `h < horizon - 1` needs exactly one transition entry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayeredMdp, MdpShape, RewardTable};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub h: usize,
    pub s: usize,
    pub a: usize,
    pub next: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    pub horizon: usize,
    pub layers: Vec<usize>,
    pub actions: usize,
    pub initial_state: usize,
    pub rewards: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub transitions: Vec<TransitionEntry>,
}

impl MdpSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("MDP spec is always representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::UnresolvableSpec {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// Builds and validates the MDP.
    pub fn build(&self) -> Result<LayeredMdp> {
        if self.layers.len() != self.horizon {
            return Err(Error::LayerMismatch(format!(
                "horizon {} but {} layer sizes",
                self.horizon,
                self.layers.len()
            )));
        }
        let shape = MdpShape::new(self.layers.clone(), self.actions, self.initial_state)?;
        let mut transitions: Vec<Vec<Vec<Option<Vec<f64>>>>> = self.layers[..self.horizon - 1]
            .iter()
            .map(|&n| vec![vec![None; self.actions]; n])
            .collect();
        for t in &self.transitions {
            let slot = transitions
                .get_mut(t.h)
                .and_then(|l| l.get_mut(t.s))
                .and_then(|r| r.get_mut(t.a))
                .ok_or_else(|| {
                    Error::LayerMismatch(format!(
                        "transition entry (h={}, s={}, a={}) is out of range",
                        t.h, t.s, t.a
                    ))
                })?;
            if slot.is_some() {
                return Err(Error::LayerMismatch(format!(
                    "duplicate transition entry (h={}, s={}, a={})",
                    t.h, t.s, t.a
                )));
            }
            *slot = Some(t.next.clone());
        }
        let mut full = Vec::with_capacity(transitions.len());
        for (h, layer) in transitions.into_iter().enumerate() {
            let mut states = Vec::with_capacity(layer.len());
            for (s, row) in layer.into_iter().enumerate() {
                let mut acts = Vec::with_capacity(row.len());
                for (a, entry) in row.into_iter().enumerate() {
                    acts.push(entry.ok_or_else(|| {
                        Error::LayerMismatch(format!(
                            "missing transition entry (h={h}, s={s}, a={a})"
                        ))
                    })?);
                }
                states.push(acts);
            }
            full.push(states);
        }
        let rewards = RewardTable::from_nested(self.rewards.clone());
        LayeredMdp::new(shape, full, rewards)
    }
}

impl LayeredMdp {
    pub fn to_spec(&self) -> MdpSpec {
        let mut transitions = Vec::new();
        for (h, layer) in self.transitions().iter().enumerate() {
            for (s, rows) in layer.iter().enumerate() {
                for (a, next) in rows.iter().enumerate() {
                    transitions.push(TransitionEntry {
                        h,
                        s,
                        a,
                        next: next.clone(),
                    });
                }
            }
        }
        MdpSpec {
            horizon: self.horizon(),
            layers: self.shape().layer_sizes.clone(),
            actions: self.num_actions(),
            initial_state: self.initial_state(),
            rewards: self.rewards().as_nested().clone(),
            transitions,
        }
    }
}
