use serde::{Deserialize, Serialize};

use crate::goal_lang::StateSchema;
use crate::sfspa::StateId;

/// Layer sizes of a feedforward network with `tanh` activations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub outputs: usize,
}

impl Architecture {
    fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let sizes: Vec<usize> = std::iter::once(self.inputs)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.outputs))
            .collect();
        (0..sizes.len() - 1).map(move |i| (sizes[i], sizes[i + 1]))
    }

    /// Weights plus biases over all layers.
    pub fn param_count(&self) -> usize {
        self.layers().map(|(i, o)| (i + 1) * o).sum()
    }
}

/// Anything that maps (environment state, automaton state) to an action.
pub trait Controller: Sync {
    fn act(&self, state: &[f64], automaton_state: StateId) -> Vec<f64>;
}

impl<F> Controller for F
where
    F: Fn(&[f64], StateId) -> Vec<f64> + Sync,
{
    fn act(&self, state: &[f64], automaton_state: StateId) -> Vec<f64> {
        self(state, automaton_state)
    }
}

/// Feedforward policy over the normalized environment state followed by a
/// one-hot encoding of the automaton state. The output layer's `tanh` is
/// mapped affinely onto the action bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub arch: Architecture,
    pub params: Vec<f64>,
    pub input_center: Vec<f64>,
    pub input_half_width: Vec<f64>,
    pub automaton_states: usize,
    pub action_bounds: Vec<(f64, f64)>,
}

impl Policy {
    pub fn new(
        schema: &StateSchema,
        automaton_states: usize,
        hidden: Vec<usize>,
        action_bounds: Vec<(f64, f64)>,
    ) -> Policy {
        let arch = Architecture {
            inputs: schema.len() + automaton_states,
            hidden,
            outputs: action_bounds.len(),
        };
        Policy {
            params: vec![0.0; arch.param_count()],
            arch,
            input_center: schema.fields.iter().map(|f| 0.5 * (f.min + f.max)).collect(),
            input_half_width: schema.fields.iter().map(|f| 0.5 * (f.max - f.min)).collect(),
            automaton_states,
            action_bounds,
        }
    }

    pub fn with_params(&self, params: Vec<f64>) -> Policy {
        assert_eq!(params.len(), self.arch.param_count());
        Policy {
            params,
            ..self.clone()
        }
    }

    /// Network input; `automaton_state = None` leaves the one-hot channels
    /// at zero.
    pub fn input(&self, state: &[f64], automaton_state: Option<StateId>) -> Vec<f64> {
        let mut x: Vec<f64> = state
            .iter()
            .zip(self.input_center.iter().zip(&self.input_half_width))
            .map(|(v, (c, h))| (v - c) / h)
            .collect();
        x.extend((0..self.automaton_states).map(|q| if Some(q) == automaton_state { 1.0 } else { 0.0 }));
        x
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        let mut offset = 0;
        for (n_in, n_out) in self.arch.layers() {
            let w = &self.params[offset..offset + (n_in + 1) * n_out];
            offset += (n_in + 1) * n_out;
            x = (0..n_out)
                .map(|o| {
                    let row = &w[o * (n_in + 1)..(o + 1) * (n_in + 1)];
                    let z: f64 = row[..n_in].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + row[n_in];
                    z.tanh()
                })
                .collect();
        }
        x.iter()
            .zip(&self.action_bounds)
            .map(|(y, &(lo, hi))| lo + (hi - lo) * 0.5 * (y + 1.0))
            .collect()
    }

    /// Marks first-layer weights fed by the automaton one-hot channels.
    pub fn automaton_param_mask(&self) -> Vec<bool> {
        let n_in = self.arch.inputs;
        let first = self.arch.layers().next().map_or(0, |(i, o)| (i + 1) * o);
        let n_state = n_in - self.automaton_states;
        (0..self.arch.param_count())
            .map(|k| k < first && (n_state..n_in).contains(&(k % (n_in + 1))))
            .collect()
    }

    pub fn act_with(&self, state: &[f64], automaton_state: Option<StateId>) -> Vec<f64> {
        self.forward(&self.input(state, automaton_state))
    }
}

impl Controller for Policy {
    fn act(&self, state: &[f64], automaton_state: StateId) -> Vec<f64> {
        self.act_with(state, Some(automaton_state))
    }
}
