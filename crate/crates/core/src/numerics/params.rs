//! Named parameter blocks with deterministic ordering.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::array::Array;
use crate::numerics::tape::{Gradients, Tape, Var};

/// Named, shaped f64 parameter blocks. Iteration order is the name order,
/// which makes checkpointing and gradient accumulation deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    blocks: BTreeMap<String, Array>,
}

/// Gradients keyed like a [`ParameterStore`].
pub type ParamGrads = BTreeMap<String, Array>;

/// Parameter blocks lifted into tape vars (traced or constant).
pub type ParamVars<'t> = BTreeMap<String, Var<'t>>;

impl ParameterStore {
    pub fn new() -> ParameterStore {
        ParameterStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array) {
        self.blocks.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.blocks
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing parameter block '{name}'")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array> {
        self.blocks
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("missing parameter block '{name}'")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.blocks.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.blocks.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array)> {
        self.blocks.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array)> {
        self.blocks.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.blocks.values().map(Array::len).sum()
    }

    /// Registers every block as a differentiable leaf on `tape`.
    pub fn trace<'t>(&self, tape: &'t Tape) -> ParamVars<'t> {
        self.blocks
            .iter()
            .map(|(name, a)| (name.clone(), tape.leaf(a.clone())))
            .collect()
    }

    /// Lifts every block into an untraced constant var, for evaluation.
    pub fn as_constants(&self) -> ParamVars<'static> {
        self.blocks
            .iter()
            .map(|(name, a)| (name.clone(), Var::constant(a.clone())))
            .collect()
    }

    /// Collects gradients for every traced block, zero-filled where the loss
    /// did not touch a block.
    pub fn collect_grads(&self, vars: &ParamVars<'_>, grads: &Gradients) -> ParamGrads {
        self.blocks
            .iter()
            .map(|(name, a)| {
                let g = vars
                    .get(name)
                    .and_then(|v| grads.get(v))
                    .cloned()
                    .unwrap_or_else(|| Array::zeros(a.shape()));
                (name.clone(), g)
            })
            .collect()
    }
}

/// Looks a var up by block name, failing with the name on a miss.
pub fn var<'a, 't>(vars: &'a ParamVars<'t>, name: &str) -> Result<&'a Var<'t>> {
    vars.get(name)
        .ok_or_else(|| Error::Config(format!("missing parameter block '{name}'")))
}

/// Sums `other` into `acc` block by block.
pub fn accumulate_grads(acc: &mut ParamGrads, other: &ParamGrads) -> Result<()> {
    for (name, g) in other {
        match acc.get_mut(name) {
            Some(a) => a.add_assign(g)?,
            None => {
                acc.insert(name.clone(), g.clone());
            }
        }
    }
    Ok(())
}

/// Scales every block in place.
pub fn scale_grads(grads: &mut ParamGrads, s: f64) {
    for g in grads.values_mut() {
        g.scale_assign(s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_deterministic() {
        let mut p = ParameterStore::new();
        p.insert("z/last", Array::zeros(&[1]));
        p.insert("a/first", Array::zeros(&[1]));
        p.insert("m/mid", Array::zeros(&[1]));
        let names: Vec<&str> = p.names().collect();
        assert_eq!(names, vec!["a/first", "m/mid", "z/last"]);
    }

    #[test]
    fn grads_collected_per_block() {
        let mut p = ParameterStore::new();
        p.insert("w", Array::from_vec(&[2], vec![1.0, 2.0]).unwrap());
        p.insert("unused", Array::zeros(&[3]));

        let tape = Tape::new();
        let vars = p.trace(&tape);
        let w = vars.get("w").unwrap();
        let loss = w.mul(w).unwrap().sum();
        let grads = tape.backward(&loss).unwrap();
        let pg = p.collect_grads(&vars, &grads);
        assert_eq!(pg["w"].data(), &[2.0, 4.0]);
        assert_eq!(pg["unused"].data(), &[0.0, 0.0, 0.0]);
    }
}
