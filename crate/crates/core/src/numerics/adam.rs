//! Bias-corrected Adam updates over a [`ParameterStore`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::array::Array;
use crate::numerics::params::{ParamGrads, ParameterStore};

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter first and second moments plus the shared step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    moments: BTreeMap<String, (Array, Array)>,
}

impl AdamState {
    pub fn new(params: &ParameterStore, config: AdamConfig) -> AdamState {
        let moments = params
            .iter()
            .map(|(name, a)| {
                (
                    name.to_string(),
                    (Array::zeros(a.shape()), Array::zeros(a.shape())),
                )
            })
            .collect();
        AdamState {
            config,
            step: 0,
            moments,
        }
    }
}

/// What [`adam_step`] did with the proposed update.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    /// The update was skipped because a gradient block contained a
    /// non-finite value; the offending block name is reported.
    SkippedNonFinite { block: String },
}

/// One bias-corrected Adam update. A non-finite gradient anywhere skips the
/// whole update (parameters, moments and step counter untouched).
pub fn adam_step(
    params: &mut ParameterStore,
    grads: &ParamGrads,
    state: &mut AdamState,
    lr: f64,
) -> Result<UpdateOutcome> {
    for (name, g) in grads {
        if !g.all_finite() {
            return Ok(UpdateOutcome::SkippedNonFinite {
                block: name.clone(),
            });
        }
    }
    let t = state.step + 1;
    let AdamConfig {
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    for (name, g) in grads {
        let p = params.get_mut(name)?;
        let (m, v) = state
            .moments
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("no Adam moments for block '{name}'")))?;
        if m.shape() != g.shape() || p.shape() != g.shape() {
            return Err(Error::shape("adam_step", p.shape(), g.shape()));
        }
        let pd = p.data_mut();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..pd.len() {
            let gi = g.data()[i];
            md[i] = beta1 * md[i] + (1.0 - beta1) * gi;
            vd[i] = beta2 * vd[i] + (1.0 - beta2) * gi * gi;
            let mhat = md[i] / bc1;
            let vhat = vd[i] / bc2;
            pd[i] -= lr * mhat / (vhat.sqrt() + epsilon);
        }
    }
    state.step = t;
    Ok(UpdateOutcome::Applied)
}
