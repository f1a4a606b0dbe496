//! Model assembly: one enum over the three architectures plus the
//! parameter-initialization helper they share.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::audio::QuantScheme;
use crate::conditioner::{self, ConditionerConfig};
use crate::error::{Error, Result};
use crate::numerics::array::Array;
use crate::numerics::params::{var, ParamVars, ParameterStore};
use crate::numerics::rng::stream;
use crate::numerics::tape::Var;
use crate::transformer::{self, TransformerConfig};
use crate::wavenet::{self, WavenetConfig};

/// Uniform init in ±1/sqrt(fan_in), drawn from a stream derived from the
/// seed and the block name. Blocks with equal names initialize identically
/// across model variants under the same seed.
pub(crate) fn fan_in_uniform(shape: &[usize], fan_in: usize, seed: u64, name: &str) -> Array {
    let mut rng = stream(seed, name);
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
        .collect();
    Array::from_parts(shape.to_vec(), data)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Wavenet(WavenetConfig),
    Transformer(TransformerConfig),
    /// Transformer plus past-context conditioner, trained jointly.
    CondTransformer {
        xf: TransformerConfig,
        cond: ConditionerConfig,
    },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Wavenet(cfg) => cfg.validate(),
            ModelSpec::Transformer(cfg) => cfg.validate(),
            ModelSpec::CondTransformer { xf, cond } => {
                xf.validate()?;
                cond.validate()
            }
        }
    }

    pub fn t_ctx(&self) -> usize {
        match self {
            ModelSpec::Wavenet(cfg) => cfg.t_ctx,
            ModelSpec::Transformer(cfg) => cfg.t_ctx,
            ModelSpec::CondTransformer { xf, .. } => xf.t_ctx,
        }
    }

    pub fn is_conditioned(&self) -> bool {
        matches!(self, ModelSpec::CondTransformer { .. })
    }

    pub fn past_len(&self) -> Option<usize> {
        match self {
            ModelSpec::CondTransformer { cond, .. } => Some(cond.past_len),
            _ => None,
        }
    }

    pub fn init_params(&self, seed: u64) -> ParameterStore {
        match self {
            ModelSpec::Wavenet(cfg) => wavenet::init_params(cfg, seed),
            ModelSpec::Transformer(cfg) => transformer::init_params(cfg, seed),
            ModelSpec::CondTransformer { xf, cond } => {
                let mut p = transformer::init_params(xf, seed);
                for (name, a) in conditioner::init_params(cond, seed).iter() {
                    p.insert(name.to_string(), a.clone());
                }
                p
            }
        }
    }

    pub fn block_names(&self) -> Vec<String> {
        match self {
            ModelSpec::Wavenet(cfg) => wavenet::block_names(cfg),
            ModelSpec::Transformer(cfg) => transformer::block_names(cfg),
            ModelSpec::CondTransformer { xf, cond } => {
                let mut names = transformer::block_names(xf);
                names.extend(conditioner::block_names(cond));
                names.sort();
                names
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ModelSpec::Wavenet(cfg) => wavenet::param_count(cfg),
            ModelSpec::Transformer(cfg) => transformer::param_count(cfg),
            ModelSpec::CondTransformer { xf, cond } => {
                transformer::param_count(xf) + conditioner::param_count(cond)
            }
        }
    }
}

/// A model: architecture, quantization scheme and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub scheme: QuantScheme,
    pub params: ParameterStore,
}

impl Model {
    pub fn init(spec: ModelSpec, scheme: QuantScheme, seed: u64) -> Result<Model> {
        spec.validate()?;
        let params = spec.init_params(seed);
        Ok(Model {
            spec,
            scheme,
            params,
        })
    }

    pub fn t_ctx(&self) -> usize {
        self.spec.t_ctx()
    }

    /// Forward pass over lifted parameter vars; traced when the vars are.
    /// `past` is required exactly when the model is conditioned. Dropout is
    /// active only when `rng` is supplied.
    pub fn forward_vars<'t>(
        spec: &ModelSpec,
        vars: &ParamVars<'t>,
        input: &[u8],
        past: Option<&[u8]>,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var<'t>> {
        match spec {
            ModelSpec::Wavenet(cfg) => wavenet::forward(input, cfg, vars),
            ModelSpec::Transformer(cfg) => transformer::forward(input, cfg, vars, rng),
            ModelSpec::CondTransformer { xf, cond } => {
                let past = past.ok_or_else(|| {
                    Error::InvalidInput(
                        "conditioned model needs a past window".into(),
                    )
                })?;
                let logits = transformer::forward(input, xf, vars, rng)?;
                let latent = conditioner::encode_context(past, cond, vars)?;
                conditioner::fuse(
                    &logits,
                    &latent,
                    var(vars, "cond/fuse_w")?,
                    var(vars, "cond/fuse_b")?,
                )
            }
        }
    }

    /// Evaluation-mode logits: [T, 256], no tape retained.
    pub fn logits(&self, input: &[u8], past: Option<&[u8]>) -> Result<Array> {
        let vars = self.params.as_constants();
        Ok(Model::forward_vars(&self.spec, &vars, input, past, None)?.to_array())
    }

    /// Returns a past window view of exactly `past_len` levels, left-padded
    /// with silence when the available history is shorter.
    pub fn pad_past(history: &[u8], past_len: usize) -> Vec<u8> {
        let mut padded = vec![crate::audio::SILENCE_LEVEL; past_len.saturating_sub(history.len())];
        let take = history.len().min(past_len);
        padded.extend_from_slice(&history[history.len() - take..]);
        padded
    }
}
