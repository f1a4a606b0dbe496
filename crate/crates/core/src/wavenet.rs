//! Baseline autoregressive generator: stacked causal dilated convolutions.
//!
//! Each layer applies a width-2 causal convolution whose dilation doubles per
//! layer and restarts at every stack (1, 2, 4, ... 512, 1, 2, ...). The
//! default unit is gated — tanh(conv_f) · sigmoid(conv_g) — with a 1x1
//! residual projection back onto the layer input and a 1x1 skip projection
//! accumulated across layers; a plain ReLU unit is kept behind a config
//! switch. The head is skip-sum -> ReLU -> 1x1 -> ReLU -> 1x1 -> 256 logits.

use crate::error::{Error, Result};
use crate::model::fan_in_uniform;
use crate::numerics::array::Array;
use crate::numerics::params::{var, ParamVars, ParameterStore};
use crate::numerics::tape::{causal_dilated_conv1d, Var};

pub const VOCAB: usize = 256;

/// Filter width is fixed at 2 taps: the current sample and one `dilation`
/// samples back.
pub const FILTER_WIDTH: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WavenetConfig {
    pub stacks: usize,
    pub layers_per_stack: usize,
    pub filters: usize,
    pub dilation_base: usize,
    /// Gated tanh·sigmoid units when true; plain ReLU convolutions when
    /// false.
    pub gated: bool,
    pub t_ctx: usize,
}

impl WavenetConfig {
    /// The 10-layer, 128-filter configuration.
    pub fn vanilla() -> WavenetConfig {
        WavenetConfig {
            stacks: 1,
            layers_per_stack: 10,
            filters: 128,
            dilation_base: 2,
            gated: true,
            t_ctx: 1600,
        }
    }

    /// Three stacked dilation cycles, 30 layers in total.
    pub fn stacked() -> WavenetConfig {
        WavenetConfig {
            stacks: 3,
            ..WavenetConfig::vanilla()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stacks == 0 || self.layers_per_stack == 0 {
            return Err(Error::Config(
                "wavenet needs at least one stack and one layer".into(),
            ));
        }
        if self.filters == 0 {
            return Err(Error::Config("filter count must be positive".into()));
        }
        if self.dilation_base == 0 {
            return Err(Error::Config("dilation base must be >= 1".into()));
        }
        if self.t_ctx == 0 {
            return Err(Error::Config("context length must be positive".into()));
        }
        Ok(())
    }

    /// Dilation of layer `l` within a stack: base^l.
    pub fn dilation(&self, layer_in_stack: usize) -> usize {
        self.dilation_base.pow(layer_in_stack as u32)
    }
}

/// Number of input samples (including the current one) that can influence
/// one output position: `1 + stacks · Σ_l d^l · (width − 1)`.
pub fn receptive_field(cfg: &WavenetConfig) -> usize {
    let per_stack: usize = (0..cfg.layers_per_stack)
        .map(|l| cfg.dilation(l) * (FILTER_WIDTH - 1))
        .sum();
    1 + cfg.stacks * per_stack
}

fn layer_name(stack: usize, layer: usize, field: &str) -> String {
    format!("wavenet/stack{stack}/layer{layer}/{field}")
}

pub fn block_names(cfg: &WavenetConfig) -> Vec<String> {
    let mut names = vec!["wavenet/embed".to_string()];
    for s in 0..cfg.stacks {
        for l in 0..cfg.layers_per_stack {
            names.push(layer_name(s, l, "filter"));
            if cfg.gated {
                names.push(layer_name(s, l, "gate"));
            }
            names.push(layer_name(s, l, "res"));
            names.push(layer_name(s, l, "skip"));
        }
    }
    names.extend(
        ["wavenet/head1", "wavenet/head1_b", "wavenet/head2", "wavenet/head2_b"]
            .map(String::from),
    );
    names
}

pub fn init_params(cfg: &WavenetConfig, seed: u64) -> ParameterStore {
    let f = cfg.filters;
    let mut p = ParameterStore::new();
    p.insert(
        "wavenet/embed",
        fan_in_uniform(&[VOCAB, f], VOCAB, seed, "wavenet/embed"),
    );
    let conv_fan_in = FILTER_WIDTH * f;
    for s in 0..cfg.stacks {
        for l in 0..cfg.layers_per_stack {
            let filter = layer_name(s, l, "filter");
            p.insert(
                filter.clone(),
                fan_in_uniform(&[FILTER_WIDTH, f, f], conv_fan_in, seed, &filter),
            );
            if cfg.gated {
                let gate = layer_name(s, l, "gate");
                p.insert(
                    gate.clone(),
                    fan_in_uniform(&[FILTER_WIDTH, f, f], conv_fan_in, seed, &gate),
                );
            }
            let res = layer_name(s, l, "res");
            p.insert(res.clone(), fan_in_uniform(&[f, f], f, seed, &res));
            let skip = layer_name(s, l, "skip");
            p.insert(skip.clone(), fan_in_uniform(&[f, f], f, seed, &skip));
        }
    }
    p.insert(
        "wavenet/head1",
        fan_in_uniform(&[f, f], f, seed, "wavenet/head1"),
    );
    p.insert("wavenet/head1_b", Array::zeros(&[f]));
    p.insert(
        "wavenet/head2",
        fan_in_uniform(&[f, VOCAB], f, seed, "wavenet/head2"),
    );
    p.insert("wavenet/head2_b", Array::zeros(&[VOCAB]));
    p
}

/// Forward pass over a level sequence: per-position 256-way logits.
/// `logits[t]` depends only on `levels[0..=t]`.
pub fn forward<'t>(
    levels: &[u8],
    cfg: &WavenetConfig,
    vars: &ParamVars<'t>,
) -> Result<Var<'t>> {
    cfg.validate()?;
    if levels.is_empty() {
        return Err(Error::InvalidInput("empty input sequence".into()));
    }
    let mut x = var(vars, "wavenet/embed")?.embed_rows(levels)?;
    let mut skip_sum: Option<Var<'t>> = None;
    for s in 0..cfg.stacks {
        for l in 0..cfg.layers_per_stack {
            let d = cfg.dilation(l);
            let filter = causal_dilated_conv1d(&x, var(vars, &layer_name(s, l, "filter"))?, d)?;
            let z = if cfg.gated {
                let gate =
                    causal_dilated_conv1d(&x, var(vars, &layer_name(s, l, "gate"))?, d)?;
                filter.tanh_act().mul(&gate.sigmoid_act())?
            } else {
                filter.relu()
            };
            let skip = z.matmul(var(vars, &layer_name(s, l, "skip"))?)?;
            skip_sum = Some(match skip_sum {
                Some(acc) => acc.add(&skip)?,
                None => skip,
            });
            x = x.add(&z.matmul(var(vars, &layer_name(s, l, "res"))?)?)?;
        }
    }
    let h = skip_sum
        .expect("at least one layer")
        .relu()
        .matmul(var(vars, "wavenet/head1")?)?
        .add_row(var(vars, "wavenet/head1_b")?)?
        .relu();
    h.matmul(var(vars, "wavenet/head2")?)?
        .add_row(var(vars, "wavenet/head2_b")?)
}

/// Total parameter count implied by a config.
pub fn param_count(cfg: &WavenetConfig) -> usize {
    let f = cfg.filters;
    let convs = if cfg.gated { 2 } else { 1 };
    let per_layer = convs * FILTER_WIDTH * f * f + 2 * f * f;
    VOCAB * f + cfg.stacks * cfg.layers_per_stack * per_layer + f * f + f + f * VOCAB + VOCAB
}
