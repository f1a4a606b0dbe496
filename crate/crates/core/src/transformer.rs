//! Causal generative transformer over quantized waveforms.
//!
//! Levels are embedded, sinusoidal positional encodings are added, and the
//! sequence passes through L post-norm blocks: masked multi-head scaled
//! dot-product attention, then a position-wise ReLU feed-forward, each
//! followed by LayerNorm(x + F(x)). A dense head produces 256-way logits per
//! position. The causal mask is additive -1e30 on future positions, applied
//! before the softmax, so attention rows stay exactly normalized and logits
//! at position t are bitwise invariant to any change at positions > t.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::fan_in_uniform;
use crate::numerics::array::Array;
use crate::numerics::params::{var, ParamVars, ParameterStore};
use crate::numerics::tape::{concat_cols, Var};

pub const VOCAB: usize = 256;

/// Additive mask value for future positions; large enough to underflow to
/// an exact zero after softmax, small enough never to overflow.
pub const MASK_NEG: f64 = -1e30;

/// LayerNorm stabilizer. Small enough that normalized rows have unit
/// variance to well below 1e-9, while zero-variance rows still map to zero.
pub const LN_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformerConfig {
    pub layers: usize,
    pub heads: usize,
    pub embed: usize,
    pub ff_width: usize,
    pub dropout: f64,
    pub t_ctx: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            layers: 3,
            heads: 4,
            embed: 128,
            ff_width: 256,
            dropout: 0.1,
            t_ctx: 1600,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed < 2 || !self.embed.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "embedding width must be even and >= 2, got {}",
                self.embed
            )));
        }
        if self.heads == 0 || !self.embed.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "embedding width {} not divisible by {} heads",
                self.embed, self.heads
            )));
        }
        if self.ff_width == 0 {
            return Err(Error::Config("feed-forward width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.t_ctx == 0 {
            return Err(Error::Config("context length must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed / self.heads
    }
}

/// Sinusoidal positional encodings:
/// `PE[pos, 2i] = sin(pos / 10000^(2i/E))`, `PE[pos, 2i+1] = cos(...)`.
pub fn positional_encoding(t: usize, e: usize) -> Result<Array> {
    if !e.is_multiple_of(2) || e == 0 {
        return Err(Error::Config(format!(
            "positional encoding needs an even width, got {e}"
        )));
    }
    let mut data = vec![0.0; t * e];
    for pos in 0..t {
        for i in 0..e / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / e as f64);
            data[pos * e + 2 * i] = angle.sin();
            data[pos * e + 2 * i + 1] = angle.cos();
        }
    }
    Ok(Array::from_parts(vec![t, e], data))
}

/// Additive causal mask: 0 where j <= i, MASK_NEG above the diagonal.
pub fn causal_mask(t: usize) -> Array {
    let mut data = vec![0.0; t * t];
    for i in 0..t {
        for j in i + 1..t {
            data[i * t + j] = MASK_NEG;
        }
    }
    Array::from_parts(vec![t, t], data)
}

fn layer_name(layer: usize, field: &str) -> String {
    format!("xf/layer{layer}/{field}")
}

pub fn block_names(cfg: &TransformerConfig) -> Vec<String> {
    let mut names = vec!["xf/embed".to_string()];
    for j in 0..cfg.layers {
        for field in [
            "wq", "wk", "wv", "wo", "ln1_g", "ln1_b", "ff1_w", "ff1_b", "ff2_w", "ff2_b",
            "ln2_g", "ln2_b",
        ] {
            names.push(layer_name(j, field));
        }
    }
    names.push("xf/head_w".to_string());
    names.push("xf/head_b".to_string());
    names
}

/// Fan-in-scaled uniform initialization, deterministic per block name under
/// the seed.
pub fn init_params(cfg: &TransformerConfig, seed: u64) -> ParameterStore {
    let e = cfg.embed;
    let ff = cfg.ff_width;
    let mut p = ParameterStore::new();
    p.insert("xf/embed", fan_in_uniform(&[VOCAB, e], VOCAB, seed, "xf/embed"));
    for j in 0..cfg.layers {
        for w in ["wq", "wk", "wv", "wo"] {
            let name = layer_name(j, w);
            p.insert(name.clone(), fan_in_uniform(&[e, e], e, seed, &name));
        }
        p.insert(layer_name(j, "ln1_g"), Array::filled(&[e], 1.0));
        p.insert(layer_name(j, "ln1_b"), Array::zeros(&[e]));
        let ff1 = layer_name(j, "ff1_w");
        p.insert(ff1.clone(), fan_in_uniform(&[e, ff], e, seed, &ff1));
        p.insert(layer_name(j, "ff1_b"), Array::zeros(&[ff]));
        let ff2 = layer_name(j, "ff2_w");
        p.insert(ff2.clone(), fan_in_uniform(&[ff, e], ff, seed, &ff2));
        p.insert(layer_name(j, "ff2_b"), Array::zeros(&[e]));
        p.insert(layer_name(j, "ln2_g"), Array::filled(&[e], 1.0));
        p.insert(layer_name(j, "ln2_b"), Array::zeros(&[e]));
    }
    p.insert(
        "xf/head_w",
        fan_in_uniform(&[e, VOCAB], e, seed, "xf/head_w"),
    );
    p.insert("xf/head_b", Array::zeros(&[VOCAB]));
    p
}

/// Multi-head masked scaled dot-product attention.
///
/// Per head: softmax(Q_i K_iᵀ / sqrt(d_k) + mask) V_i, heads concatenated
/// and projected through W_o. The additive -1e30 mask is fused into the
/// causal softmax (bitwise-equal to materializing [`causal_mask`] and
/// adding it; see the equivalence test).
pub fn causal_attention<'t>(
    x: &Var<'t>,
    wq: &Var<'t>,
    wk: &Var<'t>,
    wv: &Var<'t>,
    wo: &Var<'t>,
    heads: usize,
) -> Result<Var<'t>> {
    let e = x.value().last_dim();
    if heads == 0 || !e.is_multiple_of(heads) {
        return Err(Error::Config(format!(
            "embedding width {e} not divisible by {heads} heads"
        )));
    }
    let dk = e / heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let q = x.matmul(wq)?;
    let k = x.matmul(wk)?;
    let v = x.matmul(wv)?;
    let mut head_outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (a, b) = (h * dk, (h + 1) * dk);
        let qh = q.slice_cols(a, b)?;
        let kh = k.slice_cols(a, b)?;
        let vh = v.slice_cols(a, b)?;
        let attn = qh.matmul_nt_scaled(&kh, scale)?.softmax_causal()?;
        head_outs.push(attn.matmul(&vh)?);
    }
    let refs: Vec<&Var<'t>> = head_outs.iter().collect();
    concat_cols(&refs)?.matmul(wo)
}

/// Position-wise feed forward max(0, xW1 + b1)W2 + b2, with inverted
/// dropout after the ReLU when a training rng is supplied.
pub fn feed_forward<'t>(
    x: &Var<'t>,
    w1: &Var<'t>,
    b1: &Var<'t>,
    w2: &Var<'t>,
    b2: &Var<'t>,
    dropout: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Var<'t>> {
    let mut h = x.matmul(w1)?.add_row(b1)?.relu();
    if let Some(rng) = rng {
        if dropout > 0.0 {
            let keep = 1.0 - dropout;
            let mask = Array::from_parts(
                h.shape().to_vec(),
                (0..h.value().len())
                    .map(|_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            );
            h = h.mul(&Var::constant(mask))?;
        }
    }
    h.matmul(w2)?.add_row(b2)
}

struct LayerVars<'a, 't> {
    wq: &'a Var<'t>,
    wk: &'a Var<'t>,
    wv: &'a Var<'t>,
    wo: &'a Var<'t>,
    ln1_g: &'a Var<'t>,
    ln1_b: &'a Var<'t>,
    ff1_w: &'a Var<'t>,
    ff1_b: &'a Var<'t>,
    ff2_w: &'a Var<'t>,
    ff2_b: &'a Var<'t>,
    ln2_g: &'a Var<'t>,
    ln2_b: &'a Var<'t>,
}

impl<'a, 't> LayerVars<'a, 't> {
    fn locate(vars: &'a ParamVars<'t>, layer: usize) -> Result<Self> {
        let g = |f: &str| var(vars, &layer_name(layer, f));
        Ok(LayerVars {
            wq: g("wq")?,
            wk: g("wk")?,
            wv: g("wv")?,
            wo: g("wo")?,
            ln1_g: g("ln1_g")?,
            ln1_b: g("ln1_b")?,
            ff1_w: g("ff1_w")?,
            ff1_b: g("ff1_b")?,
            ff2_w: g("ff2_w")?,
            ff2_b: g("ff2_b")?,
            ln2_g: g("ln2_g")?,
            ln2_b: g("ln2_b")?,
        })
    }
}

/// One post-norm block: x -> LayerNorm(x + Attn(x)) -> LayerNorm(· + FF(·)).
pub fn transformer_block<'t>(
    x: &Var<'t>,
    vars: &ParamVars<'t>,
    layer: usize,
    heads: usize,
    dropout: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Var<'t>> {
    let lv = LayerVars::locate(vars, layer)?;
    let attn = causal_attention(x, lv.wq, lv.wk, lv.wv, lv.wo, heads)?;
    let x = x.add(&attn)?.layer_norm(lv.ln1_g, lv.ln1_b, LN_EPS)?;
    let ff = feed_forward(&x, lv.ff1_w, lv.ff1_b, lv.ff2_w, lv.ff2_b, dropout, rng)?;
    x.add(&ff)?.layer_norm(lv.ln2_g, lv.ln2_b, LN_EPS)
}

/// Full forward pass: embed, add positional encodings, L blocks, 256-way
/// head. Dropout is active only when `rng` is supplied (training mode).
pub fn forward<'t>(
    levels: &[u8],
    cfg: &TransformerConfig,
    vars: &ParamVars<'t>,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Var<'t>> {
    cfg.validate()?;
    if levels.is_empty() {
        return Err(Error::InvalidInput("empty input sequence".into()));
    }
    if levels.len() > cfg.t_ctx {
        return Err(Error::InvalidInput(format!(
            "context overflow: sequence of {} levels exceeds T_ctx {}",
            levels.len(),
            cfg.t_ctx
        )));
    }
    let t = levels.len();
    let x = var(vars, "xf/embed")?.embed_rows(levels)?;
    let pe = Var::constant(positional_encoding(t, cfg.embed)?);
    let mut x = x.add(&pe)?;
    for j in 0..cfg.layers {
        x = transformer_block(&x, vars, j, cfg.heads, cfg.dropout, rng.as_deref_mut())?;
    }
    x.matmul(var(vars, "xf/head_w")?)?
        .add_row(var(vars, "xf/head_b")?)
}

/// Total parameter count implied by a config.
pub fn param_count(cfg: &TransformerConfig) -> usize {
    let e = cfg.embed;
    let ff = cfg.ff_width;
    let per_layer = 4 * e * e + 4 * e + e * ff + ff + ff * e + e;
    VOCAB * e + cfg.layers * per_layer + e * VOCAB + VOCAB
}
