//! Convolutional context encoder and late logits fusion.
//!
//! The encoder consumes the 250 ms (4000 samples) immediately preceding the
//! context window: embedded levels pass through six width-3 stride-2 ReLU
//! convolutions (temporal length 4000 -> 2000 -> 1000 -> 500 -> 250 -> 125
//! -> 63), are averaged over time, and a dense layer maps them to a 128-dim
//! latent. Fusion is late: for every position, the model's 256 logits are
//! concatenated with the shared latent and passed through one dense layer
//! back to 256 logits, so every prediction is conditioned on the latent.

use crate::error::{Error, Result};
use crate::model::fan_in_uniform;
use crate::numerics::array::Array;
use crate::numerics::params::{var, ParamVars, ParameterStore};
use crate::numerics::tape::{concat_cols, Var};

pub const VOCAB: usize = 256;

/// Convolution width; stride is fixed at 2 per layer.
pub const CONV_WIDTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionerConfig {
    pub conv_layers: usize,
    pub filters: usize,
    pub latent_dim: usize,
    pub past_len: usize,
}

impl Default for ConditionerConfig {
    fn default() -> Self {
        ConditionerConfig {
            conv_layers: 6,
            filters: 128,
            latent_dim: 128,
            past_len: 4000,
        }
    }
}

impl ConditionerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_layers == 0 || self.filters == 0 || self.latent_dim == 0 {
            return Err(Error::Config(
                "conditioner needs positive layer, filter and latent sizes".into(),
            ));
        }
        if self.past_len == 0 {
            return Err(Error::Config("past length must be positive".into()));
        }
        // Every conv layer must keep at least one frame.
        if self.temporal_trace().last() == Some(&0) {
            return Err(Error::Config(format!(
                "past length {} collapses to zero frames after {} stride-2 layers",
                self.past_len, self.conv_layers
            )));
        }
        Ok(())
    }

    /// Temporal length after each stride-2 layer (ceil division chain).
    pub fn temporal_trace(&self) -> Vec<usize> {
        let mut trace = Vec::with_capacity(self.conv_layers);
        let mut t = self.past_len;
        for _ in 0..self.conv_layers {
            t = t.div_ceil(2);
            trace.push(t);
        }
        trace
    }
}

fn conv_name(layer: usize) -> String {
    format!("cond/conv{}", layer + 1)
}

pub fn block_names(cfg: &ConditionerConfig) -> Vec<String> {
    let mut names = vec!["cond/embed".to_string()];
    for j in 0..cfg.conv_layers {
        names.push(conv_name(j));
        names.push(format!("{}_b", conv_name(j)));
    }
    names.extend(
        ["cond/dense_w", "cond/dense_b", "cond/fuse_w", "cond/fuse_b"].map(String::from),
    );
    names
}

/// Fusion weights at the identity point: logits pass through untouched and
/// the latent contributes nothing. Training starts here so a conditioned
/// model initially matches its unconditioned twin exactly.
pub fn identity_fuse(latent_dim: usize) -> Array {
    let rows = VOCAB + latent_dim;
    let mut w = Array::zeros(&[rows, VOCAB]);
    for i in 0..VOCAB {
        w.set2(i, i, 1.0);
    }
    w
}

pub fn init_params(cfg: &ConditionerConfig, seed: u64) -> ParameterStore {
    let f = cfg.filters;
    let mut p = ParameterStore::new();
    p.insert(
        "cond/embed",
        fan_in_uniform(&[VOCAB, f], VOCAB, seed, "cond/embed"),
    );
    for j in 0..cfg.conv_layers {
        let name = conv_name(j);
        p.insert(
            name.clone(),
            fan_in_uniform(&[CONV_WIDTH, f, f], CONV_WIDTH * f, seed, &name),
        );
        p.insert(format!("{name}_b"), Array::zeros(&[f]));
    }
    p.insert(
        "cond/dense_w",
        fan_in_uniform(&[f, cfg.latent_dim], f, seed, "cond/dense_w"),
    );
    p.insert("cond/dense_b", Array::zeros(&[cfg.latent_dim]));
    p.insert("cond/fuse_w", identity_fuse(cfg.latent_dim));
    p.insert("cond/fuse_b", Array::zeros(&[VOCAB]));
    p
}

/// Width-3 stride-2 convolution with zero padding, centered on even input
/// positions: out[t] = Σ_k x[2t + k - 1] · W_k, length ceil(T/2).
fn conv3_stride2<'t>(x: &Var<'t>, kernel: &Var<'t>, bias: &Var<'t>) -> Result<Var<'t>> {
    let w_m1 = kernel.index_axis0(0)?;
    let w_0 = kernel.index_axis0(1)?;
    let w_p1 = kernel.index_axis0(2)?;
    let full = x
        .shift_rows(1)?
        .matmul(&w_m1)?
        .add(&x.matmul(&w_0)?)?
        .add(&x.shift_rows_up(1)?.matmul(&w_p1)?)?;
    full.downsample_rows(2)?.add_row(bias)
}

/// Encodes a past window of exactly `cfg.past_len` levels into a latent
/// vector of shape [latent_dim].
pub fn encode_context<'t>(
    past: &[u8],
    cfg: &ConditionerConfig,
    vars: &ParamVars<'t>,
) -> Result<Var<'t>> {
    cfg.validate()?;
    if past.len() != cfg.past_len {
        return Err(Error::ShapeMismatch {
            op: "encode_context",
            lhs: vec![past.len()],
            rhs: vec![cfg.past_len],
        });
    }
    let mut h = var(vars, "cond/embed")?.embed_rows(past)?;
    for j in 0..cfg.conv_layers {
        let name = conv_name(j);
        h = conv3_stride2(&h, var(vars, &name)?, var(vars, &format!("{name}_b"))?)?.relu();
    }
    // Global average over the remaining frames, then the dense latent map.
    let pooled = h.mean_axis0()?.broadcast_rows(1)?;
    let latent = pooled
        .matmul(var(vars, "cond/dense_w")?)?
        .add_row(var(vars, "cond/dense_b")?)?;
    latent.mean_axis0() // [1, latent] -> [latent]
}

/// Late fusion: fused[t] = W · concat(logits[t], latent) + b, the same
/// latent broadcast to every position.
pub fn fuse<'t>(
    logits: &Var<'t>,
    latent: &Var<'t>,
    fuse_w: &Var<'t>,
    fuse_b: &Var<'t>,
) -> Result<Var<'t>> {
    let (t, c) = logits.value().dims2("fuse")?;
    if c != VOCAB {
        return Err(Error::ShapeMismatch {
            op: "fuse",
            lhs: logits.value().shape().to_vec(),
            rhs: vec![t, VOCAB],
        });
    }
    let lat_rows = latent.broadcast_rows(t)?;
    concat_cols(&[logits, &lat_rows])?
        .matmul(fuse_w)?
        .add_row(fuse_b)
}

/// Parameter count implied by a config.
pub fn param_count(cfg: &ConditionerConfig) -> usize {
    let f = cfg.filters;
    VOCAB * f
        + cfg.conv_layers * (CONV_WIDTH * f * f + f)
        + f * cfg.latent_dim
        + cfg.latent_dim
        + (VOCAB + cfg.latent_dim) * VOCAB
        + VOCAB
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{grad_check, GradCheckConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mini_cfg() -> ConditionerConfig {
        ConditionerConfig {
            conv_layers: 2,
            filters: 8,
            latent_dim: 8,
            past_len: 32,
        }
    }

    fn eval_latent(past: &[u8], cfg: &ConditionerConfig, params: &ParameterStore) -> Array {
        let vars = params.as_constants();
        encode_context(past, cfg, &vars).unwrap().to_array()
    }

    #[test]
    fn default_temporal_trace_matches_ceil_chain() {
        let cfg = ConditionerConfig::default();
        assert_eq!(cfg.temporal_trace(), vec![2000, 1000, 500, 250, 125, 63]);
    }

    #[test]
    fn silence_past_encodes_deterministically() {
        let cfg = mini_cfg();
        let params = init_params(&cfg, 1);
        let past = vec![crate::audio::SILENCE_LEVEL; cfg.past_len];
        let a = eval_latent(&past, &cfg, &params);
        let b = eval_latent(&past, &cfg, &params);
        assert_eq!(a, b);
        assert_eq!(a.shape(), &[cfg.latent_dim]);
        assert!(a.all_finite());
    }

    #[test]
    fn wrong_past_length_is_a_shape_error() {
        let cfg = mini_cfg();
        let params = init_params(&cfg, 1);
        let vars = params.as_constants();
        assert!(encode_context(&[0u8; 31], &cfg, &vars).is_err());
    }

    #[test]
    fn first_sample_reaches_the_latent() {
        let cfg = mini_cfg();
        let params = init_params(&cfg, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let past: Vec<u8> = (0..cfg.past_len).map(|_| rng.random::<u8>()).collect();
        let base = eval_latent(&past, &cfg, &params);
        let mut other = past.clone();
        other[0] = other[0].wrapping_add(100);
        let changed = eval_latent(&other, &cfg, &params);
        assert_ne!(base, changed);
    }

    #[test]
    fn identity_fusion_passes_logits_through() {
        let cfg = mini_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = 5;
        let logits = Array::from_parts(
            vec![t, VOCAB],
            (0..t * VOCAB).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect(),
        );
        let latent = Array::from_parts(
            vec![cfg.latent_dim],
            (0..cfg.latent_dim).map(|_| rng.random::<f64>()).collect(),
        );
        let fused = fuse(
            &Var::constant(logits.clone()),
            &Var::constant(latent),
            &Var::constant(identity_fuse(cfg.latent_dim)),
            &Var::constant(Array::zeros(&[VOCAB])),
        )
        .unwrap();
        assert_eq!(fused.value(), &logits);
    }

    #[test]
    fn different_latents_fuse_differently() {
        let cfg = mini_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 3;
        let logits = Var::constant(Array::from_parts(
            vec![t, VOCAB],
            (0..t * VOCAB).map(|_| rng.random::<f64>()).collect(),
        ));
        let w = Var::constant(Array::from_parts(
            vec![VOCAB + cfg.latent_dim, VOCAB],
            (0..(VOCAB + cfg.latent_dim) * VOCAB)
                .map(|_| rng.random::<f64>() * 0.1)
                .collect(),
        ));
        let b = Var::constant(Array::zeros(&[VOCAB]));
        let lat1 = Var::constant(Array::filled(&[cfg.latent_dim], 0.3));
        let lat2 = Var::constant(Array::filled(&[cfg.latent_dim], -0.6));
        let f1 = fuse(&logits, &lat1, &w, &b).unwrap();
        let f2 = fuse(&logits, &lat2, &w, &b).unwrap();
        assert_ne!(f1.value(), f2.value());
    }

    #[test]
    fn conv_trace_shrinks_by_ceil_halves() {
        let cfg = mini_cfg();
        assert_eq!(cfg.temporal_trace(), vec![16, 8]);
        let odd = ConditionerConfig {
            past_len: 37,
            conv_layers: 3,
            ..mini_cfg()
        };
        assert_eq!(odd.temporal_trace(), vec![19, 10, 5]);
    }

    #[test]
    fn miniature_gradient_check_passes() {
        // Two conv layers, fused into constant logits, cross-entropy loss.
        let cfg = mini_cfg();
        let params = init_params(&cfg, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let past: Vec<u8> = (0..cfg.past_len).map(|_| rng.random::<u8>()).collect();
        let t = 4;
        let logits = Array::from_parts(
            vec![t, VOCAB],
            (0..t * VOCAB).map(|_| rng.random::<f64>() - 0.5).collect(),
        );
        let targets: Vec<u8> = (0..t).map(|_| rng.random::<u8>()).collect();
        let report = grad_check(
            |vars| {
                let latent = encode_context(&past, &cfg, vars)?;
                let fused = fuse(
                    &Var::constant(logits.clone()),
                    &latent,
                    var(vars, "cond/fuse_w")?,
                    var(vars, "cond/fuse_b")?,
                )?;
                fused.cross_entropy(&targets)
            },
            &params,
            &GradCheckConfig {
                samples_per_block: 40,
                ..GradCheckConfig::default()
            },
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{}", report.max_rel_error);
    }

    #[test]
    fn loss_gradient_reaches_conditioner_parameters() {
        use crate::numerics::tape::Tape;
        let cfg = mini_cfg();
        // Start fusion away from the identity point so the latent path
        // carries gradient.
        let mut params = init_params(&cfg, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut w = identity_fuse(cfg.latent_dim);
        for i in VOCAB..VOCAB + cfg.latent_dim {
            for j in 0..VOCAB {
                w.set2(i, j, rng.random::<f64>() * 0.1);
            }
        }
        params.insert("cond/fuse_w", w);

        let past: Vec<u8> = (0..cfg.past_len).map(|_| rng.random::<u8>()).collect();
        let t = 4;
        let logits = Array::from_parts(
            vec![t, VOCAB],
            (0..t * VOCAB).map(|_| rng.random::<f64>()).collect(),
        );
        let targets: Vec<u8> = (0..t).map(|_| rng.random::<u8>()).collect();

        let tape = Tape::new();
        let vars = params.trace(&tape);
        let latent = encode_context(&past, &cfg, &vars).unwrap();
        let fused = fuse(
            &Var::constant(logits),
            &latent,
            var(&vars, "cond/fuse_w").unwrap(),
            var(&vars, "cond/fuse_b").unwrap(),
        )
        .unwrap();
        let loss = fused.cross_entropy(&targets).unwrap();
        let grads = tape.backward(&loss).unwrap();
        let pg = params.collect_grads(&vars, &grads);
        assert!(pg["cond/conv1"].data().iter().any(|&v| v != 0.0));
        assert!(pg["cond/dense_w"].data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn parameter_count_matches_shape_sum() {
        for cfg in [mini_cfg(), ConditionerConfig::default()] {
            let params = init_params(&cfg, 1);
            assert_eq!(params.scalar_count(), param_count(&cfg));
            assert_eq!(params.len(), block_names(&cfg).len());
        }
    }
}
