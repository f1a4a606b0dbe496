//! Bit-exact checkpoint persistence.
//!
//! Layout: an 8-byte magic string, a u32 format version, the model config as
//! a length-prefixed canonical key=value text block, then the named
//! parameter blocks in name order — each as name length + name + rank +
//! dims + little-endian f64 data. Loading rejects bad magic or version,
//! truncation, and any block set that differs from what the config implies,
//! and a load/save round trip reproduces forward outputs bitwise.

use std::fs;
use std::path::Path;

use crate::audio::QuantScheme;
use crate::conditioner::ConditionerConfig;
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::numerics::array::Array;
use crate::numerics::params::ParameterStore;
use crate::transformer::TransformerConfig;
use crate::wavenet::WavenetConfig;

const MAGIC: &[u8; 8] = b"WVGNCKPT";
const VERSION: u32 = 1;

/// Canonical key=value lines (sorted by key) describing a model's
/// architecture and quantization scheme.
pub fn spec_to_text(spec: &ModelSpec, scheme: QuantScheme) -> String {
    let mut kv: Vec<(String, String)> = vec![
        ("scheme".into(), scheme.to_string()),
        ("t_ctx".into(), spec.t_ctx().to_string()),
    ];
    match spec {
        ModelSpec::Wavenet(cfg) => {
            kv.push(("kind".into(), "wavenet".into()));
            kv.push(("wn_stacks".into(), cfg.stacks.to_string()));
            kv.push(("wn_layers".into(), cfg.layers_per_stack.to_string()));
            kv.push(("wn_filters".into(), cfg.filters.to_string()));
            kv.push(("wn_dilation_base".into(), cfg.dilation_base.to_string()));
            kv.push(("wn_gated".into(), cfg.gated.to_string()));
        }
        ModelSpec::Transformer(cfg) => {
            kv.push(("kind".into(), "transformer".into()));
            push_xf(&mut kv, cfg);
        }
        ModelSpec::CondTransformer { xf, cond } => {
            kv.push(("kind".into(), "cond-transformer".into()));
            push_xf(&mut kv, xf);
            kv.push(("cond_layers".into(), cond.conv_layers.to_string()));
            kv.push(("cond_filters".into(), cond.filters.to_string()));
            kv.push(("cond_latent".into(), cond.latent_dim.to_string()));
            kv.push(("cond_past".into(), cond.past_len.to_string()));
        }
    }
    kv.sort();
    let mut out = String::new();
    for (k, v) in kv {
        out.push_str(&k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    }
    out
}

fn push_xf(kv: &mut Vec<(String, String)>, cfg: &TransformerConfig) {
    kv.push(("xf_layers".into(), cfg.layers.to_string()));
    kv.push(("xf_heads".into(), cfg.heads.to_string()));
    kv.push(("xf_embed".into(), cfg.embed.to_string()));
    kv.push(("xf_ff".into(), cfg.ff_width.to_string()));
    kv.push(("xf_dropout".into(), format!("{}", cfg.dropout)));
}

pub fn spec_from_text(text: &str) -> Result<(ModelSpec, QuantScheme)> {
    let mut map = std::collections::BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad config line '{line}'")))?;
        map.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<&String> {
        map.get(k)
            .ok_or_else(|| Error::Checkpoint(format!("config missing key '{k}'")))
    };
    let num = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad numeric config value for '{k}'")))
    };
    let scheme: QuantScheme = get("scheme")?.parse()?;
    let t_ctx = num("t_ctx")?;
    let xf = |map: &std::collections::BTreeMap<String, String>| -> Result<TransformerConfig> {
        Ok(TransformerConfig {
            layers: num("xf_layers")?,
            heads: num("xf_heads")?,
            embed: num("xf_embed")?,
            ff_width: num("xf_ff")?,
            dropout: map
                .get("xf_dropout")
                .ok_or_else(|| Error::Checkpoint("config missing key 'xf_dropout'".into()))?
                .parse()
                .map_err(|_| Error::Checkpoint("bad xf_dropout value".into()))?,
            t_ctx,
        })
    };
    let spec = match get("kind")?.as_str() {
        "wavenet" => ModelSpec::Wavenet(WavenetConfig {
            stacks: num("wn_stacks")?,
            layers_per_stack: num("wn_layers")?,
            filters: num("wn_filters")?,
            dilation_base: num("wn_dilation_base")?,
            gated: get("wn_gated")? == "true",
            t_ctx,
        }),
        "transformer" => ModelSpec::Transformer(xf(&map)?),
        "cond-transformer" => ModelSpec::CondTransformer {
            xf: xf(&map)?,
            cond: ConditionerConfig {
                conv_layers: num("cond_layers")?,
                filters: num("cond_filters")?,
                latent_dim: num("cond_latent")?,
                past_len: num("cond_past")?,
            },
        },
        other => {
            return Err(Error::Checkpoint(format!("unknown model kind '{other}'")));
        }
    };
    Ok((spec, scheme))
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let config = spec_to_text(&model.spec, model.scheme);
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for (name, block) in model.params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(block.rank() as u32).to_le_bytes());
        for &d in block.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in block.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.as_ref().parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated checkpoint at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let bytes = fs::read(path.as_ref())?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic string".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {VERSION})"
        )));
    }
    let config_len = r.u32()? as usize;
    let config = std::str::from_utf8(r.take(config_len)?)
        .map_err(|_| Error::Checkpoint("config block is not UTF-8".into()))?;
    let (spec, scheme) = spec_from_text(config)?;
    spec.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

    let expected: std::collections::BTreeSet<String> = spec.block_names().into_iter().collect();
    let block_count = r.u32()? as usize;
    let mut params = ParameterStore::new();
    for _ in 0..block_count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("block name is not UTF-8".into()))?
            .to_string();
        if !expected.contains(&name) {
            return Err(Error::Checkpoint(format!("unknown block name '{name}'")));
        }
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.insert(name, Array::from_vec(&shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after last block".into()));
    }
    for name in &expected {
        if !params.contains(name) {
            return Err(Error::Checkpoint(format!("missing block '{name}'")));
        }
    }
    Ok(Model {
        spec,
        scheme,
        params,
    })
}
