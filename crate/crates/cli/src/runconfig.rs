//! Plain-text key=value run configuration with flag overrides.
//!
//! The file holds one `key=value` per line (# comments allowed). Flags win
//! over file values. Whatever a command actually resolves is echoed, sorted,
//! into `<out>/config.resolved` so a run directory is self-describing.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Keys a config file may define. Anything else is a usage error before any
/// compute runs.
const KNOWN_KEYS: &[&str] = &[
    "augment_copies",
    "batch_size",
    "cache",
    "cond_filters",
    "cond_latent",
    "cond_layers",
    "cond_past",
    "include_seed",
    "kind",
    "manifest",
    "max_epochs",
    "max_steps",
    "max_windows",
    "model",
    "n_samples",
    "out",
    "scheme",
    "seed",
    "seed_source",
    "stride",
    "t_ctx",
    "temperature",
    "with_past",
    "wn_dilation_base",
    "wn_filters",
    "wn_gated",
    "wn_layers",
    "wn_stacks",
    "xf_dropout",
    "xf_embed",
    "xf_ff",
    "xf_heads",
    "xf_layers",
];

#[derive(Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    bail!("config line {} is not key=value: '{line}'", lineno + 1);
                };
                let k = k.trim();
                if !KNOWN_KEYS.contains(&k) {
                    bail!("unknown config key '{k}' (line {})", lineno + 1);
                }
                values.insert(k.to_string(), v.trim().to_string());
            }
        }
        Ok(RunConfig {
            values,
            resolved: BTreeMap::new(),
        })
    }

    /// Flag value, else config-file value, else default; records the
    /// resolution.
    pub fn resolve<T: FromStr + ToString>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.values.get(key) {
                Some(raw) => raw
                    .parse()
                    .map_err(|e| anyhow::anyhow!("config {key}={raw}: {e}"))?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like [`resolve`], but with no default: `None` when absent everywhere.
    pub fn resolve_opt<T: FromStr + ToString>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.values.get(key) {
                Some(raw) => Some(
                    raw.parse()
                        .map_err(|e| anyhow::anyhow!("config {key}={raw}: {e}"))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn resolve_path(&mut self, key: &str, flag: Option<PathBuf>) -> Option<PathBuf> {
        let value = flag.or_else(|| self.values.get(key).map(PathBuf::from));
        if let Some(v) = &value {
            self.resolved
                .insert(key.to_string(), v.display().to_string());
        }
        value
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// Raw config-file values (for `model=custom` architecture keys).
    pub fn raw(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Writes the sorted resolved configuration into the run directory.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let mut text = String::new();
        for (k, v) in &self.resolved {
            text.push_str(k);
            text.push('=');
            text.push_str(v);
            text.push('\n');
        }
        std::fs::write(out_dir.join("config.resolved"), text)?;
        Ok(())
    }
}
