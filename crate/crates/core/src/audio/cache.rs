//! On-disk window cache.
//!
//! `windows.bin` holds flat binary records — a little-endian u32 length
//! header followed by that many raw u8 levels — and `meta.txt` is a sorted
//! key=value sidecar describing how the windows were produced. Loading
//! verifies the declared record length, so a scheme or shape mismatch, or a
//! truncated shard file, is an explicit error.

use std::fs;
use std::path::{Path, PathBuf};

use crate::audio::quantize::QuantScheme;
use crate::audio::windows::WindowSet;
use crate::error::{Error, Result};

pub const SHARDS_FILE: &str = "windows.bin";
pub const META_FILE: &str = "meta.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct CacheMeta {
    pub scheme: QuantScheme,
    pub t_ctx: usize,
    pub stride: usize,
    /// Samples of stored history per window; 0 means no past channel.
    pub past_len: usize,
    /// Extra augmented variants that were cut per track, on top of the
    /// original.
    pub augment_copies: usize,
    pub tracks: usize,
    pub windows: usize,
    /// Total source samples at 16 kHz, for duration reporting.
    pub total_samples: u64,
    /// Source paths, in manifest order, for idempotence checks.
    pub sources: Vec<String>,
}

impl CacheMeta {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("augment_copies={}\n", self.augment_copies));
        s.push_str(&format!("scheme={}\n", self.scheme));
        s.push_str(&format!("stride={}\n", self.stride));
        s.push_str(&format!("t_ctx={}\n", self.t_ctx));
        s.push_str(&format!("total_samples={}\n", self.total_samples));
        s.push_str(&format!("tracks={}\n", self.tracks));
        s.push_str(&format!("windows={}\n", self.windows));
        s.push_str(&format!("past_len={}\n", self.past_len));
        for src in &self.sources {
            s.push_str(&format!("source={src}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<CacheMeta> {
        let mut scheme = None;
        let mut t_ctx = None;
        let mut stride = None;
        let mut past_len = None;
        let mut augment_copies = None;
        let mut tracks = None;
        let mut windows = None;
        let mut total_samples = None;
        let mut sources = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("bad meta line '{line}'")))?;
            match key {
                "scheme" => scheme = Some(value.parse()?),
                "t_ctx" => t_ctx = Some(parse_num(key, value)?),
                "stride" => stride = Some(parse_num(key, value)?),
                "past_len" => past_len = Some(parse_num(key, value)?),
                "augment_copies" => augment_copies = Some(parse_num(key, value)?),
                "tracks" => tracks = Some(parse_num(key, value)?),
                "windows" => windows = Some(parse_num(key, value)?),
                "total_samples" => total_samples = Some(parse_num(key, value)? as u64),
                "source" => sources.push(value.to_string()),
                other => {
                    return Err(Error::Checkpoint(format!("unknown meta key '{other}'")));
                }
            }
        }
        Ok(CacheMeta {
            scheme: scheme.ok_or_else(|| missing("scheme"))?,
            t_ctx: t_ctx.ok_or_else(|| missing("t_ctx"))?,
            stride: stride.ok_or_else(|| missing("stride"))?,
            past_len: past_len.ok_or_else(|| missing("past_len"))?,
            augment_copies: augment_copies.ok_or_else(|| missing("augment_copies"))?,
            tracks: tracks.ok_or_else(|| missing("tracks"))?,
            windows: windows.ok_or_else(|| missing("windows"))?,
            total_samples: total_samples.ok_or_else(|| missing("total_samples"))? ,
            sources,
        })
    }
}

fn parse_num(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Checkpoint(format!("bad numeric meta value {key}={value}")))
}

fn missing(key: &str) -> Error {
    Error::Checkpoint(format!("meta missing key '{key}'"))
}

pub struct WindowCache;

impl WindowCache {
    pub fn shards_path(dir: &Path) -> PathBuf {
        dir.join(SHARDS_FILE)
    }

    pub fn meta_path(dir: &Path) -> PathBuf {
        dir.join(META_FILE)
    }

    pub fn exists(dir: &Path) -> bool {
        Self::shards_path(dir).exists() && Self::meta_path(dir).exists()
    }

    pub fn write(dir: &Path, set: &WindowSet, meta: &CacheMeta) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut bytes = Vec::new();
        for rec in set.records() {
            bytes.extend_from_slice(&(rec.len() as u32).to_le_bytes());
            bytes.extend_from_slice(rec);
        }
        fs::write(Self::shards_path(dir), bytes)?;
        fs::write(Self::meta_path(dir), meta.to_text())?;
        Ok(())
    }

    pub fn load_meta(dir: &Path) -> Result<CacheMeta> {
        let text = fs::read_to_string(Self::meta_path(dir))?;
        CacheMeta::parse(&text)
    }

    pub fn load(dir: &Path) -> Result<(WindowSet, CacheMeta)> {
        let meta = Self::load_meta(dir)?;
        let bytes = fs::read(Self::shards_path(dir))?;
        let mut set = WindowSet::new(meta.t_ctx, meta.past_len, meta.scheme);
        let expected = set.record_len();
        let mut pos = 0usize;
        while pos < bytes.len() {
            if pos + 4 > bytes.len() {
                return Err(Error::Checkpoint("truncated shard header".into()));
            }
            let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
            pos += 4;
            if len != expected {
                return Err(Error::Checkpoint(format!(
                    "shard record of {len} levels does not match meta ({expected})"
                )));
            }
            if pos + len > bytes.len() {
                return Err(Error::Checkpoint("truncated shard record".into()));
            }
            set.push_record(bytes[pos..pos + len].to_vec())?;
            pos += len;
        }
        if set.len() != meta.windows {
            return Err(Error::Checkpoint(format!(
                "shard holds {} windows, meta declares {}",
                set.len(),
                meta.windows
            )));
        }
        Ok((set, meta))
    }
}
