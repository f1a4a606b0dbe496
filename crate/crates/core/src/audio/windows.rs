//! Windowing quantized sequences into (context, shifted-target) pairs.

use crate::audio::quantize::QuantScheme;
use crate::error::{Error, Result};

/// Default context length: 100 ms at 16 kHz.
pub const T_CTX: usize = 1600;

/// Standard conditioning past length: 250 ms at 16 kHz.
pub const PAST_LEN: usize = 4000;

#[derive(Clone, Copy, Debug)]
pub struct WindowConfig {
    pub t_ctx: usize,
    /// Offset between consecutive windows; the default overlaps by 50%.
    pub stride: usize,
    /// Samples of history to capture before the context for the
    /// conditioned model; 0 disables the past channel.
    pub past_len: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            t_ctx: T_CTX,
            stride: T_CTX / 2,
            past_len: 0,
        }
    }
}

impl WindowConfig {
    /// Length of one stored window record: optional past, then the
    /// context plus one target sample.
    pub fn record_len(&self) -> usize {
        self.past_len + self.t_ctx + 1
    }
}

/// One training window: `target[t] == input[t + 1]` in the source signal.
#[derive(Clone, Copy, Debug)]
pub struct TrainingWindow<'a> {
    pub input: &'a [u8],
    pub target: &'a [u8],
    pub past: Option<&'a [u8]>,
}

/// Cuts windows at offsets `s = k·stride` with the whole record in range.
/// A sequence too short for a single window yields an empty iterator.
pub fn make_windows<'a>(
    q: &'a [u8],
    cfg: &WindowConfig,
) -> impl Iterator<Item = TrainingWindow<'a>> + 'a {
    let cfg = *cfg;
    let stride = cfg.stride.max(1);
    let first_k = cfg.past_len.div_ceil(stride);
    (first_k..)
        .map(move |k| k * stride)
        .take_while(move |s| s + cfg.t_ctx < q.len())
        .map(move |s| TrainingWindow {
            input: &q[s..s + cfg.t_ctx],
            target: &q[s + 1..s + cfg.t_ctx + 1],
            past: (cfg.past_len > 0).then(|| &q[s - cfg.past_len..s]),
        })
}

/// Number of windows `make_windows` yields for a sequence of `len` levels.
pub fn window_count(len: usize, cfg: &WindowConfig) -> usize {
    let stride = cfg.stride.max(1);
    let first_k = cfg.past_len.div_ceil(stride);
    let need = cfg.t_ctx + 1;
    let mut count = 0;
    let mut k = first_k;
    while k * stride + need <= len {
        count += 1;
        k += 1;
    }
    count
}

/// An owned collection of window records, the unit the trainer and
/// evaluator consume. Each record is `[past?][context + 1 target]`.
#[derive(Clone, Debug)]
pub struct WindowSet {
    records: Vec<Vec<u8>>,
    pub t_ctx: usize,
    pub past_len: usize,
    pub scheme: QuantScheme,
}

impl WindowSet {
    pub fn new(t_ctx: usize, past_len: usize, scheme: QuantScheme) -> WindowSet {
        WindowSet {
            records: Vec::new(),
            t_ctx,
            past_len,
            scheme,
        }
    }

    pub fn record_len(&self) -> usize {
        self.past_len + self.t_ctx + 1
    }

    pub fn has_past(&self) -> bool {
        self.past_len > 0
    }

    pub fn push_record(&mut self, record: Vec<u8>) -> Result<()> {
        if record.len() != self.record_len() {
            return Err(Error::InvalidInput(format!(
                "window record of {} levels, expected {}",
                record.len(),
                self.record_len()
            )));
        }
        self.records.push(record);
        Ok(())
    }

    /// Cuts and stores every window of a quantized sequence.
    pub fn extend_from_sequence(&mut self, q: &[u8], stride: usize) {
        let cfg = WindowConfig {
            t_ctx: self.t_ctx,
            stride,
            past_len: self.past_len,
        };
        for w in make_windows(q, &cfg) {
            let mut rec = Vec::with_capacity(self.record_len());
            if let Some(p) = w.past {
                rec.extend_from_slice(p);
            }
            rec.extend_from_slice(w.input);
            rec.push(*w.target.last().expect("t_ctx >= 1"));
            self.records.push(rec);
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn window(&self, i: usize) -> TrainingWindow<'_> {
        let rec = &self.records[i];
        let past = self.past_len;
        TrainingWindow {
            input: &rec[past..past + self.t_ctx],
            target: &rec[past + 1..past + self.t_ctx + 1],
            past: (past > 0).then(|| &rec[..past]),
        }
    }

    pub fn records(&self) -> &[Vec<u8>] {
        &self.records
    }

    /// A new set containing the selected records.
    pub fn subset(&self, indices: &[usize]) -> WindowSet {
        WindowSet {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            t_ctx: self.t_ctx,
            past_len: self.past_len,
            scheme: self.scheme,
        }
    }
}
