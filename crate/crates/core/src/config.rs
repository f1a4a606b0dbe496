//! Named model presets and run configuration plumbing.

use std::fmt;
use std::str::FromStr;

use crate::conditioner::ConditionerConfig;
use crate::error::Error;
use crate::model::ModelSpec;
use crate::transformer::TransformerConfig;
use crate::wavenet::WavenetConfig;

/// The six comparable model presets. Reports key rows off these names so
/// runs are comparable across implementations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetKind {
    WavenetVanilla,
    WavenetStacked,
    Xf3,
    Xf3Cond,
    Xf6,
    Xf8,
}

pub const ALL_PRESETS: [PresetKind; 6] = [
    PresetKind::WavenetVanilla,
    PresetKind::WavenetStacked,
    PresetKind::Xf3,
    PresetKind::Xf3Cond,
    PresetKind::Xf6,
    PresetKind::Xf8,
];

impl PresetKind {
    /// Expands the preset to its architecture, optionally overriding the
    /// context length (the 100 ms default is 1600 samples).
    pub fn spec(&self, t_ctx: Option<usize>) -> ModelSpec {
        let t_ctx = t_ctx.unwrap_or(1600);
        let xf = |layers, heads| TransformerConfig {
            layers,
            heads,
            embed: 128,
            ff_width: 256,
            dropout: 0.1,
            t_ctx,
        };
        match self {
            PresetKind::WavenetVanilla => ModelSpec::Wavenet(WavenetConfig {
                t_ctx,
                ..WavenetConfig::vanilla()
            }),
            PresetKind::WavenetStacked => ModelSpec::Wavenet(WavenetConfig {
                t_ctx,
                ..WavenetConfig::stacked()
            }),
            PresetKind::Xf3 => ModelSpec::Transformer(xf(3, 4)),
            PresetKind::Xf3Cond => ModelSpec::CondTransformer {
                xf: xf(3, 4),
                cond: ConditionerConfig::default(),
            },
            PresetKind::Xf6 => ModelSpec::Transformer(xf(6, 8)),
            PresetKind::Xf8 => ModelSpec::Transformer(xf(8, 8)),
        }
    }

    /// Row label in the comparison-table format.
    pub fn table_row(&self) -> &'static str {
        match self {
            PresetKind::WavenetVanilla => "Vanilla Wavenet: d = 2, N = 10, F = 128",
            PresetKind::WavenetStacked => "Stacked Wavenet: d = 2, N = 30, F = 128",
            PresetKind::Xf3 => "3-Layer Transformer: H = 4, E = 128",
            PresetKind::Xf3Cond => "Conditioned 3-Layer Transformer: H = 4, E = 128",
            PresetKind::Xf6 => "Large 6-Layer Transformer: H = 8, E = 128",
            PresetKind::Xf8 => "Large 8-Layer Transformer: H = 8, E = 128",
        }
    }

    pub fn names() -> [&'static str; 6] {
        ["wavenet-vanilla", "wavenet-stacked", "xf-3", "xf-3-cond", "xf-6", "xf-8"]
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PresetKind::WavenetVanilla => "wavenet-vanilla",
            PresetKind::WavenetStacked => "wavenet-stacked",
            PresetKind::Xf3 => "xf-3",
            PresetKind::Xf3Cond => "xf-3-cond",
            PresetKind::Xf6 => "xf-6",
            PresetKind::Xf8 => "xf-8",
        };
        write!(f, "{s}")
    }
}

impl FromStr for PresetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "wavenet-vanilla" => Ok(PresetKind::WavenetVanilla),
            "wavenet-stacked" => Ok(PresetKind::WavenetStacked),
            "xf-3" => Ok(PresetKind::Xf3),
            "xf-3-cond" => Ok(PresetKind::Xf3Cond),
            "xf-6" => Ok(PresetKind::Xf6),
            "xf-8" => Ok(PresetKind::Xf8),
            other => Err(Error::Config(format!(
                "unknown model kind '{other}'; valid kinds: {}",
                PresetKind::names().join(" | ")
            ))),
        }
    }
}
