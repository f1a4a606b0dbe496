//! Evaluation reports: machine-readable key-value blocks plus the
//! two-column comparison table.

use crate::audio::QuantScheme;

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub model_name: String,
    /// Fraction in [0, 1].
    pub top5_accuracy: f64,
    /// Mean negative log-likelihood, nats per sample.
    pub mean_nll: f64,
    /// Number of scored positions.
    pub sample_count: usize,
    pub scheme: QuantScheme,
    pub config_summary: String,
}

impl EvalReport {
    pub fn to_kv(&self) -> String {
        format!(
            "model={}\ntop5_accuracy={:.6}\nmean_nll={:.6}\nsample_count={}\nscheme={}\nconfig={}\n",
            self.model_name,
            self.top5_accuracy,
            self.mean_nll,
            self.sample_count,
            self.scheme,
            self.config_summary
        )
    }
}

/// The human-readable comparison table.
pub fn render_table(rows: &[EvalReport]) -> String {
    let name_width = rows
        .iter()
        .map(|r| r.model_name.len())
        .chain(["Neural Model Architecture".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    out.push_str(&format!(
        "| {:name_width$} | Accuracy |\n",
        "Neural Model Architecture"
    ));
    out.push_str(&format!("|{:-<w$}|----------|\n", "", w = name_width + 2));
    for r in rows {
        out.push_str(&format!(
            "| {:name_width$} | {:7.2}% |\n",
            r.model_name,
            r.top5_accuracy * 100.0
        ));
    }
    out
}

/// Key-value blocks for every model, then the table.
pub fn render_report(rows: &[EvalReport]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&r.to_kv());
        out.push('\n');
    }
    out.push_str(&render_table(rows));
    out
}
