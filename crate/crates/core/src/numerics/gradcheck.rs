//! Finite-difference gradient checking.
//!
//! The checker runs the same loss closure twice over: once on traced
//! parameters to collect tape gradients, then coordinate-by-coordinate with
//! central differences `(f(θ+ε) − f(θ−ε)) / 2ε`. Blocks larger than the
//! sample budget are probed on a seeded random subset of coordinates.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::params::{ParamVars, ParameterStore};
use crate::numerics::rng::subseed;
use crate::numerics::tape::{Tape, Var};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Coordinates probed per parameter block (whole block when smaller).
    pub samples_per_block: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            samples_per_block: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WorstCoordinate {
    pub block: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub worst: Option<WorstCoordinate>,
}

impl GradCheckReport {
    /// Diagnostic for the worst coordinate when the check exceeds `tol`.
    pub fn require(&self, tol: f64) -> Result<()> {
        if self.max_rel_error <= tol {
            return Ok(());
        }
        let detail = match &self.worst {
            Some(w) => format!(
                "worst coordinate {}[{}]: analytic {:.6e} vs numeric {:.6e}",
                w.block, w.index, w.analytic, w.numeric
            ),
            None => "no coordinates checked".to_string(),
        };
        Err(Error::InvalidInput(format!(
            "gradient check failed: max relative error {:.3e} > {tol:.3e}; {detail}",
            self.max_rel_error
        )))
    }
}

/// Compares tape gradients of `loss` against central finite differences over
/// the blocks of `params`. The loss closure must be deterministic (dropout
/// off) and is evaluated with constant parameters for the numeric side.
pub fn grad_check<F>(
    loss: F,
    params: &ParameterStore,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&ParamVars<'t>) -> Result<Var<'t>>,
{
    // Analytic side: one traced pass.
    let tape = Tape::new();
    let vars = params.trace(&tape);
    let root = loss(&vars)?;
    if root.value().len() != 1 {
        return Err(Error::InvalidInput(
            "grad_check loss must be scalar".into(),
        ));
    }
    let grads = tape.backward(&root)?;
    let analytic = params.collect_grads(&vars, &grads);

    let eval = |p: &ParameterStore| -> Result<f64> {
        let consts = p.as_constants();
        Ok(loss(&consts)?.value().data()[0])
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: 0,
        worst: None,
    };

    let mut scratch = params.clone();
    for (name, block) in params.iter() {
        let n = block.len();
        let coords: Vec<usize> = if n <= cfg.samples_per_block {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, name));
            sample(&mut rng, n, cfg.samples_per_block).into_vec()
        };
        for i in coords {
            let original = block.data()[i];
            scratch.get_mut(name)?.data_mut()[i] = original + cfg.eps;
            let plus = eval(&scratch)?;
            scratch.get_mut(name)?.data_mut()[i] = original - cfg.eps;
            let minus = eval(&scratch)?;
            scratch.get_mut(name)?.data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * cfg.eps);
            let a = analytic[name].data()[i];
            // Floor the denominator so coordinates with vanishing gradients
            // are judged on a strict absolute scale instead of FD noise.
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-4);
            report.coords_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some(WorstCoordinate {
                    block: name.to_string(),
                    index: i,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    Ok(report)
}
