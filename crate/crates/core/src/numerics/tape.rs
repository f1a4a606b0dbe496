//! Reverse-mode differentiation tape over [`Array`] values.
//!
//! A [`Var`] is an array handle that may be traced on a [`Tape`]. Operations
//! on traced vars push one node per primitive, each holding the partial-
//! derivative closure for its traced inputs. [`Tape::backward`] replays the
//! nodes in reverse creation order — reverse topological order by
//! construction — visiting each exactly once and accumulating gradients
//! additively over fan-out.
//!
//! Untraced vars (constants, or anything built from them) skip recording
//! entirely, so the same forward code serves both training and evaluation;
//! evaluation retains no intermediate buffers.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::numerics::array::Array;
use crate::numerics::ops;

type BackwardFn = Box<dyn Fn(&Array) -> Vec<Array>>;

struct Node {
    /// Tape ids of the traced inputs, in the order the backward closure
    /// emits their gradients.
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
}

/// Ordered record of primitive operations for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers a differentiable leaf (a parameter).
    pub fn leaf(&self, value: Array) -> Var<'_> {
        let id = self.push(Node {
            parents: Vec::new(),
            backward: None,
        });
        Var {
            value: Rc::new(value),
            trace: Some((self, id)),
        }
    }

    fn push(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    /// Backpropagates from a scalar root, returning per-node gradients.
    pub fn backward(&self, root: &Var<'_>) -> Result<Gradients> {
        let (tape, root_id) = root
            .trace
            .ok_or_else(|| Error::InvalidInput("backward from an untraced var".into()))?;
        if !std::ptr::eq(tape, self) {
            return Err(Error::InvalidInput("backward root from another tape".into()));
        }
        if root.value.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "backward root must be scalar, got shape {:?}",
                root.value.shape()
            )));
        }
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Array>> = (0..nodes.len()).map(|_| None).collect();
        grads[root_id] = Some(Array::scalar(1.0));
        for id in (0..=root_id).rev() {
            let Some(bw) = nodes[id].backward.as_ref() else {
                continue;
            };
            if grads[id].is_none() {
                continue;
            }
            let contribs = bw(grads[id].as_ref().unwrap());
            debug_assert_eq!(contribs.len(), nodes[id].parents.len());
            for (&pid, pg) in nodes[id].parents.iter().zip(contribs) {
                match &mut grads[pid] {
                    Some(acc) => acc.add_assign(&pg)?,
                    slot => *slot = Some(pg),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Gradients computed by [`Tape::backward`], queryable per var.
pub struct Gradients {
    grads: Vec<Option<Array>>,
}

impl Gradients {
    pub fn get(&self, var: &Var<'_>) -> Option<&Array> {
        let (_, id) = var.trace?;
        self.grads.get(id)?.as_ref()
    }
}

/// An array handle, optionally traced on a tape.
#[derive(Clone)]
pub struct Var<'t> {
    value: Rc<Array>,
    trace: Option<(&'t Tape, usize)>,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("shape", &self.value.shape())
            .field("traced", &self.trace.is_some())
            .finish()
    }
}

fn merged_tape<'t>(vars: &[&Var<'t>]) -> Option<&'t Tape> {
    let mut found: Option<&'t Tape> = None;
    for v in vars {
        if let Some((tape, _)) = v.trace {
            match found {
                None => found = Some(tape),
                Some(t) => assert!(std::ptr::eq(t, tape), "vars from different tapes"),
            }
        }
    }
    found
}

/// Records a node whose backward closure emits one gradient per traced
/// input, in input order.
fn record<'t>(
    inputs: &[&Var<'t>],
    value: Array,
    backward: impl Fn(&Array, &[bool]) -> Vec<Array> + 'static,
) -> Var<'t> {
    let Some(tape) = merged_tape(inputs) else {
        return Var::constant(value);
    };
    let traced: Vec<bool> = inputs.iter().map(|v| v.trace.is_some()).collect();
    let parents: Vec<usize> = inputs.iter().filter_map(|v| v.trace.map(|(_, id)| id)).collect();
    let id = tape.push(Node {
        parents,
        backward: Some(Box::new(move |dy| backward(dy, &traced))),
    });
    Var {
        value: Rc::new(value),
        trace: Some((tape, id)),
    }
}

impl Var<'static> {
    /// Wraps an array with no trace; gradients never flow into it.
    pub fn constant(value: Array) -> Var<'static> {
        Var {
            value: Rc::new(value),
            trace: None,
        }
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> &Array {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn to_array(&self) -> Array {
        (*self.value).clone()
    }

    pub fn is_traced(&self) -> bool {
        self.trace.is_some()
    }

    fn rc(&self) -> Rc<Array> {
        Rc::clone(&self.value)
    }

    pub fn add(&self, rhs: &Var<'t>) -> Result<Var<'t>> {
        let out = ops::add(&self.value, &rhs.value)?;
        Ok(record(&[self, rhs], out, move |dy, traced| {
            let mut g = Vec::with_capacity(2);
            if traced[0] {
                g.push(dy.clone());
            }
            if traced[1] {
                g.push(dy.clone());
            }
            g
        }))
    }

    /// Adds a [c] bias along the last axis of a [t,c] array.
    pub fn add_row(&self, bias: &Var<'t>) -> Result<Var<'t>> {
        let out = ops::add_row(&self.value, &bias.value)?;
        let c = bias.value.len();
        Ok(record(&[self, bias], out, move |dy, traced| {
            let mut g = Vec::with_capacity(2);
            if traced[0] {
                g.push(dy.clone());
            }
            if traced[1] {
                let mut db = vec![0.0; c];
                for row in dy.data().chunks(c) {
                    for (o, &v) in db.iter_mut().zip(row) {
                        *o += v;
                    }
                }
                g.push(Array::from_parts(vec![c], db));
            }
            g
        }))
    }

    pub fn mul(&self, rhs: &Var<'t>) -> Result<Var<'t>> {
        let out = ops::mul(&self.value, &rhs.value)?;
        let (a, b) = (self.rc(), rhs.rc());
        Ok(record(&[self, rhs], out, move |dy, traced| {
            let mut g = Vec::with_capacity(2);
            if traced[0] {
                g.push(ops::mul(dy, &b).expect("shape checked"));
            }
            if traced[1] {
                g.push(ops::mul(dy, &a).expect("shape checked"));
            }
            g
        }))
    }

    pub fn scale(&self, s: f64) -> Var<'t> {
        let out = ops::scale(&self.value, s);
        record(&[self], out, move |dy, _| vec![ops::scale(dy, s)])
    }

    pub fn matmul(&self, rhs: &Var<'t>) -> Result<Var<'t>> {
        let out = ops::matmul(&self.value, &rhs.value)?;
        let (a, b) = (self.rc(), rhs.rc());
        Ok(record(&[self, rhs], out, move |dy, traced| {
            let mut g = Vec::with_capacity(2);
            if traced[0] {
                g.push(ops::matmul_nt(dy, &b).expect("shape checked"));
            }
            if traced[1] {
                g.push(ops::matmul_tn(&a, dy).expect("shape checked"));
            }
            g
        }))
    }

    /// self · rhsᵀ, for rhs of shape [n, k].
    pub fn matmul_nt(&self, rhs: &Var<'t>) -> Result<Var<'t>> {
        self.matmul_nt_scaled(rhs, 1.0)
    }

    /// alpha · self · rhsᵀ; the attention score scale fuses in here.
    pub fn matmul_nt_scaled(&self, rhs: &Var<'t>, alpha: f64) -> Result<Var<'t>> {
        let out = ops::matmul_nt_scaled(&self.value, &rhs.value, alpha)?;
        let (a, b) = (self.rc(), rhs.rc());
        Ok(record(&[self, rhs], out, move |dy, traced| {
            let mut g = Vec::with_capacity(2);
            if traced[0] {
                let mut da = ops::matmul(dy, &b).expect("shape checked");
                if alpha != 1.0 {
                    da.scale_assign(alpha);
                }
                g.push(da);
            }
            if traced[1] {
                let mut db = ops::matmul_tn(dy, &a).expect("shape checked");
                if alpha != 1.0 {
                    db.scale_assign(alpha);
                }
                g.push(db);
            }
            g
        }))
    }

    pub fn relu(&self) -> Var<'t> {
        let out = ops::relu(&self.value);
        let x = self.rc();
        record(&[self], out, move |dy, _| {
            let data = dy
                .data()
                .iter()
                .zip(x.data())
                .map(|(&d, &v)| if v > 0.0 { d } else { 0.0 })
                .collect();
            vec![Array::from_parts(x.shape().to_vec(), data)]
        })
    }

    pub fn tanh_act(&self) -> Var<'t> {
        let out = ops::tanh(&self.value);
        let y = Rc::new(out.clone());
        record(&[self], out, move |dy, _| {
            let data = dy
                .data()
                .iter()
                .zip(y.data())
                .map(|(&d, &v)| d * (1.0 - v * v))
                .collect();
            vec![Array::from_parts(y.shape().to_vec(), data)]
        })
    }

    pub fn sigmoid_act(&self) -> Var<'t> {
        let out = ops::sigmoid(&self.value);
        let y = Rc::new(out.clone());
        record(&[self], out, move |dy, _| {
            let data = dy
                .data()
                .iter()
                .zip(y.data())
                .map(|(&d, &v)| d * v * (1.0 - v))
                .collect();
            vec![Array::from_parts(y.shape().to_vec(), data)]
        })
    }

    /// Softmax over the last axis.
    pub fn softmax(&self) -> Result<Var<'t>> {
        let out = ops::softmax(&self.value)?;
        let y = Rc::new(out.clone());
        let width = y.last_dim();
        Ok(record(&[self], out, move |dy, _| {
            let mut dx = vec![0.0; y.len()];
            for (r, (drow, yrow)) in dy.data().chunks(width).zip(y.data().chunks(width)).enumerate()
            {
                let dot: f64 = drow.iter().zip(yrow).map(|(d, v)| d * v).sum();
                for (j, (&d, &v)) in drow.iter().zip(yrow).enumerate() {
                    dx[r * width + j] = v * (d - dot);
                }
            }
            vec![Array::from_parts(y.shape().to_vec(), dx)]
        }))
    }

    /// Softmax of square scores under the additive causal mask; rows sum
    /// to 1 over positions <= i with exact zeros beyond.
    pub fn softmax_causal(&self) -> Result<Var<'t>> {
        let out = ops::softmax_causal(&self.value)?;
        let y = Rc::new(out.clone());
        Ok(record(&[self], out, move |dy, _| {
            let t = y.shape()[0];
            let mut dx = vec![0.0; t * t];
            for i in 0..t {
                let yrow = &y.data()[i * t..i * t + i + 1];
                let drow = &dy.data()[i * t..i * t + i + 1];
                let dot: f64 = drow.iter().zip(yrow).map(|(d, v)| d * v).sum();
                for (j, (&d, &v)) in drow.iter().zip(yrow).enumerate() {
                    dx[i * t + j] = v * (d - dot);
                }
            }
            vec![Array::from_parts(vec![t, t], dx)]
        }))
    }

    pub fn layer_norm(&self, gain: &Var<'t>, bias: &Var<'t>, eps: f64) -> Result<Var<'t>> {
        let (out, xhat, rstd) = ops::layer_norm_parts(&self.value, &gain.value, &bias.value, eps)?;
        let xhat = Rc::new(xhat);
        let g = gain.rc();
        Ok(record(&[self, gain, bias], out, move |dy, traced| {
            let (t, e) = xhat.dims2("layer_norm backward").expect("rank checked");
            let mut grads = Vec::with_capacity(3);
            if traced[0] {
                let gd = g.data();
                let mut dx = vec![0.0; t * e];
                for i in 0..t {
                    let dyr = &dy.data()[i * e..(i + 1) * e];
                    let xr = &xhat.data()[i * e..(i + 1) * e];
                    let mut mean_dh = 0.0;
                    let mut mean_dh_x = 0.0;
                    for j in 0..e {
                        let dh = dyr[j] * gd[j];
                        mean_dh += dh;
                        mean_dh_x += dh * xr[j];
                    }
                    mean_dh /= e as f64;
                    mean_dh_x /= e as f64;
                    for j in 0..e {
                        let dh = dyr[j] * gd[j];
                        dx[i * e + j] = rstd[i] * (dh - mean_dh - xr[j] * mean_dh_x);
                    }
                }
                grads.push(Array::from_parts(vec![t, e], dx));
            }
            if traced[1] {
                let mut dg = vec![0.0; e];
                for (dyr, xr) in dy.data().chunks(e).zip(xhat.data().chunks(e)) {
                    for j in 0..e {
                        dg[j] += dyr[j] * xr[j];
                    }
                }
                grads.push(Array::from_parts(vec![e], dg));
            }
            if traced[2] {
                let mut db = vec![0.0; e];
                for dyr in dy.data().chunks(e) {
                    for j in 0..e {
                        db[j] += dyr[j];
                    }
                }
                grads.push(Array::from_parts(vec![e], db));
            }
            grads
        }))
    }

    /// Rows shifted down by `d`, zero-filled at the top.
    pub fn shift_rows(&self, d: usize) -> Result<Var<'t>> {
        let out = ops::shift_rows(&self.value, d)?;
        let shape = self.value.shape().to_vec();
        Ok(record(&[self], out, move |dy, _| {
            // Transpose of shift-down is shift-up.
            let (t, c) = (shape[0], shape[1]);
            let mut dx = vec![0.0; t * c];
            if d < t {
                dx[..(t - d) * c].copy_from_slice(&dy.data()[d * c..]);
            }
            vec![Array::from_parts(shape.clone(), dx)]
        }))
    }

    /// Rows shifted up by `d`, zero-filled at the bottom.
    pub fn shift_rows_up(&self, d: usize) -> Result<Var<'t>> {
        let out = ops::shift_rows_up(&self.value, d)?;
        Ok(record(&[self], out, move |dy, _| {
            // Transpose of shift-up is shift-down.
            vec![ops::shift_rows(dy, d).expect("shape checked")]
        }))
    }

    /// Every `stride`-th row.
    pub fn downsample_rows(&self, stride: usize) -> Result<Var<'t>> {
        let out = ops::downsample_rows(&self.value, stride)?;
        let shape = self.value.shape().to_vec();
        Ok(record(&[self], out, move |dy, _| {
            let (t, c) = (shape[0], shape[1]);
            let mut dx = vec![0.0; t * c];
            for (i, row) in dy.data().chunks(c).enumerate() {
                let r = i * stride;
                dx[r * c..(r + 1) * c].copy_from_slice(row);
            }
            vec![Array::from_parts(shape.clone(), dx)]
        }))
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Var<'t>> {
        let out = ops::slice_cols(&self.value, start, end)?;
        let shape = self.value.shape().to_vec();
        Ok(record(&[self], out, move |dy, _| {
            let (t, c) = (shape[0], shape[1]);
            let w = end - start;
            let mut dx = vec![0.0; t * c];
            for i in 0..t {
                dx[i * c + start..i * c + end].copy_from_slice(&dy.data()[i * w..(i + 1) * w]);
            }
            vec![Array::from_parts(shape.clone(), dx)]
        }))
    }

    /// Slab `i` along the first axis.
    pub fn index_axis0(&self, i: usize) -> Result<Var<'t>> {
        let out = ops::index_axis0(&self.value, i)?;
        let shape = self.value.shape().to_vec();
        Ok(record(&[self], out, move |dy, _| {
            let inner: usize = shape[1..].iter().product();
            let mut dx = vec![0.0; shape.iter().product()];
            dx[i * inner..(i + 1) * inner].copy_from_slice(dy.data());
            vec![Array::from_parts(shape.clone(), dx)]
        }))
    }

    pub fn mean_axis0(&self) -> Result<Var<'t>> {
        let out = ops::mean_axis0(&self.value)?;
        let shape = self.value.shape().to_vec();
        Ok(record(&[self], out, move |dy, _| {
            let (t, c) = (shape[0], shape[1]);
            let inv = 1.0 / t as f64;
            let mut dx = Vec::with_capacity(t * c);
            for _ in 0..t {
                dx.extend(dy.data().iter().map(|v| v * inv));
            }
            vec![Array::from_parts(shape.clone(), dx)]
        }))
    }

    pub fn broadcast_rows(&self, t: usize) -> Result<Var<'t>> {
        let out = ops::broadcast_rows(&self.value, t)?;
        let c = self.value.len();
        Ok(record(&[self], out, move |dy, _| {
            let mut dv = vec![0.0; c];
            for row in dy.data().chunks(c) {
                for (o, &v) in dv.iter_mut().zip(row) {
                    *o += v;
                }
            }
            vec![Array::from_parts(vec![c], dv)]
        }))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&self) -> Var<'t> {
        let total: f64 = self.value.data().iter().sum();
        let shape = self.value.shape().to_vec();
        record(&[self], Array::scalar(total), move |dy, _| {
            vec![Array::filled(&shape, dy.data()[0])]
        })
    }

    /// Gathers rows of an embedding table ([vocab, e]) by level id.
    pub fn embed_rows(&self, ids: &[u8]) -> Result<Var<'t>> {
        let out = ops::embed_rows(&self.value, ids)?;
        let shape = self.value.shape().to_vec();
        let ids = ids.to_vec();
        Ok(record(&[self], out, move |dy, _| {
            let e = shape[1];
            let mut dt = vec![0.0; shape[0] * e];
            for (i, &id) in ids.iter().enumerate() {
                let dst = &mut dt[id as usize * e..(id as usize + 1) * e];
                for (o, &v) in dst.iter_mut().zip(&dy.data()[i * e..(i + 1) * e]) {
                    *o += v;
                }
            }
            vec![Array::from_parts(shape.clone(), dt)]
        }))
    }

    /// Mean cross-entropy of `targets` under row-wise softmax of self.
    pub fn cross_entropy(&self, targets: &[u8]) -> Result<Var<'t>> {
        let (loss, probs) = ops::cross_entropy_parts(&self.value, targets)?;
        let probs = Rc::new(probs);
        let targets = targets.to_vec();
        Ok(record(&[self], Array::scalar(loss), move |dy, _| {
            let (t, c) = probs.dims2("cross_entropy backward").expect("rank checked");
            let scale = dy.data()[0] / t as f64;
            let mut dx = probs.data().to_vec();
            for (i, &tgt) in targets.iter().enumerate() {
                dx[i * c + tgt as usize] -= 1.0;
            }
            for v in &mut dx {
                *v *= scale;
            }
            vec![Array::from_parts(vec![t, c], dx)]
        }))
    }
}

/// Concatenates rank-2 vars along the column axis.
pub fn concat_cols<'t>(parts: &[&Var<'t>]) -> Result<Var<'t>> {
    let arrays: Vec<&Array> = parts.iter().map(|v| v.value()).collect();
    let out = ops::concat_cols(&arrays)?;
    let widths: Vec<usize> = arrays.iter().map(|a| a.last_dim()).collect();
    Ok(record(parts, out, move |dy, traced| {
        let mut grads = Vec::new();
        let mut start = 0;
        for (&w, &is_traced) in widths.iter().zip(traced) {
            if is_traced {
                grads.push(ops::slice_cols(dy, start, start + w).expect("shape checked"));
            }
            start += w;
        }
        grads
    }))
}

/// Differentiable causal dilated convolution (filter width 2), composed from
/// traced primitives so its gradient needs no dedicated backward rule.
pub fn causal_dilated_conv1d<'t>(
    x: &Var<'t>,
    kernel: &Var<'t>,
    dilation: usize,
) -> Result<Var<'t>> {
    if dilation < 1 {
        return Err(Error::Config(format!(
            "dilation must be >= 1, got {dilation}"
        )));
    }
    let k_past = kernel.index_axis0(0)?;
    let k_now = kernel.index_axis0(1)?;
    let past = x.shift_rows(dilation)?.matmul(&k_past)?;
    let now = x.matmul(&k_now)?;
    past.add(&now)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_array(shape: &[usize], rng: &mut ChaCha8Rng) -> Array {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        Array::from_parts(shape.to_vec(), data)
    }

    /// Central finite differences against the tape gradient for a scalar
    /// function of one array input.
    fn fd_check<F>(x0: &Array, f: F, tol: f64)
    where
        F: for<'t> Fn(&Var<'t>) -> Var<'t>,
    {
        let tape = Tape::new();
        let x = tape.leaf(x0.clone());
        let y = f(&x);
        assert_eq!(y.value().len(), 1, "fd_check expects scalar outputs");
        let grads = tape.backward(&y).unwrap();
        let analytic = grads.get(&x).expect("input should receive gradient").clone();

        let eps = 1e-6;
        for i in 0..x0.len() {
            let mut plus = x0.clone();
            plus.data_mut()[i] += eps;
            let mut minus = x0.clone();
            minus.data_mut()[i] -= eps;
            let fp = f(&Var::constant(plus)).value().data()[0];
            let fm = f(&Var::constant(minus)).value().data()[0];
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic.data()[i];
            let denom = (a.abs() + numeric.abs()).max(1e-4);
            assert!(
                ((a - numeric) / denom).abs() < tol,
                "coord {i}: analytic {a} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn fan_out_accumulates_additively() {
        let tape = Tape::new();
        let x = tape.leaf(Array::from_vec(&[2], vec![3.0, -2.0]).unwrap());
        // y = sum(x * x): dy/dx = 2x.
        let y = x.mul(&x).unwrap().sum();
        let grads = tape.backward(&y).unwrap();
        let g = grads.get(&x).unwrap();
        assert_eq!(g.data(), &[6.0, -4.0]);
    }

    #[test]
    fn untraced_inputs_record_nothing() {
        let tape = Tape::new();
        let a = Var::constant(Array::scalar(2.0));
        let b = Var::constant(Array::scalar(3.0));
        let c = a.mul(&b).unwrap();
        assert!(!c.is_traced());
        assert_eq!(tape.len(), 0);
        assert_eq!(c.value().data()[0], 6.0);
    }

    #[test]
    fn constants_receive_no_gradient_but_values_flow() {
        let tape = Tape::new();
        let x = tape.leaf(Array::from_vec(&[2], vec![1.0, 2.0]).unwrap());
        let c = Var::constant(Array::from_vec(&[2], vec![10.0, 20.0]).unwrap());
        let y = x.mul(&c).unwrap().sum();
        let grads = tape.backward(&y).unwrap();
        assert_eq!(grads.get(&x).unwrap().data(), &[10.0, 20.0]);
        assert_eq!(y.value().data()[0], 50.0);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let tape = Tape::new();
        let x = tape.leaf(Array::zeros(&[2, 2]));
        assert!(tape.backward(&x).is_err());
    }

    #[test]
    fn matmul_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x0 = random_array(&[3, 4], &mut rng);
        let b = Var::constant(random_array(&[4, 2], &mut rng));
        let c = Var::constant(random_array(&[3, 2], &mut rng));
        fd_check(&x0, |x| x.matmul(&b).unwrap().mul(&c).unwrap().sum(), 1e-6);
        // And as the right operand.
        let a = Var::constant(random_array(&[2, 3], &mut rng));
        let c2 = Var::constant(random_array(&[2, 4], &mut rng));
        fd_check(&x0, |x| a.matmul(x).unwrap().mul(&c2).unwrap().sum(), 1e-6);
    }

    #[test]
    fn matmul_nt_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x0 = random_array(&[3, 4], &mut rng);
        let b = Var::constant(random_array(&[5, 4], &mut rng));
        let c = Var::constant(random_array(&[3, 5], &mut rng));
        fd_check(&x0, |x| x.matmul_nt(&b).unwrap().mul(&c).unwrap().sum(), 1e-6);
        let a = Var::constant(random_array(&[5, 4], &mut rng));
        let c2 = Var::constant(random_array(&[5, 3], &mut rng));
        fd_check(&x0, |x| a.matmul_nt(x).unwrap().mul(&c2).unwrap().sum(), 1e-6);
    }

    #[test]
    fn softmax_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x0 = random_array(&[2, 5], &mut rng);
        let c = Var::constant(random_array(&[2, 5], &mut rng));
        fd_check(&x0, |x| x.softmax().unwrap().mul(&c).unwrap().sum(), 1e-5);
    }

    #[test]
    fn causal_softmax_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let x0 = random_array(&[5, 5], &mut rng);
        let c = Var::constant(random_array(&[5, 5], &mut rng));
        fd_check(
            &x0,
            |x| x.softmax_causal().unwrap().mul(&c).unwrap().sum(),
            1e-5,
        );
    }

    #[test]
    fn scaled_matmul_nt_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let x0 = random_array(&[3, 4], &mut rng);
        let b = Var::constant(random_array(&[5, 4], &mut rng));
        let c = Var::constant(random_array(&[3, 5], &mut rng));
        fd_check(
            &x0,
            |x| x.matmul_nt_scaled(&b, 0.37).unwrap().mul(&c).unwrap().sum(),
            1e-6,
        );
        let a = Var::constant(random_array(&[5, 4], &mut rng));
        let c2 = Var::constant(random_array(&[5, 3], &mut rng));
        fd_check(
            &x0,
            |x| a.matmul_nt_scaled(x, 0.37).unwrap().mul(&c2).unwrap().sum(),
            1e-6,
        );
    }

    #[test]
    fn layer_norm_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let x0 = random_array(&[3, 6], &mut rng);
        let g = Var::constant(random_array(&[6], &mut rng));
        let b = Var::constant(random_array(&[6], &mut rng));
        let c = Var::constant(random_array(&[3, 6], &mut rng));
        fd_check(
            &x0,
            |x| x.layer_norm(&g, &b, 1e-12).unwrap().mul(&c).unwrap().sum(),
            1e-5,
        );
        // Gain and bias sides.
        let xc = Var::constant(random_array(&[3, 6], &mut rng));
        let g0 = random_array(&[6], &mut rng);
        fd_check(
            &g0,
            |g| {
                xc.layer_norm(g, &b, 1e-12)
                    .unwrap()
                    .mul(&c)
                    .unwrap()
                    .sum()
            },
            1e-5,
        );
        let b0 = random_array(&[6], &mut rng);
        fd_check(
            &b0,
            |bb| {
                xc.layer_norm(&g, bb, 1e-12)
                    .unwrap()
                    .mul(&c)
                    .unwrap()
                    .sum()
            },
            1e-5,
        );
    }

    #[test]
    fn activation_gradients_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let x0 = random_array(&[4, 3], &mut rng);
        let c = Var::constant(random_array(&[4, 3], &mut rng));
        fd_check(&x0, |x| x.relu().mul(&c).unwrap().sum(), 1e-5);
        fd_check(&x0, |x| x.tanh_act().mul(&c).unwrap().sum(), 1e-5);
        fd_check(&x0, |x| x.sigmoid_act().mul(&c).unwrap().sum(), 1e-5);
    }

    #[test]
    fn structural_op_gradients_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let x0 = random_array(&[5, 4], &mut rng);
        let c = Var::constant(random_array(&[5, 4], &mut rng));
        fd_check(&x0, |x| x.shift_rows(2).unwrap().mul(&c).unwrap().sum(), 1e-6);

        fd_check(
            &x0,
            |x| x.shift_rows_up(3).unwrap().mul(&c).unwrap().sum(),
            1e-6,
        );

        let cds = Var::constant(random_array(&[3, 4], &mut rng));
        fd_check(
            &x0,
            |x| x.downsample_rows(2).unwrap().mul(&cds).unwrap().sum(),
            1e-6,
        );

        let c2 = Var::constant(random_array(&[5, 2], &mut rng));
        fd_check(
            &x0,
            |x| x.slice_cols(1, 3).unwrap().mul(&c2).unwrap().sum(),
            1e-6,
        );

        let c3 = Var::constant(random_array(&[4], &mut rng));
        fd_check(&x0, |x| {
            x.mean_axis0().unwrap().mul(&c3).unwrap().sum()
        }, 1e-6);

        let v0 = random_array(&[4], &mut rng);
        let c4 = Var::constant(random_array(&[6, 4], &mut rng));
        fd_check(
            &v0,
            |v| v.broadcast_rows(6).unwrap().mul(&c4).unwrap().sum(),
            1e-6,
        );

        let k0 = random_array(&[2, 3, 3], &mut rng);
        let xc = Var::constant(random_array(&[7, 3], &mut rng));
        let c5 = Var::constant(random_array(&[7, 3], &mut rng));
        fd_check(
            &k0,
            |k| {
                causal_dilated_conv1d(&xc, k, 2)
                    .unwrap()
                    .mul(&c5)
                    .unwrap()
                    .sum()
            },
            1e-5,
        );
    }

    #[test]
    fn embedding_gradient_scatters_by_id() {
        let tape = Tape::new();
        let table = tape.leaf(Array::from_vec(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let y = table.embed_rows(&[2, 0, 2]).unwrap().sum();
        let grads = tape.backward(&y).unwrap();
        let g = grads.get(&table).unwrap();
        // Row 2 gathered twice, row 0 once, row 1 never.
        assert_eq!(g.data(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn cross_entropy_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let x0 = random_array(&[4, 6], &mut rng);
        let targets = [1u8, 0, 5, 3];
        fd_check(&x0, |x| x.cross_entropy(&targets).unwrap(), 1e-5);
    }

    #[test]
    fn concat_cols_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let x0 = random_array(&[3, 2], &mut rng);
        let other = Var::constant(random_array(&[3, 3], &mut rng));
        let c = Var::constant(random_array(&[3, 5], &mut rng));
        fd_check(
            &x0,
            |x| {
                concat_cols(&[x, &other])
                    .unwrap()
                    .mul(&c)
                    .unwrap()
                    .sum()
            },
            1e-6,
        );
    }
}
