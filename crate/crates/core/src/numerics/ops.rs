//! Pure forward operations on [`Array`] values.
//!
//! These are the single numeric implementation of every primitive; the tape
//! in [`super::tape`] wraps them and adds backward closures. Loops are laid
//! out for row-major access so the optimizer can vectorize them.

use crate::error::{Error, Result};
use crate::numerics::array::Array;

/// Blocked dgemm over raw row-major buffers. Single-threaded with fixed
/// blocking, so results are bitwise reproducible run to run.
#[allow(clippy::too_many_arguments)]
fn dgemm_strided(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    // Buffers are sized and strides derived from validated shapes above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

/// C = A · B for A: [m,k], B: [k,n].
pub fn matmul(a: &Array, b: &Array) -> Result<Array> {
    let (m, k) = a.dims2("matmul")?;
    let (k2, n) = b.dims2("matmul")?;
    if k != k2 {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let out = dgemm_strided(m, k, n, a.data(), k as isize, 1, b.data(), n as isize, 1);
    Ok(Array::from_parts(vec![m, n], out))
}

/// C = A · Bᵀ for A: [m,k], B: [n,k].
pub fn matmul_nt(a: &Array, b: &Array) -> Result<Array> {
    matmul_nt_scaled(a, b, 1.0)
}

/// C = alpha · A · Bᵀ; the scale rides along in the gemm epilogue.
pub fn matmul_nt_scaled(a: &Array, b: &Array, alpha: f64) -> Result<Array> {
    let (m, k) = a.dims2("matmul_nt")?;
    let (n, k2) = b.dims2("matmul_nt")?;
    if k != k2 {
        return Err(Error::shape("matmul_nt", a.shape(), b.shape()));
    }
    // Bᵀ is B with swapped strides.
    let mut out = vec![0.0; m * n];
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data().as_ptr(),
            k as isize,
            1,
            b.data().as_ptr(),
            1,
            k as isize,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(Array::from_parts(vec![m, n], out))
}

/// C = Aᵀ · B for A: [k,m], B: [k,n].
pub fn matmul_tn(a: &Array, b: &Array) -> Result<Array> {
    let (k, m) = a.dims2("matmul_tn")?;
    let (k2, n) = b.dims2("matmul_tn")?;
    if k != k2 {
        return Err(Error::shape("matmul_tn", a.shape(), b.shape()));
    }
    let out = dgemm_strided(m, k, n, a.data(), 1, m as isize, b.data(), n as isize, 1);
    Ok(Array::from_parts(vec![m, n], out))
}

pub fn add(a: &Array, b: &Array) -> Result<Array> {
    if a.shape() != b.shape() {
        return Err(Error::shape("add", a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Ok(Array::from_parts(a.shape().to_vec(), data))
}

/// Adds a vector along the last axis of a rank-2 array.
pub fn add_row(x: &Array, bias: &Array) -> Result<Array> {
    let (_, c) = x.dims2("add_row")?;
    if bias.shape() != [c] {
        return Err(Error::shape("add_row", x.shape(), bias.shape()));
    }
    let b = bias.data();
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v + b[i % c])
        .collect();
    Ok(Array::from_parts(x.shape().to_vec(), data))
}

pub fn mul(a: &Array, b: &Array) -> Result<Array> {
    if a.shape() != b.shape() {
        return Err(Error::shape("mul", a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Ok(Array::from_parts(a.shape().to_vec(), data))
}

pub fn scale(a: &Array, s: f64) -> Array {
    a.map(|v| v * s)
}

pub fn relu(a: &Array) -> Array {
    a.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn tanh(a: &Array) -> Array {
    a.map(f64::tanh)
}

pub fn sigmoid(a: &Array) -> Array {
    a.map(|v| 1.0 / (1.0 + (-v).exp()))
}

/// Softmax over the last axis, computed with max-subtraction.
///
/// Every slice along the last axis sums to 1; NaN input is rejected.
pub fn softmax(x: &Array) -> Result<Array> {
    if x.data().iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let width = x.last_dim();
    let mut data = x.data().to_vec();
    for row in data.chunks_mut(width) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            // exp underflows to exactly 0 below this point; skipping the
            // call matters when most of a row is causally masked.
            let d = *v - max;
            *v = if d < -745.2 { 0.0 } else { d.exp() };
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(Array::from_parts(x.shape().to_vec(), data))
}

/// Softmax of a square score matrix under the additive causal mask
/// (-1e30 on j > i before the softmax). Equivalent bit for bit to adding
/// the mask and calling [`softmax`]: masked entries underflow to exact
/// zeros there too, and trailing zeros change neither the row max nor the
/// row sum. Fused so the masked half is never touched.
pub fn softmax_causal(x: &Array) -> Result<Array> {
    let (t, t2) = x.dims2("softmax_causal")?;
    if t != t2 {
        return Err(Error::shape("softmax_causal", x.shape(), &[t, t]));
    }
    let mut out = vec![0.0; t * t];
    for i in 0..t {
        let row = &x.data()[i * t..i * t + i + 1];
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("softmax input".into()));
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let orow = &mut out[i * t..i * t + i + 1];
        let mut sum = 0.0;
        for (o, &v) in orow.iter_mut().zip(row) {
            *o = (v - max).exp();
            sum += *o;
        }
        for o in orow.iter_mut() {
            *o /= sum;
        }
    }
    Ok(Array::from_parts(vec![t, t], out))
}

/// Per-position layer normalization of a rank-2 array, then affine.
///
/// Uses the population variance so a row like [1, -1] is already normalized.
pub fn layer_norm(x: &Array, gain: &Array, bias: &Array, eps: f64) -> Result<Array> {
    Ok(layer_norm_parts(x, gain, bias, eps)?.0)
}

/// Layer norm returning the normalized rows and per-row reciprocal stddev,
/// which the backward pass reuses.
pub fn layer_norm_parts(
    x: &Array,
    gain: &Array,
    bias: &Array,
    eps: f64,
) -> Result<(Array, Array, Vec<f64>)> {
    if eps <= 0.0 {
        return Err(Error::Config(format!("layer_norm eps must be > 0, got {eps}")));
    }
    let (t, e) = x.dims2("layer_norm")?;
    if e < 2 {
        return Err(Error::Config(format!(
            "layer_norm needs width >= 2, got {e}"
        )));
    }
    if gain.shape() != [e] || bias.shape() != [e] {
        return Err(Error::shape("layer_norm", x.shape(), gain.shape()));
    }
    let g = gain.data();
    let b = bias.data();
    let mut out = vec![0.0; t * e];
    let mut xhat = vec![0.0; t * e];
    let mut rstd = vec![0.0; t];
    for (i, row) in x.data().chunks(e).enumerate() {
        let mean = row.iter().sum::<f64>() / e as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / e as f64;
        let r = 1.0 / (var + eps).sqrt();
        rstd[i] = r;
        for (j, &v) in row.iter().enumerate() {
            let h = (v - mean) * r;
            xhat[i * e + j] = h;
            out[i * e + j] = g[j] * h + b[j];
        }
    }
    Ok((
        Array::from_parts(vec![t, e], out),
        Array::from_parts(vec![t, e], xhat),
        rstd,
    ))
}

/// Shifts rows down by `d`, filling the vacated top rows with zeros.
/// `shift_rows(x, d)[t] == x[t - d]` for `t >= d`.
pub fn shift_rows(x: &Array, d: usize) -> Result<Array> {
    let (t, c) = x.dims2("shift_rows")?;
    let mut out = vec![0.0; t * c];
    if d < t {
        out[d * c..].copy_from_slice(&x.data()[..(t - d) * c]);
    }
    Ok(Array::from_parts(vec![t, c], out))
}

/// Shifts rows up by `d`, filling the vacated bottom rows with zeros.
/// `shift_rows_up(x, d)[t] == x[t + d]` for `t + d < T`.
pub fn shift_rows_up(x: &Array, d: usize) -> Result<Array> {
    let (t, c) = x.dims2("shift_rows_up")?;
    let mut out = vec![0.0; t * c];
    if d < t {
        out[..(t - d) * c].copy_from_slice(&x.data()[d * c..]);
    }
    Ok(Array::from_parts(vec![t, c], out))
}

/// Keeps every `stride`-th row: `y[t] = x[t·stride]`, length ceil(T/stride).
pub fn downsample_rows(x: &Array, stride: usize) -> Result<Array> {
    if stride < 1 {
        return Err(Error::Config(format!("stride must be >= 1, got {stride}")));
    }
    let (t, c) = x.dims2("downsample_rows")?;
    let out_t = t.div_ceil(stride);
    let mut out = Vec::with_capacity(out_t * c);
    for i in 0..out_t {
        let r = i * stride;
        out.extend_from_slice(&x.data()[r * c..(r + 1) * c]);
    }
    Ok(Array::from_parts(vec![out_t, c], out))
}

/// Causal dilated convolution with the filter width fixed at 2.
///
/// `y[t] = x[t - dilation] · kernel[0] + x[t] · kernel[1]`, with the signal
/// zero-padded on the left by `dilation` samples so the output length equals
/// the input length. `kernel` has shape [2, c_in, c_out].
pub fn causal_dilated_conv1d(x: &Array, kernel: &Array, dilation: usize) -> Result<Array> {
    if dilation < 1 {
        return Err(Error::Config(format!(
            "dilation must be >= 1, got {dilation}"
        )));
    }
    let (_, c_in) = x.dims2("causal_dilated_conv1d")?;
    match kernel.shape() {
        [2, ci, _] if *ci == c_in => {}
        _ => return Err(Error::shape("causal_dilated_conv1d", x.shape(), kernel.shape())),
    }
    let k_past = index_axis0(kernel, 0)?;
    let k_now = index_axis0(kernel, 1)?;
    let past = matmul(&shift_rows(x, dilation)?, &k_past)?;
    let now = matmul(x, &k_now)?;
    add(&past, &now)
}

/// Extracts slab `i` along the first axis.
pub fn index_axis0(x: &Array, i: usize) -> Result<Array> {
    let d0 = x.shape()[0];
    if i >= d0 {
        return Err(Error::InvalidInput(format!(
            "index {i} out of range for axis of size {d0}"
        )));
    }
    let inner: usize = x.shape()[1..].iter().product();
    let data = x.data()[i * inner..(i + 1) * inner].to_vec();
    Ok(Array::from_parts(x.shape()[1..].to_vec(), data))
}

/// Columns `[start, end)` of a rank-2 array.
pub fn slice_cols(x: &Array, start: usize, end: usize) -> Result<Array> {
    let (t, c) = x.dims2("slice_cols")?;
    if start >= end || end > c {
        return Err(Error::InvalidInput(format!(
            "column range {start}..{end} invalid for width {c}"
        )));
    }
    let w = end - start;
    let mut out = Vec::with_capacity(t * w);
    for row in x.data().chunks(c) {
        out.extend_from_slice(&row[start..end]);
    }
    Ok(Array::from_parts(vec![t, w], out))
}

/// Concatenates rank-2 arrays along the column axis.
pub fn concat_cols(parts: &[&Array]) -> Result<Array> {
    if parts.is_empty() {
        return Err(Error::InvalidInput("concat_cols of zero arrays".into()));
    }
    let (t, _) = parts[0].dims2("concat_cols")?;
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let (tp, cp) = p.dims2("concat_cols")?;
        if tp != t {
            return Err(Error::shape("concat_cols", parts[0].shape(), p.shape()));
        }
        widths.push(cp);
    }
    let total: usize = widths.iter().sum();
    let mut out = Vec::with_capacity(t * total);
    for i in 0..t {
        for (p, &w) in parts.iter().zip(&widths) {
            out.extend_from_slice(&p.data()[i * w..(i + 1) * w]);
        }
    }
    Ok(Array::from_parts(vec![t, total], out))
}

/// Mean over the first axis of a rank-2 array: [t,c] -> [c].
pub fn mean_axis0(x: &Array) -> Result<Array> {
    let (t, c) = x.dims2("mean_axis0")?;
    let mut out = vec![0.0; c];
    for row in x.data().chunks(c) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let inv = 1.0 / t as f64;
    for o in &mut out {
        *o *= inv;
    }
    Ok(Array::from_parts(vec![c], out))
}

/// Repeats a vector into `t` identical rows: [c] -> [t,c].
pub fn broadcast_rows(v: &Array, t: usize) -> Result<Array> {
    if v.rank() != 1 {
        return Err(Error::shape("broadcast_rows", v.shape(), &[0]));
    }
    if t == 0 {
        return Err(Error::InvalidInput("broadcast_rows to zero rows".into()));
    }
    let c = v.len();
    let mut out = Vec::with_capacity(t * c);
    for _ in 0..t {
        out.extend_from_slice(v.data());
    }
    Ok(Array::from_parts(vec![t, c], out))
}

/// Gathers rows of `table` ([vocab, e]) at the given ids: -> [ids.len(), e].
pub fn embed_rows(table: &Array, ids: &[u8]) -> Result<Array> {
    let (vocab, e) = table.dims2("embed_rows")?;
    if ids.is_empty() {
        return Err(Error::InvalidInput("embed_rows of empty id list".into()));
    }
    let mut out = Vec::with_capacity(ids.len() * e);
    for &id in ids {
        let id = id as usize;
        debug_assert!(id < vocab);
        out.extend_from_slice(&table.data()[id * e..(id + 1) * e]);
    }
    Ok(Array::from_parts(vec![ids.len(), e], out))
}

/// Mean negative log-likelihood of `targets` under row-wise softmax of
/// `logits`, via log-sum-exp. Also returns the softmax rows for reuse in
/// the backward pass.
pub fn cross_entropy_parts(logits: &Array, targets: &[u8]) -> Result<(f64, Array)> {
    let (t, c) = logits.dims2("cross_entropy")?;
    if targets.len() != t {
        return Err(Error::shape("cross_entropy", logits.shape(), &[targets.len()]));
    }
    let mut probs = vec![0.0; t * c];
    let mut loss = 0.0;
    for (i, row) in logits.data().chunks(c).enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let e = (v - max).exp();
            probs[i * c + j] = e;
            sum += e;
        }
        let lse = max + sum.ln();
        loss += lse - row[targets[i] as usize];
        let inv = 1.0 / sum;
        for p in &mut probs[i * c..(i + 1) * c] {
            *p *= inv;
        }
    }
    Ok((loss / t as f64, Array::from_parts(vec![t, c], probs)))
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

    #[test]
    fn matmul_identity() {
        let i2 = Array::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Array::from_vec(&[2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(matmul(&i2, &b).unwrap(), b);
    }

    #[test]
    fn matmul_dot_product() {
        let a = Array::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let b = Array::from_vec(&[2, 1], vec![3.0, 4.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[1, 1]);
        assert_eq!(c.data()[0], 11.0);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_array(&[3, 4], &mut rng);
        let b = random_array(&[4, 2], &mut rng);
        let c = matmul(&a, &b).unwrap();
        // Independent i-j-p ordering.
        for i in 0..3 {
            for j in 0..2 {
                let mut acc = 0.0;
                for p in 0..4 {
                    acc += a.at2(i, p) * b.at2(p, j);
                }
                assert!((c.at2(i, j) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_rejects_mismatched_inner_dims() {
        let a = Array::zeros(&[2, 3]);
        let b = Array::zeros(&[4, 2]);
        let err = matmul(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
    }

    #[test]
    fn matmul_transposed_variants_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_array(&[3, 5], &mut rng);
        let b = random_array(&[5, 4], &mut rng);
        let c = matmul(&a, &b).unwrap();

        // A·B == A·(Bᵀ)ᵀ via matmul_nt with explicit transpose of B.
        let mut bt = Array::zeros(&[4, 5]);
        for i in 0..5 {
            for j in 0..4 {
                bt.set2(j, i, b.at2(i, j));
            }
        }
        let c2 = matmul_nt(&a, &bt).unwrap();
        for (x, y) in c.data().iter().zip(c2.data()) {
            assert!((x - y).abs() < 1e-12);
        }

        let mut at = Array::zeros(&[5, 3]);
        for i in 0..3 {
            for j in 0..5 {
                at.set2(j, i, a.at2(i, j));
            }
        }
        let c3 = matmul_tn(&at, &b).unwrap();
        for (x, y) in c.data().iter().zip(c3.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_uniform() {
        let x = Array::from_vec(&[1, 4], vec![0.0; 4]).unwrap();
        let y = softmax(&x).unwrap();
        for &v in y.data() {
            assert_eq!(v, 0.25);
        }
    }

    #[test]
    fn softmax_survives_large_logits() {
        let x = Array::from_vec(&[1, 2], vec![1000.0, 0.0]).unwrap();
        let y = softmax(&x).unwrap();
        assert!(y.all_finite());
        assert!((y.data()[0] - 1.0).abs() < 1e-12);
        assert!(y.data()[1].abs() < 1e-12);
    }

    #[test]
    fn softmax_closed_form_ratio() {
        let x = Array::from_vec(&[1, 3], vec![1.0f64.ln(), 2.0f64.ln(), 3.0f64.ln()]).unwrap();
        let y = softmax(&x).unwrap();
        let expect = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        for (v, e) in y.data().iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_nan() {
        let x = Array::from_vec(&[1, 2], vec![f64::NAN, 0.0]).unwrap();
        assert!(softmax(&x).is_err());
    }

    #[test]
    fn layer_norm_constant_row_maps_to_bias() {
        let x = Array::from_vec(&[1, 4], vec![5.0; 4]).unwrap();
        let g = Array::filled(&[4], 1.0);
        let b = Array::zeros(&[4]);
        let y = layer_norm(&x, &g, &b, 1e-12).unwrap();
        for &v in y.data() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn layer_norm_of_normalized_row_is_identity() {
        let x = Array::from_vec(&[1, 2], vec![1.0, -1.0]).unwrap();
        let g = Array::filled(&[2], 1.0);
        let b = Array::zeros(&[2]);
        let y = layer_norm(&x, &g, &b, 1e-15).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-7);
        assert!((y.data()[1] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn layer_norm_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_array(&[3, 8], &mut rng);
        let g = Array::filled(&[8], 1.0);
        let b = Array::zeros(&[8]);
        let y = layer_norm(&x, &g, &b, 1e-12).unwrap();
        for row in y.data().chunks(8) {
            let mean = row.iter().sum::<f64>() / 8.0;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn layer_norm_rejects_bad_eps() {
        let x = Array::zeros(&[1, 4]);
        let g = Array::filled(&[4], 1.0);
        let b = Array::zeros(&[4]);
        assert!(matches!(
            layer_norm(&x, &g, &b, 0.0),
            Err(crate::error::Error::Config(_))
        ));
    }

    #[test]
    fn conv_identity_tap_passes_signal_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_array(&[12, 3], &mut rng);
        // kernel[1] = I (current tap), kernel[0] = 0.
        let mut k = Array::zeros(&[2, 3, 3]);
        for i in 0..3 {
            k.data_mut()[9 + i * 3 + i] = 1.0;
        }
        let y = causal_dilated_conv1d(&x, &k, 4).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_impulse_response_lands_on_both_taps() {
        let mut x = Array::zeros(&[12, 1]);
        x.set2(5, 0, 1.0);
        let k = Array::filled(&[2, 1, 1], 1.0);
        let y = causal_dilated_conv1d(&x, &k, 3).unwrap();
        for t in 0..12 {
            let expect = if t == 5 || t == 8 { 1.0 } else { 0.0 };
            assert_eq!(y.at2(t, 0), expect, "t={t}");
        }
    }

    #[test]
    fn conv_matches_direct_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_array(&[10, 2], &mut rng);
        let k = random_array(&[2, 2, 3], &mut rng);
        let y = causal_dilated_conv1d(&x, &k, 2).unwrap();
        for t in 0..10 {
            for o in 0..3 {
                let mut acc = 0.0;
                for ci in 0..2 {
                    if t >= 2 {
                        acc += k.data()[ci * 3 + o] * x.at2(t - 2, ci);
                    }
                    acc += k.data()[6 + ci * 3 + o] * x.at2(t, ci);
                }
                assert!((y.at2(t, o) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_zero_dilation() {
        let x = Array::zeros(&[4, 1]);
        let k = Array::zeros(&[2, 1, 1]);
        assert!(matches!(
            causal_dilated_conv1d(&x, &k, 0),
            Err(crate::error::Error::Config(_))
        ));
    }

    #[test]
    fn conv_is_causal_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_array(&[16, 2], &mut rng);
        let k = random_array(&[2, 2, 2], &mut rng);
        let y = causal_dilated_conv1d(&x, &k, 4).unwrap();
        let mut x2 = x.clone();
        x2.set2(9, 1, 123.456);
        let y2 = causal_dilated_conv1d(&x2, &k, 4).unwrap();
        for t in 0..9 {
            for c in 0..2 {
                assert_eq!(y.at2(t, c).to_bits(), y2.at2(t, c).to_bits());
            }
        }
    }

    #[test]
    fn cross_entropy_uniform_is_ln_vocab() {
        let logits = Array::zeros(&[3, 256]);
        let (loss, _) = cross_entropy_parts(&logits, &[0, 17, 255]).unwrap();
        assert!((loss - 256.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn slice_concat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_array(&[4, 6], &mut rng);
        let a = slice_cols(&x, 0, 2).unwrap();
        let b = slice_cols(&x, 2, 5).unwrap();
        let c = slice_cols(&x, 5, 6).unwrap();
        assert_eq!(concat_cols(&[&a, &b, &c]).unwrap(), x);
    }

    #[test]
    fn shift_rows_zero_pads_top() {
        let x = Array::from_vec(&[3, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let y = shift_rows(&x, 1).unwrap();
        assert_eq!(y.data(), &[0.0, 1.0, 2.0]);
        let z = shift_rows(&x, 5).unwrap();
        assert_eq!(z.data(), &[0.0, 0.0, 0.0]);
    }
}
