//! Forward-only numeric primitives shared by the tape and by callers that
//! just need the values (tests, evaluation code).

use super::Tensor;
use crate::error::{Error, Result};

/// Softmax along `axis` with max-subtraction for stability. Output entries
/// along the axis are positive and sum to 1.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    if axis >= x.rank() {
        return Err(Error::invalid(format!(
            "softmax axis {} out of range for rank {}",
            axis,
            x.rank()
        )));
    }
    let shape = x.shape().to_vec();
    let axis_len = shape[axis];
    if axis_len == 0 {
        return Err(Error::invalid("softmax over empty axis"));
    }
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; x.len()];
    let data = x.data();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |a: usize| o * axis_len * inner + a * inner + i;
            let max = (0..axis_len).map(|a| data[idx(a)]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for a in 0..axis_len {
                let e = (data[idx(a)] - max).exp();
                out[idx(a)] = e;
                sum += e;
            }
            for a in 0..axis_len {
                out[idx(a)] /= sum;
            }
        }
    }
    Tensor::from_vec(shape, out)
}

/// Standardize each row of `x` to zero mean / unit variance, then apply the
/// per-column affine `gain * x + bias`. Zero-variance rows map to the bias
/// through the epsilon guard.
pub fn layer_norm(x: &Tensor, gain: &Tensor, bias: &Tensor, epsilon: f64) -> Result<Tensor> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("layer_norm epsilon must be positive"));
    }
    let d = x.cols();
    if gain.len() != d || bias.len() != d {
        return Err(Error::invalid(format!(
            "layer_norm gain/bias length {} / {} does not match row width {}",
            gain.len(),
            bias.len(),
            d
        )));
    }
    let rows = x.rows();
    let mut out = vec![0.0; x.len()];
    for r in 0..rows {
        let row = &x.data()[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let inv_std = 1.0 / (var + epsilon).sqrt();
        for j in 0..d {
            out[r * d + j] = (row[j] - mean) * inv_std * gain.data()[j] + bias.data()[j];
        }
    }
    Tensor::from_vec(x.shape().to_vec(), out)
}

/// Mean negative log-likelihood of `targets` under row-wise softmax of
/// `logits`, skipping positions whose target is `pad_id`.
pub fn cross_entropy(logits: &Tensor, targets: &[usize], pad_id: usize) -> Result<f64> {
    if logits.rank() != 2 {
        return Err(Error::invalid("cross_entropy expects [sequence, vocabulary] logits"));
    }
    let (rows, vocab) = (logits.rows(), logits.cols());
    if targets.len() != rows {
        return Err(Error::invalid(format!(
            "cross_entropy target length {} != sequence length {}",
            targets.len(),
            rows
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (r, &t) in targets.iter().enumerate() {
        if t == pad_id {
            continue;
        }
        if t >= vocab {
            return Err(Error::invalid(format!("target id {t} out of vocabulary {vocab}")));
        }
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        total += lse - row[t];
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("no supervised positions"));
    }
    Ok(total / count as f64)
}
