use crate::error::{invalid, Result};

/// `log Σ exp(v_i)`, shifted by the maximum. All-`-inf` input gives `-inf`.
pub fn logsumexp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return invalid("logsumexp of an empty vector");
    }
    Ok(logsumexp_unchecked(values))
}

pub(crate) fn logsumexp_unchecked(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Running `logsumexp` over values arriving in batches.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    value: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self { value: f64::NEG_INFINITY }
    }
}

impl LogSumExp {
    pub fn push(&mut self, v: f64) {
        self.value = log_add_exp(self.value, v);
    }

    /// Folds in a whole batch at once; the batch is reduced before merging.
    pub fn extend(&mut self, batch: &[f64]) {
        if !batch.is_empty() {
            self.push(logsumexp_unchecked(batch));
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
