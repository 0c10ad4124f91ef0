use crate::error::{Error, Result};

/// `log((1/N) Σ e^{v_i})` computed with a max shift.
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::arg("log_mean_exp of an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("log_mean_exp input contains NaN"));
    }
    let m = values.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v));
    if m == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if m == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    Ok(m + (s / values.len() as f64).ln())
}

/// `log Σ w_i e^{v_i}` for non-negative weights.
pub fn log_sum_exp_weighted(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::arg("log_sum_exp_weighted needs matching non-empty inputs"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("log_sum_exp_weighted input contains NaN"));
    }
    let m = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .fold(f64::NEG_INFINITY, |a, (v, _)| a.max(*v));
    if !m.is_finite() {
        return Ok(m);
    }
    let s: f64 = values.iter().zip(weights).map(|(v, w)| w * (v - m).exp()).sum();
    Ok(m + s.ln())
}
