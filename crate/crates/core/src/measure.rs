//! Cleaning of measured power traces.

use serde::Deserialize;

use crate::error::{Error, Result};

/// Post-processing applied to one measured trace.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    /// Moving-average window in samples; 1 disables averaging.
    pub window: usize,
    pub remove_outliers: bool,
    /// Jump threshold as a fraction of the mean magnitude.
    pub outlier_fraction: f64,
    /// Longest departure still treated as a spike.
    pub max_spike_len: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            window: 1,
            remove_outliers: false,
            outlier_fraction: 0.5,
            max_spike_len: 3,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("filter window must be at least 1"));
        }
        if self.outlier_fraction.is_nan() || self.outlier_fraction <= 0.0 {
            return Err(Error::invalid("outlier fraction must be positive"));
        }
        if self.max_spike_len == 0 {
            return Err(Error::invalid("max spike length must be at least 1"));
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        let cleaned = if self.remove_outliers {
            remove_outliers_with(x, self.outlier_fraction, self.max_spike_len)
        } else {
            x.to_vec()
        };
        moving_average(&cleaned, self.window)
    }
}

/// Trailing mean over `window` samples; the first `window - 1` outputs
/// average the available prefix.
pub fn moving_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::invalid("moving average of an empty trace"));
    }
    if window == 0 {
        return Err(Error::invalid("moving-average window must be at least 1"));
    }
    if window == 1 {
        return Ok(x.to_vec());
    }
    // Direct summation per output keeps constants exact.
    Ok((0..x.len())
        .map(|k| {
            let lo = (k + 1).saturating_sub(window);
            let slice = &x[lo..=k];
            let first = slice[0];
            if slice.iter().all(|&v| v == first) {
                first
            } else {
                slice.iter().sum::<f64>() / slice.len() as f64
            }
        })
        .collect())
}

/// [`remove_outliers_with`] at the default threshold of half the mean
/// magnitude and spikes of at most 3 samples.
pub fn remove_outliers(x: &[f64]) -> Vec<f64> {
    remove_outliers_with(x, 0.5, 3)
}

/// Replaces short-lived jumps by the last retained value.
///
/// A sample whose distance from the last retained value exceeds
/// `fraction * mean(|x|)` is an outlier when the trace comes back within
/// that band no more than `max_spike_len` samples later (or ends first).
/// A departure that persists longer is a genuine level change and is kept.
/// Passes repeat until nothing changes, so the result is a fixed point.
pub fn remove_outliers_with(x: &[f64], fraction: f64, max_spike_len: usize) -> Vec<f64> {
    let mut cur = x.to_vec();
    for _ in 0..64 {
        let (next, changed) = outlier_pass(&cur, fraction, max_spike_len);
        cur = next;
        if !changed {
            break;
        }
    }
    cur
}

fn outlier_pass(x: &[f64], fraction: f64, max_spike_len: usize) -> (Vec<f64>, bool) {
    if x.is_empty() {
        return (Vec::new(), false);
    }
    let mu = x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64;
    let thr = fraction * mu;
    let mut out = Vec::with_capacity(x.len());
    let mut retained = x[0];
    let mut changed = false;
    out.push(x[0]);
    for k in 1..x.len() {
        if (x[k] - retained).abs() <= thr {
            retained = x[k];
            out.push(x[k]);
            continue;
        }
        let end = (k + max_spike_len).min(x.len() - 1);
        let returns = x[k + 1..=end].iter().any(|&v| (v - retained).abs() <= thr);
        let truncated = k + max_spike_len > x.len() - 1;
        if returns || truncated {
            out.push(retained);
            changed = true;
        } else {
            retained = x[k];
            out.push(x[k]);
        }
    }
    (out, changed)
}
