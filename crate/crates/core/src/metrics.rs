//! Tracking and market-performance scores.

use crate::error::{Error, Result};

/// Length of the PJM delay window (s).
pub const DELAY_WINDOW_S: usize = 300;

/// Score required for market eligibility.
pub const ELIGIBILITY_THRESHOLD: f64 = 0.75;

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::invalid("empty trace"));
    }
    Ok(())
}

/// `sqrt(sum (prov - tar)^2 / sum tar^2)`.
pub fn rmse(provided: &[f64], target: &[f64]) -> Result<f64> {
    same_len(provided, target)?;
    let den: f64 = target.iter().map(|t| t * t).sum();
    if den == 0.0 {
        return Err(Error::invalid("target has zero energy"));
    }
    let num: f64 = provided
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((num / den).sqrt())
}

/// Overlapping segments after advancing `provided` by `shift` samples.
fn aligned<'a>(provided: &'a [f64], target: &'a [f64], shift: usize) -> (&'a [f64], &'a [f64]) {
    let n = provided.len();
    (&provided[shift..], &target[..n - shift])
}

fn check_shift(n: usize, max_shift: usize) -> Result<()> {
    if max_shift + 1 >= n {
        return Err(Error::invalid(format!(
            "max shift {max_shift} leaves fewer than two overlapping samples of {n}"
        )));
    }
    Ok(())
}

/// Shift in `[0, max_shift]` minimizing the RMSE of the advanced provided
/// trace against the target; ties resolve to the smallest shift.
pub fn tracking_delay(provided: &[f64], target: &[f64], max_shift: usize) -> Result<usize> {
    same_len(provided, target)?;
    check_shift(provided.len(), max_shift)?;
    let mut best = (f64::INFINITY, 0);
    for d in 0..=max_shift {
        let (p, t) = aligned(provided, target, d);
        let Ok(e) = rmse(p, t) else { continue };
        if e < best.0 {
            best = (e, d);
        }
    }
    if best.0.is_infinite() {
        return Err(Error::invalid("target has zero energy at every shift"));
    }
    Ok(best.1)
}

/// Advances `provided` by `shift` samples and returns the overlapping pair.
pub fn shift_align(provided: &[f64], target: &[f64], shift: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    same_len(provided, target)?;
    if shift >= provided.len() {
        return Err(Error::invalid("shift exceeds trace length"));
    }
    let (p, t) = aligned(provided, target, shift);
    Ok((p.to_vec(), t.to_vec()))
}

/// Sample Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(a, b)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::invalid("correlation of a constant trace"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// `|(delay - 300) / 300|`, optionally clipped to `[0, 1]`.
pub fn delay_score(delay_s: f64, clip: bool) -> f64 {
    let w = DELAY_WINDOW_S as f64;
    let s = ((delay_s - w) / w).abs();
    if clip {
        s.min(1.0)
    } else {
        s
    }
}

/// `1 - mean(|prov - tar|) / |mean(tar)|`.
pub fn precision_score(provided: &[f64], target: &[f64]) -> Result<f64> {
    same_len(provided, target)?;
    let n = target.len() as f64;
    let mu = target.iter().sum::<f64>() / n;
    if mu == 0.0 {
        return Err(Error::invalid("target mean is zero"));
    }
    let mae = provided
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n;
    Ok(1.0 - mae / mu.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PjmOptions {
    pub max_shift: usize,
    pub clip_delay: bool,
}

impl Default for PjmOptions {
    fn default() -> Self {
        Self {
            max_shift: DELAY_WINDOW_S,
            clip_delay: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PjmScore {
    pub correlation: f64,
    pub delay: f64,
    pub precision: f64,
    pub score: f64,
    /// Shift (s) at which the correlation peaks.
    pub delay_s: usize,
    pub eligible: bool,
}

impl PjmScore {
    pub fn from_components(correlation: f64, delay: f64, precision: f64) -> Self {
        Self::with_shift(correlation, delay, precision, 0)
    }

    fn with_shift(correlation: f64, delay: f64, precision: f64, delay_s: usize) -> Self {
        let score = (correlation + delay + precision) / 3.0;
        Self {
            correlation,
            delay,
            precision,
            score,
            delay_s,
            eligible: score >= ELIGIBILITY_THRESHOLD,
        }
    }
}

/// Correlation, delay, and precision scores and their mean.
///
/// The correlation score is the peak correlation over shifts in
/// `[0, max_shift]`; the delay score uses that peak's shift. Precision is
/// evaluated without shifting.
pub fn pjm_score(provided: &[f64], target: &[f64], opts: PjmOptions) -> Result<PjmScore> {
    same_len(provided, target)?;
    check_shift(provided.len(), opts.max_shift)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for d in 0..=opts.max_shift {
        let (p, t) = aligned(provided, target, d);
        let Ok(c) = correlation(p, t) else { continue };
        if c > best.0 {
            best = (c, d);
        }
    }
    if best.0.is_infinite() {
        return Err(Error::invalid(
            "degenerate traces: no shift has a defined correlation",
        ));
    }
    let precision = precision_score(provided, target)?;
    Ok(PjmScore::with_shift(
        best.0,
        delay_score(best.1 as f64, opts.clip_delay),
        precision,
        best.1,
    ))
}

/// Running `sum (d - t)^2 / sum t^2`; equal to the ratio of means.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MseAccumulator {
    num: f64,
    den: f64,
    count: usize,
}

impl MseAccumulator {
    pub fn add(&mut self, distributed: f64, truth: f64) {
        self.num += (distributed - truth) * (distributed - truth);
        self.den += truth * truth;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &MseAccumulator) {
        self.num += other.num;
        self.den += other.den;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn value(&self) -> Result<f64> {
        if self.den == 0.0 {
            return Err(Error::invalid("true solutions have zero energy"));
        }
        Ok(self.num / self.den)
    }
}

/// `mean((d - t)^2) / mean(t^2)`.
pub fn normalized_mse(distributed: &[f64], truth: &[f64]) -> Result<f64> {
    same_len(distributed, truth)?;
    let mut acc = MseAccumulator::default();
    for (&d, &t) in distributed.iter().zip(truth) {
        acc.add(d, t);
    }
    acc.value()
}
