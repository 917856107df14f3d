//! Uniformly sampled traces and construction of the reference signal.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Uniformly sampled time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    start: f64,
    period: f64,
    values: Vec<f64>,
}

impl SignalTrace {
    pub fn new(start: f64, period: f64, values: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) || !start.is_finite() {
            return Err(Error::invalid(format!(
                "bad sampling: start {start}, period {period}"
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {k}")));
        }
        Ok(Self {
            start,
            period,
            values,
        })
    }

    /// 1 Hz trace starting at `t = 0`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(0.0, 1.0, values)
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            start: 0.0,
            period: 1.0,
            values: vec![0.0; len],
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.period
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Same sampling, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.start, self.period, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Reads a `t_s,value` CSV. Times must be strictly increasing and
    /// uniformly spaced.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file).map_err(|e| match e {
            Error::Csv { message, .. } | Error::InvalidInput(message) => Error::Csv {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let bad = |message: String| Error::Csv {
            path: Default::default(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.len() != 2 || &header[0] != "t_s" || &header[1] != "value" {
            return Err(bad(format!(
                "expected header `t_s,value`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let line = row + 2;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("line {line}: `{s}` is not a number")))
            };
            times.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        if times.is_empty() {
            return Err(bad("no samples".into()));
        }
        let period = if times.len() > 1 {
            times[1] - times[0]
        } else {
            1.0
        };
        if period.is_nan() || period <= 0.0 {
            return Err(bad("times must be strictly increasing".into()));
        }
        for (k, w) in times.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if (dt - period).abs() > 1e-6 * period {
                return Err(bad(format!("line {}: non-uniform sampling", k + 3)));
            }
        }
        Self::new(times[0], period, values).map_err(|e| bad(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["t_s", "value"]).map_err(csv_err)?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record([fmt_num(self.time(k)), fmt_num(*v)])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Shortest round-trip formatting; `-0` prints as `0`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

/// Halves the sample period by inserting linear midpoints.
pub fn interpolate_2x(trace: &SignalTrace) -> Result<SignalTrace> {
    let v = trace.values();
    if v.len() < 2 {
        return Err(Error::invalid("interpolation needs at least two samples"));
    }
    let mut out = Vec::with_capacity(2 * v.len() - 1);
    for w in v.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(v[v.len() - 1]);
    SignalTrace::new(trace.start(), trace.period() / 2.0, out)
}

/// `beta * capacity / ||c||_inf * c` with `c = regd + pv - building`.
pub fn compose_target(
    regd: &SignalTrace,
    pv: &SignalTrace,
    building: &SignalTrace,
    total_capacity: f64,
    beta: f64,
) -> Result<SignalTrace> {
    if pv.len() != regd.len() {
        return Err(Error::LengthMismatch(regd.len(), pv.len()));
    }
    if building.len() != regd.len() {
        return Err(Error::LengthMismatch(regd.len(), building.len()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    if !(total_capacity >= 0.0 && total_capacity.is_finite()) {
        return Err(Error::invalid(format!(
            "bad total capacity {total_capacity}"
        )));
    }
    let combined: Vec<f64> = regd
        .values()
        .iter()
        .zip(pv.values())
        .zip(building.values())
        .map(|((r, p), b)| r + p - b)
        .collect();
    let norm = combined.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        return Err(Error::invalid("combined signal is identically zero"));
    }
    let gain = beta * total_capacity / norm;
    regd.with_values(combined.into_iter().map(|c| gain * c).collect())
}

/// Zero-order hold refreshed at samples `k >= offset` with
/// `(k - offset) % period == 0`. Samples before the first refresh hold the
/// first sample. `period` and `offset` count samples.
pub fn stair_step(trace: &SignalTrace, period: usize, offset: usize) -> Result<SignalTrace> {
    if period == 0 {
        return Err(Error::invalid("update period must be at least one sample"));
    }
    let v = trace.values();
    let mut out = Vec::with_capacity(v.len());
    let mut held = v.first().copied().unwrap_or(0.0);
    for (k, &x) in v.iter().enumerate() {
        if is_update_instant(k, period, offset) {
            held = x;
        }
        out.push(held);
    }
    trace.with_values(out)
}

/// Whether sample `k` is a refresh instant of a zero-order hold.
pub fn is_update_instant(k: usize, period: usize, offset: usize) -> bool {
    k >= offset && (k - offset).is_multiple_of(period)
}

/// Scales a trace to unit infinity norm, then by `weight`. An all-zero trace
/// stays zero.
pub fn normalize_inf(trace: &SignalTrace, weight: f64) -> Result<SignalTrace> {
    let norm = trace.inf_norm();
    if norm == 0.0 {
        return Ok(trace.clone());
    }
    trace.map(|v| weight * v / norm)
}

/// Band-limited, zero-mean, energy-neutral surrogate of a 40 min RegD
/// record: 1201 samples at 0.5 Hz, peak magnitude 1. Tones have periods
/// between 2 and 20 minutes with amplitude falling as 1/frequency.
pub fn synthetic_regd(seed: u64) -> SignalTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 1201;
    let horizon = 2400.0;
    // Whole cycles over the horizon keep the record energy-neutral.
    let tones: Vec<(f64, f64, f64)> = (0..12)
        .map(|_| {
            let cycles = rng.gen_range(2..=20) as f64;
            let amp = rng.gen_range(0.3..1.0) / cycles;
            let phase = rng.gen_range(0.0..2.0 * PI);
            (cycles, amp, phase)
        })
        .collect();
    let mut v: Vec<f64> = (0..m)
        .map(|k| {
            let t = 2.0 * k as f64;
            tones
                .iter()
                .map(|&(c, a, ph)| a * (2.0 * PI * c * t / horizon + ph).sin())
                .sum()
        })
        .collect();
    let mean = v.iter().sum::<f64>() / m as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let peak = v.iter().fold(0.0f64, |p, x| p.max(x.abs()));
    v.iter_mut().for_each(|x| *x /= peak);
    SignalTrace::new(0.0, 2.0, v).expect("finite by construction")
}

/// Midday photovoltaic output with passing clouds, 2401 samples at 1 Hz,
/// in `[0, 1]`.
pub fn synthetic_pv(seed: u64) -> SignalTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2401;
    let mut v = vec![0.0; n];
    let mut shade = 0.0f64;
    let mut target = 0.0f64;
    for (k, x) in v.iter_mut().enumerate() {
        if k % 120 == 0 {
            target = if rng.gen_bool(0.35) {
                rng.gen_range(0.2..0.6)
            } else {
                0.0
            };
        }
        shade += (target - shade) / 30.0;
        let clear = 0.95 - 0.05 * (k as f64 / n as f64 - 0.5).powi(2);
        *x = (clear * (1.0 - shade)).clamp(0.0, 1.0);
    }
    SignalTrace::from_values(v).expect("finite by construction")
}

/// Building load with slow ramps and equipment cycling, 2401 samples at
/// 1 Hz, in `[0, 1]`.
pub fn synthetic_building(seed: u64) -> SignalTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2401;
    let mut v = vec![0.0; n];
    let mut step = 0.0;
    for (k, x) in v.iter_mut().enumerate() {
        if k % 300 == 0 {
            step = rng.gen_range(0.0..0.15);
        }
        let t = k as f64 / n as f64;
        *x = (0.7 + 0.1 * (2.0 * PI * t).sin() + step).clamp(0.0, 1.0);
    }
    SignalTrace::from_values(v).expect("finite by construction")
}
