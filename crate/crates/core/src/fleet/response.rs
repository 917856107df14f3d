//! Simulated physical response of a device to its commanded setpoints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Pure delay, first-order lag, and positive metering spikes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResponseModel {
    pub delay_s: usize,
    /// Time constant of the lag (s); 0 disables it.
    pub settle_s: f64,
    /// Spike probability per sample.
    pub spike_rate: f64,
    pub spike_min_kw: f64,
    pub spike_max_kw: f64,
}

impl ResponseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.settle_s >= 0.0 && self.settle_s.is_finite()) {
            return Err(Error::invalid(format!(
                "settle time {} must be nonnegative",
                self.settle_s
            )));
        }
        if !(0.0..=1.0).contains(&self.spike_rate) {
            return Err(Error::invalid(format!(
                "spike rate {} outside [0, 1]",
                self.spike_rate
            )));
        }
        if self.spike_rate > 0.0
            && !(0.0 <= self.spike_min_kw && self.spike_min_kw <= self.spike_max_kw)
        {
            return Err(Error::invalid(
                "spike magnitudes must satisfy 0 <= min <= max",
            ));
        }
        Ok(())
    }
}

/// Measured trace for a 1 Hz command. The delay line starts at baseline
/// (0), the lag is sampled exactly under a zero-order hold, and spikes are
/// drawn from a ChaCha stream keyed by `seed`.
pub fn respond(commanded: &[f64], model: &ResponseModel, seed: u64) -> Vec<f64> {
    let n = commanded.len();
    let delayed = (0..n).map(|t| {
        if t >= model.delay_s {
            commanded[t - model.delay_s]
        } else {
            0.0
        }
    });
    let mut out: Vec<f64> = if model.settle_s > 0.0 {
        let a = (-1.0 / model.settle_s).exp();
        let mut y = Vec::with_capacity(n);
        let mut prev_u = 0.0;
        for (t, u) in delayed.enumerate() {
            let next = if t == 0 {
                u
            } else {
                a * y[t - 1] + (1.0 - a) * prev_u
            };
            y.push(next);
            prev_u = u;
        }
        y
    } else {
        delayed.collect()
    };
    if model.spike_rate > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in out.iter_mut() {
            if rng.gen_bool(model.spike_rate) {
                *v += if model.spike_max_kw > model.spike_min_kw {
                    rng.gen_range(model.spike_min_kw..model.spike_max_kw)
                } else {
                    model.spike_min_kw
                };
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(n: usize, at: usize) -> Vec<f64> {
        (0..n).map(|t| if t >= at { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn identity_model() {
        let u: Vec<f64> = (0..50).map(|t| (t as f64 * 0.3).sin()).collect();
        assert_eq!(respond(&u, &ResponseModel::default(), 1), u);
    }

    #[test]
    fn pure_delay_shifts_steps() {
        let u = step(400, 10);
        let m = ResponseModel {
            delay_s: 105,
            ..Default::default()
        };
        let y = respond(&u, &m, 1);
        assert_eq!(y[114], 0.0);
        assert_eq!(y[115], 1.0);
    }

    #[test]
    fn lag_reaches_63_percent_after_one_time_constant() {
        let u = step(200, 20);
        let m = ResponseModel {
            delay_s: 5,
            settle_s: 8.0,
            ..Default::default()
        };
        let y = respond(&u, &m, 1);
        let t0 = 25;
        assert_eq!(y[t0], 0.0);
        assert!((y[t0 + 8] - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn spikes_are_reproducible_and_bounded() {
        let u = vec![0.0; 5000];
        let m = ResponseModel {
            spike_rate: 0.01,
            spike_min_kw: 15.0,
            spike_max_kw: 30.0,
            ..Default::default()
        };
        let a = respond(&u, &m, 9);
        assert_eq!(a, respond(&u, &m, 9));
        assert_ne!(a, respond(&u, &m, 10));
        let spikes: Vec<f64> = a.into_iter().filter(|&v| v != 0.0).collect();
        assert!(!spikes.is_empty());
        assert!(spikes.iter().all(|&v| (15.0..30.0).contains(&v)));
    }
}
