//! Regulation-market credits and revenue.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::ELIGIBILITY_THRESHOLD;

/// Either daily credits known up front or clearing prices per MW-day.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum Credits {
    Direct { capability: f64, performance: f64 },
    Prices { capability: f64, performance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketInputs {
    pub capacity_kw: f64,
    pub score: f64,
    pub credits: Credits,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyCredits {
    pub capability: f64,
    pub performance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevenueEstimate {
    pub daily: DailyCredits,
    pub annual: f64,
    pub eligible: bool,
    pub warning: Option<String>,
}

pub fn daily_credits(inputs: &MarketInputs) -> Result<DailyCredits> {
    if inputs.capacity_kw.is_nan() || inputs.capacity_kw <= 0.0 {
        return Err(Error::invalid("capacity must be positive"));
    }
    if !(0.0..=1.0).contains(&inputs.score) {
        return Err(Error::invalid(format!(
            "score {} outside [0, 1]",
            inputs.score
        )));
    }
    match inputs.credits {
        Credits::Direct {
            capability,
            performance,
        } => {
            if capability < 0.0 || performance < 0.0 {
                return Err(Error::invalid("credits must be nonnegative"));
            }
            Ok(DailyCredits {
                capability,
                performance,
            })
        }
        Credits::Prices {
            capability,
            performance,
        } => {
            if capability < 0.0 || performance < 0.0 {
                return Err(Error::invalid("prices must be nonnegative"));
            }
            let scale = inputs.capacity_kw / 1000.0 * inputs.score;
            Ok(DailyCredits {
                capability: scale * capability,
                performance: scale * performance,
            })
        }
    }
}

/// `(capability + performance) * 365`.
pub fn annual_revenue(daily_capability: f64, daily_performance: f64) -> f64 {
    (daily_capability + daily_performance) * 365.0
}

/// Credits and annual revenue, zeroed with a warning when the score misses
/// the eligibility threshold.
pub fn estimate_revenue(inputs: &MarketInputs) -> Result<RevenueEstimate> {
    let daily = daily_credits(inputs)?;
    if inputs.score < ELIGIBILITY_THRESHOLD {
        return Ok(RevenueEstimate {
            daily: DailyCredits {
                capability: 0.0,
                performance: 0.0,
            },
            annual: 0.0,
            eligible: false,
            warning: Some(format!(
                "performance score {:.4} is below {ELIGIBILITY_THRESHOLD}; no market revenue",
                inputs.score
            )),
        });
    }
    Ok(RevenueEstimate {
        daily,
        annual: annual_revenue(daily.capability, daily.performance),
        eligible: true,
        warning: None,
    })
}
