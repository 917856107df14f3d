//! Two-stage actuation: slow devices first, accurate devices on the
//! remaining error.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StageTarget {
    pub target: Vec<f64>,
    /// Seconds at which the stage-2 range was exceeded.
    pub clamped: Vec<usize>,
}

/// `target - stage1_measured`, clamped to the stage-2 range `[lower, upper]`.
pub fn two_stage_target(
    target: &[f64],
    stage1_measured: &[f64],
    lower: f64,
    upper: f64,
) -> Result<StageTarget> {
    if target.len() != stage1_measured.len() {
        return Err(Error::LengthMismatch(target.len(), stage1_measured.len()));
    }
    if lower > upper {
        return Err(Error::invalid("stage-2 range is empty"));
    }
    let mut clamped = Vec::new();
    let target = target
        .iter()
        .zip(stage1_measured)
        .enumerate()
        .map(|(k, (t, m))| {
            let raw = t - m;
            let v = raw.clamp(lower, upper);
            if v != raw {
                clamped.push(k);
            }
            v
        })
        .collect();
    Ok(StageTarget { target, clamped })
}

/// Warnings for a stage split that breaks the recommended rules: stage-1
/// capacity at most stage-2 capacity, stage-1 RMSE below 0.5.
pub fn rules_of_thumb(stage1_capacity: f64, stage2_capacity: f64, stage1_rmse: f64) -> Vec<String> {
    let mut out = Vec::new();
    if stage1_capacity > stage2_capacity {
        out.push(format!(
            "stage-1 capacity {stage1_capacity:.1} kW exceeds stage-2 capacity {stage2_capacity:.1} kW"
        ));
    }
    if stage1_rmse >= 0.5 {
        out.push(format!("stage-1 RMSE {stage1_rmse:.3} is not below 0.5"));
    }
    out
}
