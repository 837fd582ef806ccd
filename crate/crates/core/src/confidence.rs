//! Response confidence (peak value and APCE) and the high-confidence update
//! gate.

use serde::{Deserialize, Serialize};

use crate::detector::ResponseMap;
use crate::error::{invalid, Result};

/// Average peak-to-correlation energy of a surface,
/// `(max - min)^2 / mean((F - min)^2)`. `None` for a constant surface.
pub fn apce_values(values: &[f64]) -> Option<f64> {
    if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if !(range > 0.0) {
        return None;
    }
    // normalizing by the range first keeps impulse maps exact
    let energy: f64 = values.iter().map(|v| ((v - min) / range).powi(2)).sum();
    let apce = values.len() as f64 / energy;
    apce.is_finite().then_some(apce)
}

pub fn apce(response: &ResponseMap) -> Option<f64> {
    apce_values(response.values())
}

/// Running means of peak value and APCE over every evaluated frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateGateState {
    pub mean_fmax: f64,
    pub mean_apce: f64,
    pub count: u64,
    pub beta1: f64,
    pub beta2: f64,
}

impl UpdateGateState {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        if !(beta1 > 0.0 && beta1.is_finite() && beta2 > 0.0 && beta2.is_finite()) {
            return invalid(format!("gate ratios must be positive, got {beta1} and {beta2}"));
        }
        Ok(Self {
            mean_fmax: 0.0,
            mean_apce: 0.0,
            count: 0,
            beta1,
            beta2,
        })
    }
}

/// Gate decision for one frame and the history with that frame included.
///
/// The first evaluated frame always passes. A degenerate response
/// (`apce_value == None`) or a non-finite peak fails and leaves the history
/// untouched.
pub fn should_update(gate: &UpdateGateState, f_max: f64, apce_value: Option<f64>) -> (bool, UpdateGateState) {
    let Some(apce_value) = apce_value.filter(|a| a.is_finite()) else {
        return (false, *gate);
    };
    if !f_max.is_finite() {
        return (false, *gate);
    }
    let decision =
        gate.count == 0 || (f_max >= gate.beta1 * gate.mean_fmax && apce_value >= gate.beta2 * gate.mean_apce);
    let n = gate.count as f64;
    let next = UpdateGateState {
        mean_fmax: (gate.mean_fmax * n + f_max) / (n + 1.0),
        mean_apce: (gate.mean_apce * n + apce_value) / (n + 1.0),
        count: gate.count + 1,
        ..*gate
    };
    (decision, next)
}
