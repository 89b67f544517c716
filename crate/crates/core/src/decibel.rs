//! Sensitivity on the dB re 1 V/Pa scale.

use crate::error::{Error, Result};
use crate::units::OpenCircuitSensitivity;

pub fn sensitivity_to_db(s: OpenCircuitSensitivity) -> Result<f64> {
    let v = s.value();
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Domain(format!(
            "sensitivity must be finite and > 0 for dB conversion, got {v} V/Pa"
        )));
    }
    Ok(20.0 * v.log10())
}

pub fn db_to_sensitivity(db: f64) -> Result<OpenCircuitSensitivity> {
    if !db.is_finite() {
        return Err(Error::Domain(format!("level must be finite, got {db} dB")));
    }
    Ok(OpenCircuitSensitivity::new(10f64.powf(db / 20.0)))
}
