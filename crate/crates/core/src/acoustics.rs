//! Perforated-backplate damping and single-degree-of-freedom dynamics.
//!
//! Both damping terms are mechanical resistances (N·s/m) and add directly to
//! the damping coefficient of a mass-spring-damper whose stiffness is the
//! inverse membrane compliance `A/S_m` and whose mass is the parabolic-mode
//! effective mass `ρhA/3`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::design::{Backplate, Environment, MicrophoneDesign, Violation};
use crate::error::{Error, Result};
use crate::numeric::bisect;
use crate::statics::{
    design_pull_in, electrical_sensitivity, mechanical_sensitivity, open_circuit_sensitivity,
};
use crate::units::{AreaDensity, Frequency, Length, MechResistance, Voltage};

/// Half-power level, 10·log₁₀2 ≈ 3.0103 dB.
pub const HALF_POWER_DB: f64 = 3.010_299_956_639_812;

/// Scan density used when looking for a band edge.
pub const CUTOFF_POINTS_PER_DECADE: usize = 200;
pub const CUTOFF_SCAN_START_HZ: f64 = 10.0;
/// Band edges are searched up to this multiple of the resonance.
pub const CUTOFF_SCAN_SPAN: f64 = 10.0;
const CUTOFF_REL_TOL: f64 = 1e-9;

/// `A/2 − A²/8 − ln(A)/4 − 3/8` for open-area fraction `A`.
pub fn skvor_bracket(hole_fraction: f64) -> Result<f64> {
    let a = hole_fraction;
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Domain(format!(
            "hole fraction must be in (0, 1], got {a}"
        )));
    }
    Ok(a / 2.0 - a * a / 8.0 - a.ln() / 4.0 - 3.0 / 8.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoleGeometry {
    pub density: AreaDensity,
    pub count: f64,
    pub equivalent_radius: Length,
}

pub fn hole_geometry(backplate: &Backplate) -> Result<HoleGeometry> {
    let count = backplate.hole_count();
    if !(count >= 1.0) {
        return Err(Error::InvalidDesign(vec![Violation {
            path: "backplate".into(),
            message: format!("hole count must be >= 1 (got {count})"),
        }]));
    }
    Ok(HoleGeometry {
        density: backplate.hole_density(),
        count,
        equivalent_radius: backplate.equivalent_hole_radius(),
    })
}

/// Squeeze-film resistance of the air gap,
/// `12·ν·A_eff/(π·d³·n) · bracket(A)`.
pub fn gap_resistance(
    backplate: &Backplate,
    gap: Length,
    environment: &Environment,
) -> Result<MechResistance> {
    let d = gap.value();
    let n = backplate.hole_density().value();
    let bracket = skvor_bracket(backplate.hole_fraction)?;
    Ok(MechResistance::new(
        12.0 * environment.air_viscosity.value() * backplate.effective_area()
            / (PI * d * d * d * n)
            * bracket,
    ))
}

/// Viscous resistance of the holes, `8·ν·t·A_eff/(n·π·r⁴)` with `r` the
/// equal-area radius of a square hole.
pub fn hole_resistance(backplate: &Backplate, environment: &Environment) -> MechResistance {
    let r = backplate.equivalent_hole_radius().value();
    let n = backplate.hole_density().value();
    MechResistance::new(
        8.0 * environment.air_viscosity.value()
            * backplate.thickness.value()
            * backplate.effective_area()
            / (n * PI * r.powi(4)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DampingBreakdown {
    pub gap_resistance: MechResistance,
    pub hole_resistance: MechResistance,
    pub total: MechResistance,
    pub hole_count: f64,
    pub equivalent_hole_radius: Length,
}

pub fn damping(design: &MicrophoneDesign) -> Result<DampingBreakdown> {
    let geometry = hole_geometry(&design.backplate)?;
    let r_a = gap_resistance(&design.backplate, design.gap, &design.environment)?;
    let r_h = hole_resistance(&design.backplate, &design.environment);
    Ok(DampingBreakdown {
        gap_resistance: r_a,
        hole_resistance: r_h,
        total: r_a + r_h,
        hole_count: geometry.count,
        equivalent_hole_radius: geometry.equivalent_radius,
    })
}

/// Second-order model `H(f) = S_o / (1 − (f/f₀)² + j·2ζ·f/f₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LumpedModel {
    /// N/m
    pub stiffness: f64,
    /// kg
    pub effective_mass: f64,
    /// N·s/m
    pub damping: f64,
    /// V/Pa
    pub dc_sensitivity: f64,
    pub resonance: Frequency,
    pub damping_ratio: f64,
}

impl LumpedModel {
    pub fn from_parts(stiffness: f64, effective_mass: f64, damping: f64, dc_sensitivity: f64) -> Self {
        let resonance = (stiffness / effective_mass).sqrt() / (2.0 * PI);
        Self {
            stiffness,
            effective_mass,
            damping,
            dc_sensitivity,
            resonance: Frequency::new(resonance),
            damping_ratio: damping / (2.0 * (stiffness * effective_mass).sqrt()),
        }
    }

    /// `(|H/S_o|, arg H in degrees)` at `f` Hz.
    pub fn normalized(&self, f: f64) -> (f64, f64) {
        let r = f / self.resonance.value();
        let re = 1.0 - r * r;
        let im = 2.0 * self.damping_ratio * r;
        (1.0 / re.hypot(im), -im.atan2(re).to_degrees())
    }

    /// Normalised level in dB relative to the DC value.
    pub fn relative_db(&self, f: f64) -> f64 {
        20.0 * self.normalized(f).0.log10()
    }

    /// Smallest frequency at which the response has fallen to half power
    /// relative to DC.
    pub fn cutoff(&self) -> Cutoff {
        self.first_crossing(|f| -self.relative_db(f) - HALF_POWER_DB)
    }

    /// Smallest frequency at which the response leaves the ±3 dB band around
    /// DC in either direction; a resonant peak counts.
    pub fn flat_band_edge(&self) -> Cutoff {
        self.first_crossing(|f| self.relative_db(f).abs() - HALF_POWER_DB)
    }

    /// Geometric scan followed by bisection for the first `f` where
    /// `outside(f) >= 0`. `outside(0) < 0` for every model.
    fn first_crossing<F: Fn(f64) -> f64>(&self, outside: F) -> Cutoff {
        let limit = CUTOFF_SCAN_SPAN * self.resonance.value();
        let step = 10f64.powf(1.0 / CUTOFF_POINTS_PER_DECADE as f64);
        let mut prev = 0.0;
        let mut k = 0;
        loop {
            let f = (CUTOFF_SCAN_START_HZ * step.powi(k)).min(limit);
            if outside(f) >= 0.0 {
                return match bisect(&outside, prev, f, CUTOFF_REL_TOL) {
                    Ok(root) => Cutoff::At(Frequency::new(root)),
                    Err(_) => Cutoff::At(Frequency::new(f)),
                };
            }
            if f >= limit {
                return Cutoff::BeyondRange(Frequency::new(limit));
            }
            prev = f;
            k += 1;
        }
    }
}

/// A band edge, or the scan limit when the response stays inside the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Cutoff {
    At(Frequency),
    BeyondRange(Frequency),
}

impl Cutoff {
    /// The edge frequency, or the scan limit.
    pub fn frequency(&self) -> Frequency {
        match *self {
            Cutoff::At(f) | Cutoff::BeyondRange(f) => f,
        }
    }

    pub fn is_beyond_range(&self) -> bool {
        matches!(self, Cutoff::BeyondRange(_))
    }
}

/// Dynamic model at a bias. The dynamics themselves do not depend on bias;
/// only the DC gain does.
pub fn lumped_model(design: &MicrophoneDesign, bias: Voltage) -> Result<LumpedModel> {
    let v = bias.value();
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Domain(format!("bias must be >= 0, got {v} V")));
    }
    let v_p = design_pull_in(design).value();
    if v >= v_p {
        return Err(Error::PullInExceeded {
            bias: v,
            pull_in: v_p,
            pressure_index: None,
        });
    }
    let s_m = mechanical_sensitivity(&design.diaphragm);
    let s_o = open_circuit_sensitivity(s_m, electrical_sensitivity(bias, design.gap));
    Ok(LumpedModel {
        dc_sensitivity: s_o.value(),
        ..dynamics(design)?
    })
}

/// Bias-free dynamics (zero DC gain). Enough for resonance and band edges.
pub fn dynamics(design: &MicrophoneDesign) -> Result<LumpedModel> {
    let s_m = mechanical_sensitivity(&design.diaphragm);
    let area = design.diaphragm.area();
    let stiffness = area / s_m.value();
    let mass = design.diaphragm.density.value() * design.diaphragm.thickness.value() * area / 3.0;
    let c = damping(design)?.total.value();
    Ok(LumpedModel::from_parts(stiffness, mass, c, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponsePoint {
    pub frequency_hz: f64,
    /// dB re 1 V/Pa
    pub magnitude_db: f64,
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyResponse {
    pub points: Vec<ResponsePoint>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("frequency grid is empty".into()));
    }
    if let Some(f) = grid.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "frequencies must be finite and > 0, got {f}"
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "frequency grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

impl LumpedModel {
    pub fn response(&self, grid: &[f64]) -> Result<FrequencyResponse> {
        check_grid(grid)?;
        if !(self.dc_sensitivity > 0.0) {
            return Err(Error::Domain(
                "response magnitude is undefined at zero sensitivity (zero bias)".into(),
            ));
        }
        let dc_db = 20.0 * self.dc_sensitivity.log10();
        let points = grid
            .par_iter()
            .map(|&f| {
                let (mag, phase) = self.normalized(f);
                ResponsePoint {
                    frequency_hz: f,
                    magnitude_db: dc_db + 20.0 * mag.log10(),
                    phase_deg: phase,
                }
            })
            .collect();
        Ok(FrequencyResponse { points })
    }
}

pub fn frequency_response(
    design: &MicrophoneDesign,
    bias: Voltage,
    grid: &[f64],
) -> Result<FrequencyResponse> {
    lumped_model(design, bias)?.response(grid)
}

pub fn cutoff_frequency(design: &MicrophoneDesign, bias: Voltage) -> Result<Cutoff> {
    Ok(lumped_model(design, bias)?.cutoff())
}

/// Geometric grid from `fmin` to `fmax` with `per_decade` points per decade.
/// `fmax` is always the last point.
pub fn log_grid(fmin: f64, fmax: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(fmin.is_finite() && fmax.is_finite() && fmin > 0.0 && fmin < fmax) {
        return Err(Error::InvalidInput(format!(
            "need 0 < fmin < fmax, got fmin={fmin}, fmax={fmax}"
        )));
    }
    if per_decade == 0 {
        return Err(Error::InvalidInput(
            "points per decade must be >= 1".into(),
        ));
    }
    let decades = (fmax / fmin).log10();
    let n = (decades * per_decade as f64 + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n)
        .map(|i| fmin * 10f64.powf(i as f64 / per_decade as f64))
        .filter(|f| *f < fmax * (1.0 - 1e-9))
        .collect();
    grid.push(fmax);
    Ok(grid)
}
