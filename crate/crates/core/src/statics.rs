//! Closed-form sensitivities, electrostatic equilibrium and pull-in.
//!
//! The diaphragm is treated as a piston of compliance `S_m` (m/Pa) loaded by
//! the static pressure plus the electrostatic pressure `ε₀V²/(2(d−x)²)`.
//! The pull-in voltage of this model is exactly `sqrt(8d³/(27ε₀S_m))`, which is
//! what lets [`pull_in_numeric`] cross-check [`pull_in_voltage`].

use std::f64::consts::PI;

use serde::Serialize;

use crate::design::{Diaphragm, MicrophoneDesign};
use crate::error::{Error, Result};
use crate::numeric::{bisect, golden_max};
use crate::units::{
    Capacitance, ElecSensitivity, Length, MechSensitivity, OpenCircuitSensitivity, Permittivity,
    Pressure, Voltage,
};

/// Relative tolerance for every root solve in this module.
pub const ROOT_REL_TOL: f64 = 1e-10;

/// Maximum relative disagreement between numeric and closed-form pull-in.
pub const PULL_IN_CROSS_CHECK_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct OperatingPoint {
    pub bias_voltage: Voltage,
    /// Gauge pressure applied uniformly on the diaphragm.
    pub static_pressure: Pressure,
}

impl OperatingPoint {
    pub fn biased(bias: Voltage) -> Self {
        Self {
            bias_voltage: bias,
            static_pressure: Pressure::new(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticState {
    pub piston_deflection: Length,
    pub gap_remaining: Length,
    pub capacitance: Capacitance,
    pub stable: bool,
}

/// Membrane compliance `A / (8π·σ·h)`.
pub fn mechanical_sensitivity(diaphragm: &Diaphragm) -> MechSensitivity {
    MechSensitivity::new(
        diaphragm.area()
            / (8.0 * PI * diaphragm.residual_stress.value() * diaphragm.thickness.value()),
    )
}

/// Residual stress implied by a measured compliance; inverse of
/// [`mechanical_sensitivity`].
pub fn stress_from_sensitivity(
    diameter: Length,
    thickness: Length,
    measured: MechSensitivity,
) -> Result<Pressure> {
    let s = measured.value();
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Domain(format!(
            "mechanical sensitivity must be > 0, got {s} m/Pa"
        )));
    }
    let r = diameter.value() / 2.0;
    let area = PI * r * r;
    Ok(Pressure::new(area / (8.0 * PI * thickness.value() * s)))
}

pub fn electrical_sensitivity(bias: Voltage, gap: Length) -> ElecSensitivity {
    bias / gap
}

pub fn open_circuit_sensitivity(
    s_m: MechSensitivity,
    s_e: ElecSensitivity,
) -> OpenCircuitSensitivity {
    s_m * s_e
}

pub fn pull_in_voltage(gap: Length, s_m: MechSensitivity, epsilon0: Permittivity) -> Voltage {
    let d = gap.value();
    Voltage::new((8.0 / 27.0 * d * d * d / (epsilon0.value() * s_m.value())).sqrt())
}

/// Upper bound on open-circuit sensitivity, reached as the bias approaches
/// pull-in.
pub fn max_open_circuit_sensitivity(
    gap: Length,
    s_m: MechSensitivity,
    epsilon0: Permittivity,
) -> OpenCircuitSensitivity {
    OpenCircuitSensitivity::new(
        (8.0 * gap.value() * s_m.value() / (27.0 * epsilon0.value())).sqrt(),
    )
}

/// Closed-form pull-in voltage of a design.
pub fn design_pull_in(design: &MicrophoneDesign) -> Voltage {
    pull_in_voltage(
        design.gap,
        mechanical_sensitivity(&design.diaphragm),
        design.environment.epsilon0,
    )
}

/// Parallel-plate capacitance with the remaining gap `d − x`.
fn plate_capacitance(design: &MicrophoneDesign, remaining: f64) -> Capacitance {
    Capacitance::new(design.environment.epsilon0.value() * design.diaphragm.area() / remaining)
}

/// Stable piston equilibrium at a bias and static pressure.
///
/// Solves `x = S_m·(P + ε₀V²/(2(d−x)²))` by bisection on the stable branch.
/// The residual is concave in `x`, so the stable root lies below both its
/// vertex and `d/3 + S_m·P`.
pub fn equilibrium(design: &MicrophoneDesign, op: OperatingPoint) -> Result<StaticState> {
    let bias = op.bias_voltage.value();
    let pressure = op.static_pressure.value();
    if !(bias.is_finite() && bias >= 0.0) {
        return Err(Error::Domain(format!("bias must be >= 0, got {bias} V")));
    }
    if !(pressure.is_finite() && pressure >= 0.0) {
        return Err(Error::Domain(format!(
            "static pressure must be >= 0, got {pressure} Pa"
        )));
    }

    let d = design.gap.value();
    let s_m = mechanical_sensitivity(&design.diaphragm).value();
    let v_p = design_pull_in(design).value();
    let exceeded = || Error::PullInExceeded {
        bias,
        pull_in: v_p,
        pressure_index: None,
    };
    if bias >= v_p {
        return Err(exceeded());
    }

    let x_static = s_m * pressure;
    let c = 0.5 * s_m * design.environment.epsilon0.value() * bias * bias;
    let residual = |x: f64| x - x_static - c / ((d - x) * (d - x));

    let x = if c == 0.0 {
        // Purely mechanical load: linear spring.
        if x_static >= d {
            return Err(exceeded());
        }
        x_static
    } else {
        let vertex = d - (2.0 * c).cbrt();
        let upper = vertex.min(d / 3.0 + x_static);
        solve_stable_branch(residual, upper, d).ok_or_else(exceeded)??
    };


    if !(x.is_finite() && x >= 0.0 && x < d) {
        return Err(Error::NumericFailure(format!(
            "equilibrium deflection {x:e} m outside [0, {d:e})"
        )));
    }
    let remaining = d - x;
    Ok(StaticState {
        piston_deflection: Length::new(x),
        gap_remaining: Length::new(remaining),
        capacitance: plate_capacitance(design, remaining),
        stable: true,
    })
}

/// Bisection on `[0, upper]`. `None` when the residual is negative at
/// `upper`, i.e. no equilibrium exists; a rounding-level miss right at the
/// fold is accepted as the root.
fn solve_stable_branch<F: Fn(f64) -> f64>(residual: F, upper: f64, gap: f64) -> Option<Result<f64>> {
    let r_upper = residual(upper);
    if r_upper < 0.0 {
        return (r_upper >= -ROOT_REL_TOL * gap).then_some(Ok(upper));
    }
    Some(bisect(residual, 0.0, upper, ROOT_REL_TOL))
}

/// Pull-in found numerically: the smallest bias at which the force balance
/// has no solution in `[0, d)`.
///
/// Existence at a given bias is decided by maximising the normalised residual
/// `u − c/(d³(1−u)²)` with a golden-section search; no closed-form result
/// enters the computation.
pub fn pull_in_numeric(design: &MicrophoneDesign) -> Result<Voltage> {
    let d = design.gap.value();
    let s_m = mechanical_sensitivity(&design.diaphragm).value();
    let eps = design.environment.epsilon0.value();
    let d3 = d * d * d;

    let margin = |v: f64| {
        let c = 0.5 * s_m * eps * v * v / d3;
        golden_max(|u| u - c / ((1.0 - u) * (1.0 - u)), 0.0, 1.0, 1e-13).1
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while margin(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(Error::NumericFailure(
                "could not bracket the pull-in voltage".into(),
            ));
        }
    }
    bisect(margin, lo, hi, ROOT_REL_TOL).map(Voltage::new)
}

/// Equilibrium capacitance at each static pressure, in input order.
pub fn capacitance_vs_pressure(
    design: &MicrophoneDesign,
    bias: Voltage,
    pressures: &[Pressure],
) -> Result<Vec<(Pressure, Capacitance)>> {
    pressures
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if !(p.is_finite() && p.value() >= 0.0) {
                return Err(Error::Domain(format!(
                    "pressure #{i} must be >= 0, got {} Pa",
                    p.value()
                )));
            }
            let op = OperatingPoint {
                bias_voltage: bias,
                static_pressure: p,
            };
            match equilibrium(design, op) {
                Ok(state) => Ok((p, state.capacitance)),
                Err(Error::PullInExceeded { bias, pull_in, .. }) => Err(Error::PullInExceeded {
                    bias,
                    pull_in,
                    pressure_index: Some(i),
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Capacitance of a membrane with a parabolic deflection profile of centre
/// deflection `w0`: `ε₀πa²/w₀ · ln(d/(d−w₀))`.
pub fn capacitance_profile(design: &MicrophoneDesign, w0: Length) -> Result<Capacitance> {
    let d = design.gap.value();
    let w = w0.value();
    if !(w.is_finite() && w >= 0.0 && w < d) {
        return Err(Error::Domain(format!(
            "centre deflection must be in [0, {d:e}) m, got {w:e} m"
        )));
    }
    let flat = design.environment.epsilon0.value() * design.diaphragm.area() / d;
    let t = w / d;
    // ln(1/(1−t))/t = 1 + t/2 + t²/3 + …
    let factor = if t < 1e-6 {
        1.0 + t / 2.0 + t * t / 3.0
    } else {
        -(-t).ln_1p() / t
    };
    Ok(Capacitance::new(flat * factor))
}

/// A measured compliance of the prototype diaphragm family together with the
/// stress figure that was published alongside it.
#[derive(Debug, Clone, Copy)]
pub struct MeasuredCompliance {
    pub thickness: Length,
    pub sensitivity: MechSensitivity,
    pub quoted_stress: Pressure,
}

/// Measurements on 1.9 mm polyimide diaphragms.
pub const MEASURED_COMPLIANCES: [MeasuredCompliance; 3] = [
    MeasuredCompliance {
        thickness: Length::new(1.0e-6),
        sensitivity: MechSensitivity::new(13e-9),
        quoted_stress: Pressure::new(8.68e6),
    },
    MeasuredCompliance {
        thickness: Length::new(0.8e-6),
        sensitivity: MechSensitivity::new(15e-9),
        quoted_stress: Pressure::new(7.52e6),
    },
    MeasuredCompliance {
        thickness: Length::new(0.6e-6),
        sensitivity: MechSensitivity::new(17e-9),
        quoted_stress: Pressure::new(6.64e6),
    },
];

pub const MEASURED_DIAMETER: Length = Length::new(1.9e-3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StressComparison {
    pub thickness_m: f64,
    pub measured_sensitivity_m_per_pa: f64,
    pub quoted_stress_pa: f64,
    /// Stress that reproduces the measured compliance through the
    /// closed-form membrane model.
    pub consistent_stress_pa: f64,
    pub relative_discrepancy: f64,
}

/// Side-by-side comparison of quoted and model-consistent stresses for every
/// measured compliance.
pub fn stress_comparisons() -> Vec<StressComparison> {
    MEASURED_COMPLIANCES
        .iter()
        .map(|m| {
            let consistent = stress_from_sensitivity(MEASURED_DIAMETER, m.thickness, m.sensitivity)
                .expect("measured compliances are positive")
                .value();
            StressComparison {
                thickness_m: m.thickness.value(),
                measured_sensitivity_m_per_pa: m.sensitivity.value(),
                quoted_stress_pa: m.quoted_stress.value(),
                consistent_stress_pa: consistent,
                relative_discrepancy: (m.quoted_stress.value() - consistent) / consistent,
            }
        })
        .collect()
}
