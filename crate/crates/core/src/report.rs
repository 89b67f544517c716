//! Full analysis of one design at one bias.

use std::fmt::Write as _;

use serde::Serialize;

use crate::acoustics::{damping, lumped_model};
use crate::decibel::sensitivity_to_db;
use crate::design::{
    MicrophoneDesign, DEFAULT_AIR_VISCOSITY, DEFAULT_DIAPHRAGM_DENSITY, DEFAULT_EPSILON0,
};
use crate::error::{Error, Result};
use crate::statics::{
    design_pull_in, electrical_sensitivity, equilibrium, max_open_circuit_sensitivity,
    mechanical_sensitivity, open_circuit_sensitivity, pull_in_numeric, stress_comparisons,
    OperatingPoint, MEASURED_DIAMETER, PULL_IN_CROSS_CHECK_TOL,
};
use crate::units::Voltage;

/// Sensitivity measured on the 1.9 mm prototype at 12 V, dB re 1 V/Pa.
pub const MEASURED_PROTOTYPE_DB_12V: f64 = -50.2;
/// Same prototype at 24 V.
pub const MEASURED_PROTOTYPE_DB_24V: f64 = -45.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub bias_v: f64,
    pub s_m_m_per_pa: f64,
    pub s_e_v_per_m: f64,
    pub s_o_v_per_pa: f64,
    pub s_o_db: f64,
    /// Open-circuit sensitivity bound as the bias approaches pull-in.
    pub s_o_max_v_per_pa: f64,
    pub v_p_closed_form_v: f64,
    pub v_p_numeric_v: f64,
    pub v_p_relative_difference: f64,
    /// Rest capacitance (no bias, no pressure).
    pub c0_f: f64,
    /// Capacitance at the operating bias.
    pub c_bias_f: f64,
    pub r_a_n_s_per_m: f64,
    pub r_h_n_s_per_m: f64,
    pub r_total_n_s_per_m: f64,
    pub hole_count: f64,
    pub f0_hz: f64,
    pub zeta: f64,
    /// Half-power roll-off, or the scan limit when `cutoff_beyond_range`.
    pub cutoff_hz: f64,
    pub cutoff_beyond_range: bool,
    /// First exit from the ±3 dB band, resonant peak included.
    pub flat_band_edge_hz: f64,
    pub flat_band_beyond_range: bool,
    pub notes: Vec<String>,
}

pub fn analyze(design: &MicrophoneDesign, bias: Voltage) -> Result<AnalysisReport> {
    design.ensure_valid()?;
    let v = bias.value();
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Domain(format!(
            "bias must be > 0 to express sensitivity in dB, got {v} V"
        )));
    }

    let operating = equilibrium(design, OperatingPoint::biased(bias))?;
    let rest = equilibrium(design, OperatingPoint::default())?;

    let s_m = mechanical_sensitivity(&design.diaphragm);
    let s_e = electrical_sensitivity(bias, design.gap);
    let s_o = open_circuit_sensitivity(s_m, s_e);
    let eps = design.environment.epsilon0;

    let v_p = design_pull_in(design).value();
    let v_p_numeric = pull_in_numeric(design)?.value();
    let v_p_diff = (v_p_numeric - v_p).abs() / v_p;
    if !(v_p_diff <= PULL_IN_CROSS_CHECK_TOL) {
        return Err(Error::NumericFailure(format!(
            "numeric pull-in {v_p_numeric:.6} V disagrees with closed form {v_p:.6} V \
             (relative difference {v_p_diff:.3e})"
        )));
    }

    let damp = damping(design)?;
    let model = lumped_model(design, bias)?;
    let cutoff = model.cutoff();
    let edge = model.flat_band_edge();

    let report = AnalysisReport {
        bias_v: v,
        s_m_m_per_pa: s_m.value(),
        s_e_v_per_m: s_e.value(),
        s_o_v_per_pa: s_o.value(),
        s_o_db: sensitivity_to_db(s_o)?,
        s_o_max_v_per_pa: max_open_circuit_sensitivity(design.gap, s_m, eps).value(),
        v_p_closed_form_v: v_p,
        v_p_numeric_v: v_p_numeric,
        v_p_relative_difference: v_p_diff,
        c0_f: rest.capacitance.value(),
        c_bias_f: operating.capacitance.value(),
        r_a_n_s_per_m: damp.gap_resistance.value(),
        r_h_n_s_per_m: damp.hole_resistance.value(),
        r_total_n_s_per_m: damp.total.value(),
        hole_count: damp.hole_count,
        f0_hz: model.resonance.value(),
        zeta: model.damping_ratio,
        cutoff_hz: cutoff.frequency().value(),
        cutoff_beyond_range: cutoff.is_beyond_range(),
        flat_band_edge_hz: edge.frequency().value(),
        flat_band_beyond_range: edge.is_beyond_range(),
        notes: notes(design),
    };
    report.ensure_finite()?;
    Ok(report)
}

impl AnalysisReport {
    fn ensure_finite(&self) -> Result<()> {
        let fields = [
            ("s_m", self.s_m_m_per_pa),
            ("s_e", self.s_e_v_per_m),
            ("s_o", self.s_o_v_per_pa),
            ("s_o_db", self.s_o_db),
            ("s_o_max", self.s_o_max_v_per_pa),
            ("v_p", self.v_p_closed_form_v),
            ("v_p_numeric", self.v_p_numeric_v),
            ("c0", self.c0_f),
            ("c_bias", self.c_bias_f),
            ("r_a", self.r_a_n_s_per_m),
            ("r_h", self.r_h_n_s_per_m),
            ("f0", self.f0_hz),
            ("zeta", self.zeta),
            ("cutoff", self.cutoff_hz),
            ("flat_band_edge", self.flat_band_edge_hz),
        ];
        match fields.iter().find(|(_, v)| !v.is_finite()) {
            Some((name, v)) => Err(Error::NumericFailure(format!("{name} is not finite ({v})"))),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |label: &str, value: String| {
            let _ = writeln!(out, "{label:<34}{value}");
        };
        line("bias", format!("{:.3} V", self.bias_v));
        line("mechanical sensitivity S_m", format!("{:.4} nm/Pa", self.s_m_m_per_pa * 1e9));
        line("electrical sensitivity S_e", format!("{:.6e} V/m", self.s_e_v_per_m));
        line(
            "open-circuit sensitivity S_o",
            format!("{:.6e} V/Pa ({:.2} dB re 1 V/Pa)", self.s_o_v_per_pa, self.s_o_db),
        );
        line("S_o bound at pull-in", format!("{:.6e} V/Pa", self.s_o_max_v_per_pa));
        line("pull-in voltage (closed form)", format!("{:.4} V", self.v_p_closed_form_v));
        line(
            "pull-in voltage (numeric)",
            format!(
                "{:.4} V (relative difference {:.2e})",
                self.v_p_numeric_v, self.v_p_relative_difference
            ),
        );
        line("rest capacitance C0", format!("{:.4} pF", self.c0_f * 1e12));
        line("capacitance at bias", format!("{:.4} pF", self.c_bias_f * 1e12));
        line("gap resistance R_a", format!("{:.4e} N·s/m", self.r_a_n_s_per_m));
        line("hole resistance R_h", format!("{:.4e} N·s/m", self.r_h_n_s_per_m));
        line("total damping", format!("{:.4e} N·s/m", self.r_total_n_s_per_m));
        line("acoustic holes", format!("{}", self.hole_count));
        line("resonance f0", format!("{:.1} Hz", self.f0_hz));
        line("damping ratio", format!("{:.4}", self.zeta));
        line("-3 dB cutoff", band(self.cutoff_hz, self.cutoff_beyond_range));
        line("±3 dB flat band edge", band(self.flat_band_edge_hz, self.flat_band_beyond_range));
        if !self.notes.is_empty() {
            let _ = writeln!(out, "notes:");
            for note in &self.notes {
                let _ = writeln!(out, "  - {note}");
            }
        }
        out
    }
}

fn band(hz: f64, beyond: bool) -> String {
    if beyond {
        format!("flat beyond range (> {hz:.1} Hz)")
    } else {
        format!("{hz:.1} Hz")
    }
}

fn notes(design: &MicrophoneDesign) -> Vec<String> {
    let mut notes = vec![format!(
        "modeled open-circuit sensitivity excludes parasitic capacitance and preamplifier \
         loading; the 1.9 mm prototype measured {MEASURED_PROTOTYPE_DB_12V} dB re 1 V/Pa at 12 V \
         and {MEASURED_PROTOTYPE_DB_24V} dB at 24 V"
    )];
    if design.diaphragm.density == DEFAULT_DIAPHRAGM_DENSITY {
        notes.push(format!(
            "diaphragm density {} kg/m³ is an assumed polyimide value",
            DEFAULT_DIAPHRAGM_DENSITY.value()
        ));
    }
    if design.environment.air_viscosity == DEFAULT_AIR_VISCOSITY {
        notes.push(format!(
            "air viscosity {:e} Pa·s is an assumed room-temperature value",
            DEFAULT_AIR_VISCOSITY.value()
        ));
    }
    if design.environment.epsilon0 != DEFAULT_EPSILON0 {
        notes.push(format!(
            "permittivity overridden to {:e} F/m",
            design.environment.epsilon0.value()
        ));
    }
    if design.diaphragm.diameter == MEASURED_DIAMETER {
        let s_m = mechanical_sensitivity(&design.diaphragm).value();
        for row in stress_comparisons() {
            if row.thickness_m == design.diaphragm.thickness.value() {
                notes.push(format!(
                    "measured S_m {:.0} nm/Pa at this thickness implies {:.2} MPa by the membrane \
                     model, but {:.2} MPa was quoted ({:+.1}%); this design uses {:.2} MPa, \
                     giving S_m {:.2} nm/Pa",
                    row.measured_sensitivity_m_per_pa * 1e9,
                    row.consistent_stress_pa / 1e6,
                    row.quoted_stress_pa / 1e6,
                    row.relative_discrepancy * 100.0,
                    design.diaphragm.residual_stress.value() / 1e6,
                    s_m * 1e9,
                ));
            }
        }
    }
    notes
}
