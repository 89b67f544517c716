//! Microphone design data model, validation and the JSON design-file format.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{AreaDensity, Density, Length, Permittivity, Pressure, Viscosity};

/// Polyimide, used when a design does not say otherwise.
pub const DEFAULT_DIAPHRAGM_DENSITY: Density = Density::new(1420.0);
pub const DEFAULT_EPSILON0: Permittivity = Permittivity::new(8.854e-12);
pub const DEFAULT_AIR_VISCOSITY: Viscosity = Viscosity::new(1.86e-5);
pub const DEFAULT_AIR_DENSITY: Density = Density::new(1.2);

/// Operating bias of the reference prototype.
pub const REFERENCE_BIAS_V: f64 = 12.0;

/// Flexible tensioned plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diaphragm {
    #[serde(rename = "diameter_m")]
    pub diameter: Length,
    #[serde(rename = "thickness_m")]
    pub thickness: Length,
    /// Tensile residual stress.
    #[serde(rename = "residual_stress_pa")]
    pub residual_stress: Pressure,
    #[serde(rename = "density_kg_m3")]
    pub density: Density,
}

impl Diaphragm {
    pub fn radius(&self) -> Length {
        self.diameter / 2.0
    }

    /// Plate area π·(D/2)².
    pub fn area(&self) -> f64 {
        let r = self.radius().value();
        PI * r * r
    }
}

/// Rigid perforated counter-electrode. Holes are square with side
/// `hole_side` and cover `hole_fraction` of the plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Backplate {
    #[serde(rename = "thickness_m")]
    pub thickness: Length,
    #[serde(rename = "hole_side_m")]
    pub hole_side: Length,
    pub hole_fraction: f64,
    #[serde(rename = "diameter_m")]
    pub diameter: Length,
}

impl Backplate {
    /// Holes per unit area, `hole_fraction / hole_side²`.
    pub fn hole_density(&self) -> AreaDensity {
        let s = self.hole_side.value();
        AreaDensity::new(self.hole_fraction / (s * s))
    }

    /// Effective (electrode) area π·(D/2)².
    pub fn effective_area(&self) -> f64 {
        let r = self.diameter.value() / 2.0;
        PI * r * r
    }

    /// Radius of the circle with the same area as one square hole.
    pub fn equivalent_hole_radius(&self) -> Length {
        self.hole_side / PI.sqrt()
    }

    pub fn hole_count(&self) -> f64 {
        (self.hole_density().value() * self.effective_area()).round()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    #[serde(rename = "air_viscosity_pa_s")]
    pub air_viscosity: Viscosity,
    #[serde(rename = "epsilon0_f_m")]
    pub epsilon0: Permittivity,
    #[serde(rename = "air_density_kg_m3")]
    pub air_density: Density,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            air_viscosity: DEFAULT_AIR_VISCOSITY,
            epsilon0: DEFAULT_EPSILON0,
            air_density: DEFAULT_AIR_DENSITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrophoneDesign {
    pub diaphragm: Diaphragm,
    pub backplate: Backplate,
    #[serde(rename = "gap_m")]
    pub gap: Length,
    pub environment: Environment,
}

impl MicrophoneDesign {
    /// Reference prototype: 1.9 mm / 0.6 μm polyimide diaphragm, 10 μm gap,
    /// 24 % of 80 μm square holes in a 100 μm plate.
    ///
    /// The residual stress is 11.06 MPa, the value for which the closed-form
    /// membrane compliance reproduces the measured 17 nm/Pa.
    pub fn reference() -> Self {
        Self {
            diaphragm: Diaphragm {
                diameter: Length::new(1.9e-3),
                thickness: Length::new(0.6e-6),
                residual_stress: Pressure::new(11.06e6),
                density: DEFAULT_DIAPHRAGM_DENSITY,
            },
            backplate: Backplate {
                thickness: Length::new(100e-6),
                hole_side: Length::new(80e-6),
                hole_fraction: 0.24,
                diameter: Length::new(1.9e-3),
            },
            gap: Length::new(10e-6),
            environment: Environment::default(),
        }
    }

    /// The reference prototype with the published 6.64 MPa stress figure,
    /// which does not reproduce 17 nm/Pa through the closed-form compliance.
    pub fn reference_quoted_stress() -> Self {
        let mut design = Self::reference();
        design.diaphragm.residual_stress = Pressure::new(6.64e6);
        design
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Read and validate a design file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let design = Self::from_json(&text)?;
        design.ensure_valid()?;
        Ok(design)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDesign(violations))
        }
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Checker(Vec<Violation>);

impl Checker {
    fn positive(&mut self, path: &str, name: &str, value: f64) {
        if !value.is_finite() {
            self.push(path, format!("{name} must be finite"));
        } else if value <= 0.0 {
            self.push(path, format!("{name} must be > 0"));
        }
    }

    fn push(&mut self, path: &str, message: String) {
        self.0.push(Violation {
            path: path.to_string(),
            message,
        });
    }
}

/// Every violated invariant of `design`, in a fixed field order. An empty list
/// means the design is valid.
pub fn validate(design: &MicrophoneDesign) -> Vec<Violation> {
    let mut c = Checker(Vec::new());
    let d = &design.diaphragm;
    c.positive("diaphragm.diameter_m", "diameter", d.diameter.value());
    c.positive("diaphragm.thickness_m", "thickness", d.thickness.value());
    c.positive(
        "diaphragm.residual_stress_pa",
        "residual_stress",
        d.residual_stress.value(),
    );
    c.positive("diaphragm.density_kg_m3", "density", d.density.value());

    let b = &design.backplate;
    c.positive("backplate.thickness_m", "thickness", b.thickness.value());
    c.positive("backplate.hole_side_m", "hole_side", b.hole_side.value());
    let fraction_ok = b.hole_fraction.is_finite() && b.hole_fraction > 0.0 && b.hole_fraction < 1.0;
    if !fraction_ok {
        c.push("backplate.hole_fraction", "hole_fraction must be in (0,1)".into());
    }
    c.positive("backplate.diameter_m", "diameter", b.diameter.value());

    c.positive("gap_m", "gap", design.gap.value());

    let e = &design.environment;
    c.positive("environment.air_viscosity_pa_s", "air_viscosity", e.air_viscosity.value());
    c.positive("environment.epsilon0_f_m", "epsilon0", e.epsilon0.value());
    c.positive("environment.air_density_kg_m3", "air_density", e.air_density.value());

    if c.0.is_empty() {
        // Derived quantities only make sense once the inputs are sane.
        if b.hole_count() < 1.0 {
            c.push(
                "backplate",
                format!("hole count must be >= 1 (got {})", b.hole_count()),
            );
        }
        let area = d.area();
        let compliance = area / (8.0 * PI * d.residual_stress.value() * d.thickness.value());
        if !(area.is_finite() && area > 0.0) {
            c.push("diaphragm", "area must be finite and > 0".into());
        }
        if !(compliance.is_finite() && compliance > 0.0) {
            c.push(
                "diaphragm",
                "mechanical sensitivity must be finite and > 0".into(),
            );
        }
    }
    c.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(design: &MicrophoneDesign) -> Vec<String> {
        validate(design).into_iter().map(|v| v.message).collect()
    }

    #[test]
    fn reference_is_valid() {
        assert!(validate(&MicrophoneDesign::reference()).is_empty());
        assert!(validate(&MicrophoneDesign::reference_quoted_stress()).is_empty());
    }

    #[test]
    fn zero_gap() {
        let mut d = MicrophoneDesign::reference();
        d.gap = Length::new(0.0);
        assert_eq!(messages(&d), vec!["gap must be > 0"]);
        assert_eq!(validate(&d)[0].path, "gap_m");
    }

    #[test]
    fn hole_fraction_out_of_range() {
        let mut d = MicrophoneDesign::reference();
        d.backplate.hole_fraction = 1.2;
        assert_eq!(messages(&d), vec!["hole_fraction must be in (0,1)"]);
        d.backplate.hole_fraction = 0.0;
        assert_eq!(messages(&d), vec!["hole_fraction must be in (0,1)"]);
    }

    #[test]
    fn reports_every_violation_in_order() {
        let mut d = MicrophoneDesign::reference();
        d.gap = Length::new(-1.0);
        d.diaphragm.thickness = Length::new(f64::NAN);
        d.environment.air_viscosity = Viscosity::new(0.0);
        let v = validate(&d);
        let paths: Vec<_> = v.iter().map(|v| v.path.as_str()).collect();
        assert_eq!(
            paths,
            ["diaphragm.thickness_m", "gap_m", "environment.air_viscosity_pa_s"]
        );
        assert_eq!(v[0].message, "thickness must be finite");
        assert_eq!(validate(&d), v);
    }

    #[test]
    fn too_few_holes() {
        let mut d = MicrophoneDesign::reference();
        d.backplate.hole_side = Length::new(1.5e-3);
        d.backplate.hole_fraction = 0.1;
        let v = validate(&d);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.starts_with("hole count"));
    }

    #[test]
    fn vanishing_compliance_is_invalid() {
        let mut d = MicrophoneDesign::reference();
        d.diaphragm.residual_stress = Pressure::new(1e300);
        d.diaphragm.thickness = Length::new(1e100);
        assert!(messages(&d)
            .iter()
            .any(|m| m.contains("mechanical sensitivity")));
    }

    #[test]
    fn derived_geometry() {
        let d = MicrophoneDesign::reference();
        assert!((d.diaphragm.area() - 2.835e-6).abs() / 2.835e-6 < 1e-3);
        assert!((d.backplate.hole_density().value() - 3.75e7).abs() < 1e-6);
        assert_eq!(d.backplate.hole_count(), 106.0);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        for design in [
            MicrophoneDesign::reference(),
            MicrophoneDesign::reference_quoted_stress(),
        ] {
            let text = design.to_json_pretty().unwrap();
            let back = MicrophoneDesign::from_json(&text).unwrap();
            assert_eq!(back, design);
            assert_eq!(back.to_json_pretty().unwrap(), text);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut value: serde_json::Value =
            serde_json::from_str(&MicrophoneDesign::reference().to_json_pretty().unwrap()).unwrap();
        value["diaphragm"]["colour"] = serde_json::json!("gold");
        assert!(MicrophoneDesign::from_json(&value.to_string()).is_err());

        let mut value: serde_json::Value =
            serde_json::from_str(&MicrophoneDesign::reference().to_json_pretty().unwrap()).unwrap();
        value["extra"] = serde_json::json!(1);
        assert!(MicrophoneDesign::from_json(&value.to_string()).is_err());
    }
}
