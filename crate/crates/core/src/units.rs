//! Unit-safe scalar quantities.
//!
//! Every quantity is stored in SI. Unit suffixes only appear at the parse and
//! format boundaries: `Length::parse("1.9 mm")` and `Length::parse("1900 um")`
//! produce the same bit pattern because the power-of-ten prefix is folded into
//! the decimal exponent before the number is rounded to `f64`.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::Error;

macro_rules! quantity {
    (
        $(#[$meta:meta])*
        $name:ident, $symbol:literal, [$(($suffix:literal, $exp:literal)),* $(,)?]
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(f64);

        impl $name {
            /// SI unit symbol used when formatting.
            pub const SYMBOL: &'static str = $symbol;

            pub const fn new(si: f64) -> Self {
                Self(si)
            }

            pub const fn value(self) -> f64 {
                self.0
            }

            pub fn is_finite(self) -> bool {
                self.0.is_finite()
            }

            /// Parse `"<number> <unit>"`, e.g. `"80 um"`. A bare number is
            /// taken as SI.
            pub fn parse(text: &str) -> Result<Self, Error> {
                const UNITS: &[(&str, i32)] = &[$(($suffix, $exp)),*];
                parse_scaled(text, UNITS).map(Self)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                if let Some(precision) = f.precision() {
                    write!(f, "{:.*} {}", precision, self.0, Self::SYMBOL)
                } else {
                    write!(f, "{} {}", self.0, Self::SYMBOL)
                }
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                Self(self.0 + rhs.0)
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(self, rhs: Self) -> Self {
                Self(self.0 - rhs.0)
            }
        }

        impl Mul<f64> for $name {
            type Output = Self;
            fn mul(self, rhs: f64) -> Self {
                Self(self.0 * rhs)
            }
        }

        impl Div<f64> for $name {
            type Output = Self;
            fn div(self, rhs: f64) -> Self {
                Self(self.0 / rhs)
            }
        }

        impl From<$name> for f64 {
            fn from(q: $name) -> f64 {
                q.0
            }
        }
    };
}

quantity!(
    /// Length in metres.
    Length, "m",
    [("m", 0), ("cm", -2), ("mm", -3), ("um", -6), ("μm", -6), ("µm", -6), ("nm", -9)]
);
quantity!(
    /// Pressure or stress in pascals.
    Pressure, "Pa",
    [("Pa", 0), ("kPa", 3), ("MPa", 6), ("GPa", 9)]
);
quantity!(
    /// Electric potential in volts.
    Voltage, "V",
    [("V", 0), ("mV", -3), ("kV", 3)]
);
quantity!(
    /// Capacitance in farads.
    Capacitance, "F",
    [("F", 0), ("uF", -6), ("μF", -6), ("µF", -6), ("nF", -9), ("pF", -12), ("fF", -15)]
);
quantity!(
    /// Frequency in hertz.
    Frequency, "Hz",
    [("Hz", 0), ("kHz", 3), ("MHz", 6)]
);
quantity!(
    /// Diaphragm deflection per unit pressure.
    MechSensitivity, "m/Pa",
    [("m/Pa", 0), ("um/Pa", -6), ("μm/Pa", -6), ("nm/Pa", -9)]
);
quantity!(
    /// Output voltage per unit deflection.
    ElecSensitivity, "V/m",
    [("V/m", 0), ("V/um", 6), ("V/μm", 6)]
);
quantity!(
    /// Open-circuit output voltage per unit pressure.
    OpenCircuitSensitivity, "V/Pa",
    [("V/Pa", 0), ("mV/Pa", -3)]
);
quantity!(
    /// Mechanical resistance (damping coefficient).
    MechResistance, "N·s/m",
    [("N*s/m", 0), ("N·s/m", 0), ("Ns/m", 0)]
);
quantity!(
    /// Dynamic viscosity.
    Viscosity, "Pa·s",
    [("Pa*s", 0), ("Pa·s", 0), ("uPa*s", -6), ("μPa·s", -6)]
);
quantity!(
    /// Mass density.
    Density, "kg/m³",
    [("kg/m3", 0), ("kg/m³", 0), ("g/cm3", 3), ("g/cm³", 3)]
);
quantity!(
    /// Number of features per unit area.
    AreaDensity, "1/m²",
    [("1/m2", 0), ("1/m²", 0), ("1/mm2", 6), ("1/mm²", 6)]
);
quantity!(
    /// Permittivity.
    Permittivity, "F/m",
    [("F/m", 0), ("pF/m", -12)]
);

impl Mul<ElecSensitivity> for MechSensitivity {
    type Output = OpenCircuitSensitivity;
    fn mul(self, rhs: ElecSensitivity) -> OpenCircuitSensitivity {
        OpenCircuitSensitivity(self.0 * rhs.0)
    }
}

impl Div<Length> for Voltage {
    type Output = ElecSensitivity;
    fn div(self, rhs: Length) -> ElecSensitivity {
        ElecSensitivity(self.0 / rhs.0)
    }
}

impl Mul<Pressure> for MechSensitivity {
    type Output = Length;
    fn mul(self, rhs: Pressure) -> Length {
        Length(self.0 * rhs.0)
    }
}

/// Split `text` into a decimal number and a unit suffix, then shift the
/// decimal exponent by the suffix's power of ten before rounding once.
fn parse_scaled(text: &str, units: &[(&str, i32)]) -> Result<f64, Error> {
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let number = number.trim();
    let unit = unit.trim();

    let exp_shift = if unit.is_empty() {
        0
    } else {
        units
            .iter()
            .find(|(suffix, _)| *suffix == unit)
            .map(|(_, e)| *e)
            .ok_or_else(|| Error::InvalidInput(format!("unknown unit '{unit}' in '{text}'")))?
    };

    let (mantissa, exponent) = match number.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = number[pos + 1..]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("malformed number in '{text}'")))?;
            (&number[..pos], exp)
        }
        None => (number, 0),
    };
    if mantissa.is_empty() || mantissa.parse::<f64>().is_err() {
        return Err(Error::InvalidInput(format!("malformed number in '{text}'")));
    }

    let value: f64 = format!("{mantissa}e{}", exponent + exp_shift)
        .parse()
        .map_err(|_| Error::InvalidInput(format!("malformed number in '{text}'")))?;
    if !value.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite quantity '{text}'")));
    }
    Ok(value)
}
