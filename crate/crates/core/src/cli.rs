//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible or physically
//! excluded operating point, 4 numeric self-check failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::acoustics::{damping, dynamics, frequency_response, log_grid};
use crate::decibel::sensitivity_to_db;
use crate::design::{validate, MicrophoneDesign};
use crate::error::{Error, Result};
use crate::report::analyze;
use crate::search::{grid_search, refine, Constraints, DesignSpace};
use crate::statics::{
    design_pull_in, electrical_sensitivity, mechanical_sensitivity, open_circuit_sensitivity,
    pull_in_numeric, PULL_IN_CROSS_CHECK_TOL,
};
use crate::units::{Frequency, Length, Pressure, Voltage};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "micdesign", version, about = "Condenser MEMS microphone design analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full static, damping and dynamic analysis of one design
    Analyze {
        design: PathBuf,
        /// Operating bias, e.g. `12` or `12 V`
        #[arg(long, default_value = "12", value_parser = Voltage::parse)]
        bias: Voltage,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Frequency response as CSV
    Freq {
        design: PathBuf,
        #[arg(long, default_value = "12", value_parser = Voltage::parse)]
        bias: Voltage,
        #[arg(long, default_value = "20", value_parser = Frequency::parse)]
        fmin: Frequency,
        #[arg(long, default_value = "100000", value_parser = Frequency::parse)]
        fmax: Frequency,
        #[arg(long, default_value_t = 50)]
        points_per_decade: usize,
    },
    /// Sweep one design parameter and report a metric as CSV
    Sweep {
        design: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        /// Start value in SI units
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        /// End value in SI units
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum)]
        metric: Metric,
        #[arg(long, default_value = "12", value_parser = Voltage::parse)]
        bias: Voltage,
    },
    /// Compare closed-form and numeric pull-in voltage
    Pullin { design: PathBuf },
    /// Constrained grid search with refinement
    Optimize {
        space: PathBuf,
        constraints: PathBuf,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        /// Write the result here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    Diameter,
    Thickness,
    Stress,
    Gap,
    #[value(name = "hole_fraction")]
    HoleFraction,
    #[value(name = "hole_side")]
    HoleSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    #[value(name = "S_m")]
    MechSensitivity,
    #[value(name = "S_o_db")]
    SensitivityDb,
    #[value(name = "V_p")]
    PullIn,
    #[value(name = "C0")]
    RestCapacitance,
    #[value(name = "cutoff")]
    Cutoff,
    #[value(name = "R_total")]
    TotalDamping,
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::PullInExceeded { .. } | Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::NumericFailure(_) => EXIT_NUMERIC,
        Error::Domain(_)
        | Error::InvalidDesign(_)
        | Error::InvalidInput(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_INVALID,
    }
}

/// Run the CLI with explicit argument list and output streams; returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return if code == 0 { EXIT_OK } else { EXIT_INVALID };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Analyze {
            design,
            bias,
            format,
        } => {
            let design = MicrophoneDesign::load(&design)?;
            let report = analyze(&design, bias)?;
            match format {
                Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
                Format::Text => out.write_all(report.to_text().as_bytes())?,
            }
            Ok(EXIT_OK)
        }
        Command::Freq {
            design,
            bias,
            fmin,
            fmax,
            points_per_decade,
        } => {
            let grid = log_grid(fmin.value(), fmax.value(), points_per_decade)?;
            let design = MicrophoneDesign::load(&design)?;
            let response = frequency_response(&design, bias, &grid)?;
            writeln!(out, "frequency_hz,magnitude_db_re_v_pa,phase_deg")?;
            for p in &response.points {
                writeln!(
                    out,
                    "{},{},{}",
                    format_sig(p.frequency_hz),
                    format_sig(p.magnitude_db),
                    format_sig(p.phase_deg)
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::Sweep {
            design,
            param,
            from,
            to,
            steps,
            metric,
            bias,
        } => {
            if steps < 2 {
                return Err(Error::InvalidInput(format!("--steps must be >= 2, got {steps}")));
            }
            if !(from.is_finite() && to.is_finite()) {
                return Err(Error::InvalidInput("sweep bounds must be finite".into()));
            }
            let base = MicrophoneDesign::load(&design)?;
            writeln!(out, "param_value,metric_value")?;
            for i in 0..steps {
                let value = if i + 1 == steps {
                    to
                } else {
                    from + (to - from) * i as f64 / (steps - 1) as f64
                };
                let row = with_param(&base, param, value);
                let cell = match sweep_metric(&row, metric, bias) {
                    Ok(m) => format_sig(m),
                    Err(e) => {
                        writeln!(err, "warning: {} = {}: {e}", param_name(param), format_sig(value))?;
                        "nan".to_string()
                    }
                };
                writeln!(out, "{},{}", format_sig(value), cell)?;
            }
            Ok(EXIT_OK)
        }
        Command::Pullin { design } => {
            let design = MicrophoneDesign::load(&design)?;
            let closed = design_pull_in(&design).value();
            let numeric = pull_in_numeric(&design)?.value();
            let diff = (numeric - closed).abs() / closed;
            writeln!(out, "closed-form pull-in: {closed:.6} V")?;
            writeln!(out, "numeric pull-in:     {numeric:.6} V (relative difference {diff:.3e})")?;
            if diff > PULL_IN_CROSS_CHECK_TOL {
                writeln!(
                    err,
                    "error: pull-in self-check failed: relative difference {diff:.3e} exceeds {PULL_IN_CROSS_CHECK_TOL:e}"
                )?;
                return Ok(EXIT_NUMERIC);
            }
            Ok(EXIT_OK)
        }
        Command::Optimize {
            space,
            constraints,
            rounds,
            out: out_path,
        } => {
            let space = DesignSpace::load(&space)?;
            let constraints = Constraints::load(&constraints)?;
            let coarse = grid_search(&space, &constraints)?;
            let result = refine(&space, &constraints, &coarse, rounds)?;
            let json = result.to_json_pretty()? + "\n";
            match out_path {
                Some(path) => std::fs::write(path, json)?,
                None => out.write_all(json.as_bytes())?,
            }
            Ok(EXIT_OK)
        }
    }
}

fn param_name(param: Param) -> &'static str {
    match param {
        Param::Diameter => "diameter",
        Param::Thickness => "thickness",
        Param::Stress => "stress",
        Param::Gap => "gap",
        Param::HoleFraction => "hole_fraction",
        Param::HoleSide => "hole_side",
    }
}

/// Copy of `design` with one parameter replaced. Changing the diameter moves
/// the backplate with the diaphragm.
pub fn with_param(design: &MicrophoneDesign, param: Param, value: f64) -> MicrophoneDesign {
    let mut d = *design;
    match param {
        Param::Diameter => {
            d.diaphragm.diameter = Length::new(value);
            d.backplate.diameter = Length::new(value);
        }
        Param::Thickness => d.diaphragm.thickness = Length::new(value),
        Param::Stress => d.diaphragm.residual_stress = Pressure::new(value),
        Param::Gap => d.gap = Length::new(value),
        Param::HoleFraction => d.backplate.hole_fraction = value,
        Param::HoleSide => d.backplate.hole_side = Length::new(value),
    }
    d
}

/// One sweep metric. Only `S_o_db` depends on the bias, and it is refused at
/// or above pull-in.
pub fn sweep_metric(design: &MicrophoneDesign, metric: Metric, bias: Voltage) -> Result<f64> {
    let violations = validate(design);
    if !violations.is_empty() {
        return Err(Error::InvalidDesign(violations));
    }
    Ok(match metric {
        Metric::MechSensitivity => mechanical_sensitivity(&design.diaphragm).value(),
        Metric::SensitivityDb => {
            let v_p = design_pull_in(design).value();
            if bias.value() >= v_p {
                return Err(Error::PullInExceeded {
                    bias: bias.value(),
                    pull_in: v_p,
                    pressure_index: None,
                });
            }
            let s_m = mechanical_sensitivity(&design.diaphragm);
            sensitivity_to_db(open_circuit_sensitivity(
                s_m,
                electrical_sensitivity(bias, design.gap),
            ))?
        }
        Metric::PullIn => design_pull_in(design).value(),
        Metric::RestCapacitance => {
            design.environment.epsilon0.value() * design.diaphragm.area() / design.gap.value()
        }
        Metric::Cutoff => {
            let cutoff = dynamics(design)?.cutoff();
            if cutoff.is_beyond_range() {
                return Err(Error::InvalidInput(format!(
                    "flat beyond range (> {} Hz)",
                    format_sig(cutoff.frequency().value())
                )));
            }
            cutoff.frequency().value()
        }
        Metric::TotalDamping => damping(design)?.total.value(),
    })
}

/// Nine significant digits, `%g` style: fixed notation for moderate
/// exponents, scientific otherwise, trailing zeros trimmed. Locale free.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
