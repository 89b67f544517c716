//! Exhaustive constrained search over a rectangular design grid.
//!
//! The objective is the open-circuit sensitivity at the constraint bias.
//! Among feasible points the best is the one with the largest objective;
//! exact ties go to the lexicographically smallest parameter vector in the
//! order (diameter, thickness, stress, gap, hole_fraction, hole_side). That
//! ordering is a total order, so the parallel reduction below returns the
//! same point regardless of evaluation order.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustics::dynamics;
use crate::decibel::sensitivity_to_db;
use crate::design::{validate, MicrophoneDesign, REFERENCE_BIAS_V};
use crate::error::{Error, Result};
use crate::report::{analyze, AnalysisReport};
use crate::statics::{
    design_pull_in, electrical_sensitivity, mechanical_sensitivity, open_circuit_sensitivity,
};
use crate::units::{Capacitance, Frequency, Length, Pressure, Voltage};

/// Grids larger than this are rejected up front.
pub const MAX_GRID_POINTS: usize = 50_000_000;

pub const PARAMETER_NAMES: [&str; 6] = [
    "diameter_m",
    "thickness_m",
    "residual_stress_pa",
    "gap_m",
    "hole_fraction",
    "hole_side_m",
];

/// Closed interval sampled at `steps` evenly spaced points, endpoints
/// included. `steps == 1` samples `min` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn fixed(value: f64) -> Self {
        Self {
            min: value,
            max: value,
            steps: 1,
        }
    }

    pub fn range(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.steps <= 1 || i == 0 {
            self.min
        } else if i + 1 == self.steps {
            self.max
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::InvalidInput(format!("{name}: bounds must be finite")));
        }
        if self.min > self.max {
            return Err(Error::InvalidInput(format!(
                "{name}: lower bound {} exceeds upper bound {}",
                self.min, self.max
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidInput(format!("{name}: step count must be >= 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpace {
    #[serde(rename = "diameter_m")]
    pub diameter: Axis,
    #[serde(rename = "thickness_m")]
    pub thickness: Axis,
    #[serde(rename = "residual_stress_pa")]
    pub residual_stress: Axis,
    #[serde(rename = "gap_m")]
    pub gap: Axis,
    pub hole_fraction: Axis,
    #[serde(rename = "hole_side_m")]
    pub hole_side: Axis,
    /// Supplies every parameter that is not searched. The backplate diameter
    /// always follows the diaphragm diameter.
    #[serde(default = "MicrophoneDesign::reference")]
    pub template: MicrophoneDesign,
}

impl DesignSpace {
    /// Single-point space at `design`.
    pub fn around(design: &MicrophoneDesign) -> Self {
        Self {
            diameter: Axis::fixed(design.diaphragm.diameter.value()),
            thickness: Axis::fixed(design.diaphragm.thickness.value()),
            residual_stress: Axis::fixed(design.diaphragm.residual_stress.value()),
            gap: Axis::fixed(design.gap.value()),
            hole_fraction: Axis::fixed(design.backplate.hole_fraction),
            hole_side: Axis::fixed(design.backplate.hole_side.value()),
            template: *design,
        }
    }

    /// A grid bracketing the reference design.
    pub fn reference_neighbourhood() -> Self {
        Self {
            diameter: Axis::range(1.5e-3, 2.3e-3, 5),
            thickness: Axis::range(0.4e-6, 1.0e-6, 4),
            residual_stress: Axis::range(6e6, 16e6, 6),
            gap: Axis::range(2e-6, 20e-6, 10),
            hole_fraction: Axis::range(0.05, 0.45, 5),
            hole_side: Axis::range(40e-6, 120e-6, 3),
            ..Self::around(&MicrophoneDesign::reference())
        }
    }

    pub fn axes(&self) -> [Axis; 6] {
        [
            self.diameter,
            self.thickness,
            self.residual_stress,
            self.gap,
            self.hole_fraction,
            self.hole_side,
        ]
    }

    fn with_axes(&self, axes: [Axis; 6]) -> Self {
        Self {
            diameter: axes[0],
            thickness: axes[1],
            residual_stress: axes[2],
            gap: axes[3],
            hole_fraction: axes[4],
            hole_side: axes[5],
            template: self.template,
        }
    }

    /// Number of grid points, the product of the step counts.
    pub fn size(&self) -> Option<usize> {
        self.axes()
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.steps))
    }

    /// The parameter vector at linear index `i` (last axis varies fastest).
    pub fn point(&self, mut i: usize) -> [f64; 6] {
        let axes = self.axes();
        let mut params = [0.0; 6];
        for k in (0..6).rev() {
            let n = axes[k].steps;
            params[k] = axes[k].value(i % n);
            i /= n;
        }
        params
    }

    pub fn design_at(&self, params: &[f64; 6]) -> MicrophoneDesign {
        design_from_params(&self.template, params)
    }

    pub fn check(&self) -> Result<()> {
        for (axis, name) in self.axes().iter().zip(PARAMETER_NAMES) {
            axis.check(name)?;
        }
        let violations = validate(&self.template);
        if !violations.is_empty() {
            return Err(Error::InvalidDesign(violations));
        }
        match self.size() {
            Some(n) if n <= MAX_GRID_POINTS => Ok(()),
            _ => Err(Error::InvalidInput(format!(
                "grid exceeds {MAX_GRID_POINTS} points"
            ))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let space: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        space.check()?;
        Ok(space)
    }
}

pub fn design_from_params(template: &MicrophoneDesign, params: &[f64; 6]) -> MicrophoneDesign {
    let mut d = *template;
    d.diaphragm.diameter = Length::new(params[0]);
    d.backplate.diameter = Length::new(params[0]);
    d.diaphragm.thickness = Length::new(params[1]);
    d.diaphragm.residual_stress = Pressure::new(params[2]);
    d.gap = Length::new(params[3]);
    d.backplate.hole_fraction = params[4];
    d.backplate.hole_side = Length::new(params[5]);
    d
}

pub fn params_of(design: &MicrophoneDesign) -> [f64; 6] {
    [
        design.diaphragm.diameter.value(),
        design.diaphragm.thickness.value(),
        design.diaphragm.residual_stress.value(),
        design.gap.value(),
        design.backplate.hole_fraction,
        design.backplate.hole_side.value(),
    ]
}

fn default_bias() -> Voltage {
    Voltage::new(REFERENCE_BIAS_V)
}
fn default_fraction() -> f64 {
    0.6
}
fn default_min_cutoff() -> Frequency {
    Frequency::new(20e3)
}
fn default_min_capacitance() -> Capacitance {
    Capacitance::new(1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    /// Operating bias; the objective is evaluated here.
    #[serde(rename = "bias_v", default = "default_bias")]
    pub bias: Voltage,
    #[serde(default = "default_fraction")]
    pub max_bias_fraction_of_pullin: f64,
    #[serde(rename = "min_cutoff_hz", default = "default_min_cutoff")]
    pub min_cutoff: Frequency,
    #[serde(rename = "min_capacitance_f", default = "default_min_capacitance")]
    pub min_capacitance: Capacitance,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            bias: default_bias(),
            max_bias_fraction_of_pullin: default_fraction(),
            min_cutoff: default_min_cutoff(),
            min_capacitance: default_min_capacitance(),
        }
    }
}

impl Constraints {
    pub fn check(&self) -> Result<()> {
        let b = self.bias.value();
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidInput(format!("bias must be > 0, got {b} V")));
        }
        let f = self.max_bias_fraction_of_pullin;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidInput(format!(
                "max_bias_fraction_of_pullin must be in (0,1), got {f}"
            )));
        }
        let fc = self.min_cutoff.value();
        if !(fc.is_finite() && fc > 0.0) {
            return Err(Error::InvalidInput(format!("min_cutoff must be > 0, got {fc} Hz")));
        }
        let c = self.min_capacitance.value();
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "min_capacitance must be >= 0, got {c} F"
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        c.check()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    BiasMargin,
    Bandwidth,
    Capacitance,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::BiasMargin => "bias margin",
            Reason::Bandwidth => "bandwidth",
            Reason::Capacitance => "capacitance",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub reasons: Vec<Reason>,
    pub bias_limit_v: f64,
    pub cutoff_hz: f64,
    pub c0_f: f64,
}

/// Check a valid design against every constraint.
pub fn feasible(design: &MicrophoneDesign, constraints: &Constraints) -> Result<Feasibility> {
    let bias_limit = constraints.max_bias_fraction_of_pullin * design_pull_in(design).value();
    let cutoff = dynamics(design)?.cutoff().frequency().value();
    let c0 = design.environment.epsilon0.value() * design.diaphragm.area() / design.gap.value();

    let mut reasons = Vec::new();
    if constraints.bias.value() > bias_limit {
        reasons.push(Reason::BiasMargin);
    }
    if cutoff < constraints.min_cutoff.value() {
        reasons.push(Reason::Bandwidth);
    }
    if c0 < constraints.min_capacitance.value() {
        reasons.push(Reason::Capacitance);
    }
    Ok(Feasibility {
        feasible: reasons.is_empty(),
        reasons,
        bias_limit_v: bias_limit,
        cutoff_hz: cutoff,
        c0_f: c0,
    })
}

/// Open-circuit sensitivity at `bias`, in V/Pa.
pub fn objective(design: &MicrophoneDesign, bias: Voltage) -> f64 {
    open_circuit_sensitivity(
        mechanical_sensitivity(&design.diaphragm),
        electrical_sensitivity(bias, design.gap),
    )
    .value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    params: [f64; 6],
    objective: f64,
}

fn lexicographic(a: &[f64; 6], b: &[f64; 6]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// `Greater` when `a` is the better candidate.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    a.objective
        .total_cmp(&b.objective)
        .then_with(|| lexicographic(&b.params, &a.params))
}

fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if rank(&a, &b).is_ge() { a } else { b }),
        (a, None) => a,
        (None, b) => b,
    }
}

#[derive(Default)]
struct Tally {
    best: Option<Candidate>,
    feasible: usize,
    /// Lowest-index failure, so the reported error is order independent.
    error: Option<(usize, Error)>,
}

impl Tally {
    fn merge(self, other: Tally) -> Tally {
        let error = match (self.error, other.error) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, None) => a,
            (None, b) => b,
        };
        Tally {
            best: pick(self.best, other.best),
            feasible: self.feasible + other.feasible,
            error,
        }
    }
}

fn evaluate_point(space: &DesignSpace, constraints: &Constraints, i: usize) -> Tally {
    let params = space.point(i);
    let design = space.design_at(&params);
    let violations = validate(&design);
    if !violations.is_empty() {
        let detail = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Tally {
            error: Some((
                i,
                Error::InvalidInput(format!("grid point {params:?} is not a valid design: {detail}")),
            )),
            ..Tally::default()
        };
    }
    match feasible(&design, constraints) {
        Ok(f) if f.feasible => Tally {
            best: Some(Candidate {
                params,
                objective: objective(&design, constraints.bias),
            }),
            feasible: 1,
            error: None,
        },
        Ok(_) => Tally::default(),
        Err(e) => Tally {
            error: Some((i, e)),
            ..Tally::default()
        },
    }
}

struct Sweep {
    best: Option<Candidate>,
    feasible: usize,
    evaluated: usize,
}

fn sweep(space: &DesignSpace, constraints: &Constraints) -> Result<Sweep> {
    space.check()?;
    constraints.check()?;
    let evaluated = space.size().expect("checked above");
    let tally = (0..evaluated)
        .into_par_iter()
        .map(|i| evaluate_point(space, constraints, i))
        .reduce(Tally::default, Tally::merge);
    if let Some((_, e)) = tally.error {
        return Err(e);
    }
    Ok(Sweep {
        best: tally.best,
        feasible: tally.feasible,
        evaluated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestParameters {
    pub diameter_m: f64,
    pub thickness_m: f64,
    pub residual_stress_pa: f64,
    pub gap_m: f64,
    pub hole_fraction: f64,
    pub hole_side_m: f64,
}

impl From<[f64; 6]> for BestParameters {
    fn from(p: [f64; 6]) -> Self {
        Self {
            diameter_m: p[0],
            thickness_m: p[1],
            residual_stress_pa: p[2],
            gap_m: p[3],
            hole_fraction: p[4],
            hole_side_m: p[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_design: MicrophoneDesign,
    pub best_parameters: BestParameters,
    pub best_objective_v_per_pa: f64,
    pub best_objective_db: f64,
    pub feasible_count: usize,
    /// Grid points evaluated; for a refinement, summed over all rounds.
    pub evaluated_count: usize,
    pub report: AnalysisReport,
}

impl SearchResult {
    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn finish(
    template: &MicrophoneDesign,
    best: Candidate,
    constraints: &Constraints,
    feasible_count: usize,
    evaluated_count: usize,
) -> Result<SearchResult> {
    let design = design_from_params(template, &best.params);
    let check = feasible(&design, constraints)?;
    if !check.feasible {
        return Err(Error::NumericFailure(format!(
            "selected design fails re-verification: {:?}",
            check.reasons
        )));
    }
    let report = analyze(&design, constraints.bias)?;
    Ok(SearchResult {
        best_design: design,
        best_parameters: best.params.into(),
        best_objective_v_per_pa: best.objective,
        best_objective_db: sensitivity_to_db(crate::units::OpenCircuitSensitivity::new(
            best.objective,
        ))?,
        feasible_count,
        evaluated_count,
        report,
    })
}

/// Evaluate every grid point and return the best feasible design.
pub fn grid_search(space: &DesignSpace, constraints: &Constraints) -> Result<SearchResult> {
    let s = sweep(space, constraints)?;
    let best = s.best.ok_or(Error::Infeasible {
        evaluated: s.evaluated,
    })?;
    finish(&space.template, best, constraints, s.feasible, s.evaluated)
}

/// Zoom in around the incumbent: every round halves each interval around
/// the current best (clipped to the original bounds) and searches again
/// with the same step counts. The incumbent is kept unless a strictly
/// better point (under the search ordering) turns up.
pub fn refine(
    space: &DesignSpace,
    constraints: &Constraints,
    incumbent: &SearchResult,
    rounds: usize,
) -> Result<SearchResult> {
    if rounds == 0 {
        return Ok(incumbent.clone());
    }
    space.check()?;
    constraints.check()?;

    let original = space.axes();
    let incumbent_params = params_of(&incumbent.best_design);
    let mut best = Candidate {
        params: incumbent_params,
        objective: objective(&incumbent.best_design, constraints.bias),
    };
    let mut current = original;
    let mut feasible_count = incumbent.feasible_count;
    let mut evaluated = incumbent.evaluated_count;

    for _ in 0..rounds {
        let mut axes = current;
        for (k, axis) in axes.iter_mut().enumerate() {
            let quarter = (current[k].max - current[k].min) / 4.0;
            let centre = best.params[k];
            axis.min = (centre - quarter).max(original[k].min);
            axis.max = (centre + quarter).min(original[k].max);
            if axis.min > axis.max {
                axis.min = centre;
                axis.max = centre;
            }
        }
        let round = sweep(&space.with_axes(axes), constraints)?;
        feasible_count += round.feasible;
        evaluated += round.evaluated;
        best = pick(Some(best), round.best).expect("incumbent present");
        current = axes;
    }
    finish(&space.template, best, constraints, feasible_count, evaluated)
}
