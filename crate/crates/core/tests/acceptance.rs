//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use micdesign::acoustics::{
    cutoff_frequency, damping, frequency_response, log_grid, lumped_model, skvor_bracket,
};
use micdesign::design::validate;
use micdesign::search::{feasible, grid_search, objective, refine, Axis, Constraints, DesignSpace};
use micdesign::statics::{
    capacitance_vs_pressure, design_pull_in, equilibrium, max_open_circuit_sensitivity,
    mechanical_sensitivity, pull_in_numeric, pull_in_voltage, stress_from_sensitivity,
    OperatingPoint,
};
use micdesign::units::{Length, MechSensitivity, Pressure, Voltage};
use micdesign::{Error, MicrophoneDesign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn reference() -> MicrophoneDesign {
    MicrophoneDesign::reference()
}

/// Seeded corpus of valid designs spanning a few times the reference scale.
fn corpus(count: usize) -> Vec<MicrophoneDesign> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d69_6364);
    let mut designs = Vec::with_capacity(count);
    while designs.len() < count {
        let mut d = reference();
        d.diaphragm.diameter = Length::new(rng.gen_range(0.5e-3..3e-3));
        d.backplate.diameter = d.diaphragm.diameter;
        d.diaphragm.thickness = Length::new(rng.gen_range(0.2e-6..2e-6));
        d.diaphragm.residual_stress = Pressure::new(rng.gen_range(1e6..50e6));
        d.gap = Length::new(rng.gen_range(1e-6..30e-6));
        d.backplate.hole_fraction = rng.gen_range(0.02..0.6);
        d.backplate.hole_side = Length::new(rng.gen_range(10e-6..150e-6));
        if validate(&d).is_empty() {
            designs.push(d);
        }
    }
    designs
}

fn stress_anchor() -> Outcome {
    let sigma = stress_from_sensitivity(
        Length::new(1.9e-3),
        Length::new(1e-6),
        MechSensitivity::new(13e-9),
    )
    .map_err(|e| e.to_string())?
    .value();
    let err = rel(sigma, 8.68e6);
    check(err <= 0.01, format!("sigma = {:.4} MPa, off by {:.3}%", sigma / 1e6, err * 100.0))
}

fn pull_in_anchor() -> Outcome {
    let v_p = pull_in_voltage(
        Length::new(10e-6),
        MechSensitivity::new(17e-9),
        micdesign::design::DEFAULT_EPSILON0,
    )
    .value();
    let anchor_err = rel(v_p, 44.4);
    let designs = corpus(128);
    let mut worst = 0.0f64;
    for d in &designs {
        let numeric = pull_in_numeric(d).map_err(|e| e.to_string())?.value();
        worst = worst.max(rel(numeric, design_pull_in(d).value()));
    }
    check(
        anchor_err <= 0.02 && worst <= 1e-3,
        format!(
            "V_p = {v_p:.3} V ({:.3}% from 44.4 V); worst numeric/closed-form gap {worst:.2e} over {} designs",
            anchor_err * 100.0,
            designs.len()
        ),
    )
}

fn sensitivity_bound_identity() -> Outcome {
    let designs = corpus(128);
    let mut worst = 0.0f64;
    for d in &designs {
        let s_m = mechanical_sensitivity(&d.diaphragm);
        let bound = max_open_circuit_sensitivity(d.gap, s_m, d.environment.epsilon0).value();
        let product = s_m.value() * design_pull_in(d).value() / d.gap.value();
        worst = worst.max(rel(bound, product));
    }
    check(worst <= 1e-9, format!("worst relative gap {worst:.2e} over {} designs", designs.len()))
}

fn skvor_bracket_shape() -> Outcome {
    let at_one = skvor_bracket(1.0).map_err(|e| e.to_string())?;
    let at_024 = skvor_bracket(0.24).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..1000).map(|i| 0.01 + 0.99 * (i + 1) as f64 / 1000.0).collect();
    let values: Vec<f64> = grid.iter().map(|&a| skvor_bracket(a).unwrap()).collect();
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    check(
        at_one == 0.0 && (at_024 - 0.0946).abs() <= 1e-4 && decreasing,
        format!("B(1) = {at_one}, B(0.24) = {at_024:.6}, strictly decreasing: {decreasing}"),
    )
}

fn thickness_trend() -> Outcome {
    let base = reference().diaphragm;
    let s: Vec<(f64, f64)> = [1.0e-6, 0.8e-6, 0.6e-6]
        .iter()
        .map(|&h| {
            let mut d = base;
            d.thickness = Length::new(h);
            (h, mechanical_sensitivity(&d).value())
        })
        .collect();
    let increasing = s.windows(2).all(|w| w[1].1 > w[0].1);
    let worst = s
        .iter()
        .map(|&(h, sm)| rel(sm * h, s[0].1 * s[0].0))
        .fold(0.0f64, f64::max);
    check(
        increasing && worst <= 1e-12,
        format!(
            "S_m = {:.3}/{:.3}/{:.3} nm/Pa; worst S_m·h deviation {worst:.1e}",
            s[0].1 * 1e9,
            s[1].1 * 1e9,
            s[2].1 * 1e9
        ),
    )
}

fn hole_fraction_trend() -> Outcome {
    let bias = Voltage::new(12.0);
    let mut cutoffs = Vec::new();
    let mut totals = Vec::new();
    for i in 0..11 {
        let mut d = reference();
        d.backplate.hole_fraction = 0.05 + 0.04 * i as f64;
        let c = cutoff_frequency(&d, bias).map_err(|e| e.to_string())?;
        if c.is_beyond_range() {
            return Err(format!("cutoff beyond scan range at A = {}", d.backplate.hole_fraction));
        }
        cutoffs.push(c.frequency().value());
        totals.push(damping(&d).map_err(|e| e.to_string())?.total.value());
    }
    let cut_ok = cutoffs.windows(2).all(|w| w[1] >= w[0]);
    let damp_ok = totals.windows(2).all(|w| w[1] < w[0]);
    check(
        cut_ok && damp_ok,
        format!(
            "cutoff {:.1} kHz to {:.1} kHz, non-decreasing: {cut_ok}; damping strictly decreasing: {damp_ok}",
            cutoffs[0] / 1e3,
            cutoffs[10] / 1e3
        ),
    )
}

/// Resonance and damping ratio of the reference design by direct arithmetic.
fn hand_dynamics() -> (f64, f64) {
    let nu = 1.86e-5;
    let a = PI * 0.95e-3 * 0.95e-3;
    let s_m = a / (8.0 * PI * 11.06e6 * 0.6e-6);
    let k = a / s_m;
    let m = 1420.0 * 0.6e-6 * a / 3.0;
    let n = 0.24 / (80e-6 * 80e-6);
    let bracket = 0.24 / 2.0 - 0.24 * 0.24 / 8.0 - 0.24f64.ln() / 4.0 - 3.0 / 8.0;
    let r_a = 12.0 * nu * a / (PI * 1e-15 * n) * bracket;
    let r = 80e-6 / PI.sqrt();
    let r_h = 8.0 * nu * 100e-6 * a / (n * PI * r * r * r * r);
    let f0 = (k / m).sqrt() / (2.0 * PI);
    let zeta = (r_a + r_h) / (2.0 * (k * m).sqrt());
    (f0, zeta)
}

fn bandwidth_claim() -> Outcome {
    let model = lumped_model(&reference(), Voltage::new(12.0)).map_err(|e| e.to_string())?;
    let (f0_hand, zeta_hand) = hand_dynamics();
    let f0 = model.resonance.value();
    let zeta = model.damping_ratio;
    let cutoff = model.cutoff();
    // Half-power point of a second-order low-pass.
    let b = 2.0 - 4.0 * zeta_hand * zeta_hand;
    let fc_hand = f0_hand * ((b + (b * b + 4.0).sqrt()) / 2.0).sqrt();
    let fc = cutoff.frequency().value();
    let ok = !cutoff.is_beyond_range()
        && fc > 20e3
        && rel(f0, f0_hand) <= 0.02
        && rel(zeta, zeta_hand) <= 0.02
        && rel(f0_hand, 72e3) <= 0.02
        && rel(zeta_hand, 0.81) <= 0.02
        && rel(fc, fc_hand) <= 1e-6;
    check(
        ok,
        format!(
            "cutoff {:.1} Hz (hand {:.1}), f0 {:.1} Hz (hand {:.1}), zeta {:.4} (hand {:.4})",
            fc, fc_hand, f0, f0_hand, zeta, zeta_hand
        ),
    )
}

fn bias_doubling() -> Outcome {
    let d = reference();
    let grid = log_grid(20.0, 100e3, 50).map_err(|e| e.to_string())?;
    let low = frequency_response(&d, Voltage::new(12.0), &grid).map_err(|e| e.to_string())?;
    let high = frequency_response(&d, Voltage::new(24.0), &grid).map_err(|e| e.to_string())?;
    let worst = low
        .points
        .iter()
        .zip(&high.points)
        .map(|(l, h)| (h.magnitude_db - l.magnitude_db - 6.0206).abs())
        .fold(0.0f64, f64::max);
    check(
        worst <= 1e-3,
        format!("worst deviation from 6.0206 dB is {worst:.2e} dB over {} frequencies", grid.len()),
    )
}

fn capacitance_trends() -> Outcome {
    let d = reference();
    let pressures: Vec<Pressure> = (0..=100).map(|p| Pressure::new(p as f64)).collect();
    let c: Vec<f64> = capacitance_vs_pressure(&d, Voltage::new(12.0), &pressures)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|(_, c)| c.value())
        .collect();
    let span = c[100] - c[0];
    let worst = c
        .iter()
        .enumerate()
        .map(|(i, &ci)| (ci - (c[0] + span * i as f64 / 100.0)).abs())
        .fold(0.0f64, f64::max)
        / span;

    let v_p = design_pull_in(&d).value();
    let mut cv = Vec::new();
    for i in 0..=200 {
        let v = Voltage::new(0.95 * v_p * i as f64 / 200.0);
        cv.push(
            equilibrium(&d, OperatingPoint::biased(v))
                .map_err(|e| e.to_string())?
                .capacitance
                .value(),
        );
    }
    let cv_ok = cv.windows(2).all(|w| w[1] > w[0]);
    check(
        worst < 0.01 && cv_ok,
        format!(
            "C-P secant deviation {:.2}% of delta C (limit 1%); C-V increasing on [0, 0.95 V_p]: {cv_ok}",
            worst * 100.0
        ),
    )
}

/// Brute force: enumerate in nested order, keep feasible points, take the
/// first strict maximum. Returns (params, objective, feasible count).
fn oracle(space: &DesignSpace, constraints: &Constraints) -> Option<([f64; 6], f64, usize)> {
    let mut best: Option<([f64; 6], f64)> = None;
    let mut count = 0;
    for dia in space.diameter.values() {
        for h in space.thickness.values() {
            for sigma in space.residual_stress.values() {
                for gap in space.gap.values() {
                    for frac in space.hole_fraction.values() {
                        for side in space.hole_side.values() {
                            let mut d = space.template;
                            d.diaphragm.diameter = Length::new(dia);
                            d.backplate.diameter = Length::new(dia);
                            d.diaphragm.thickness = Length::new(h);
                            d.diaphragm.residual_stress = Pressure::new(sigma);
                            d.gap = Length::new(gap);
                            d.backplate.hole_fraction = frac;
                            d.backplate.hole_side = Length::new(side);
                            if !feasible(&d, constraints).unwrap().feasible {
                                continue;
                            }
                            count += 1;
                            let obj = objective(&d, constraints.bias);
                            if best.is_none_or(|(_, b)| obj > b) {
                                best = Some(([dia, h, sigma, gap, frac, side], obj));
                            }
                        }
                    }
                }
            }
        }
    }
    best.map(|(p, o)| (p, o, count))
}

fn oracle_spaces() -> Vec<(&'static str, DesignSpace)> {
    let base = DesignSpace::around(&reference());
    vec![
        ("single point", base),
        (
            "gap line",
            DesignSpace {
                gap: Axis::range(5e-6, 20e-6, 4),
                ..base
            },
        ),
        (
            "ties on hole geometry",
            DesignSpace {
                diameter: Axis::range(1.5e-3, 2.3e-3, 3),
                thickness: Axis::range(0.6e-6, 1.0e-6, 3),
                residual_stress: Axis::range(6e6, 16e6, 3),
                gap: Axis::range(4e-6, 20e-6, 9),
                hole_fraction: Axis::range(0.05, 0.45, 5),
                hole_side: Axis::range(40e-6, 120e-6, 3),
                ..base
            },
        ),
        (
            "neighbourhood",
            DesignSpace {
                diameter: Axis::range(1.5e-3, 2.3e-3, 5),
                thickness: Axis::range(0.4e-6, 1.0e-6, 4),
                residual_stress: Axis::range(6e6, 16e6, 6),
                gap: Axis::range(2e-6, 20e-6, 10),
                hole_fraction: Axis::range(0.05, 0.45, 3),
                hole_side: Axis::range(40e-6, 120e-6, 2),
                ..base
            },
        ),
    ]
}

fn optimizer_oracle() -> Outcome {
    let start = Instant::now();
    let constraints = Constraints::default();
    let mut lines = Vec::new();
    for (name, space) in oracle_spaces() {
        let size = space.size().unwrap();
        if size > 10_000 {
            return Err(format!("{name}: {size} points exceeds the oracle budget"));
        }
        let found = grid_search(&space, &constraints).map_err(|e| format!("{name}: {e}"))?;
        let (params, obj, count) =
            oracle(&space, &constraints).ok_or_else(|| format!("{name}: oracle found nothing"))?;
        let got = &found.best_parameters;
        let got_params = [
            got.diameter_m,
            got.thickness_m,
            got.residual_stress_pa,
            got.gap_m,
            got.hole_fraction,
            got.hole_side_m,
        ];
        if got_params != params || found.best_objective_v_per_pa != obj {
            return Err(format!("{name}: search {got_params:?} vs oracle {params:?}"));
        }
        if found.feasible_count != count || found.evaluated_count != size {
            return Err(format!(
                "{name}: counts {}/{} vs oracle {count}/{size}",
                found.feasible_count, found.evaluated_count
            ));
        }
        let run = || {
            let coarse = grid_search(&space, &constraints).unwrap();
            refine(&space, &constraints, &coarse, 3).unwrap().to_json_pretty().unwrap()
        };
        if run() != run() {
            return Err(format!("{name}: two runs produced different JSON"));
        }
        lines.push(format!("{name} ({size} pts)"));
    }
    let infeasible = Constraints {
        min_cutoff: micdesign::units::Frequency::new(1e7),
        ..Constraints::default()
    };
    let space = oracle_spaces().remove(2).1;
    let none = oracle(&space, &infeasible).is_none();
    let refused = matches!(grid_search(&space, &infeasible), Err(Error::Infeasible { .. }));
    let elapsed = start.elapsed().as_secs_f64();
    check(
        none && refused && elapsed < 30.0,
        format!(
            "matched oracle on {}; infeasible space refused: {refused}; {elapsed:.1} s",
            lines.join(", ")
        ),
    )
}

fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn cli_golden() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_micdesign");
    let fixture = manifest_path("fixtures/table1.json");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let fixture_arg = fixture.to_str().unwrap();

    let out = run(&["analyze", fixture_arg, "--bias", "12"]);
    let golden = std::fs::read(manifest_path("tests/golden/table1_analyze_12v.json")).unwrap();
    let text_out = run(&["analyze", fixture_arg, "--bias", "12", "--format", "text"]);
    let text_golden = std::fs::read(manifest_path("tests/golden/table1_analyze_12v.txt")).unwrap();
    let matches = out.status.code() == Some(0)
        && out.stdout == golden
        && text_out.status.code() == Some(0)
        && text_out.stdout == text_golden;

    let report: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let v_p = report["v_p_closed_form_v"].as_f64().unwrap_or(f64::NAN);
    let c0 = report["c0_f"].as_f64().unwrap_or(f64::NAN);
    let db = report["s_o_db"].as_f64().unwrap_or(f64::NAN);
    let values_ok = rel(v_p, 44.4) <= 0.02 && rel(c0, 2.51e-12) <= 0.005 && (db + 33.8).abs() <= 0.05;

    let dir = tempfile::tempdir().unwrap();
    let malformed = dir.path().join("malformed.json");
    std::fs::write(&malformed, "{\"diaphragm\": [").unwrap();
    let mut design: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fixture).unwrap()).unwrap();
    design["environment"]["air_viscosity_pa_s"] = serde_json::json!(1e305);
    let overflow = dir.path().join("overflow.json");
    std::fs::write(&overflow, design.to_string()).unwrap();
    let space = manifest_path("fixtures/space_table1.json");
    let impossible = manifest_path("fixtures/constraints_impossible.json");

    let codes = [
        (0, run(&["pullin", fixture_arg])),
        (2, run(&["analyze", malformed.to_str().unwrap()])),
        (2, run(&["sweep", fixture_arg, "--param", "gap", "--from", "1e-6", "--to", "2e-6", "--steps", "1", "--metric", "S_m"])),
        (3, run(&["analyze", fixture_arg, "--bias", "50"])),
        (3, run(&["optimize", space.to_str().unwrap(), impossible.to_str().unwrap()])),
        (4, run(&["analyze", overflow.to_str().unwrap()])),
    ];
    let bad: Vec<String> = codes
        .iter()
        .filter(|(want, o)| o.status.code() != Some(*want))
        .map(|(want, o)| format!("expected {want}, got {:?}", o.status.code()))
        .collect();
    check(
        matches && values_ok && bad.is_empty(),
        format!(
            "golden match: {matches}; V_p {v_p:.3} V, C0 {:.4} pF, S_o {db:.3} dB; exit codes 0/2/3/4 {}",
            c0 * 1e12,
            if bad.is_empty() { "ok".to_string() } else { bad.join(", ") }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("stress from measured compliance", stress_anchor),
        ("pull-in anchor and numeric agreement", pull_in_anchor),
        ("sensitivity bound identity", sensitivity_bound_identity),
        ("perforation bracket", skvor_bracket_shape),
        ("compliance versus thickness", thickness_trend),
        ("cutoff and damping versus hole fraction", hole_fraction_trend),
        ("bandwidth of the reference design", bandwidth_claim),
        ("bias doubling adds 6.02 dB", bias_doubling),
        ("capacitance versus pressure and bias", capacitance_trends),
        ("grid search matches brute force", optimizer_oracle),
        ("CLI golden report and exit codes", cli_golden),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
