use explosion_core::elliptic::FlowProblem;
use explosion_core::explosion::{ExplosionSolver, ProbeRecord, ThresholdResult, SANDWICH_SLACK};
use explosion_core::geometry::FlowField;

use super::{minimal_options, run_tasks, setup, threshold_options, ExperimentOutput};
use crate::config::{Case, ExperimentConfig};
use crate::table::Table;

/// Unit-square flow-free reference values (exit-time series and 2π²).
pub const REFERENCE_LOWER: f64 = 4.704;
pub const REFERENCE_UPPER: f64 = 19.74;
/// δ used for the uniform sup bound K(δ) at λ = (1 − δ)λ*.
pub const UNIFORM_DELTA: f64 = 0.1;

struct Row {
    t: ThresholdResult,
    incompressible: bool,
    sup_near: f64,
    kappa1: f64,
    k_delta: f64,
}

struct Task<'a> {
    case: &'a Case,
    amplitude: f64,
    resolution: usize,
}

pub fn run(config: &ExperimentConfig) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let cases = config.effective_cases();
    let opts = threshold_options(&config.tolerances);
    let mopts = minimal_options(&config.tolerances);
    let mut tasks = Vec::new();
    for case in &cases {
        for &resolution in &config.resolutions {
            for &amplitude in &config.amplitudes {
                tasks.push(Task {
                    case,
                    amplitude,
                    resolution,
                });
            }
        }
    }
    let results = run_tasks(
        &tasks,
        |t| format!("bounds/{}/res{}/A{}", t.case.label, t.resolution, t.amplitude),
        |t| -> explosion_core::Result<Row> {
            let s = setup(t.case, t.resolution)?;
            let solver =
                ExplosionSolver::new(FlowProblem::new(&s.grid, &s.flow, t.amplitude).with_scheme(t.case.scheme_or(config.scheme)))?;
            let th = solver.lambda_star(&s.g, &opts)?;
            let near = solver.minimal_solution((1.0 - UNIFORM_DELTA) * th.lambda_star, &s.g, &mopts)?;
            let kappa1 = match &near.field {
                Some(phi) if near.converged() => solver
                    .stability_eigenvalue(near.lambda, phi, &s.g)
                    .map(|e| e.eigenvalue)
                    .unwrap_or(f64::NAN),
                _ => f64::NAN,
            };
            Ok(Row {
                incompressible: s.flow.is_incompressible(),
                sup_near: if near.converged() { near.sup() } else { f64::INFINITY },
                kappa1,
                k_delta: s.g.uniform_bound(UNIFORM_DELTA),
                t: th,
            })
        },
    );
    let rows = out.absorb(results);

    // flow-free references for the zero-amplitude rows
    let zero_tasks: Vec<&Task> = tasks.iter().filter(|t| t.amplitude == 0.0).collect();
    let refs = run_tasks(
        &zero_tasks,
        |t| format!("bounds/{}/res{}/flow-free", t.case.label, t.resolution),
        |t| -> explosion_core::Result<f64> {
            let s = setup(t.case, t.resolution)?;
            let zero = FlowField::zero(&s.grid);
            let solver = ExplosionSolver::new(FlowProblem::new(&s.grid, &zero, 0.0).with_scheme(t.case.scheme_or(config.scheme)))?;
            Ok(solver.lambda_star(&s.g, &opts)?.lambda_star)
        },
    );
    let refs = out.absorb(refs);

    let mut table = Table::new(
        "bounds.csv",
        "Bounds sandwich C/θ ≤ λ* ≤ μ₁/g'(0) over catalog cases and amplitudes.",
        &[
            ("case", "catalog configuration"),
            ("scheme", "advection discretization"),
            ("resolution", "nodes along the longer side"),
            ("amplitude", "flow amplitude A"),
            ("incompressible", "flow declared divergence-free"),
            ("theta", "max exit time"),
            ("mu1", "principal eigenvalue"),
            ("lower", "supersolution lower bound"),
            ("lambda_star", "computed threshold"),
            ("upper", "μ₁/g'(0)"),
            ("sandwich", "lower ≤ λ* ≤ 1.05 upper"),
            ("sup_phi_near", "sup φ at λ = 0.9 λ*"),
            ("uniform_bound", "K(0.1)"),
            ("kappa1_near", "stability eigenvalue at λ = 0.9 λ*"),
        ],
    );
    let mut probes = Table::new(
        "bounds_probes.csv",
        "Every monotone-iteration probe issued by the threshold bisection.",
        &[
            ("case", "catalog configuration"),
            ("resolution", "nodes along the longer side"),
            ("amplitude", "flow amplitude A"),
            ("lambda", "probed λ"),
            ("status", "converged, blown_up or iteration_limit"),
            ("sup_phi", "sup of the last iterate"),
            ("iterations", "monotone iterations"),
            ("monotonicity_defect", "max pointwise decrease between iterates"),
        ],
    );
    let mut all_sandwich = true;
    let mut failures = Vec::new();
    let mut max_defect_m = 0.0f64;
    for (task, row) in tasks.iter().zip(&rows) {
        let Some(r) = row else {
            all_sandwich = false;
            failures.push(format!("{} A={} failed", task.case.label, task.amplitude));
            continue;
        };
        let b = &r.t.bounds;
        let ok = b.lower <= r.t.lambda_star && r.t.lambda_star <= (1.0 + SANDWICH_SLACK) * b.upper;
        if !ok {
            all_sandwich = false;
            failures.push(format!(
                "{} A={}: {:.4} ≤ {:.4} ≤ {:.4}",
                task.case.label, task.amplitude, b.lower, r.t.lambda_star, b.upper
            ));
        }
        let scheme = task.case.scheme_or(config.scheme);
        table.push(vec![
            task.case.label.as_str().into(),
            scheme.name().into(),
            task.resolution.into(),
            task.amplitude.into(),
            r.incompressible.into(),
            b.theta.into(),
            b.mu1.into(),
            b.lower.into(),
            r.t.lambda_star.into(),
            b.upper.into(),
            ok.into(),
            r.sup_near.into(),
            r.k_delta.into(),
            r.kappa1.into(),
        ]);
        for p in &r.t.records {
            push_probe(&mut probes, task, p);
            if scheme.is_monotone() {
                max_defect_m = max_defect_m.max(p.monotonicity_defect);
            }
        }
    }
    out.assert(
        "bounds sandwich",
        all_sandwich,
        if failures.is_empty() {
            format!("{} rows within [lower, 1.05 upper]", rows.iter().flatten().count())
        } else {
            failures.join("; ")
        },
    );

    // the flow-free unit-square reference row
    if let Some((task, Some(r))) = tasks.iter().zip(&rows).find(|(t, _)| {
        t.amplitude == 0.0
            && t.case.domain == explosion_core::geometry::DomainSpec::unit_square()
            && t.case.nonlinearity.name == "exponential"
    }) {
        let b = &r.t.bounds;
        let ok = (b.lower - REFERENCE_LOWER).abs() <= 0.01 * REFERENCE_LOWER
            && (b.upper - REFERENCE_UPPER).abs() <= 0.01 * REFERENCE_UPPER
            && b.lower <= r.t.lambda_star
            && r.t.lambda_star <= b.upper;
        out.assert(
            "bounds flow-free reference",
            ok,
            format!(
                "{}: lower {:.4} (≈{REFERENCE_LOWER}), λ* {:.4}, upper {:.4} (≈{REFERENCE_UPPER})",
                task.case.label, b.lower, r.t.lambda_star, b.upper
            ),
        );
    }

    let mut same = true;
    let mut detail = Vec::new();
    for (task, reference) in zero_tasks.iter().zip(&refs) {
        let row = tasks.iter().position(|t| std::ptr::eq(t, *task)).and_then(|k| rows[k].as_ref());
        match (row, reference) {
            (Some(r), Some(v)) => {
                let eq = r.t.lambda_star.to_bits() == v.to_bits();
                same &= eq;
                if !eq {
                    detail.push(format!("{}: {} vs {}", task.case.label, r.t.lambda_star, v));
                }
            }
            _ => same = false,
        }
    }
    if !zero_tasks.is_empty() {
        out.assert(
            "bounds zero amplitude equals flow-free",
            same,
            if detail.is_empty() {
                format!("{} rows bitwise equal", zero_tasks.len())
            } else {
                detail.join("; ")
            },
        );
    }

    let uniform: Vec<String> = tasks
        .iter()
        .zip(&rows)
        .filter_map(|(t, r)| r.as_ref().map(|r| (t, r)))
        .filter(|(_, r)| r.incompressible && r.sup_near > r.k_delta)
        .map(|(t, r)| format!("{} A={}: {:.4} > {:.4}", t.case.label, t.amplitude, r.sup_near, r.k_delta))
        .collect();
    out.assert(
        "bounds uniform sup bound",
        uniform.is_empty(),
        if uniform.is_empty() {
            "sup φ ≤ K(0.1) at 0.9 λ* on every incompressible row".to_string()
        } else {
            uniform.join("; ")
        },
    );
    out.assert(
        "bounds monotone iteration",
        max_defect_m == 0.0,
        format!("max pointwise decrease over upwind probes {max_defect_m:e}"),
    );
    out.tables.push(table);
    out.tables.push(probes);
    out
}

fn push_probe(t: &mut Table, task: &Task, p: &ProbeRecord) {
    t.push(vec![
        task.case.label.as_str().into(),
        task.resolution.into(),
        task.amplitude.into(),
        p.lambda.into(),
        p.status.name().into(),
        p.sup_phi.into(),
        p.iterations.into(),
        p.monotonicity_defect.into(),
    ]);
}
