use explosion_core::elliptic::FlowProblem;
use explosion_core::explosion::{ExplosionSolver, ThresholdResult, SANDWICH_SLACK};

use super::{run_tasks, setup, threshold_options, ExperimentOutput};
use crate::config::{Case, ExperimentConfig};
use crate::table::{PlotSpec, Table};

/// λ*(A_max)/λ*(0) for a flow without a first integral.
pub const GROWTH_MIN: f64 = 2.0;
/// λ*(A_max)/λ*(0) for a cellular flow.
pub const PLATEAU_MAX: f64 = 1.5;

struct Task<'a> {
    case: &'a Case,
    amplitude: f64,
}

pub fn run(config: &ExperimentConfig) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let cases = config.effective_cases();
    let resolution = *config.resolutions.last().expect("validated non-empty");
    let opts = threshold_options(&config.tolerances);
    let tasks: Vec<Task> = cases
        .iter()
        .flat_map(|case| config.amplitudes.iter().map(move |&amplitude| Task { case, amplitude }))
        .collect();
    let results = run_tasks(
        &tasks,
        |t| format!("shear_growth/{}/A{}", t.case.label, t.amplitude),
        |t| -> explosion_core::Result<ThresholdResult> {
            let s = setup(t.case, resolution)?;
            ExplosionSolver::new(FlowProblem::new(&s.grid, &s.flow, t.amplitude).with_scheme(t.case.scheme_or(config.scheme)))?
                .lambda_star(&s.g, &opts)
        },
    );
    let rows = out.absorb(results);

    let mut columns = vec![("amplitude".to_string(), "flow amplitude A".to_string())];
    for c in &cases {
        columns.push((format!("lambda_{}", c.label), format!("threshold for case {}", c.label)));
    }
    let mut curve = Table::from_columns("shear_growth.csv", "Threshold against amplitude for each case.", columns).with_plot(PlotSpec {
        title: "Growth of the threshold with amplitude".into(),
        x: "amplitude".into(),
        ys: cases.iter().map(|c| format!("lambda_{}", c.label)).collect(),
        xlabel: "A".into(),
        ylabel: "lambda*".into(),
        logx: false,
        logy: true,
    });
    let mut detail = Table::new(
        "shear_growth_rows.csv",
        "Per-row bounds for the amplitude sweeps.",
        &[
            ("case", "case label"),
            ("scheme", "advection discretization"),
            ("amplitude", "flow amplitude A"),
            ("lower", "supersolution lower bound"),
            ("lambda_star", "threshold"),
            ("upper", "μ₁/g'(0)"),
            ("sandwich", "lower ≤ λ* ≤ 1.05 upper"),
        ],
    );
    let na = config.amplitudes.len();
    for (ai, &a) in config.amplitudes.iter().enumerate() {
        let mut row = vec![a.into()];
        for ci in 0..cases.len() {
            row.push(rows[ci * na + ai].as_ref().map(|t| t.lambda_star).unwrap_or(f64::NAN).into());
        }
        curve.push(row);
    }
    let mut sandwich_ok = true;
    let mut sandwich_detail = Vec::new();
    for (t, r) in tasks.iter().zip(&rows) {
        let Some(r) = r else {
            sandwich_ok = false;
            sandwich_detail.push(format!("{} A={} failed", t.case.label, t.amplitude));
            continue;
        };
        let b = &r.bounds;
        let ok = b.lower <= r.lambda_star && r.lambda_star <= (1.0 + SANDWICH_SLACK) * b.upper;
        if !ok {
            sandwich_ok = false;
            sandwich_detail.push(format!(
                "{} A={}: {:.4} ≤ {:.4} ≤ {:.4}",
                t.case.label, t.amplitude, b.lower, r.lambda_star, b.upper
            ));
        }
        detail.push(vec![
            t.case.label.as_str().into(),
            t.case.scheme_or(config.scheme).name().into(),
            t.amplitude.into(),
            b.lower.into(),
            r.lambda_star.into(),
            b.upper.into(),
            ok.into(),
        ]);
    }
    out.assert(
        "shear_growth sandwich",
        sandwich_ok,
        if sandwich_detail.is_empty() {
            "every row within the bounds".to_string()
        } else {
            sandwich_detail.join("; ")
        },
    );
    for (ci, case) in cases.iter().enumerate() {
        let lam = |ai: usize| rows[ci * na + ai].as_ref().map(|t| t.lambda_star);
        let zero = config.amplitudes.iter().position(|&a| a == 0.0);
        let (Some(l0), Some(l1)) = (zero.and_then(lam), lam(na - 1)) else {
            out.assert(
                format!("shear_growth {}", case.label),
                false,
                "needs converged rows at A=0 and the largest A",
            );
            continue;
        };
        let ratio = l1 / l0;
        let a_max = config.amplitudes[na - 1];
        if case.flow.name == "shear" {
            out.assert(
                format!("shear_growth {} grows", case.label),
                ratio >= GROWTH_MIN,
                format!("lambda*({a_max})/lambda*(0) = {ratio:.4} (at least {GROWTH_MIN})"),
            );
        } else {
            out.assert(
                format!("shear_growth {} plateaus", case.label),
                ratio <= PLATEAU_MAX,
                format!("lambda*({a_max})/lambda*(0) = {ratio:.4} (at most {PLATEAU_MAX})"),
            );
        }
    }
    out.tables.push(curve);
    out.tables.push(detail);
    out
}
