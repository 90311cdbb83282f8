use explosion_core::elliptic::FlowProblem;
use explosion_core::explosion::{ExplosionSolver, ThresholdResult};

use super::{run_tasks, setup, threshold_options, ExperimentOutput};
use crate::config::ExperimentConfig;
use crate::table::{PlotSpec, Table};

/// λ* for g = e^s on the unit disk without flow.
pub const DISK_LAMBDA_STAR: f64 = 2.0;

/// Accepted relative error at a given resolution.
pub fn tolerance_for(resolution: usize) -> f64 {
    if resolution >= 385 {
        0.05
    } else if resolution >= 193 {
        0.08
    } else {
        0.12
    }
}

pub fn run(config: &ExperimentConfig) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let case = &config.effective_cases()[0];
    let amplitude = config.amplitudes[0];
    let opts = threshold_options(&config.tolerances);
    let results = run_tasks(
        &config.resolutions,
        |r| format!("gelfand/res{r}"),
        |&r| -> explosion_core::Result<(usize, ThresholdResult)> {
            let s = setup(case, r)?;
            let solver = ExplosionSolver::new(FlowProblem::new(&s.grid, &s.flow, amplitude).with_scheme(case.scheme_or(config.scheme)))?;
            Ok((s.grid.interior_count(), solver.lambda_star(&s.g, &opts)?))
        },
    );
    let results = out.absorb(results);
    let mut table = Table::new(
        "gelfand.csv",
        "Threshold on the unit disk without flow, per resolution, against the radial value 2.",
        &[
            ("resolution", "nodes along the longer side"),
            ("unknowns", "interior nodes of the staircase mask"),
            ("lambda_star", "computed threshold (bracket midpoint)"),
            ("bracket_lo", "largest converged λ"),
            ("bracket_hi", "smallest blown-up λ"),
            ("rel_error", "|λ* − 2| / 2"),
            ("tolerance", "accepted relative error"),
            ("theta", "max exit time"),
            ("mu1", "principal eigenvalue"),
            ("lower", "supersolution lower bound"),
            ("upper", "μ₁/g'(0)"),
        ],
    )
    .with_plot(PlotSpec {
        title: "Gelfand threshold on the disk".into(),
        x: "resolution".into(),
        ys: vec!["lambda_star".into()],
        xlabel: "resolution".into(),
        ylabel: "lambda*".into(),
        logx: true,
        logy: false,
    });
    for (&r, res) in config.resolutions.iter().zip(&results) {
        let Some((unknowns, t)) = res else {
            out.assert(format!("gelfand res {r}"), false, "task failed");
            continue;
        };
        let err = (t.lambda_star - DISK_LAMBDA_STAR).abs() / DISK_LAMBDA_STAR;
        let tol = tolerance_for(r);
        table.push(vec![
            r.into(),
            (*unknowns).into(),
            t.lambda_star.into(),
            t.bracket.0.into(),
            t.bracket.1.into(),
            err.into(),
            tol.into(),
            t.bounds.theta.into(),
            t.bounds.mu1.into(),
            t.bounds.lower.into(),
            t.bounds.upper.into(),
        ]);
        out.assert(
            format!("gelfand res {r}"),
            err <= tol,
            format!("lambda* = {:.6}, relative error {:.4} (tolerance {tol})", t.lambda_star, err),
        );
    }
    out.tables.push(table);
    out
}
