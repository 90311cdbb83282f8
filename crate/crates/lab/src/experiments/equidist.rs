use explosion_core::elliptic::FlowProblem;
use explosion_core::explosion::{equidistribution_norm, ExplosionSolver};
use explosion_core::fit;

use super::{fmt_list, minimal_options, run_tasks, setup, threshold_options, ExperimentOutput};
use crate::config::ExperimentConfig;
use crate::table::{PlotSpec, Table};

pub const SLOPE_RANGE: (f64, f64) = (-1.3, -0.7);
pub const DOUBLING_FACTOR: f64 = 1.6;
/// Fraction of λ*(A) at which the minimal solution is evaluated.
pub const LAMBDA_FRACTION: f64 = 0.5;

struct Row {
    lambda_star: f64,
    sup: f64,
    integral: f64,
}

pub fn run(config: &ExperimentConfig) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let case = &config.effective_cases()[0];
    let resolution = *config.resolutions.last().expect("validated non-empty");
    let opts = threshold_options(&config.tolerances);
    let mopts = minimal_options(&config.tolerances);
    let results = run_tasks(
        &config.amplitudes,
        |a| format!("equidist/A{a}"),
        |&a| -> explosion_core::Result<Row> {
            let s = setup(case, resolution)?;
            let solver = ExplosionSolver::new(FlowProblem::new(&s.grid, &s.flow, a).with_scheme(case.scheme_or(config.scheme)))?;
            let t = solver.lambda_star(&s.g, &opts)?;
            let r = solver.minimal_solution(LAMBDA_FRACTION * t.lambda_star, &s.g, &mopts)?;
            let phi = r
                .field
                .as_ref()
                .filter(|_| r.converged())
                .ok_or(explosion_core::Error::NoConvergence {
                    iterations: r.iterations,
                    residual: r.final_increment,
                })?;
            Ok(Row {
                lambda_star: t.lambda_star,
                sup: r.sup(),
                integral: equidistribution_norm(phi, &s.flow)?,
            })
        },
    );
    let rows = out.absorb(results);
    let mut table = Table::new(
        "equidist.csv",
        "Streamline variation ∫|u·∇φ|² of the minimal solution at λ = 0.5 λ*(A).",
        &[
            ("amplitude", "flow amplitude A"),
            ("lambda_star", "threshold at this A"),
            ("lambda", "λ used for φ"),
            ("sup_phi", "sup of φ"),
            ("integral", "∫|u·∇φ|²"),
        ],
    )
    .with_plot(PlotSpec {
        title: "Equidistribution along streamlines".into(),
        x: "amplitude".into(),
        ys: vec!["integral".into()],
        xlabel: "A".into(),
        ylabel: "integral |u.grad phi|^2".into(),
        logx: true,
        logy: true,
    });
    let mut pts = Vec::new();
    for (&a, r) in config.amplitudes.iter().zip(&rows) {
        if let Some(r) = r {
            table.push(vec![
                a.into(),
                r.lambda_star.into(),
                (LAMBDA_FRACTION * r.lambda_star).into(),
                r.sup.into(),
                r.integral.into(),
            ]);
            pts.push((a, r.integral));
        }
    }
    let all_ok = rows.iter().all(Option::is_some);
    let positive: Vec<(f64, f64)> = pts.iter().cloned().filter(|p| p.0 > 0.0).collect();
    let xs: Vec<f64> = positive.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = positive.iter().map(|p| p.1.ln()).collect();
    let slope = if xs.len() >= 2 {
        fit::line(&xs, &ys).map(|(_, b)| b).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    out.assert(
        "equidist slope",
        all_ok && slope >= SLOPE_RANGE.0 && slope <= SLOPE_RANGE.1,
        format!(
            "log-log slope {slope:.4} over A = {} (range [{}, {}])",
            fmt_list(&positive.iter().map(|p| p.0).collect::<Vec<_>>()),
            SLOPE_RANGE.0,
            SLOPE_RANGE.1
        ),
    );
    if let Some(&(_, i0)) = pts.iter().find(|p| p.0 == 0.0) {
        let largest = pts.iter().all(|p| p.0 == 0.0 || p.1 < i0);
        out.assert(
            "equidist A=0 largest",
            i0.is_finite() && largest,
            format!("integral at A=0 is {i0:.6e}"),
        );
    }
    let at = |a: f64| pts.iter().find(|p| p.0 == a).map(|p| p.1);
    if let (Some(i256), Some(i512)) = (at(256.0), at(512.0)) {
        let ratio = i256 / i512;
        out.assert(
            "equidist doubling 256 to 512",
            ratio >= DOUBLING_FACTOR,
            format!("ratio {ratio:.4} (at least {DOUBLING_FACTOR})"),
        );
    }
    out.tables.push(table);
    out
}
