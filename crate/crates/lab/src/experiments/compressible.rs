use explosion_core::elliptic::FlowProblem;
use explosion_core::explosion::{ExplosionSolver, ThresholdResult};

use super::bounds::UNIFORM_DELTA;
use super::{minimal_options, run_tasks, setup, threshold_options, ExperimentOutput};
use crate::config::ExperimentConfig;
use crate::table::{PlotSpec, Table};

pub const MU_COLLAPSE: f64 = 0.1;
pub const LAMBDA_COLLAPSE: f64 = 0.2;

struct Row {
    t: ThresholdResult,
    incompressible: bool,
    sup_near: f64,
    k_delta: f64,
}

/// The configured flow is scaled by each amplitude, so with `radial`
/// (n = 1) the amplitudes are the values of n in u = 4n x.
pub fn run(config: &ExperimentConfig) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let case = &config.effective_cases()[0];
    let resolution = *config.resolutions.last().expect("validated non-empty");
    let opts = threshold_options(&config.tolerances);
    let mopts = minimal_options(&config.tolerances);
    let results = run_tasks(
        &config.amplitudes,
        |n| format!("compressible/n{n}"),
        |&n| -> explosion_core::Result<Row> {
            let s = setup(case, resolution)?;
            let solver = ExplosionSolver::new(FlowProblem::new(&s.grid, &s.flow, n).with_scheme(case.scheme_or(config.scheme)))?;
            let t = solver.lambda_star(&s.g, &opts)?;
            let near = solver.minimal_solution((1.0 - UNIFORM_DELTA) * t.lambda_star, &s.g, &mopts)?;
            Ok(Row {
                incompressible: s.flow.is_incompressible(),
                sup_near: if near.converged() { near.sup() } else { f64::INFINITY },
                k_delta: s.g.uniform_bound(UNIFORM_DELTA),
                t,
            })
        },
    );
    let rows = out.absorb(results);
    let mut table = Table::new(
        "compressible.csv",
        "Principal eigenvalue and threshold under the radial flow u = 4n x.",
        &[
            ("n", "radial flow strength"),
            ("mu1", "principal eigenvalue"),
            ("lambda_star", "threshold"),
            ("theta", "max exit time"),
            ("lower", "supersolution lower bound"),
            ("upper", "μ₁/g'(0)"),
            ("incompressible", "flow declared divergence-free"),
            ("uniform_applicable", "the flow-uniform sup bound is asserted on this row"),
            ("sup_phi_near", "sup φ at λ = 0.9 λ*"),
            ("uniform_bound", "K(0.1)"),
        ],
    )
    .with_plot(PlotSpec {
        title: "Compressible radial flow".into(),
        x: "n".into(),
        ys: vec!["mu1".into(), "lambda_star".into()],
        xlabel: "n".into(),
        ylabel: "value".into(),
        logx: false,
        logy: true,
    });
    let mut mus = Vec::new();
    let mut lams = Vec::new();
    let mut flag_ok = true;
    let mut uniform_violations = Vec::new();
    for (&n, r) in config.amplitudes.iter().zip(&rows) {
        let Some(r) = r else { continue };
        let b = &r.t.bounds;
        let applicable = r.incompressible;
        if applicable && r.sup_near > r.k_delta {
            uniform_violations.push(format!("n={n}"));
        }
        if !r.incompressible && applicable {
            flag_ok = false;
        }
        table.push(vec![
            n.into(),
            b.mu1.into(),
            r.t.lambda_star.into(),
            b.theta.into(),
            b.lower.into(),
            b.upper.into(),
            r.incompressible.into(),
            applicable.into(),
            r.sup_near.into(),
            r.k_delta.into(),
        ]);
        mus.push(b.mu1);
        lams.push(r.t.lambda_star);
    }
    let complete = rows.iter().all(Option::is_some) && mus.len() >= 2;
    let decreasing = mus.windows(2).all(|w| w[1] < w[0]);
    out.assert(
        "compressible mu1 strictly decreasing",
        complete && decreasing,
        format!("mu1 = {}", super::fmt_list(&mus)),
    );
    if complete {
        let (m0, m1) = (mus[0], *mus.last().unwrap());
        out.assert(
            "compressible mu1 collapse",
            m1 < MU_COLLAPSE * m0,
            format!("mu1 {m1:.4} vs {m0:.4} (ratio {:.4}, below {MU_COLLAPSE})", m1 / m0),
        );
        let (l0, l1) = (lams[0], *lams.last().unwrap());
        out.assert(
            "compressible lambda collapse",
            l1 < LAMBDA_COLLAPSE * l0,
            format!("lambda* {l1:.4} vs {l0:.4} (ratio {:.4}, below {LAMBDA_COLLAPSE})", l1 / l0),
        );
    }
    out.assert(
        "compressible uniformity flag",
        flag_ok && uniform_violations.is_empty(),
        "flow-uniform sup bound asserted only on incompressible rows".to_string(),
    );
    out.tables.push(table);
    out
}
