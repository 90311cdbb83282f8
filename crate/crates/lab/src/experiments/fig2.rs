use explosion_core::elliptic::FlowProblem;
use explosion_core::explosion::{ExplosionSolver, ThresholdResult};
use explosion_core::freidlin::{
    detect_cells, freidlin_lambda_star, level_coefficients_with, CellSpec, CoefficientOptions, FreidlinOptions, FreidlinThreshold,
    LevelCoefficients,
};
use explosion_core::geometry::{build_grid, flow_from_stream_function, nonlinearity, stream_function, Grid2D, StreamFunction};

use super::{fmt_list, run_tasks, threshold_options, ExperimentOutput};
use crate::config::ExperimentConfig;
use crate::table::{PlotSpec, Table};

/// λ*_domain ≤ FACTOR_ORDER · min_j λ*_j.
pub const ORDER_FACTOR: f64 = 1.02;
pub const GAP_TOL: f64 = 0.10;
pub const FREIDLIN_TOL: f64 = 0.15;

/// Whole-domain or single-cell threshold at one amplitude.
#[derive(Clone, Copy)]
enum Target {
    Domain,
    Cell(usize),
}

struct Task {
    target: Target,
    amplitude: f64,
}

pub(crate) fn max_abs_stream(stream: &StreamFunction, grid: &Grid2D) -> f64 {
    grid.interior_nodes()
        .iter()
        .map(|&k| {
            let (x, y) = grid.node_xy(k);
            stream.eval(x, y).abs()
        })
        .fold(0.0, f64::max)
}

pub fn run(config: &ExperimentConfig) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let setup = || -> explosion_core::Result<_> {
        let stream = stream_function(&config.flow)?;
        let g = nonlinearity(&config.nonlinearity)?;
        let resolution = *config.resolutions.last().expect("validated non-empty");
        let grid = build_grid(&config.domain, resolution)?;
        let flow = flow_from_stream_function(&stream, &grid)?;
        let seeds: Vec<(f64, f64)> = config.seeds.iter().map(|s| (s.x, s.y)).collect();
        let eps = config.tolerances.eps_sep * max_abs_stream(&stream, &grid);
        let cells = detect_cells(&stream, &grid, &seeds, eps)?;
        let cell_grids = cells
            .iter()
            .map(|c| c.domain(&stream))
            .collect::<explosion_core::Result<Vec<_>>>()?;
        Ok((stream, g, resolution, grid, flow, cells, cell_grids))
    };
    let (stream, g, resolution, grid, flow, cells, cell_grids) = match setup() {
        Ok(s) => s,
        Err(e) => {
            out.tasks.push(crate::manifest::TaskRecord {
                name: "fig2/setup".into(),
                ok: false,
                wall_seconds: 0.0,
                detail: e.to_string(),
            });
            out.assert("fig2 setup", false, e.to_string());
            return out;
        }
    };
    let n = cells.len();
    let tol = &config.tolerances;

    let coeff_opts = CoefficientOptions {
        n_levels: tol.n_levels,
        oversample: tol.oversample,
        ..CoefficientOptions::default()
    };
    let fopts = FreidlinOptions {
        rtol: tol.freidlin_rtol,
        ..FreidlinOptions::default()
    };
    let freidlin = run_tasks(
        &cells,
        |c| format!("fig2/freidlin/cell{}", c.id + 1),
        |c: &CellSpec| -> explosion_core::Result<(LevelCoefficients, FreidlinThreshold)> {
            let coeffs = level_coefficients_with(&stream, c, &coeff_opts)?;
            let t = freidlin_lambda_star(&coeffs, &g, &fopts)?;
            Ok((coeffs, t))
        },
    );
    let freidlin = out.absorb(freidlin);

    let mut tasks = Vec::new();
    for &amplitude in &config.amplitudes {
        tasks.push(Task {
            target: Target::Domain,
            amplitude,
        });
        for j in 0..n {
            tasks.push(Task {
                target: Target::Cell(j),
                amplitude,
            });
        }
    }
    let opts = threshold_options(tol);
    let two_d = run_tasks(
        &tasks,
        |t| match t.target {
            Target::Domain => format!("fig2/domain/A{}", t.amplitude),
            Target::Cell(j) => format!("fig2/cell{}/A{}", j + 1, t.amplitude),
        },
        |t| -> explosion_core::Result<ThresholdResult> {
            let g2 = match t.target {
                Target::Domain => &grid,
                Target::Cell(j) => &cell_grids[j],
            };
            let solver = ExplosionSolver::new(FlowProblem::new(g2, &flow, t.amplitude).with_scheme(config.scheme))?;
            solver.lambda_star(&g, &opts)
        },
    );
    let two_d = out.absorb(two_d);

    let mut columns = vec![
        ("amplitude".to_string(), "flow amplitude A".to_string()),
        ("lambda_domain".to_string(), "threshold of the whole domain".to_string()),
    ];
    for j in 0..n {
        columns.push((format!("lambda_cell{}", j + 1), format!("threshold of cell {} alone", j + 1)));
    }
    columns.extend([
        ("min_cell".to_string(), "minimum over the cells".to_string()),
        ("gap".to_string(), "|λ*_domain − min_cell| / min_cell".to_string()),
        (
            "freidlin_min".to_string(),
            "minimum of the averaged one-dimensional thresholds".to_string(),
        ),
        (
            "max_defect_domain".to_string(),
            "largest pointwise decrease in the domain probes".to_string(),
        ),
    ]);
    let mut table = Table::from_columns(
        "fig2.csv",
        "Whole-domain threshold against per-cell thresholds for the four-cell flow, per amplitude.",
        columns,
    )
    .with_plot(PlotSpec {
        title: "Four-cell flow: domain threshold vs minimum over cells".into(),
        x: "amplitude".into(),
        ys: vec!["lambda_domain".into(), "min_cell".into()],
        xlabel: "A".into(),
        ylabel: "lambda*".into(),
        logx: true,
        logy: false,
    });

    let freidlin_values: Vec<Option<f64>> = freidlin.iter().map(|f| f.as_ref().map(|(_, t)| t.lambda_star)).collect();
    let freidlin_min = if freidlin_values.iter().all(Option::is_some) && n > 0 {
        freidlin_values.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    } else {
        f64::NAN
    };

    let stride = n + 1;
    let mut gaps = Vec::new();
    let mut order_ok = true;
    let mut order_detail = Vec::new();
    let mut last_cells: Option<Vec<f64>> = None;
    let mut last_domain = f64::NAN;
    for (a_idx, &a) in config.amplitudes.iter().enumerate() {
        let block = &two_d[a_idx * stride..(a_idx + 1) * stride];
        let (Some(dom), true) = (&block[0], block[1..].iter().all(Option::is_some)) else {
            order_ok = false;
            order_detail.push(format!("A={a}: task failed"));
            gaps.push(f64::NAN);
            continue;
        };
        let cell_vals: Vec<f64> = block[1..].iter().map(|c| c.as_ref().unwrap().lambda_star).collect();
        let min_cell = cell_vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let gap = (dom.lambda_star - min_cell).abs() / min_cell;
        gaps.push(gap);
        if !(dom.lambda_star <= ORDER_FACTOR * min_cell) {
            order_ok = false;
        }
        order_detail.push(format!("A={a}: {:.4} vs {:.4}", dom.lambda_star, min_cell));
        let mut row = vec![a.into(), dom.lambda_star.into()];
        row.extend(cell_vals.iter().map(|v| (*v).into()));
        row.extend([
            min_cell.into(),
            gap.into(),
            freidlin_min.into(),
            dom.max_monotonicity_defect().into(),
        ]);
        table.push(row);
        if dom.max_monotonicity_defect() > 0.0 {
            log::warn!(
                "fig2 A={a}: domain probes lost pointwise monotonicity (defect {:e})",
                dom.max_monotonicity_defect()
            );
        }
        last_cells = Some(cell_vals);
        last_domain = dom.lambda_star;
    }
    out.assert("fig2 (a) domain below min cell", order_ok, order_detail.join("; "));
    let shrinking = gaps.windows(2).all(|w| w[1] <= w[0]);
    out.assert("fig2 gap shrinks with A", shrinking, format!("gaps {}", fmt_list(&gaps)));
    let last_gap = gaps.last().cloned().unwrap_or(f64::NAN);
    out.assert(
        "fig2 (b) gap at largest A",
        last_gap <= GAP_TOL,
        format!("gap {last_gap:.4} (tolerance {GAP_TOL})"),
    );

    let mut cells_table = Table::new(
        "freidlin_cells.csv",
        "Per-cell averaged thresholds against the two-dimensional cell thresholds at the largest amplitude.",
        &[
            ("cell", "cell number in seed order"),
            ("seed_x", "seed abscissa"),
            ("seed_y", "seed ordinate"),
            ("extremum_x", "node of largest |Ψ|"),
            ("extremum_y", "node of largest |Ψ|"),
            ("h_max", "largest |Ψ| on the cell"),
            ("lambda_bar", "averaged one-dimensional threshold"),
            ("lambda_2d", "two-dimensional cell threshold at the largest A"),
            ("rel_diff", "|λ_2d − λ̄| / λ̄"),
            ("top_slope", "fitted slope of p at the top level"),
        ],
    );
    let mut cell_ok = true;
    let mut cell_detail = Vec::new();
    for (j, c) in cells.iter().enumerate() {
        let (lam_bar, slope) = match &freidlin[j] {
            Some((coeffs, t)) => (t.lambda_star, coeffs.top_slope()),
            None => (f64::NAN, f64::NAN),
        };
        let lam_2d = last_cells.as_ref().map(|v| v[j]).unwrap_or(f64::NAN);
        let rel = (lam_2d - lam_bar).abs() / lam_bar;
        if !(rel <= FREIDLIN_TOL) {
            cell_ok = false;
        }
        cell_detail.push(format!("cell {}: {:.4} vs {:.4} ({:.3})", j + 1, lam_2d, lam_bar, rel));
        cells_table.push(vec![
            (j + 1).into(),
            c.seed.0.into(),
            c.seed.1.into(),
            c.extremum.0.into(),
            c.extremum.1.into(),
            c.h_max.into(),
            lam_bar.into(),
            lam_2d.into(),
            rel.into(),
            slope.into(),
        ]);
        if let Some((coeffs, _)) = &freidlin[j] {
            out.tables.push(coefficient_table(j + 1, coeffs));
        }
    }
    out.assert("fig2 (c) cells match averaged thresholds", cell_ok && n > 0, cell_detail.join("; "));
    let rel = (freidlin_min - last_domain).abs() / last_domain;
    out.assert(
        "fig2 (d) averaged minimum near domain threshold",
        rel <= FREIDLIN_TOL,
        format!("min λ̄ {freidlin_min:.4} vs λ*_domain {last_domain:.4} at res {resolution} ({rel:.3})"),
    );
    out.tables.insert(0, cells_table);
    out.tables.insert(0, table);
    out
}

pub(crate) fn coefficient_table(cell: usize, c: &LevelCoefficients) -> Table {
    let mut t = Table::new(
        &format!("coeff_cell{cell}.csv"),
        "Level coefficients of one cell: turnover time, conductivity and P(h) = ∫ ds/p.",
        &[
            ("h", "level of |Ψ|"),
            ("T", "turnover time"),
            ("p", "conductivity"),
            ("P", "integral of 1/p from 0"),
        ],
    );
    for k in 0..c.len() {
        t.push(vec![c.levels[k].into(), c.t[k].into(), c.p[k].into(), c.p_cum[k].into()]);
    }
    t
}
