use explosion_core::elliptic::{exit_time_for, FlowProblem};
use explosion_core::freidlin::detect_cells;
use explosion_core::geometry::{build_grid, flow_from_stream_function, stream_function};

use super::fig2::max_abs_stream;
use super::{run_tasks, ExperimentOutput};
use crate::config::ExperimentConfig;
use crate::table::Table;

/// Skeleton maximum of the exit time over its interior maximum, at the
/// largest amplitude. Fixed from the first sweep at 129² on [0, 2]².
pub const STRONG_RATIO: f64 = 0.2;
pub const WEAK_RATIO: f64 = 0.5;

struct Row {
    skeleton_max: f64,
    interior_max: f64,
    skeleton_nodes: usize,
}

pub fn run(config: &ExperimentConfig) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let resolution = *config.resolutions.last().expect("validated non-empty");
    let built = (|| -> explosion_core::Result<_> {
        let stream = stream_function(&config.flow)?;
        let grid = build_grid(&config.domain, resolution)?;
        let flow = flow_from_stream_function(&stream, &grid)?;
        Ok((stream, grid, flow))
    })();
    let (stream, grid, flow) = match built {
        Ok(b) => b,
        Err(e) => {
            out.assert("stratify setup", false, e.to_string());
            return out;
        }
    };
    let eps = config.tolerances.eps_sep * max_abs_stream(&stream, &grid);
    let skeleton: Vec<usize> = grid
        .interior_nodes()
        .iter()
        .cloned()
        .filter(|&k| {
            let (x, y) = grid.node_xy(k);
            stream.eval(x, y).abs() <= eps
        })
        .collect();

    let results = run_tasks(
        &config.amplitudes,
        |a| format!("stratify/A{a}"),
        |&a| -> explosion_core::Result<Row> {
            let tau = exit_time_for(&FlowProblem::new(&grid, &flow, a).with_scheme(config.scheme))?;
            let v = tau.values();
            let interior_max = grid.interior_nodes().iter().map(|&k| v[k]).fold(0.0, f64::max);
            let skeleton_max = skeleton.iter().map(|&k| v[k]).fold(0.0, f64::max);
            Ok(Row {
                skeleton_max,
                interior_max,
                skeleton_nodes: skeleton.len(),
            })
        },
    );
    let rows = out.absorb(results);
    let mut table = Table::new(
        "stratify.csv",
        "Exit time on the separatrix skeleton {|Ψ| ≤ eps_sep} against its interior maximum.",
        &[
            ("amplitude", "flow amplitude A"),
            ("skeleton_max", "max exit time over skeleton nodes"),
            ("interior_max", "max exit time over interior nodes"),
            ("ratio", "skeleton_max / interior_max"),
            ("skeleton_nodes", "interior nodes with |Ψ| ≤ eps_sep"),
        ],
    );
    let mut ratios = Vec::new();
    for (&a, r) in config.amplitudes.iter().zip(&rows) {
        if let Some(r) = r {
            let ratio = r.skeleton_max / r.interior_max;
            table.push(vec![
                a.into(),
                r.skeleton_max.into(),
                r.interior_max.into(),
                ratio.into(),
                r.skeleton_nodes.into(),
            ]);
            ratios.push((a, ratio));
        }
    }
    let a_max = *config.amplitudes.last().expect("validated non-empty");
    match ratios.iter().find(|r| r.0 == a_max) {
        Some(&(_, ratio)) if a_max > 0.0 => out.assert(
            "stratify skeleton small at largest A",
            ratio <= STRONG_RATIO,
            format!("A={a_max}: ratio {ratio:.4} (threshold {STRONG_RATIO})"),
        ),
        _ => out.assert("stratify skeleton small at largest A", false, "no positive-amplitude result"),
    }
    if let Some(&(_, ratio)) = ratios.iter().find(|r| r.0 == 0.0) {
        out.assert(
            "stratify no flow contrast",
            ratio > WEAK_RATIO,
            format!("A=0: ratio {ratio:.4} (above {WEAK_RATIO})"),
        );
    }

    // the complement of the seeded cells is exactly {|Ψ| ≤ eps}
    let seeds: Vec<(f64, f64)> = config.seeds.iter().map(|s| (s.x, s.y)).collect();
    match detect_cells(&stream, &grid, &seeds, eps) {
        Ok(cells) => {
            let complement: Vec<usize> = grid
                .interior_nodes()
                .iter()
                .cloned()
                .filter(|&k| !cells.iter().any(|c| c.members[k]))
                .collect();
            out.assert(
                "stratify skeleton set",
                complement == skeleton,
                format!(
                    "{} skeleton nodes, {} nodes outside the seeded cells",
                    skeleton.len(),
                    complement.len()
                ),
            );
        }
        Err(e) => out.assert("stratify skeleton set", false, e.to_string()),
    }
    out.tables.push(table);
    out
}
