//! The named experiments. Each returns its tables, assertions and task
//! records; the runner writes files and the manifest.

mod bounds;
mod compressible;
mod equidist;
mod fig2;
mod gelfand;
mod shear_growth;
mod stratify;

use std::time::Instant;

use explosion_core::explosion::{MinimalSolutionOptions, ThresholdOptions};
use explosion_core::geometry::{build_grid, builtin_flow, nonlinearity, FlowField, Grid2D, Nonlinearity};
use explosion_core::Result as CoreResult;
use rayon::prelude::*;

use crate::config::{Case, Experiment, ExperimentConfig, Tolerances};
use crate::manifest::{Assertion, TaskRecord};
use crate::table::Table;

#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
    pub tasks: Vec<TaskRecord>,
}

impl ExperimentOutput {
    pub(crate) fn assert(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        let a = Assertion::new(name, passed, detail);
        if a.passed {
            log::info!("PASS {}: {}", a.name, a.detail);
        } else {
            log::warn!("FAIL {}: {}", a.name, a.detail);
        }
        self.assertions.push(a);
    }

    /// Moves task records in and returns the successful payloads.
    pub(crate) fn absorb<T>(&mut self, results: Vec<(TaskRecord, Option<T>)>) -> Vec<Option<T>> {
        results
            .into_iter()
            .map(|(rec, val)| {
                self.tasks.push(rec);
                val
            })
            .collect()
    }
}

/// Dispatches to the configured experiment. Must run inside the worker pool.
pub fn run_experiment(config: &ExperimentConfig) -> ExperimentOutput {
    match config.experiment {
        Experiment::Gelfand => gelfand::run(config),
        Experiment::Bounds => bounds::run(config),
        Experiment::Fig2 => fig2::run(config),
        Experiment::Equidist => equidist::run(config),
        Experiment::Stratify => stratify::run(config),
        Experiment::Compressible => compressible::run(config),
        Experiment::ShearGrowth => shear_growth::run(config),
    }
}

/// Runs independent tasks on the current pool, keeping input order.
pub(crate) fn run_tasks<I, T>(
    items: &[I],
    name: impl Fn(&I) -> String + Sync,
    f: impl Fn(&I) -> CoreResult<T> + Sync,
) -> Vec<(TaskRecord, Option<T>)>
where
    I: Sync,
    T: Send,
{
    items
        .par_iter()
        .map(|item| {
            let task = name(item);
            let t0 = Instant::now();
            let out = f(item);
            let wall_seconds = t0.elapsed().as_secs_f64();
            match out {
                Ok(v) => {
                    log::info!("task {task} done in {wall_seconds:.2}s");
                    (
                        TaskRecord {
                            name: task,
                            ok: true,
                            wall_seconds,
                            detail: String::new(),
                        },
                        Some(v),
                    )
                }
                Err(e) => {
                    log::error!("task {task} failed: {e}");
                    (
                        TaskRecord {
                            name: task,
                            ok: false,
                            wall_seconds,
                            detail: e.to_string(),
                        },
                        None,
                    )
                }
            }
        })
        .collect()
}

pub(crate) fn threshold_options(t: &Tolerances) -> ThresholdOptions {
    ThresholdOptions {
        rtol: t.rtol,
        minimal: minimal_options(t),
        ..ThresholdOptions::default()
    }
}

pub(crate) fn minimal_options(t: &Tolerances) -> MinimalSolutionOptions {
    MinimalSolutionOptions {
        tol_inc: t.tol_inc,
        max_iter: t.max_iter,
        blowup_cap: None,
    }
}

pub(crate) struct Setup {
    pub grid: Grid2D,
    pub flow: FlowField,
    pub g: Nonlinearity,
}

pub(crate) fn setup(case: &Case, resolution: usize) -> CoreResult<Setup> {
    let grid = build_grid(&case.domain, resolution)?;
    let flow = builtin_flow(&case.flow, &grid)?;
    let g = nonlinearity(&case.nonlinearity)?;
    Ok(Setup { grid, flow, g })
}

pub(crate) fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}
