//! The averaged one-dimensional problem on each flow cell: coefficients
//! T(h), p(h) from the stream function, the explicit Green solution, the
//! monotone iteration and per-cell thresholds.

mod cells;
mod coefficients;
mod solver;

pub use cells::{default_eps_sep, detect_cells, CellSpec};
pub use coefficients::{level_coefficients, level_coefficients_with, level_grid, CoefficientOptions, LevelCoefficients, TopModel};
pub use solver::{
    freidlin_lambda_star, freidlin_linear_solve, freidlin_minimal_solution, multi_cell_threshold, CellThreshold, FreidlinOptions,
    FreidlinResult, FreidlinThreshold, GreenKernel, MultiCellThreshold,
};
