//! Discrete advection-diffusion operators, linear solves, principal
//! eigenvalues, exit times and parabolic evolution.

mod eigen;
mod operator;
mod parabolic;

pub use eigen::{principal_eigenvalue, principal_eigenvalue_with, EigenOptions, EigenResult};
pub use operator::{
    assemble, assemble_adjoint, exit_time, exit_time_for, solve, solve_unknowns, theta, AdvectionDiffusionOperator, AdvectionScheme,
    FactorizedOperator, FlowProblem, SolveOptions, SolverMethod, DIRECT_THRESHOLD,
};
pub use parabolic::{decay_profile, evolve, DecayFit, DecayProfile, EvolveOptions, ParabolicRun};
