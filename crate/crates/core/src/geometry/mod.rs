//! Grids, domain masks, stream functions, flows and nonlinearities.

pub mod flow;
pub mod grid;
pub mod nonlinearity;
pub mod stream;

pub use flow::{builtin_flow, flow_from_stream_function, FlowField, FlowSource, FLOW_CATALOG};
pub use grid::{build_grid, DomainSpec, Grid2D, Rect};
pub use nonlinearity::{nonlinearity, phi_transform, Nonlinearity, NONLINEARITY_CATALOG};
pub use stream::{stream_function, StreamFn, StreamFunction, STREAM_CATALOG};
