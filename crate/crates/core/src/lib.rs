//! Exact grid shortest-path solvers embedded as differentiable layers.
//!
//! The crate is `no_std` (with `alloc`) unless the default `std` feature is
//! enabled; `std` only adds wall-clock timing of solver calls.
//!
//! Layout:
//! - [`grid`]: grid geometry, path masks, Hamming loss and its gradient
//! - [`solver`]: instrumented Dijkstra / A*, the min-weight heuristic and a brute-force oracle
//! - [`blackbox`]: forward solve and perturbed re-solve backward pass
//! - [`hyper`]: solver routing by choice parameter or weight scan, usage counting
//! - [`tcr`]: time-cost measurement, regularization term and weight surrogate
//! - [`model`]: small conv net + FC head producing positive weight grids
//! - [`data`]: synthetic tile-terrain samples with optimal-path labels
//! - [`train`]: one optimization step over a batch, composing all of the above
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod blackbox;
pub mod data;
mod error;
pub mod grid;
pub mod hyper;
pub mod model;
pub mod solver;
pub mod tcr;
pub mod train;

pub use error::{Error, Result};

/// Lower bound applied to every weight handed to a solver.
pub const WEIGHT_FLOOR: f64 = 1e-3;

pub mod prelude {
    pub use crate::blackbox::{bb_backward, bb_forward, BlackboxConfig, ForwardContext};
    pub use crate::grid::{
        hamming, hamming_grad, path_cost, validate_path, Cell, GridProblem, PathMask, WeightGrid,
    };
    pub use crate::hyper::{route, HyperConfig, HyperMode, UsageCounter};
    pub use crate::solver::{astar, dijkstra, Heuristic, SolveResult, SolverKind, SolverStats};
    pub use crate::tcr::{GradMode, TimeCostConfig, TimeUnit};
    pub use crate::{Error, Result};
}
