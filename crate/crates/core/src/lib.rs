//! Numerical laboratory for the weighted elliptic problem on the half-space
//! `R^N_+ = {x_N > 0}` with diffusion weight `ρ(x_N)` and nonlinear boundary flux.
//!
//! Functions are axially symmetric in `x' ∈ R^{N-1}` and live on a truncated
//! `(r, x_N)` grid with homogeneous Dirichlet data on the far edges.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod fem;
pub mod grid;
pub mod inequalities;
pub mod instanton;
pub mod linalg;
pub mod minimizers;
pub mod pohozaev;
pub mod quadrature;
pub mod rearrangement;
pub mod solver;
pub mod suite;
pub mod weight;

pub use constants::{critical_exponents, hardy_constant, trace_best_constant, CriticalExponents, OmegaConvention};
pub use error::{Error, Result};
pub use grid::{make_grid, AxisymGrid, Field, GridSpec};
pub use instanton::{BubbleKind, InstantonParams};
pub use weight::Weight;
