//! Vanishing-viscosity approximation of Aronsson's equation `⟨D_x H(x, Du), D_p H(x, Du)⟩ = 0`
//! for `H(x, p) = ⟨A(x) p, p⟩` on uniform 2D grids, with numerical checks of the a priori
//! estimates that such approximations satisfy.

// `!(x > 0.0)` is used on purpose so that NaN is rejected; band solvers index several arrays per loop.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coefficients;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod intrinsic;
pub mod mat;
pub mod operator;
pub mod scenario;
pub mod solver;

pub use coefficients::{CoefficientField, CoefficientPreset, EllipticityFlags};
pub use error::{Error, Result};
pub use estimates::{BarrierSpec, CheckReport, FlatnessReport, Outcome};
pub use grid::{Grid2D, InteriorField, ScalarField, SymMatrixField, VectorField};
pub use intrinsic::{BlowupTrace, DistanceField};
pub use mat::Sym2;
pub use scenario::{BoundaryPreset, Scenario, ScenarioOutcome, Suite};
pub use solver::{Discretization, EpsSchedule, RegularizedSolution, SolveConfig, SolveReport};
