//! Randomized Kaczmarz-type solvers for linear systems `X beta = y` whose
//! matrix is only available as a product `X = UV`.
//!
//! The interlaced solvers in [`factored`] alternate one step on `U x = y`
//! with one step on `V b = x`, so `X` is never formed. [`solvers`] holds the
//! plain methods (RK, REK, RGS, REGS) they are built from and compared to,
//! and [`oracle`] provides the SVD-based reference solutions and rate
//! constants used to check them.

pub mod cli;
pub mod dense;
pub mod driver;
pub mod error;
pub mod experiment;
pub mod factored;
pub mod kernels;
pub mod oracle;
pub mod sampling;
pub mod solvers;
pub mod systems;
pub mod textio;

pub use dense::{DenseMatrix, DenseVector};
pub use error::{Error, Result};
pub use factored::{BoundVariant, FactoredSystem, InterlacedState, Pair};
pub use solvers::{LinearSystem, Method, SolverState};
pub use systems::{Scenario, ScenarioSpec};
