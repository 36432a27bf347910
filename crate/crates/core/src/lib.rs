//! Global dissipative solutions of the two-component Camassa–Holm system
//!
//! ```text
//! u_t - u_txx + kappa u_x + 3 u u_x - 2 u_x u_xx - u u_xxx + eta rho rho_x = 0
//! rho_t + (u rho)_x = 0
//! ```
//!
//! computed in Lagrangian variables. Characteristics that break have their
//! energy frozen so the continuation is dissipative; a conservative mode
//! without freezing is available for comparison.
//!
//! The pipeline is `to_lagrangian` → [`scenarios::solve`] →
//! `to_eulerian`, with the stability metric in [`metric`].

pub mod error;
pub mod evolution;
pub mod exec;
pub mod grid;
pub mod kernels;
pub mod metric;
pub mod partition;
pub mod scenarios;
pub mod state;
pub mod transform;

pub use error::{Error, Result};
pub use grid::UniformGrid;
pub use partition::PartitionFn;
pub use state::{EulerianState, LagrangianState, Measure};
