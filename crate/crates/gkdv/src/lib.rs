//! Travelling-wave machinery for the generalized Korteweg–de Vries equation
//!
//! ```text
//! u_t + u_xxx + a(u) u_x = 0
//! ```
//!
//! with a user-supplied smooth nonlinearity `a(u)`. The travelling ansatz
//! `u(x,t) = y(x − ct)` reduces the PDE to a third-order ODE whose jet-space
//! structure collapses it to a chain of three quadratures
//!
//! ```text
//! H₁' = y(c − a(y)),   H₂' = H₁/y²,   H₃' = 1/√(y(C₂ + 2H₂(y)) − 2C₃),
//! ```
//!
//! after which a profile is one inversion away. This crate realizes the chain
//! numerically for arbitrary `a(u)` and surrounds it with an independent
//! verification stack:
//!
//! - [`expr`] — parse/evaluate/differentiate nonlinearity expressions;
//! - [`geometry`] — jet-space vector fields, contractions, Lie brackets, and
//!   rank/involutivity checks of the underlying structure;
//! - [`cascade`] — the quadrature chain H₁, H₂, the radicand R, and H₃;
//! - [`profile`] — turning-point analysis and branch-switching profile
//!   integration, jet prolongation, the travelling-wave map;
//! - [`catalog`] — closed-form solution families with residual screening;
//! - [`verify`] — ODE/PDE residuals, conserved-quantity drift, aggregated
//!   machine-readable reports;
//! - [`evolve`] — periodic pseudo-spectral time evolution confirming rigid
//!   propagation at speed c;
//! - [`cli`] — the `gkdv` command-line front end (CSV/JSON emit).
//!
//! See the crate examples for one runnable program per capability, and the
//! `gkdv` binary for the corresponding command-line workflow.

pub mod cascade;
pub mod catalog;
pub mod cli;
pub mod dual;
pub mod evolve;
pub mod expr;
pub mod geometry;
pub mod output;
pub mod profile;
pub mod quad;
pub mod rk;
pub mod verify;


pub use dual::{Dual, Dual1, Scalar};
pub use expr::{parse, NonlinearityExpr, ParamBindings};
pub use geometry::JetPoint;

