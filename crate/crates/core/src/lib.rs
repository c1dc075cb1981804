//! q-calculus toolchain for the q-analogue of the heat equation.
//!
//! * [`qcore`]: Jackson derivative and integral, q-exponentials, q-sine and
//!   q-cosine, and the operator `L = -(1/q) D_{1/q} D_q`.
//! * [`spectral`]: eigenvalues and orthonormal eigenfunctions of `L` with
//!   Dirichlet conditions on `[0, 1]`, modal analysis and synthesis.
//! * [`forward`]: modal series solution of `D_{q,t} u + L u = v(t) f(t, x)`.
//! * [`inverse_source`]: recovery of `v(t)` from the mass `∫ u d_q x`.
//! * [`inverse_initial`]: recovery of the initial state and non-local data
//!   from a snapshot `u(ξ₀, ·)`.
//! * [`cli`]: the `qheat` command-line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod forward;
pub mod inverse_initial;
pub mod inverse_source;
pub mod qcore;
pub mod spectral;

pub use error::{Error, Result};
pub use forward::{solve_forward, SolutionBundle, SourceSpec};
pub use qcore::{QLattice, QParams, ScalarFn};
pub use spectral::{find_eigenvalues, ModalSeries, Spectrum};
