//! Numerical solver and hypothesis checker for systems of nonlocal elliptic
//! equations with functional boundary conditions,
//!
//! ```text
//! L_i u_i = lambda_i f_i(x, u, w_i[u])   in Omega,
//! B_i u_i = eta_i zeta_i(x) h_i[u]       on the boundary,
//! ```
//!
//! solved as fixed points of `u = T u + Gamma u` with
//! `T(u) = (lambda_i K_i F_i(u))_i` and `Gamma(u) = (eta_i gamma_i h_i[u])_i`.

pub mod elliptic;
pub mod error;
pub mod expr;
pub mod grid;
pub mod linalg;
pub mod builtin;
pub mod certify;
pub mod problem;
pub mod solver;

pub use error::{Error, Result, ValidationError};
