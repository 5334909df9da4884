//! Numerical laboratory for boundary Riemann problems of strictly hyperbolic,
//! non-characteristic systems `U_t + A(U) U_x = 0` on `x > 0`.
//!
//! The crate computes boundary layers on the stable manifold of
//! `V' = W, W' = A(V) W`, wave-fan curves through the envelope fixed point,
//! self-similar viscous profiles `eps Q'' = (A(Q) - xi I) Q'`, and assembles
//! the boundary Riemann fan, then measures how close the viscous profiles
//! come to the assembled fan as `eps` decreases.

pub mod banded;
pub mod error;
pub mod interp;
pub mod layers;
pub mod models;
pub mod riemann;
pub mod ode;
pub mod selfsim;
pub mod spectral;
pub mod wavefan;

pub use error::{Error, Result};
