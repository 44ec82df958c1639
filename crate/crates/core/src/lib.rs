//! Semilinear Klein-Gordon equations on flat FLRW backgrounds.
//!
//! The crate integrates
//! `u_tt + n(ȧ/a)u_t − c²a⁻²Δu + m²c²u = c²f(u)` on a periodic torus,
//! evaluates the energy and Nehari functionals along the flow, decides
//! whether the finite-time blow-up theorems apply to a scenario and
//! reports their certified bounds.

pub mod commands;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod functionals;
pub mod hypotheses;
pub mod nonlinearity;
mod ode;
pub mod odelab;
pub mod scale_factor;

pub use error::{Error, Result};
