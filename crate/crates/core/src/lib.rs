//! Euler approximation of SDEs driven by α-stable-like Lévy processes.
//!
//! The crate simulates
//!
//! ```text
//! X_t = x0 + ∫ b(X_s) ds + ∫ G(X_{s-}) dL_s,   t ∈ [0, 1]
//! ```
//!
//! where `L` is a pure-jump process with Lévy measure `ρ(y) dy / |y|^{d+α}`,
//! `α ∈ [1, 2)`, either in full (`L`) or truncated to jumps of size at most
//! one (`L⁰`). One realization of the driving point measure is shared by
//! every dyadic grid, so Euler paths at different resolutions are coupled
//! and their differences isolate discretization error.
//!
//! Module map:
//!
//! * [`levy_measure`]: angular densities, radial and directional samplers,
//!   intensities and small-jump moments.
//! * [`path_driver`]: grid-consistent realizations of the driver.
//! * [`coefficients`]: drift/diffusion families with regularity metadata.
//! * [`euler_engine`]: the Euler recursion and an event-driven oracle for
//!   finite-activity drivers.
//! * [`error_stats`]: strong and weak error estimation, moment scalings and
//!   log-log rate fits.
//! * [`experiment`]: config files, presets and the batch runner behind the CLI.

pub mod coefficients;
pub mod error;
pub mod error_stats;
pub mod euler_engine;
pub mod exec;
pub mod experiment;
pub mod levy_measure;
pub mod ode;
pub mod path_driver;
pub mod quadrature;
pub mod rng;

pub use crate::error::{Error, Result};

/// Largest state dimension supported by the sphere quadratures.
pub const MAX_DIM: usize = 3;
