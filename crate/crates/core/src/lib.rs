//! Solvers and diagnostics for multicomponent Euler–Korteweg mixtures with
//! strong interspecies friction.
//!
//! Three systems are integrated on a periodic 1D grid:
//!
//! * the relaxation system, with per-species momenta and friction `1/ε`;
//! * its Chapman–Enskog (Maxwell–Stefan) correction, one barycentric momentum
//!   plus `O(ε)` cross-diffusion;
//! * the zeroth-order limit, one barycentric momentum and no diffusion.
//!
//! The [`friction`] module holds the small dense algebra behind the
//! diffusion matrix, and [`diagnostics`] the relative-energy metrics used to
//! measure convergence rates in `ε`.

// `!(a < b)` guards are written that way so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod discrete;
pub mod error;
pub mod experiment;
pub mod friction;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod output;
pub mod par;
pub mod solver;
pub mod thermo;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::MixtureModel;
pub use par::Execution;
pub use thermo::{Capillarity, EnergyLaw, Enthalpy, ThermoPoint};
