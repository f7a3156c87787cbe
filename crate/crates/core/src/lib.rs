//! Set-based active fault diagnosis for uncertain LPV systems.
//!
//! Sets are Constrained Convex Generators ([`ccg::Ccg`]) queried through an
//! embedded conic interior-point solver ([`conic::Backend`]). On top of these
//! sit reachable-set lifting ([`reach`]), excitation-input design
//! ([`separation`]) and a closed-loop detection runtime ([`runtime`]).

pub mod ccg;
pub mod conic;
pub mod error;
pub mod par;
pub mod qp;
pub mod reach;
pub mod runtime;
pub mod scenario;
pub mod separation;

pub use error::{Error, Result};
