//! Solvers for finite-support and Gaussian chance-constrained programs: the ALSO-X bisection,
//! its alternating-minimization refinement, CVaR, exact enumeration oracles and
//! ∞-Wasserstein robust counterparts.

pub mod alsox;
pub mod alsoxplus;
pub mod catalog;
pub mod compare;
pub mod covering;
pub mod cvar;
pub mod drccp;
pub mod elliptical;
pub mod error;
pub mod generate;
pub mod geometry;
mod linform;
pub mod loader;
pub mod lowerlevel;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod subgrad;

pub use error::{CcpError, Result};
