//! Special functions, gamma-weighted quadrature and monotone root finding.

mod quadrature;
mod roots;
mod special;

pub use quadrature::{gamma_expectation, gamma_weighted_integral, QuadratureSpec};
pub use roots::{solve_monotone_root, solve_monotone_root_in, ROOT_XTOL};
pub use special::{digamma, log_gamma, trigamma};

pub(crate) use special::ln_gamma_unchecked;
