//! Analysis toolkit for the differential inequality
//! `F(x, D^2 u) >= f(u) + g(u) |Du|^q` with degenerate elliptic `F`.
//!
//! The crate solves the associated radial Cauchy problem with blow-up
//! bracketing, classifies existence of entire viscosity subsolutions through
//! Keller-Osserman-type divergence conditions, and builds the universal
//! barrier `R(a)` whose inverse bounds subsolutions by the distance to the
//! boundary.

pub mod expr;
pub mod logval;
pub mod nonlin;
pub mod ode;
pub mod quad;
pub mod rk;

pub use expr::Expr;
pub use logval::LogVal;
