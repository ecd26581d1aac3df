//! Numerical building blocks: quadrature, special functions, compensated arithmetic.

pub mod ddouble;
pub mod quadrature;
pub mod special;

pub use quadrature::{integrate, integrate_piecewise, Integral, QuadOptions};
pub use special::CompensatedSum;
