//! Shared numerical machinery: adaptive quadrature, special functions,
//! golden-section search and small dense linear algebra.

pub mod golden;
pub mod linalg;
pub mod quad;
pub mod quadnd;
pub mod special;
