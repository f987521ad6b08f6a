//! Exact kernel for deformation quantization on foliated charts.
//!
//! The crate computes star products of Fedosov type on a chart `M` crossed
//! with a formal transverse parameter `t`, entirely in exact rational
//! arithmetic, and compares the induced families of star products on `M`
//! against their characteristic data. A numeric layer realizes truncated
//! asymptotic series as honest functions with certified cutoff scales.
//!
//! Layering (each module only depends on earlier ones):
//! - [`rat`], [`base`], [`form`]: exact scalars, chart functions, forms;
//! - [`weyl`]: the fiberwise Weyl/Moyal algebra with form indices;
//! - [`ops`], [`table`]: differential operators and star-product tables;
//! - [`fedosov`]: flat connections on the Weyl bundle and quantization;
//! - [`extract`], [`linalg`]: exact extraction of bidifferential cochains;
//! - [`jets`]: jets in the transverse variable and induced star products;
//! - [`moser`]: formal isotopies and star-product equivalences;
//! - [`borel`]: numeric realization of truncated series with bump cutoffs;
//! - [`scenario`], [`random`], [`selftest`]: interchange format, seeded
//!   generators, and the deterministic invariant suite.

pub mod base;
pub mod borel;
pub mod error;
pub mod extract;
pub mod fedosov;
pub mod form;
pub mod jets;
pub mod linalg;
pub mod moser;
pub mod ops;
pub mod random;
pub mod scenario;
pub mod rat;
pub mod selftest;
pub mod table;
pub mod weyl;
