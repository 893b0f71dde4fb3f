//! Optimal voluntary retirement, consumption and portfolio choice by convex
//! duality and a free-boundary problem on the dual (marginal-value) process.
// Negated float comparisons are deliberate so that NaN fails validation.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod crra_oracle;
pub mod dual;
pub mod error;
pub mod felicity;
pub mod market;
pub mod montecarlo;
pub mod operators;
pub mod policy;
pub mod quadrature;
pub mod retirement;
pub mod roots;
pub mod scenario;

pub use error::{Error, Result};
