//! Non-Euclidean stochastic gradient methods with structured geometry.
//!
//! The crate implements a family of trust-region-style stochastic methods
//! (normalized SGD, sign descent, and orthogonalized matrix updates) that
//! share one linear-minimization-oracle update, three momentum estimators,
//! and norm-ball constraints enforced through a decay coupling. Alongside
//! the optimizer it ships a numerical verification lab for the supporting
//! inequalities and a sweep harness that measures iteration-complexity
//! rate exponents.

pub mod cli;
pub mod criterion;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod lemma_lab;
pub mod optimizer;
pub mod point;
pub mod problems;
pub mod util;

pub use error::{Error, Result};
pub use geometry::{OperatorSpace, Payload, StructuredOperator};
pub use point::{Point, Shape};
