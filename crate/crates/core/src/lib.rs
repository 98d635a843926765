//! Rate allocation for multicast experimental design networks.
//!
//! Sources stream labelled samples over multicast trees to learners running
//! Bayesian linear regression. Allocations are chosen to maximize the sum of
//! the learners' expected D-optimal information gains subject to link
//! capacities and source rates.

pub mod central;
pub mod distributed;
pub mod error;
pub mod experiments;
pub mod gradient;
pub mod info;
pub mod instance;
pub mod lp;
pub mod objective;
pub mod qp;
pub mod quadrature;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
pub use instance::{Instance, ProblemConfig};
