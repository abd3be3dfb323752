//! Exact laboratory for metrical task and service systems parametrized by the
//! number of distinct requests: metrics, offline optimum, online algorithms,
//! adaptive lower-bound adversaries, and an experiment harness.

pub mod adversaries;
pub mod algorithms;
pub mod check;
pub mod cost;
pub mod error;
pub mod harness;
pub mod metric;
pub mod offline;
pub mod request;

pub use cost::{ExtendedCost, Reps};
pub use error::{Error, Result};
pub use metric::{HstTree, MetricSpace};
pub use offline::{optimal, optimal_rle, OptResult, Start};
pub use request::{Block, Instance, Request, RequestSet, Run, Transcript};
