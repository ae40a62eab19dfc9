//! Portfolio construction under the mean absolute deviation (MAD) risk measure.
//!
//! The crate implements:
//!
//! - discrete return scenarios with equal probabilities, loaded from price
//!   CSVs or generated synthetically ([`scenarios`]),
//! - the MAD measure, its subgradient, risk contributions, and a closed-form
//!   risk parity solution for comonotone markets ([`risk`]),
//! - dense convex building blocks: simplex projection, a primal-dual
//!   interior-point LP solver, and a barrier Newton solver for epigraph
//!   formulations ([`optim`]),
//! - five equivalent formulations of the MAD risk parity problem plus the
//!   comparison strategies (minimum MAD, minimum variance, volatility risk
//!   parity, equal weights) ([`solvers`]),
//! - an accuracy benchmark harness ([`bench`]) and a rolling out-of-sample
//!   backtest with the usual performance metrics ([`backtest`]).
//!
//! All numerics are f64. Sums that feed reported statistics run in a fixed
//! sequential order so repeated runs are bit-identical.

pub mod backtest;
pub mod bench;
mod error;
pub mod optim;
pub mod risk;
pub mod scenarios;
pub mod solvers;

pub use error::{Error, Result};
pub use risk::PortfolioWeights;
pub use scenarios::ScenarioMatrix;
