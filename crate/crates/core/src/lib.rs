//! Token random-walk learning and certified unlearning: the RR-DU protocol,
//! a decentralized-DP baseline, Rényi-DP accounting of per-client views and
//! deletion-capacity calculators, over synthetic convex tasks.

pub mod accountant;
pub mod capacity;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod network;
pub mod objective;
pub mod optimizer;
pub mod protocols;
pub mod rng;
pub mod tasks;
pub mod types;

pub use error::{Error, Result};
