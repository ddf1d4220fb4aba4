//! Kirchhoff index minimization by edge addition.
//!
//! Given a connected graph and a budget `k`, pick `k` new edges whose
//! insertion lowers the Kirchhoff index `K = n · tr(L†)` as much as
//! possible. Exact greedy selectors work from a dense `L†`; the fast ones
//! use random projections, a Laplacian solver and approximate convex hulls
//! of the embedded nodes.

pub mod error;
pub mod generators;
pub mod graph;
pub mod hull;
pub mod kirchhoff;
pub mod linalg;
pub mod optimize;
pub mod oracle;
pub mod sketch;
pub mod verify;

#[cfg(test)]
mod properties;

pub use error::{KoptError, Result};
pub use graph::Graph;
