//! Capability slicing over function decomposition graphs.
//!
//! Load an [`FdGraph`], measure node cohesion and capability coupling,
//! enumerate the valid slices, pick one under feasibility and schedule
//! constraints, and compare slices by how far simulated changes ripple.

pub mod change;
pub mod cli;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod optimizer;
pub mod ratio;
pub mod slicing;

pub use error::{Error, Result};
pub use graph::{DirectiveSet, EdgeKind, FdGraph, ImpactCategory, NodeId, NodeKind};
pub use metrics::MembershipMap;
pub use ratio::Rational;
pub use slicing::Slice;
