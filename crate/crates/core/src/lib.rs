//! Spectral computations on finite metric graphs.
//!
//! Eigenvalues and eigenfunctions of the Laplacian under Neumann-Kirchhoff,
//! rotated delta and general self-adjoint vertex conditions; Robin points and
//! domains of eigenfunctions; Robin (generalized Dirichlet-to-Neumann) maps;
//! spectral flow of boundary-condition families; winding numbers of unitary
//! loops; and a harness that checks the resulting index identities.

pub mod basis;
pub mod conditions;
pub mod error;
pub mod flow;
pub mod graph;
pub mod harness;
pub mod io;
pub mod robin;
pub mod robin_map;
pub mod secular;
pub mod solver;
pub mod unitary;

pub use basis::{fundamental_pair, mixed_trace, FundamentalValues, MixedTracePair, TracePair};
pub use conditions::{vertex_unitary, BoundaryProblem, ExtReal, VertexCondition};
pub use error::{Error, Result};
pub use graph::{CutResult, Edge, EdgeEnd, End, MetricGraph, PointOnGraph};
