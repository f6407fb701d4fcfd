pub mod branching;
pub mod decay;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod lattice;
pub mod perm;
pub mod regen;
pub mod report;
pub mod samplers;
pub mod stats;
pub mod suites;

pub use error::{Result, SrpError};
pub use lattice::{CylinderLattice, Graph, SymmetryGroup, VertexSet};
pub use perm::{CyclePath, GraphPermutation, OpenCycleConfig};
pub use samplers::RngStream;
