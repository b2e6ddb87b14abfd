//! Exact ground states, packings and contour diagnostics for hard-core lattice gases
//! on the triangular (A2), honeycomb (H2) and square (Z2) lattices.

pub mod arith;
pub mod contour;
pub mod error;
pub mod gibbs;
pub mod hnf;
pub mod lattice;
pub mod mtriangle;
pub mod oracle;
pub mod pgs;
pub mod torus;

pub use error::{Error, Result};
pub use hnf::Lattice2;
pub use lattice::{LatticeKind, Point, Site, SymmetryOp, Vec2i};
