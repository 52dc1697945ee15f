//! Shared finite element engine: structured Q1 meshes on mapped
//! rectangles, CSR assembly, constraints and a CG solver.

pub mod assemble;
pub mod mesh;
pub mod solve;
pub mod sparse;

pub use assemble::{assemble, lumped_mass, norms, quadrature_scan, Coefficients, Norms, QuadPoint, Source};
pub use mesh::Mesh;
pub use solve::{constrain, solve_cg, ConstrainedSystem, ConstraintSet, CG_TOL};
pub use sparse::Csr;
