//! Numerical toolkit for the homogenization of a second-order elliptic
//! operator on a thin two-dimensional channel whose boundary oscillates
//! rapidly and locally periodically.
//!
//! The pipeline, mirrored by the module layout:
//!
//! * [`expr`] — a small closed-form expression language (parse, evaluate,
//!   differentiate) used for geometry level sets, coefficients and test
//!   functions.
//! * [`geometry`] — channel geometry derived from a level set `F > 0`:
//!   cross-sections by root finding, cell data, boundary-fitted maps.
//! * [`quadrature`] — Gauss rules and barycentric interpolation.
//! * [`measure`] — integration against the scaled thin-domain measure and
//!   its singular limit on the axis.
//! * [`fem`] — Q1 finite elements on mapped rectangles (assembly,
//!   constraints, conjugate gradients).
//! * [`cell`] — periodic cell problems and effective coefficients.
//! * [`limit1d`] — the limiting one-dimensional boundary value problem.
//! * [`epssolve`] — the full problem at a fixed thickness `eps` plus the
//!   error and flux metrics comparing it with the limit.
//! * [`study`] — configuration-driven convergence studies with CSV/JSON
//!   reports.

pub mod cell;
pub mod epssolve;
pub mod error;
pub mod expr;
pub mod fem;
pub mod geometry;
pub mod limit1d;
pub mod measure;
pub mod quadrature;
pub mod study;

pub use cell::{solve_cell_problem, CellCache, CellSolution, CoefficientSet};
pub use epssolve::{eps_resolution, solve_eps_problem, EpsSolution};
pub use error::{Error, Result};
pub use expr::{differentiate, parse, Bindings, Expr, Var};
pub use geometry::{validate, GeometryModel, ValidationReport};
pub use limit1d::{solve_limit_problem, InterpolatedEffectiveData, LimitSolution};
pub use measure::{integrate_mu_eps, integrate_mu_star, MeasureQuadrature};
pub use study::{run_study, StudyConfig, StudyReport};
