//! Numerical laboratory for continuity equations with BV coefficients on the
//! half-space `r > 0`: exact counterexample fields, normal traces, exact
//! characteristic transport and an upwind finite-volume solver.
//!
//! Coordinates are `(t, r, y1, y2)`; the lateral variables are periodic with
//! period [`geometry::Y_PERIOD`].

pub mod catalog;
pub mod error;
pub mod fv;
pub mod geometry;
pub mod harness;
pub mod quadrature;
pub mod solution;
pub mod traces;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::{
    CellScalarField, DomainBox, DyadicGrid, FaceFluxField, FieldMeta, FieldRef, Point, Vec3, VelocityField,
};
pub use solution::{ScalarSolution, SolutionRef};
