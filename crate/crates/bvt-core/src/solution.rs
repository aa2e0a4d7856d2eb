//! Scalar solutions evaluated pointwise on `]0, T[ x Omega`.

use std::sync::Arc;

use crate::geometry::{CellScalarField, Point};

/// An exact or numerical solution `u(t, x)`.
pub trait ScalarSolution: Send + Sync {
    fn eval(&self, t: f64, x: Point) -> f64;

    fn linf_bound(&self) -> f64 {
        1.0
    }

    /// True when the solution is identically zero (lets quadratures skip work).
    fn is_zero(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        "solution".into()
    }
}

pub type SolutionRef = Arc<dyn ScalarSolution>;

impl<S: ScalarSolution + ?Sized> ScalarSolution for Arc<S> {
    fn eval(&self, t: f64, x: Point) -> f64 {
        (**self).eval(t, x)
    }
    fn linf_bound(&self) -> f64 {
        (**self).linf_bound()
    }
    fn is_zero(&self) -> bool {
        (**self).is_zero()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// `u = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroSolution;

impl ScalarSolution for ZeroSolution {
    fn eval(&self, _t: f64, _x: Point) -> f64 {
        0.0
    }
    fn linf_bound(&self) -> f64 {
        0.0
    }
    fn is_zero(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

/// Solution given by a closure.
pub struct FnSolution<F> {
    pub f: F,
    pub bound: f64,
    pub label: String,
}

impl<F: Fn(f64, Point) -> f64 + Send + Sync> FnSolution<F> {
    pub fn new(label: impl Into<String>, bound: f64, f: F) -> Self {
        Self { f, bound, label: label.into() }
    }
}

impl<F: Fn(f64, Point) -> f64 + Send + Sync> ScalarSolution for FnSolution<F> {
    fn eval(&self, t: f64, x: Point) -> f64 {
        (self.f)(t, x)
    }
    fn linf_bound(&self) -> f64 {
        self.bound
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}

/// Piecewise-constant interpolation of time snapshots (the nearest earlier
/// snapshot is used; zero outside the grid).
pub struct SnapshotSolution {
    pub snapshots: Vec<CellScalarField>,
    pub label: String,
}

impl SnapshotSolution {
    pub fn new(label: impl Into<String>, snapshots: Vec<CellScalarField>) -> Self {
        Self { snapshots, label: label.into() }
    }
}

impl ScalarSolution for SnapshotSolution {
    fn eval(&self, t: f64, x: Point) -> f64 {
        let k = self.snapshots.partition_point(|s| s.time <= t).saturating_sub(1);
        self.snapshots.get(k).map_or(0.0, |s| s.sample(x))
    }
    fn linf_bound(&self) -> f64 {
        self.snapshots.iter().fold(0.0, |m, s| m.max(s.max_abs()))
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}
