//! Donor-cell upwind solver for the initial-boundary value problem, the weak
//! formulation residual, the cone-energy check and the `L^2` balance.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    make_grid, sample_face_fluxes, wrap, CellScalarField, DomainBox, FaceFluxField, FieldMeta, FieldRef, Point,
    Vec3, VelocityField,
};
use crate::quadrature::{composite, tensor3, tensor4_n, Rule};
use crate::solution::ScalarSolution;
use crate::traces::{TestFunction, GAMMA0_THRESHOLD};

/// Largest admissible CFL number.
pub const MAX_CFL: f64 = 0.45;

/// Boundary datum `g(t, y1, y2)`.
pub type BoundaryProfile = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Source `f(t, x)`.
pub type SourceTerm = Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>;

/// Inflow data on `r = 0` and on the truncation plane `r = r_max`.
#[derive(Clone)]
pub struct BoundaryData {
    pub inner: BoundaryProfile,
    pub outer: BoundaryProfile,
}

impl BoundaryData {
    pub fn zero() -> Self {
        Self { inner: Arc::new(|_, _, _| 0.0), outer: Arc::new(|_, _, _| 0.0) }
    }

    pub fn inner(g: BoundaryProfile) -> Self {
        Self { inner: g, outer: Arc::new(|_, _, _| 0.0) }
    }
}

/// One initial-boundary value problem.
#[derive(Clone)]
pub struct Scenario {
    pub field: FieldRef,
    pub initial: CellScalarField,
    pub boundary: BoundaryData,
    pub source: Option<SourceTerm>,
    pub horizon: f64,
    pub cfl: f64,
    /// Times (in `]0, horizon]`) at which snapshots are stored.
    pub snapshot_times: Vec<f64>,
}

impl Scenario {
    pub fn new(field: FieldRef, initial: CellScalarField, boundary: BoundaryData, horizon: f64, cfl: f64) -> Self {
        Self { field, initial, boundary, source: None, horizon, cfl, snapshot_times: vec![horizon] }
    }

    pub fn with_source(mut self, f: SourceTerm) -> Self {
        self.source = Some(f);
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= MAX_CFL) {
            return Err(Error::Config(format!("CFL number {} outside ]0, {MAX_CFL}]", self.cfl)));
        }
        if !(self.horizon > 0.0 && self.horizon <= self.initial.grid.domain.horizon) {
            return Err(Error::Config(format!("horizon {} outside the domain", self.horizon)));
        }
        if self.snapshot_times.iter().any(|&s| !(s > 0.0 && s <= self.horizon)) {
            return Err(Error::Config("snapshot times must lie in ]0, horizon]".into()));
        }
        Ok(())
    }
}

/// Conserved quantities after one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConservedRecord {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    /// Net mass entering through `r = 0` and `r = r_max` during the step.
    pub boundary_flux: f64,
    /// Same for `u^2`.
    pub boundary_flux_sq: f64,
    /// Mass added by the source during the step.
    pub source_mass: f64,
}

/// Snapshots and the conserved-quantity log of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, CellScalarField)>,
    pub log: Vec<ConservedRecord>,
}

impl Trajectory {
    pub fn last(&self) -> &CellScalarField {
        &self.snapshots.last().expect("empty trajectory").1
    }

    /// CSV with columns `t,r,y1,y2,u` for every snapshot.
    pub fn write_snapshots_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "t,r,y1,y2,u")?;
        for (t, s) in &self.snapshots {
            let g = s.grid;
            for c in 0..g.n_cells() {
                let (i, j, l) = g.unindex(c);
                let [r, y1, y2] = g.center(i, j, l);
                writeln!(w, "{t},{r},{y1},{y2},{}", s.values[c])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `step,t,mass,l1,l2,boundary_flux`.
    pub fn write_conserved_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "step,t,mass,l1,l2,boundary_flux")?;
        for r in &self.log {
            writeln!(w, "{},{},{},{},{},{}", r.step, r.t, r.mass, r.l1, r.l2, r.boundary_flux)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of a single step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: CellScalarField,
    pub boundary_flux: f64,
    pub boundary_flux_sq: f64,
    pub source_mass: f64,
}

/// Sum of the component maxima of the face velocities.
pub fn face_speed(flux: &FaceFluxField) -> f64 {
    let m = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    m(&flux.fr) + m(&flux.fy1) + m(&flux.fy2)
}

/// One explicit donor-cell step of length `dt` from time `t`.
///
/// Inflowing boundary faces take the boundary data, outflowing faces the
/// interior value. `dt` must satisfy `dt <= MAX_CFL * h / s` where `s` is
/// the sum of the component maxima of the face velocities.
pub fn upwind_step(
    state: &CellScalarField,
    flux: &FaceFluxField,
    dt: f64,
    t: f64,
    boundary: &BoundaryData,
    source: Option<&SourceTerm>,
) -> Result<StepOutcome> {
    let g = state.grid;
    let (h, ny, nr) = (g.h, g.ny, g.nr);
    let speed = face_speed(flux);
    let limit = if speed > 0.0 { MAX_CFL * h / speed } else { f64::INFINITY };
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit, cfl: MAX_CFL, h, speed });
    }
    let u = &state.values;
    let tm = t + 0.5 * dt;
    let y = |j: usize| (j as f64 + 0.5) * h;
    // Upwind value on r-face `i`.
    let r_up = |i: usize, j: usize, l: usize, v: f64| -> f64 {
        if v > 0.0 {
            if i == 0 {
                (boundary.inner)(tm, y(j), y(l))
            } else {
                u[g.index(i - 1, j, l)]
            }
        } else if i == nr {
            (boundary.outer)(tm, y(j), y(l))
        } else {
            u[g.index(i, j, l)]
        }
    };
    let lam = dt / h;
    let values: Vec<f64> = (0..g.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j, l) = g.unindex(c);
            let vr0 = flux.r_face(i, j, l);
            let vr1 = flux.r_face(i + 1, j, l);
            let fr0 = vr0 * r_up(i, j, l, vr0);
            let fr1 = vr1 * r_up(i + 1, j, l, vr1);
            let jm = (j + ny - 1) % ny;
            let jp = (j + 1) % ny;
            let lm = (l + ny - 1) % ny;
            let lp = (l + 1) % ny;
            let v10 = flux.y1_face(i, j, l);
            let v11 = flux.y1_face(i, jp, l);
            let f10 = v10 * if v10 > 0.0 { u[g.index(i, jm, l)] } else { u[c] };
            let f11 = v11 * if v11 > 0.0 { u[c] } else { u[g.index(i, jp, l)] };
            let v20 = flux.y2_face(i, j, l);
            let v21 = flux.y2_face(i, j, lp);
            let f20 = v20 * if v20 > 0.0 { u[g.index(i, j, lm)] } else { u[c] };
            let f21 = v21 * if v21 > 0.0 { u[c] } else { u[g.index(i, j, lp)] };
            let mut v = u[c] - lam * ((fr1 - fr0) + (f11 - f10) + (f21 - f20));
            if let Some(f) = source {
                v += dt * f(t, g.center(i, j, l));
            }
            v
        })
        .collect();
    let (bf, bf2) = (0..ny * ny)
        .into_par_iter()
        .map(|c| {
            let (j, l) = (c / ny, c % ny);
            let v0 = flux.r_face(0, j, l);
            let u0 = r_up(0, j, l, v0);
            let v1 = flux.r_face(nr, j, l);
            let u1 = r_up(nr, j, l, v1);
            (v0 * u0 - v1 * u1, v0 * u0 * u0 - v1 * u1 * u1)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let source_mass = match source {
        Some(f) => {
            (0..g.n_cells())
                .map(|c| {
                    let (i, j, l) = g.unindex(c);
                    f(t, g.center(i, j, l))
                })
                .sum::<f64>()
                * dt
                * g.cell_volume()
        }
        None => 0.0,
    };
    Ok(StepOutcome {
        state: CellScalarField { grid: g, time: t + dt, values },
        boundary_flux: bf * dt * h * h,
        boundary_flux_sq: bf2 * dt * h * h,
        source_mass,
    })
}

fn record(step: usize, s: &CellScalarField, bf: f64, bf2: f64, sm: f64) -> ConservedRecord {
    ConservedRecord {
        step,
        t: s.time,
        mass: s.integral(),
        l1: s.integral_pow(1),
        l2: s.integral_pow(2).sqrt(),
        boundary_flux: bf,
        boundary_flux_sq: bf2,
        source_mass: sm,
    }
}

/// March the scenario to its horizon. Steps end on every field breakpoint
/// and snapshot time; fluxes are resampled every step unless the field is
/// steady.
pub fn solve_ibvp(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let field = &scenario.field;
    let g = scenario.initial.grid;
    let schedule = field.schedule();
    let steady = schedule.breakpoints.is_empty() && !schedule.continuous;
    // Each component is bounded by the speed bound, so their maxima sum to at most three times it.
    let speed_bound = 3.0 * field.meta().linf_bound;
    let dt_max = scenario.cfl * g.h / speed_bound.max(1e-300);
    let mut stops: Vec<f64> = schedule
        .breakpoints
        .iter()
        .copied()
        .chain(scenario.snapshot_times.iter().copied())
        .filter(|&b| b > 0.0 && b < scenario.horizon)
        .collect();
    stops.push(scenario.horizon);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut state = scenario.initial.clone();
    state.time = 0.0;
    let mut t = 0.0;
    let mut step = 0;
    let mut log = vec![record(0, &state, 0.0, 0.0, 0.0)];
    let mut snapshots = Vec::new();
    let mut cached: Option<FaceFluxField> = None;
    for &stop in &stops {
        while t < stop {
            let remaining = stop - t;
            let n = (remaining / dt_max).ceil().max(1.0);
            let dt = remaining / n;
            let t_next = if n == 1.0 { stop } else { t + dt };
            let flux = match (&cached, steady) {
                (Some(f), true) => f.clone(),
                _ => {
                    let f = sample_face_fluxes(field.as_ref(), &g, (t, t_next))?;
                    if steady {
                        cached = Some(f.clone());
                    }
                    f
                }
            };
            let out = upwind_step(&state, &flux, t_next - t, t, &scenario.boundary, scenario.source.as_ref())?;
            state = out.state;
            state.time = t_next;
            t = t_next;
            step += 1;
            log.push(record(step, &state, out.boundary_flux, out.boundary_flux_sq, out.source_mass));
        }
        if scenario.snapshot_times.iter().any(|&s| s == stop) {
            snapshots.push((stop, state.clone()));
        }
    }
    if snapshots.last().map(|s| s.0) != Some(scenario.horizon) {
        snapshots.push((scenario.horizon, state));
    }
    Ok(Trajectory { snapshots, log })
}

/// `sum |u_h - u(t, center)| h^3` over the grid.
pub fn l1_error(state: &CellScalarField, exact: &dyn ScalarSolution) -> f64 {
    let g = state.grid;
    let t = state.time;
    let s: f64 = (0..g.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j, l) = g.unindex(c);
            (state.values[c] - exact.eval(t, g.center(i, j, l))).abs()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    s * g.cell_volume()
}

/// `sum |a - b| h^3`.
pub fn l1_difference(a: &CellScalarField, b: &CellScalarField) -> f64 {
    assert_eq!(a.grid, b.grid);
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum::<f64>() * a.grid.cell_volume()
}

/// Lipschitz, divergence-free shear `b = (1, a sin(2 pi r), a cos(2 pi r))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearField {
    pub amp: f64,
}

impl ShearField {
    /// `G(r) = int_0^r (g1, g2)`.
    pub fn primitive(&self, r: f64) -> [f64; 2] {
        let w = 2.0 * std::f64::consts::PI;
        [self.amp * (1.0 - (w * r).cos()) / w, self.amp * (w * r).sin() / w]
    }
}

impl VelocityField for ShearField {
    fn eval(&self, _t: f64, x: Point) -> Vec3 {
        let w = 2.0 * std::f64::consts::PI * x[0];
        [1.0, self.amp * w.sin(), self.amp * w.cos()]
    }
    fn meta(&self) -> FieldMeta {
        FieldMeta {
            linf_bound: (1.0 + self.amp * self.amp).sqrt(),
            div_linf_bound: 0.0,
            finest_scale: f64::INFINITY,
            is_measure_divergence: false,
        }
    }
    fn name(&self) -> String {
        format!("shear(a={})", self.amp)
    }
}

/// Exact solution `u = F(r - t, y - G(r))` of the shear scenario with
/// `F(s, y) = 1/2 + 1/4 sin(4 pi y1 + 2 s) cos(4 pi y2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearExact {
    pub field: ShearField,
}

impl ShearExact {
    pub fn profile(s: f64, y1: f64, y2: f64) -> f64 {
        let w = 4.0 * std::f64::consts::PI;
        0.5 + 0.25 * (w * y1 + 2.0 * s).sin() * (w * y2).cos()
    }
}

impl ScalarSolution for ShearExact {
    fn eval(&self, t: f64, x: Point) -> f64 {
        let gg = self.field.primitive(x[0]);
        Self::profile(x[0] - t, x[1] - gg[0], x[2] - gg[1])
    }
    fn linf_bound(&self) -> f64 {
        0.75
    }
    fn name(&self) -> String {
        "shear-exact".into()
    }
}

/// Smooth scenario on the standard domain at grid `level` with its exact solution.
pub fn shear_scenario(level: u32, cfl: f64, horizon: f64) -> Result<(Scenario, ShearExact)> {
    let field = ShearField { amp: 0.5 };
    let exact = ShearExact { field };
    let grid = make_grid(DomainBox::standard(), level)?;
    let initial = CellScalarField::from_fn(grid, 0.0, |x| exact.eval(0.0, x));
    let inner: BoundaryProfile = Arc::new(move |t, y1, y2| ShearExact::profile(-t, y1, y2));
    let sc = Scenario::new(Arc::new(field), initial, BoundaryData::inner(inner), horizon, cfl);
    Ok((sc, exact))
}

/// `b = (1, 0, 0)`, `g = 1`, `u(0) = 0`; the exact solution is `1_{r < t}`.
pub fn constant_inflow_scenario(level: u32, cfl: f64, horizon: f64) -> Result<Scenario> {
    let grid = make_grid(DomainBox::standard(), level)?;
    Ok(Scenario::new(
        Arc::new(crate::geometry::ConstantField([1.0, 0.0, 0.0])),
        CellScalarField::zeros(grid, 0.0),
        BoundaryData::inner(Arc::new(|_, _, _| 1.0)),
        horizon,
        cfl,
    ))
}

/// `u = 1_{r < t}`.
pub fn constant_inflow_exact() -> impl ScalarSolution {
    crate::solution::FnSolution::new("front", 1.0, |t: f64, x: Point| if x[0] < t { 1.0 } else { 0.0 })
}

/// Zero initial and boundary data for `field` at grid `level`.
pub fn zero_data_scenario(field: FieldRef, level: u32, cfl: f64, horizon: f64) -> Result<Scenario> {
    let grid = make_grid(DomainBox::standard(), level)?;
    Ok(Scenario::new(field, CellScalarField::zeros(grid, 0.0), BoundaryData::zero(), horizon, cfl))
}

/// `C = max(1, e / sqrt(h))` from the `L^1` error `e` of the constant-field
/// scenario at `level`.
pub fn calibrate_constant(level: u32) -> Result<f64> {
    let sc = constant_inflow_scenario(level, 0.4, 0.5)?;
    let tr = solve_ibvp(&sc)?;
    let e = l1_error(tr.last(), &constant_inflow_exact());
    Ok((e / sc.initial.grid.h.sqrt()).max(1.0))
}

/// Data entering the weak formulation.
#[derive(Clone, Copy)]
pub struct WeakData<'a> {
    pub g_bar: &'a (dyn Fn(f64, f64, f64) -> f64 + Sync),
    pub u_bar: &'a (dyn Fn(Point) -> f64 + Sync),
    pub f: Option<&'a (dyn Fn(f64, Point) -> f64 + Sync)>,
}

fn zero3(_: f64, _: f64, _: f64) -> f64 {
    0.0
}
fn zero_point(_: Point) -> f64 {
    0.0
}

impl WeakData<'static> {
    pub fn zero() -> Self {
        Self { g_bar: &zero3, u_bar: &zero_point, f: None }
    }
}

/// Node offsets (in cells) of the shifted midpoint rule per axis `(t, r, y1, y2)`.
pub const RESIDUAL_SHIFTS: [f64; 4] = [0.5 + 1.0 / 32.0, 0.5 + 1.0 / 64.0, 0.5, 0.5];

/// Parts of a weak residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residual {
    /// `LHS - RHS`.
    pub value: f64,
    /// `int int |u| |d_t phi + b . grad phi|`, the scale of the interior term.
    pub scale: f64,
    pub c1_norm: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.abs() / self.scale
        } else {
            self.value.abs()
        }
    }
}

/// Weak residual
/// `int int u (d_t phi + b . grad phi) + int int f phi + int phi(0) u_bar - int_{r=0} g Tr b phi`
/// on `]0, T[ x Omega` by a shifted midpoint rule with cells of size `q`.
///
/// A test reaching `r = 0` must sit over the inflow set, and every test must
/// vanish near `t = T` and `r = r_max`.
pub fn weak_residual(
    solution: &dyn ScalarSolution,
    field: &dyn VelocityField,
    test: &TestFunction,
    data: WeakData,
    domain: DomainBox,
    q: f64,
) -> Result<Residual> {
    let (lo, hi) = test.support();
    if hi[0] > domain.horizon || hi[1] > domain.r_max {
        return Err(Error::Admissibility("support reaches t = T or r = r_max".into()));
    }
    if hi[0] <= 0.0 || hi[1] <= 0.0 {
        return Err(Error::Admissibility("support outside the domain".into()));
    }
    let axis = |a: usize, l: f64| composite(l, hi[a], q, 0.0, Rule::Shifted(RESIDUAL_SHIFTS[a]));
    let touches_boundary = lo[1] < 0.0;
    let touches_initial = lo[0] < 0.0;
    let bd_axes = [axis(0, lo[0].max(0.0)), axis(2, lo[2]), axis(3, lo[3])];
    if touches_boundary {
        // Every boundary node with non-negligible weight must be inflow or tangential.
        let bad = bd_axes[0].0.iter().any(|&t| {
            bd_axes[1].0.iter().any(|&y1| {
                bd_axes[2].0.iter().any(|&y2| {
                    test.value([t, 0.0, y1, y2]) > 1e-14 && field.boundary_trace(t, y1, y2) > GAMMA0_THRESHOLD
                })
            })
        });
        if bad {
            return Err(Error::Admissibility(
                "test function reaches the outflow part of r = 0, where no datum is available".into(),
            ));
        }
    }
    let axes = [axis(0, lo[0].max(0.0)), axis(1, lo[1].max(0.0)), axis(2, lo[2]), axis(3, lo[3])];
    let [interior, scale] = if solution.is_zero() && data.f.is_none() {
        [0.0, 0.0]
    } else {
        tensor4_n(&axes, |p| {
            let x = [p[1], p[2], p[3]];
            let mut s = [0.0, 0.0];
            if !solution.is_zero() {
                let u = solution.eval(p[0], x);
                if u != 0.0 {
                    let gr = test.grad(p);
                    let b = field.eval(p[0], x);
                    let v = u * (gr[0] + b[0] * gr[1] + b[1] * gr[2] + b[2] * gr[3]);
                    s = [v, v.abs()];
                }
            }
            if let Some(f) = data.f {
                s[0] += f(p[0], x) * test.value(p);
            }
            s
        })
    };
    let initial = if touches_initial {
        let ax = [axis(1, lo[1].max(0.0)), axis(2, lo[2]), axis(3, lo[3])];
        tensor3(&ax, |p| {
            let x = [p[0], p[1], p[2]];
            (data.u_bar)(x) * test.value([0.0, p[0], p[1], p[2]])
        })
    } else {
        0.0
    };
    let boundary = if touches_boundary {
        tensor3(&bd_axes, |p| {
            let g = (data.g_bar)(p[0], p[1], p[2]);
            if g == 0.0 {
                0.0
            } else {
                g * field.boundary_trace(p[0], p[1], p[2]) * test.value([p[0], 0.0, p[1], p[2]])
            }
        })
    } else {
        0.0
    };
    Ok(Residual { value: interior + initial - boundary, scale, c1_norm: test.c1_norm() })
}

/// Smooth nonincreasing profile equal to 1 on `]-inf, inner]` and 0 on `[outer, inf[`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeProfile {
    pub inner: f64,
    pub outer: f64,
}

fn smooth_step(z: f64) -> (f64, f64) {
    if z <= 0.0 {
        return (0.0, 0.0);
    }
    if z >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / z).exp();
    let b = (-1.0 / (1.0 - z)).exp();
    let da = a / (z * z);
    let db = -b / ((1.0 - z) * (1.0 - z));
    let s = a + b;
    (a / s, (da * s - a * (da + db)) / (s * s))
}

impl ConeProfile {
    /// `(h(s), h'(s))`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let w = self.outer - self.inner;
        let (v, d) = smooth_step((self.outer - s) / w);
        (v, -d / w)
    }
}

/// Weight `nu(t, x) = h(M (t - t_bar) + |x - x0|)` and the cutoffs `chi_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeWeight {
    pub profile: ConeProfile,
    pub apex_time: f64,
    pub apex: Point,
    pub speed: f64,
    pub y_period: f64,
}

impl ConeWeight {
    pub fn new(profile: ConeProfile, apex_time: f64, apex: Point, speed: f64) -> Self {
        Self { profile, apex_time, apex, speed, y_period: crate::geometry::Y_PERIOD }
    }

    /// Offset from the apex with the lateral components taken as nearest images.
    fn offset(&self, x: Point) -> [f64; 3] {
        let p = self.y_period;
        let near = |d: f64| wrap(d + 0.5 * p, p) - 0.5 * p;
        [x[0] - self.apex[0], near(x[1] - self.apex[1]), near(x[2] - self.apex[2])]
    }

    pub fn eval(&self, t: f64, x: Point) -> f64 {
        let d = self.offset(x);
        let s = self.speed * (t - self.apex_time) + (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        self.profile.eval(s).0
    }

    /// `(d_t nu, |grad nu|)`.
    pub fn derivatives(&self, t: f64, x: Point) -> (f64, f64) {
        let d = self.offset(x);
        let s = self.speed * (t - self.apex_time) + (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let hp = self.profile.eval(s).1;
        (self.speed * hp, hp.abs())
    }

    /// `chi_n(t)`.
    pub fn cutoff(&self, n: u32, t: f64) -> f64 {
        1.0 - smooth_step((t - self.apex_time) * n as f64).0
    }

    /// Largest value of `d_t nu + M |grad nu|` over `samples` points of
    /// `]0, t_bar[ x Omega` drawn from an additive recurrence sequence.
    pub fn max_transport_defect(&self, samples: usize, domain: DomainBox) -> f64 {
        // Fractional parts of multiples of the generalized golden ratio in 4D.
        let phi = 1.167_303_978_261_418_7f64;
        let alpha: [f64; 4] = std::array::from_fn(|i| phi.powi(-(i as i32 + 1)));
        (0..samples)
            .into_par_iter()
            .map(|n| {
                let z: [f64; 4] = std::array::from_fn(|i| (0.5 + alpha[i] * n as f64).fract());
                let t = z[0] * self.apex_time;
                let x = [z[1] * domain.r_max, z[2] * domain.y_period, z[3] * domain.y_period];
                let (dt, g) = self.derivatives(t, x);
                dt + self.speed * g
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
}

/// Verdict of a cone-energy check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConeStatus {
    Pass,
    Witness,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeEnergyReport {
    pub energy: f64,
    /// `||div b||_inf int_0^t_bar int nu u^2`, the right side of the Gronwall step.
    pub gronwall_bound: f64,
    pub pass_threshold: f64,
    pub witness_threshold: f64,
    pub status: ConeStatus,
}

/// Threshold above which a cone energy witnesses non-uniqueness.
pub const WITNESS_THRESHOLD: f64 = 0.01;

/// `E(t_bar) = int nu(t_bar) u(t_bar)^2` by the midpoint rule with cells of size `q`.
pub fn cone_energy(solution: &dyn ScalarSolution, weight: &ConeWeight, domain: DomainBox, q: f64) -> f64 {
    weighted_energy(solution, weight, weight.apex_time, domain, q)
}

/// `int nu(t) u(t)^2`.
pub fn weighted_energy(solution: &dyn ScalarSolution, weight: &ConeWeight, t: f64, domain: DomainBox, q: f64) -> f64 {
    if solution.is_zero() {
        return 0.0;
    }
    let axes = [
        composite(0.0, domain.r_max, q, 0.0, Rule::Shifted(0.5)),
        composite(0.0, domain.y_period, q, 0.0, Rule::Shifted(0.5)),
        composite(0.0, domain.y_period, q, 0.0, Rule::Shifted(0.5)),
    ];
    tensor3(&axes, |p| {
        let x = [p[0], p[1], p[2]];
        let nu = weight.eval(t, x);
        if nu == 0.0 {
            0.0
        } else {
            let u = solution.eval(t, x);
            nu * u * u
        }
    })
}

/// Cone energy at the apex time, its Gronwall bound and the verdict: `Pass`
/// when `E <= pass_threshold`, `Witness` when `E >= WITNESS_THRESHOLD`.
pub fn cone_energy_check(
    solution: &dyn ScalarSolution,
    field: &dyn VelocityField,
    weight: &ConeWeight,
    domain: DomainBox,
    q: f64,
    pass_threshold: f64,
) -> ConeEnergyReport {
    let energy = cone_energy(solution, weight, domain, q);
    let div = field.meta().div_linf_bound;
    let gronwall_bound = if div == 0.0 || solution.is_zero() {
        0.0
    } else {
        let nt = 16;
        let dt = weight.apex_time / nt as f64;
        div * (0..nt).map(|i| weighted_energy(solution, weight, (i as f64 + 0.5) * dt, domain, q)).sum::<f64>()
            * dt
    };
    let status = if energy <= pass_threshold {
        ConeStatus::Pass
    } else if energy >= WITNESS_THRESHOLD {
        ConeStatus::Witness
    } else {
        ConeStatus::Fail
    };
    ConeEnergyReport { energy, gronwall_bound, pass_threshold, witness_threshold: WITNESS_THRESHOLD, status }
}

/// One row of the `L^2` balance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L2BalanceRow {
    pub step: usize,
    pub t: f64,
    /// Change of `int u^2` over the step.
    pub change: f64,
    /// Net `u^2` entering through the boundary over the step.
    pub boundary: f64,
    /// `boundary - change`, the numerical dissipation (non-negative for a monotone scheme).
    pub dissipation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L2BalanceReport {
    pub rows: Vec<L2BalanceRow>,
    pub total_dissipation: f64,
    /// No step creates `L^2` mass beyond the boundary input.
    pub dissipative: bool,
    /// `int u^2` never increases (meaningful with zero inflow).
    pub nonincreasing: bool,
}

/// Per-step `L^2` balance of a trajectory.
pub fn l2_balance_report(trajectory: &Trajectory) -> L2BalanceReport {
    let rows: Vec<L2BalanceRow> = trajectory
        .log
        .windows(2)
        .map(|w| {
            let change = w[1].l2 * w[1].l2 - w[0].l2 * w[0].l2;
            let boundary = w[1].boundary_flux_sq;
            L2BalanceRow { step: w[1].step, t: w[1].t, change, boundary, dissipation: boundary - change }
        })
        .collect();
    let scale = trajectory.log.iter().map(|r| r.l2 * r.l2).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    L2BalanceReport {
        total_dissipation: rows.iter().map(|r| r.dissipation).sum(),
        dissipative: rows.iter().all(|r| r.dissipation >= -tol),
        nonincreasing: rows.iter().all(|r| r.change <= tol),
        rows,
    }
}

/// Which part of the boundary a residual battery may reach.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BatteryKind {
    /// Supports stay off `r = 0` (outflow boundaries); some reach `t = 0`.
    AwayFromBoundary,
    /// Some supports reach `r = 0` (inflow boundaries) and some `t = 0`.
    ReachingBoundary,
}

/// Twenty bump test functions with half-widths `1/64`, `1/32` and `1/16`.
pub fn residual_battery(kind: BatteryKind) -> Vec<TestFunction> {
    // (t, r, y1, y2) centers in units of the half-width, plus absolute ones.
    let lateral = [(0.131, 0.377), (0.263, 0.059), (0.411, 0.219), (0.077, 0.443)];
    let mut out = Vec::with_capacity(20);
    let specs: [(f64, &[(f64, f64)]); 3] = [
        (1.0 / 64.0, &[(0.30, 0.10), (0.55, 0.21), (0.80, 0.37), (0.62, 0.05), (0.45, 0.44), (0.71, 0.66), (0.012, 0.0), (0.20, 0.0)]),
        (1.0 / 32.0, &[(0.35, 0.12), (0.60, 0.30), (0.85, 0.52), (0.50, 0.49), (0.025, 0.0), (0.40, 0.0)]),
        (1.0 / 16.0, &[(0.40, 0.15), (0.65, 0.33), (0.82, 0.61), (0.55, 0.53), (0.05, 0.0), (0.70, 0.0)]),
    ];
    let mut n = 0;
    for (w, centers) in specs {
        for &(t, r) in centers {
            let r = if r == 0.0 {
                match kind {
                    BatteryKind::ReachingBoundary => 0.5 * w,
                    BatteryKind::AwayFromBoundary => 1.5 * w + 0.01,
                }
            } else {
                r.max(1.5 * w)
            };
            let (y1, y2) = lateral[n % lateral.len()];
            out.push(TestFunction::new([t, r, y1, y2], [w; 4], 1.0));
            n += 1;
        }
    }
    out
}
