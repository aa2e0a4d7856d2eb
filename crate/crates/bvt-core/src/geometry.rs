//! Domain geometry, dyadic grids, field sampling and discrete divergence.
//!
//! The physical domain is the half-space `r > 0` in coordinates `(r, y1, y2)`
//! with the lateral variables identified modulo a dyadic period. Fields are
//! closed-form evaluators `b(t, x)`; the discrete images live on staggered
//! dyadic grids whose faces carry normal velocity components.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// A point `(r, y1, y2)` of the spatial domain.
pub type Point = [f64; 3];
/// A velocity `(b_r, b_y1, b_y2)`.
pub type Vec3 = [f64; 3];

/// Lateral period shared by every construction.
pub const Y_PERIOD: f64 = 0.5;

/// Wrap `y` into `[0, period)`.
#[inline]
pub fn wrap(y: f64, period: f64) -> f64 {
    let w = y - period * (y / period).floor();
    if w >= period {
        w - period
    } else {
        w
    }
}

/// `2^e` for a signed exponent, exact for the ranges used here.
#[inline]
pub fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

fn is_multiple(x: f64, h: f64) -> bool {
    let q = x / h;
    q.is_finite() && q == q.round()
}

/// Truncated half-space `]0, r_max[ x T^2` over the horizon `]0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DomainBox {
    pub r_max: f64,
    pub y_period: f64,
    pub horizon: f64,
}

impl DomainBox {
    pub fn new(r_max: f64, y_period: f64, horizon: f64) -> Result<Self> {
        if !(r_max > 0.0) {
            return Err(Error::Config(format!("r_max must be positive, got {r_max}")));
        }
        if !(y_period > 0.0) {
            return Err(Error::Config(format!("lateral period must be positive, got {y_period}")));
        }
        if !(horizon > 0.0 && horizon <= 1.0) {
            return Err(Error::Config(format!("horizon must lie in ]0,1], got {horizon}")));
        }
        Ok(Self { r_max, y_period, horizon })
    }

    /// `r_max = 1`, `L = 1/2`, `T = 1`.
    pub fn standard() -> Self {
        Self { r_max: 1.0, y_period: Y_PERIOD, horizon: 1.0 }
    }
}

/// Uniform dyadic grid of cubes with side `h = 2^-level`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DyadicGrid {
    pub level: u32,
    pub h: f64,
    pub nr: usize,
    pub ny: usize,
    pub domain: DomainBox,
}

/// Build the grid of level `level` on `domain`.
pub fn make_grid(domain: DomainBox, level: u32) -> Result<DyadicGrid> {
    if level < 3 {
        return Err(Error::Config(format!("grid level must be at least 3, got {level}")));
    }
    let h = pow2(-(level as i32));
    if !is_multiple(domain.y_period, h) {
        return Err(Error::Config(format!(
            "lateral period {} is not a multiple of h = 2^-{level}",
            domain.y_period
        )));
    }
    if !is_multiple(domain.r_max, h) {
        return Err(Error::Config(format!(
            "r_max {} is not a multiple of h = 2^-{level}",
            domain.r_max
        )));
    }
    Ok(DyadicGrid {
        level,
        h,
        nr: (domain.r_max / h) as usize,
        ny: (domain.y_period / h) as usize,
        domain,
    })
}

impl DyadicGrid {
    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nr * self.ny * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.ny + j) * self.ny + l
    }

    /// Inverse of [`DyadicGrid::index`].
    #[inline]
    pub fn unindex(&self, c: usize) -> (usize, usize, usize) {
        let l = c % self.ny;
        let j = (c / self.ny) % self.ny;
        (c / (self.ny * self.ny), j, l)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize, l: usize) -> Point {
        let h = self.h;
        [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (l as f64 + 0.5) * h]
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }
}

/// Time breakpoints of a field. Between breakpoints the field is either
/// frozen or varies continuously with `t` (`continuous`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schedule {
    pub breakpoints: Vec<f64>,
    pub continuous: bool,
}

impl Schedule {
    pub fn steady() -> Self {
        Self::default()
    }

    /// First breakpoint strictly inside `]lo, hi[`.
    pub fn straddled(&self, lo: f64, hi: f64) -> Option<f64> {
        self.breakpoints.iter().copied().find(|&b| b > lo && b < hi)
    }
}

/// Metadata shared by all velocity fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldMeta {
    pub linf_bound: f64,
    pub div_linf_bound: f64,
    pub finest_scale: f64,
    pub is_measure_divergence: bool,
}

/// A region of a piecewise field in which the flow has a closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Piece {
    /// Constant velocity.
    Const { id: u64, v: Vec3 },
    /// Radial speed `vr` with a clockwise square rotation of the lateral
    /// variables about `center` at rate `lambda`.
    Rotation { id: u64, vr: f64, center: [f64; 2], lambda: f64 },
}

impl Piece {
    pub fn constant(v: Vec3) -> Self {
        let mut id = 0xcbf2_9ce4_8422_2325u64;
        for c in v {
            id = (id ^ (c + 0.0).to_bits()).wrapping_mul(0x0100_0000_01b3);
        }
        Piece::Const { id, v }
    }

    pub fn id(&self) -> u64 {
        match *self {
            Piece::Const { id, .. } | Piece::Rotation { id, .. } => id,
        }
    }
}

/// A space-time velocity field `b(t, x)` on the truncated half-space.
pub trait VelocityField: Send + Sync {
    fn eval(&self, t: f64, x: Point) -> Vec3;

    fn meta(&self) -> FieldMeta;

    fn schedule(&self) -> Schedule {
        Schedule::steady()
    }

    /// Closed-form piece containing `(t, x)`.
    fn piece(&self, t: f64, x: Point) -> Piece {
        Piece::constant(self.eval(t, x))
    }

    /// Outward normal trace `Tr b` at the boundary point `(t, 0, y)`.
    fn boundary_trace(&self, t: f64, y1: f64, y2: f64) -> f64 {
        -self.eval(t, [1e-12, y1, y2])[0]
    }

    fn name(&self) -> String {
        "field".into()
    }
}

/// Shared handle to a field.
pub type FieldRef = Arc<dyn VelocityField>;

impl<F: VelocityField + ?Sized> VelocityField for Arc<F> {
    fn eval(&self, t: f64, x: Point) -> Vec3 {
        (**self).eval(t, x)
    }
    fn meta(&self) -> FieldMeta {
        (**self).meta()
    }
    fn schedule(&self) -> Schedule {
        (**self).schedule()
    }
    fn piece(&self, t: f64, x: Point) -> Piece {
        (**self).piece(t, x)
    }
    fn boundary_trace(&self, t: f64, y1: f64, y2: f64) -> f64 {
        (**self).boundary_trace(t, y1, y2)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// Spatially uniform field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantField(pub Vec3);

impl VelocityField for ConstantField {
    fn eval(&self, _t: f64, _x: Point) -> Vec3 {
        self.0
    }
    fn meta(&self) -> FieldMeta {
        FieldMeta {
            linf_bound: norm3(self.0),
            div_linf_bound: 0.0,
            finest_scale: f64::INFINITY,
            is_measure_divergence: false,
        }
    }
    fn name(&self) -> String {
        format!("constant({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

#[inline]
pub fn norm3(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Cell-averaged scalar on a grid at a fixed time.
#[derive(Clone, Debug, PartialEq)]
pub struct CellScalarField {
    pub grid: DyadicGrid,
    pub time: f64,
    pub values: Vec<f64>,
}

impl CellScalarField {
    pub fn zeros(grid: DyadicGrid, time: f64) -> Self {
        Self { grid, time, values: vec![0.0; grid.n_cells()] }
    }

    /// Cell-center samples of `f`.
    pub fn from_fn(grid: DyadicGrid, time: f64, f: impl Fn(Point) -> f64 + Sync) -> Self {
        let values = (0..grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let (i, j, l) = grid.unindex(c);
                f(grid.center(i, j, l))
            })
            .collect();
        Self { grid, time, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.values[self.grid.index(i, j, l)]
    }

    /// Piecewise-constant evaluation, lateral coordinates wrapped.
    pub fn sample(&self, x: Point) -> f64 {
        let g = &self.grid;
        let fi = (x[0] / g.h).floor();
        if fi < 0.0 || fi >= g.nr as f64 {
            return 0.0;
        }
        let j = (wrap(x[1], g.domain.y_period) / g.h) as usize % g.ny;
        let l = (wrap(x[2], g.domain.y_period) / g.h) as usize % g.ny;
        self.get(fi as usize, j, l)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum |v|^p h^3` without the root.
    pub fn integral_pow(&self, p: i32) -> f64 {
        self.values.iter().map(|v| v.abs().powi(p)).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Normal face velocities of a field on one time slab.
///
/// `fr` has `nr + 1` layers of r-faces, the lateral arrays hold the left
/// face of each cell (the right face of the last cell is the periodic image
/// of face 0).
#[derive(Clone, Debug, PartialEq)]
pub struct FaceFluxField {
    pub grid: DyadicGrid,
    pub slab: (f64, f64),
    pub sample_time: f64,
    pub fr: Vec<f64>,
    pub fy1: Vec<f64>,
    pub fy2: Vec<f64>,
}

impl FaceFluxField {
    #[inline]
    pub fn r_face(&self, i: usize, j: usize, l: usize) -> f64 {
        self.fr[(i * self.grid.ny + j) * self.grid.ny + l]
    }
    #[inline]
    pub fn y1_face(&self, i: usize, j: usize, l: usize) -> f64 {
        self.fy1[self.grid.index(i, j % self.grid.ny, l)]
    }
    #[inline]
    pub fn y2_face(&self, i: usize, j: usize, l: usize) -> f64 {
        self.fy2[self.grid.index(i, j, l % self.grid.ny)]
    }

    pub fn max_abs(&self) -> f64 {
        self.fr
            .iter()
            .chain(&self.fy1)
            .chain(&self.fy2)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Which side of a face is sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceSide {
    Lower,
    Upper,
}

/// Sample normal components at face centroids, offset by `h/4` into the
/// lower neighbour (the upper one on the boundary face `r = 0`).
pub fn sample_face_fluxes(
    field: &dyn VelocityField,
    grid: &DyadicGrid,
    slab: (f64, f64),
) -> Result<FaceFluxField> {
    sample_face_fluxes_sided(field, grid, slab, FaceSide::Lower)
}

/// [`sample_face_fluxes`] with an explicit side choice.
pub fn sample_face_fluxes_sided(
    field: &dyn VelocityField,
    grid: &DyadicGrid,
    slab: (f64, f64),
    side: FaceSide,
) -> Result<FaceFluxField> {
    let (lo, hi) = slab;
    if !(hi > lo) {
        return Err(Error::Config(format!("empty slab ]{lo}, {hi}[")));
    }
    if let Some(at) = field.schedule().straddled(lo, hi) {
        return Err(Error::Schedule { lo, hi, at });
    }
    let t = 0.5 * (lo + hi);
    let g = *grid;
    let (h, ny) = (g.h, g.ny);
    let off = match side {
        FaceSide::Lower => -0.25 * h,
        FaceSide::Upper => 0.25 * h,
    };
    let fr = (0..(g.nr + 1) * ny * ny)
        .into_par_iter()
        .map(|c| {
            let l = c % ny;
            let j = (c / ny) % ny;
            let i = c / (ny * ny);
            let mut r = i as f64 * h + off;
            if r <= 0.0 {
                r = 0.25 * h;
            } else if r >= g.domain.r_max {
                r = g.domain.r_max - 0.25 * h;
            }
            field.eval(t, [r, (j as f64 + 0.5) * h, (l as f64 + 0.5) * h])[0]
        })
        .collect();
    let fy1 = (0..g.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j, l) = g.unindex(c);
            field.eval(t, [(i as f64 + 0.5) * h, j as f64 * h + off, (l as f64 + 0.5) * h])[1]
        })
        .collect();
    let fy2 = (0..g.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j, l) = g.unindex(c);
            field.eval(t, [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, l as f64 * h + off])[2]
        })
        .collect();
    Ok(FaceFluxField { grid: g, slab, sample_time: t, fr, fy1, fy2 })
}

/// Outgoing flux per unit volume in every cell.
pub fn discrete_divergence(flux: &FaceFluxField, grid: &DyadicGrid) -> CellScalarField {
    let g = *grid;
    let ny = g.ny;
    let values = (0..g.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j, l) = g.unindex(c);
            let dr = flux.r_face(i + 1, j, l) - flux.r_face(i, j, l);
            let d1 = flux.y1_face(i, (j + 1) % ny, l) - flux.y1_face(i, j, l);
            let d2 = flux.y2_face(i, j, (l + 1) % ny) - flux.y2_face(i, j, l);
            (dr + d1 + d2) * (g.h * g.h) / g.cell_volume()
        })
        .collect();
    CellScalarField { grid: g, time: flux.sample_time, values }
}

/// Smooth one-dimensional bump `exp(1 - 1/(1 - s^2))` on `]-1, 1[`, equal to 1 at 0.
#[inline]
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Derivative of [`bump`].
#[inline]
pub fn bump_prime(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        bump(s) * (-2.0 * s / (d * d))
    }
}

/// Composite Simpson rule on `[a, b]` with `n` (even) sub-intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let dx = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * dx);
    }
    s * dx / 3.0
}

/// Tensor-product mollifier with support in the cube of half-width
/// `eps / 2` per axis, hence inside the `eps`-ball in up to four dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    pub eps: f64,
    /// Normalisation of the 1D factor, `1 / int bump((z)/(eps/2)) dz`.
    norm_1d: f64,
}

impl Mollifier {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("mollifier radius must be positive, got {eps}")));
        }
        let a = 0.5 * eps;
        let m = simpson(|z| bump(z / a), -a, a, 20_000);
        Ok(Self { eps, norm_1d: 1.0 / m })
    }

    /// One-dimensional factor of the kernel.
    #[inline]
    pub fn factor(&self, z: f64) -> f64 {
        self.norm_1d * bump(z / (0.5 * self.eps))
    }

    #[inline]
    pub fn factor_prime(&self, z: f64) -> f64 {
        let a = 0.5 * self.eps;
        self.norm_1d * bump_prime(z / a) / a
    }

    /// Kernel value in `d` dimensions.
    pub fn eval(&self, z: &[f64]) -> f64 {
        z.iter().map(|&c| self.factor(c)).product()
    }

    /// Exact gradient of the kernel.
    pub fn grad(&self, z: &[f64]) -> Vec<f64> {
        (0..z.len())
            .map(|k| {
                z.iter()
                    .enumerate()
                    .map(|(m, &c)| if m == k { self.factor_prime(c) } else { self.factor(c) })
                    .product()
            })
            .collect()
    }

    /// Mass in `d` dimensions by an independent Simpson rule.
    pub fn mass(&self, d: i32) -> f64 {
        let a = 0.5 * self.eps;
        simpson(|z| self.factor(z), -a, a, 40_000).powi(d)
    }

    /// Discrete weights at offsets `m * eps / 8`, `m = -4..=4`, summing to one.
    fn stencil(&self) -> [f64; 9] {
        let mut w = [0.0; 9];
        for (k, wk) in w.iter_mut().enumerate() {
            *wk = bump((k as f64 - 4.0) / 4.0);
        }
        let s: f64 = w.iter().sum();
        w.map(|v| v / s)
    }
}

/// Axis-aligned box in `(t, r, y1, y2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpaceTimeBox {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

/// The space-time field `B = (1, b)` inside `]0,T[ x Omega`, zero outside.
#[derive(Clone)]
pub struct ZeroExtended {
    pub inner: FieldRef,
    pub domain: DomainBox,
}

/// Extend `(1, b)` by zero outside `]0,T[ x Omega`.
pub fn zero_extend(field: FieldRef, domain: DomainBox) -> ZeroExtended {
    ZeroExtended { inner: field, domain }
}

impl ZeroExtended {
    #[inline]
    pub fn inside(&self, t: f64, x: Point) -> bool {
        t > 0.0 && t < self.domain.horizon && x[0] > 0.0
    }

    /// `(B_t, B_r, B_y1, B_y2)`.
    pub fn eval(&self, t: f64, x: Point) -> [f64; 4] {
        if self.inside(t, x) {
            let b = self.inner.eval(t, x);
            [1.0, b[0], b[1], b[2]]
        } else {
            [0.0; 4]
        }
    }

    /// Metadata of the extension; the bound is the larger of the time
    /// component and the spatial speed bound.
    pub fn meta(&self) -> FieldMeta {
        let m = self.inner.meta();
        FieldMeta {
            linf_bound: m.linf_bound.max(1.0),
            div_linf_bound: m.div_linf_bound,
            finest_scale: m.finest_scale,
            is_measure_divergence: true,
        }
    }
}

/// Result of [`mollified_divergence_l1`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollifiedDivergence {
    pub value: f64,
    /// Set when the window lies within `eps` of `r = 0`, `t = 0` or `t = T`.
    pub boundary_layer: bool,
}

/// `int_window |Div(B * rho_eps)|` for the zero-extended field `B`.
///
/// The divergence measure of `B` is taken cell-wise on a space-time grid of
/// step `eps / 8` (face averages sampled at centroids), then convolved with the
/// discrete tensor kernel. Window corners must be multiples of `eps / 8`.
pub fn mollified_divergence_l1(
    field: &ZeroExtended,
    eps: f64,
    window: SpaceTimeBox,
) -> Result<MollifiedDivergence> {
    let moll = Mollifier::new(eps)?;
    let hq = eps / 8.0;
    for a in 0..4 {
        if !(window.hi[a] > window.lo[a]) || !is_multiple(window.lo[a], hq) || !is_multiple(window.hi[a], hq)
        {
            return Err(Error::Config(format!(
                "window axis {a} [{}, {}] not aligned to eps/8 = {hq}",
                window.lo[a], window.hi[a]
            )));
        }
    }
    const M: usize = 4;
    let n: [usize; 4] = std::array::from_fn(|a| ((window.hi[a] - window.lo[a]) / hq).round() as usize);
    let ne: [usize; 4] = std::array::from_fn(|a| n[a] + 2 * M);
    let origin: [f64; 4] = std::array::from_fn(|a| window.lo[a] - M as f64 * hq);
    let total = ne.iter().product::<usize>();
    let stride = [ne[1] * ne[2] * ne[3], ne[2] * ne[3], ne[3], 1];
    let face = |axis: usize, idx: [usize; 4]| -> f64 {
        let mut p = [0.0; 4];
        for a in 0..4 {
            p[a] = origin[a] + (idx[a] as f64 + if a == axis { -0.25 } else { 0.5 }) * hq;
        }
        field.eval(p[0], [p[1], p[2], p[3]])[axis]
    };
    let div: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|c| {
            let idx: [usize; 4] = std::array::from_fn(|a| (c / stride[a]) % ne[a]);
            let mut s = 0.0;
            for a in 0..4 {
                let mut up = idx;
                up[a] += 1;
                s += face(a, up) - face(a, idx);
            }
            s * hq * hq * hq
        })
        .collect();
    let w = moll.stencil();
    let mut cur = div;
    let mut dims = ne;
    for a in 0..4 {
        let mut out_dims = dims;
        out_dims[a] = n[a];
        let os: [usize; 4] = [
            out_dims[1] * out_dims[2] * out_dims[3],
            out_dims[2] * out_dims[3],
            out_dims[3],
            1,
        ];
        let is: [usize; 4] = [dims[1] * dims[2] * dims[3], dims[2] * dims[3], dims[3], 1];
        let out_total: usize = out_dims.iter().product();
        let src = &cur;
        cur = (0..out_total)
            .into_par_iter()
            .map(|c| {
                let idx: [usize; 4] = std::array::from_fn(|b| (c / os[b]) % out_dims[b]);
                let mut base = 0;
                for b in 0..4 {
                    base += idx[b] * is[b];
                }
                (0..=2 * M).map(|k| w[k] * src[base + k * is[a]]).sum::<f64>()
            })
            .collect();
        dims = out_dims;
    }
    let value = cur.iter().map(|v| v.abs()).sum::<f64>();
    let d = field.domain;
    let boundary_layer = window.lo[1] < eps || window.lo[0] < eps || window.hi[0] > d.horizon - eps;
    Ok(MollifiedDivergence { value, boundary_layer })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_lands_in_the_period() {
        for y in [-1.25, -0.5, -1e-17, 0.0, 0.3, 0.5, 7.75] {
            let w = wrap(y, Y_PERIOD);
            assert!((0.0..Y_PERIOD).contains(&w), "{y} -> {w}");
            let n = (y - w) / Y_PERIOD;
            assert!((n - n.round()).abs() < 1e-12, "{y} -> {w}");
        }
    }

    #[test]
    fn bump_is_one_at_the_origin_and_vanishes_outside() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump_prime(0.0), 0.0);
        let e = 1e-6;
        let fd = (bump(0.3 + e) - bump(0.3 - e)) / (2.0 * e);
        assert!((fd - bump_prime(0.3)).abs() < 1e-8);
    }

    #[test]
    fn mollifier_has_unit_mass() {
        let m = Mollifier::new(0.1).unwrap();
        for d in 1..=4 {
            assert!((m.mass(d) - 1.0).abs() < 1e-10);
        }
        assert!(Mollifier::new(0.0).is_err());
    }

    #[test]
    fn grids_below_level_three_are_rejected() {
        assert!(make_grid(DomainBox::standard(), 2).is_err());
        let g = make_grid(DomainBox::standard(), 4).unwrap();
        assert_eq!((g.nr, g.ny), (16, 8));
        let c = g.index(3, 5, 7);
        assert_eq!(g.unindex(c), (3, 5, 7));
    }
}
