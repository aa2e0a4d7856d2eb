//! Normal traces of bounded measure-divergence fields on the planes
//! `Sigma_r = {r = r0}` oriented by `(0, -1, 0, 0)`, their weak-star and strong
//! limits, and the boundary/initial trace extraction for the initial-boundary
//! value problem.
//!
//! Sides follow the orientation: the `Minus` trace is seen from `r > r0` (the
//! region whose outward normal is the orientation), the `Plus` trace from
//! `r < r0`. At the physical boundary the outward trace is the `Minus` trace.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{bump, bump_prime, CellScalarField, DyadicGrid, FaceFluxField, Point, VelocityField, ZeroExtended};
use crate::quadrature::{composite, tensor3, tensor4, Rule};
use crate::solution::ScalarSolution;

/// Orientation of every surface `Sigma_r` in `(t, r, y1, y2)`.
pub const ORIENTATION: [f64; 4] = [0.0, -1.0, 0.0, 0.0];

/// Threshold below which `|Tr b|` counts as zero.
pub const GAMMA0_THRESHOLD: f64 = 1e-6;

/// Which flux a trace is taken of: `B = (1, b)`, `C = (u, ub)` or `(u^2, u^2 b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SourceTag {
    B,
    Flux,
    FluxSquared,
}

impl SourceTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceTag::B => "b",
            SourceTag::Flux => "bu",
            SourceTag::FluxSquared => "u2b",
        }
    }

    #[inline]
    fn weight(&self, u: f64) -> f64 {
        match self {
            SourceTag::B => 1.0,
            SourceTag::Flux => u,
            SourceTag::FluxSquared => u * u,
        }
    }
}

/// Side from which a one-sided trace is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TraceSide {
    /// From `r > r0`.
    Minus,
    /// From `r < r0`.
    Plus,
}

/// Family of planes `r = const` over the lateral box `[0, d_len]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphFamily {
    pub d_len: f64,
    pub orientation: [f64; 4],
}

impl GraphFamily {
    pub fn planes(d_len: f64) -> Self {
        Self { d_len, orientation: ORIENTATION }
    }
}

/// Cell-centered sampling grid on `]t_lo, t_hi[ x [0, d_len]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileGrid {
    pub t_lo: f64,
    pub t_hi: f64,
    pub nt: usize,
    pub d_len: f64,
    pub ny: usize,
}

impl ProfileGrid {
    pub fn new(t_lo: f64, t_hi: f64, nt: usize, d_len: f64, ny: usize) -> Self {
        assert!(t_hi > t_lo && nt > 0 && ny > 0 && d_len > 0.0);
        Self { t_lo, t_hi, nt, d_len, ny }
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        (self.t_hi - self.t_lo) / self.nt as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        self.d_len / self.ny as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nt * self.ny * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn node(&self, c: usize) -> [f64; 3] {
        let j2 = c % self.ny;
        let j1 = (c / self.ny) % self.ny;
        let it = c / (self.ny * self.ny);
        [
            self.t_lo + (it as f64 + 0.5) * self.dt(),
            (j1 as f64 + 0.5) * self.dy(),
            (j2 as f64 + 0.5) * self.dy(),
        ]
    }

    #[inline]
    pub fn cell_measure(&self) -> f64 {
        self.dt() * self.dy() * self.dy()
    }

    /// Measure of `]t_lo, t_hi[ x D`.
    pub fn measure(&self) -> f64 {
        (self.t_hi - self.t_lo) * self.d_len * self.d_len
    }
}

/// A scalar function on `]t_lo, t_hi[ x D` attached to a surface.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceProfile {
    pub grid: ProfileGrid,
    pub r0: f64,
    pub side: Option<TraceSide>,
    pub source: SourceTag,
    pub orientation: [f64; 4],
    pub values: Vec<f64>,
}

impl TraceProfile {
    pub fn constant(grid: ProfileGrid, r0: f64, source: SourceTag, value: f64) -> Self {
        Self { grid, r0, side: None, source, orientation: ORIENTATION, values: vec![value; grid.len()] }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `int profile * phi` by the cell-centered rule.
    pub fn pair(&self, test: &ProfileTest) -> f64 {
        let g = self.grid;
        let partial: Vec<f64> = self
            .values
            .par_chunks(g.ny * g.ny)
            .enumerate()
            .map(|(it, chunk)| {
                let mut s = 0.0;
                for (c, v) in chunk.iter().enumerate() {
                    if *v != 0.0 {
                        s += v * test.value(g.node(it * g.ny * g.ny + c));
                    }
                }
                s
            })
            .collect();
        partial.iter().sum::<f64>() * g.cell_measure()
    }

    /// `int phi` on the same rule (pairing of the constant 1).
    pub fn pair_one(grid: &ProfileGrid, test: &ProfileTest) -> f64 {
        (0..grid.len()).map(|c| test.value(grid.node(c))).sum::<f64>() * grid.cell_measure()
    }

    /// `||self - other||_{L^1}` divided by the measure of the base.
    pub fn l1_distance(&self, other: &TraceProfile) -> f64 {
        assert_eq!(self.grid, other.grid, "profiles on different grids");
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        s * self.grid.cell_measure() / self.grid.measure()
    }

    /// CSV dump with columns `t,y1,y2,value,source_tag,orientation`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "t,y1,y2,value,source_tag,orientation")?;
        let o = self.orientation;
        let orient = format!("({} {} {} {})", o[0], o[1], o[2], o[3]);
        for (c, v) in self.values.iter().enumerate() {
            let [t, y1, y2] = self.grid.node(c);
            writeln!(w, "{t},{y1},{y2},{v},{},{orient}", self.source.as_str())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Lateral slice at the time node closest to `t`, indexed `[y1][y2]`.
    pub fn slice(&self, t: f64) -> Vec<Vec<f64>> {
        let g = self.grid;
        let it = (((t - g.t_lo) / g.dt()).floor().max(0.0) as usize).min(g.nt - 1);
        (0..g.ny)
            .map(|j1| (0..g.ny).map(|j2| self.values[(it * g.ny + j1) * g.ny + j2]).collect())
            .collect()
    }
}

/// Field together with an optional solution `u`.
#[derive(Clone, Copy)]
pub struct TraceSource<'a> {
    pub field: &'a dyn VelocityField,
    pub solution: Option<&'a dyn ScalarSolution>,
}

impl<'a> TraceSource<'a> {
    pub fn field(field: &'a dyn VelocityField) -> Self {
        Self { field, solution: None }
    }

    pub fn with_solution(field: &'a dyn VelocityField, solution: &'a dyn ScalarSolution) -> Self {
        Self { field, solution: Some(solution) }
    }

    /// Oriented normal component of the chosen flux at `(t, x)`.
    #[inline]
    pub fn normal(&self, tag: SourceTag, t: f64, x: Point) -> f64 {
        let u = match (tag, self.solution) {
            (SourceTag::B, _) => 1.0,
            (_, Some(s)) => s.eval(t, x),
            (_, None) => 0.0,
        };
        let w = tag.weight(u);
        if w == 0.0 {
            return 0.0;
        }
        ORIENTATION[1] * self.field.eval(t, x)[0] * w
    }
}

fn resolvable(r0: f64, unit: f64) -> bool {
    let q = r0 / unit;
    q.is_finite() && (q - q.round()).abs() <= 1e-9 * q.abs().max(1.0)
}

/// Distance from the plane at which one-sided traces sample the field.
pub fn trace_offset(field: &dyn VelocityField, grid: &ProfileGrid) -> f64 {
    let fine = field.meta().finest_scale;
    let dy = grid.dy();
    dy.min(if fine.is_finite() { fine } else { dy }).min(grid.dt()) / 64.0
}

/// Profile of the oriented normal component on `r = r0` from one side.
///
/// `r0` must be a multiple of the profile step or of a quarter of the
/// field's finest scale; the field is sampled at `r0 +- delta` with `delta`
/// far below both.
pub fn one_sided_trace(
    src: &TraceSource,
    tag: SourceTag,
    r0: f64,
    side: TraceSide,
    grid: ProfileGrid,
) -> Result<TraceProfile> {
    let fine = src.field.meta().finest_scale;
    let dy = grid.dy();
    let ok = resolvable(r0, dy) || (fine.is_finite() && resolvable(r0, 0.25 * fine));
    if !ok {
        return Err(Error::Resolution(format!(
            "plane r = {r0} is not on the profile lattice (step {dy}) or the field's dyadic planes"
        )));
    }
    let delta = trace_offset(src.field, &grid);
    let r = match side {
        TraceSide::Minus => r0 + delta,
        TraceSide::Plus => r0 - delta,
    };
    if r <= 0.0 {
        return Err(Error::Resolution(format!("no interior side below r = {r0}")));
    }
    let values = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let [t, y1, y2] = grid.node(c);
            src.normal(tag, t, [r, y1, y2])
        })
        .collect();
    Ok(TraceProfile { grid, r0, side: Some(side), source: tag, orientation: ORIENTATION, values })
}

/// One-sided profile on the r-face layer `r0` of a discrete flux field.
/// Single time node at the flux sample time; base is the whole torus.
pub fn one_sided_trace_discrete(
    flux: &FaceFluxField,
    state: Option<&CellScalarField>,
    tag: SourceTag,
    r0: f64,
    side: TraceSide,
) -> Result<TraceProfile> {
    let g = flux.grid;
    if !resolvable(r0, g.h) || r0 < 0.0 || r0 > g.domain.r_max {
        return Err(Error::Resolution(format!("plane r = {r0} is not a face layer of the level-{} grid", g.level)));
    }
    let i = (r0 / g.h).round() as usize;
    let cell = match side {
        TraceSide::Minus if i < g.nr => Some(i),
        TraceSide::Plus if i > 0 => Some(i - 1),
        _ => None,
    };
    let Some(ci) = cell else {
        return Err(Error::Resolution(format!("no cells on the requested side of r = {r0}")));
    };
    let t = flux.sample_time;
    let grid = ProfileGrid::new(t - 0.5e-9, t + 0.5e-9, 1, g.domain.y_period, g.ny);
    let values = (0..g.ny * g.ny)
        .map(|c| {
            let (j, l) = (c / g.ny, c % g.ny);
            let u = state.map_or(0.0, |s| s.get(ci, j, l));
            ORIENTATION[1] * flux.r_face(i, j, l) * tag.weight(if tag == SourceTag::B { 1.0 } else { u })
        })
        .collect();
    Ok(TraceProfile { grid, r0, side: Some(side), source: tag, orientation: ORIENTATION, values })
}

/// `Tr+ - Tr-` on `r = r0`.
pub fn trace_jump(src: &TraceSource, tag: SourceTag, r0: f64, grid: ProfileGrid) -> Result<TraceProfile> {
    let plus = one_sided_trace(src, tag, r0, TraceSide::Plus, grid)?;
    let minus = one_sided_trace(src, tag, r0, TraceSide::Minus, grid)?;
    let values = plus.values.iter().zip(&minus.values).map(|(a, b)| a - b).collect();
    Ok(TraceProfile { side: None, values, ..plus })
}

fn psi_prime_max() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| (0..200_001).map(|i| bump_prime(i as f64 / 200_000.0).abs()).fold(0.0, f64::max) * 1.000_001)
}

/// Tensor product of one-dimensional bumps:
/// `amp * prod_i bump((x_i - center_i) / half_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TensorBump<const N: usize> {
    #[serde(with = "serde_arrays")]
    pub center: [f64; N],
    #[serde(with = "serde_arrays")]
    pub half: [f64; N],
    pub amp: f64,
}

mod serde_arrays {
    use serde::ser::SerializeTuple;
    use serde::Serializer;

    pub fn serialize<S: Serializer, const N: usize>(a: &[f64; N], s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(N)?;
        for v in a {
            t.serialize_element(v)?;
        }
        t.end()
    }
}

/// Test function on `(t, r, y1, y2)`.
pub type TestFunction = TensorBump<4>;
/// Test function on `(t, y1, y2)` for profiles.
pub type ProfileTest = TensorBump<3>;

/// Which boundary pieces a test function reaches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TestClass {
    pub touches_boundary: bool,
    pub touches_initial: bool,
}

impl<const N: usize> TensorBump<N> {
    pub fn new(center: [f64; N], half: [f64; N], amp: f64) -> Self {
        assert!(half.iter().all(|&h| h > 0.0), "bump widths must be positive");
        Self { center, half, amp }
    }

    #[inline]
    pub fn value(&self, p: [f64; N]) -> f64 {
        let mut v = self.amp;
        for i in 0..N {
            v *= bump((p[i] - self.center[i]) / self.half[i]);
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    pub fn grad(&self, p: [f64; N]) -> [f64; N] {
        let s: [f64; N] = std::array::from_fn(|i| (p[i] - self.center[i]) / self.half[i]);
        let f: [f64; N] = std::array::from_fn(|i| bump(s[i]));
        std::array::from_fn(|i| {
            let mut g = self.amp * bump_prime(s[i]) / self.half[i];
            for (j, fj) in f.iter().enumerate() {
                if j != i {
                    g *= fj;
                }
            }
            g
        })
    }

    /// Upper bound of the Lipschitz constant.
    pub fn lip(&self) -> f64 {
        let m = psi_prime_max();
        self.amp.abs() * self.half.iter().map(|h| (m / h).powi(2)).sum::<f64>().sqrt()
    }

    /// `sup |phi| + sup |grad phi|` (upper bound).
    pub fn c1_norm(&self) -> f64 {
        self.amp.abs() + self.lip()
    }

    pub fn support(&self) -> ([f64; N], [f64; N]) {
        (
            std::array::from_fn(|i| self.center[i] - self.half[i]),
            std::array::from_fn(|i| self.center[i] + self.half[i]),
        )
    }

    /// Per-axis factor and derivative tables on the given nodes.
    pub fn axis_tables(&self, axis: usize, nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = self.center[axis];
        let h = self.half[axis];
        nodes
            .iter()
            .map(|&x| {
                let s = (x - c) / h;
                (bump(s), bump_prime(s) / h)
            })
            .unzip()
    }
}

impl TestFunction {
    pub fn class(&self) -> TestClass {
        TestClass {
            touches_boundary: self.center[1] - self.half[1] < 0.0,
            touches_initial: self.center[0] - self.half[0] < 0.0,
        }
    }
}

/// Twenty profile tests on `]t_lo, t_hi[ x [0, d]^2` with dyadic centers and
/// three width scales.
pub fn profile_battery(t_lo: f64, t_hi: f64, d: f64) -> Vec<ProfileTest> {
    let tl = t_hi - t_lo;
    let mut out = Vec::with_capacity(20);
    let scales: [(f64, &[(f64, f64, f64)]); 3] = [
        (
            4.0,
            &[(0.5, 0.5, 0.5), (0.25, 0.25, 0.25), (0.75, 0.25, 0.75), (0.5, 0.75, 0.25)],
        ),
        (
            8.0,
            &[
                (0.25, 0.125, 0.125),
                (0.5, 0.375, 0.625),
                (0.75, 0.875, 0.5),
                (0.375, 0.5, 0.875),
                (0.625, 0.625, 0.375),
                (0.125, 0.25, 0.75),
                (0.875, 0.75, 0.125),
                (0.5, 0.125, 0.5),
            ],
        ),
        (
            16.0,
            &[
                (0.5, 0.0625, 0.0625),
                (0.25, 0.3125, 0.5625),
                (0.75, 0.5625, 0.8125),
                (0.125, 0.9375, 0.4375),
                (0.875, 0.6875, 0.1875),
                (0.625, 0.1875, 0.6875),
                (0.375, 0.8125, 0.3125),
                (0.0625, 0.4375, 0.9375),
            ],
        ),
    ];
    for (div, centers) in scales {
        let wt = (tl / div).min(0.25 * tl);
        let wy = d / div;
        for &(ct, c1, c2) in centers {
            let ct = (t_lo + ct * tl).clamp(t_lo + wt, t_hi - wt);
            let c1 = (c1 * d).clamp(wy, d - wy);
            let c2 = (c2 * d).clamp(wy, d - wy);
            out.push(ProfileTest::new([ct, c1, c2], [wt, wy, wy], 1.0));
        }
    }
    out
}

/// One row of a weak-star report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakStarRow {
    pub scale: f64,
    pub test: usize,
    pub error: f64,
    pub bound: f64,
    pub normalized_pairing: f64,
}

/// Pairing errors of a profile sequence against a limit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakStarReport {
    pub rows: Vec<WeakStarRow>,
    /// Fitted exponent `p` in `max error ~ scale^p`.
    pub rate: Option<f64>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Pair every profile (tagged with its scale `2^(2-k)`) and the limit with
/// every test; pass iff `|error| <= c * Lip(phi) * scale` throughout.
pub fn weak_star_check(
    profiles: &[(f64, TraceProfile)],
    limit: &TraceProfile,
    tests: &[ProfileTest],
    c: f64,
) -> WeakStarReport {
    let lim: Vec<f64> = tests.iter().map(|t| limit.pair(t)).collect();
    let ones: Vec<f64> = tests.iter().map(|t| TraceProfile::pair_one(&limit.grid, t)).collect();
    let mut rows = Vec::new();
    let mut maxes = Vec::new();
    for (scale, p) in profiles {
        let mut m: f64 = 0.0;
        for (i, t) in tests.iter().enumerate() {
            let v = p.pair(t);
            let error = (v - lim[i]).abs();
            m = m.max(error);
            rows.push(WeakStarRow {
                scale: *scale,
                test: i,
                error,
                bound: c * t.lip() * scale,
                normalized_pairing: if ones[i] != 0.0 { v / ones[i] } else { 0.0 },
            });
        }
        maxes.push((*scale, m));
    }
    let max_ratio = rows.iter().map(|r| r.error / r.bound).fold(0.0, f64::max);
    WeakStarReport { rate: fit_rate(&maxes), max_ratio, pass: max_ratio <= 1.0, rows }
}

/// Least-squares slope of `log y` against `log x` over positive entries.
pub fn fit_rate(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `int |D_r b_r|` over `]r_a, r_b[ x D` and the profile time range: the sum
/// of `|b_r|` increments between `n_r + 1` equispaced radii from `r_a` to
/// `r_b` (both included) at every profile node, divided by the measure of
/// the profile base.
pub fn directional_variation(field: &dyn VelocityField, grid: ProfileGrid, r_a: f64, r_b: f64, n_r: usize) -> f64 {
    let dr = (r_b - r_a) / n_r as f64;
    let s: f64 = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let [t, y1, y2] = grid.node(c);
            let mut prev = field.eval(t, [r_a, y1, y2])[0];
            let mut v = 0.0;
            for j in 1..=n_r {
                let r = if j == n_r { r_b } else { r_a + j as f64 * dr };
                let cur = field.eval(t, [r, y1, y2])[0];
                v += (cur - prev).abs();
                prev = cur;
            }
            v
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    s * grid.cell_measure() / grid.measure()
}

/// Discrete total variation of all components of `b` over the slab
/// `]r_a, r_b[ x D` (all directions), time-averaged over the profile range.
pub fn discrete_total_variation(field: &dyn VelocityField, grid: ProfileGrid, r_a: f64, r_b: f64, n_r: usize) -> f64 {
    let dr = (r_b - r_a) / n_r as f64;
    let dy = grid.dy();
    let ny = grid.ny;
    let per_t: Vec<f64> = (0..grid.nt)
        .into_par_iter()
        .map(|it| {
            let t = grid.t_lo + (it as f64 + 0.5) * grid.dt();
            let at = |j: usize, a: usize, b: usize| {
                field.eval(t, [r_a + (j as f64 + 0.5) * dr, (a as f64 + 0.5) * dy, (b as f64 + 0.5) * dy])
            };
            let mut s = 0.0;
            for j in 0..n_r {
                for a in 0..ny {
                    for b in 0..ny {
                        let v = at(j, a, b);
                        let diff = |w: [f64; 3]| {
                            ((v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2) + (v[2] - w[2]).powi(2)).sqrt()
                        };
                        if j + 1 < n_r {
                            s += diff(at(j + 1, a, b)) * dy * dy;
                        }
                        if a + 1 < ny {
                            s += diff(at(j, a + 1, b)) * dr * dy;
                        }
                        if b + 1 < ny {
                            s += diff(at(j, a, b + 1)) * dr * dy;
                        }
                    }
                }
            }
            s
        })
        .collect();
    per_t.iter().sum::<f64>() * grid.dt() / grid.measure()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrongL1Row {
    pub r: f64,
    pub distance: f64,
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrongL1Report {
    pub rows: Vec<StrongL1Row>,
    /// Distances decrease monotonically along the sequence.
    pub decreasing: bool,
    /// Every available bound holds.
    pub within_bounds: bool,
    /// Set when the slab touches `r = 0`, where no BV bound is available.
    pub bound_unavailable: bool,
}

/// Normalised `||gamma_r - gamma_0||_{L^1}` for each `(r, gamma_r)` with the
/// directional variation of `b_r` over `]r0, r[` as bound (when `r0 > 0`).
/// Profiles are expected from the `Minus` side, so the variation is taken
/// between the same sampling offsets.
pub fn strong_l1_check(
    gammas: &[(f64, TraceProfile)],
    limit: &TraceProfile,
    field: &dyn VelocityField,
    r0: f64,
    n_r: usize,
) -> StrongL1Report {
    let bound_unavailable = r0 <= 0.0;
    let delta = trace_offset(field, &limit.grid);
    let rows: Vec<StrongL1Row> = gammas
        .iter()
        .map(|(r, g)| StrongL1Row {
            r: *r,
            distance: g.l1_distance(limit),
            bound: (!bound_unavailable).then(|| directional_variation(field, limit.grid, r0 + delta, *r + delta, n_r)),
        })
        .collect();
    let decreasing = rows.windows(2).all(|w| w[1].distance <= w[0].distance + 1e-15);
    let within_bounds = rows.iter().all(|r| r.bound.map_or(true, |b| r.distance <= b + 1e-12));
    StrongL1Report { rows, decreasing, within_bounds, bound_unavailable }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RenormalizationReport {
    pub max_defect: f64,
    pub zero_patch_max: f64,
    pub points: usize,
    pub pass: bool,
}

/// Pointwise check of `Tr(u^2 b) = (Tr(ub) / Tr b)^2 Tr b` (and `Tr(u^2 b) = 0`
/// where `Tr b = 0`).
pub fn renormalization_trace_check(
    tr_u2b: &TraceProfile,
    tr_ub: &TraceProfile,
    tr_b: &TraceProfile,
) -> RenormalizationReport {
    let mut max_defect: f64 = 0.0;
    let mut zero_patch_max: f64 = 0.0;
    for ((g2, g1), b) in tr_u2b.values.iter().zip(&tr_ub.values).zip(&tr_b.values) {
        if *b == 0.0 {
            zero_patch_max = zero_patch_max.max(g2.abs());
        } else {
            let q = g1 / b;
            max_defect = max_defect.max((g2 - q * q * b).abs());
        }
    }
    RenormalizationReport {
        max_defect,
        zero_patch_max,
        points: tr_b.values.len(),
        pass: max_defect <= 1e-12 && zero_patch_max <= 1e-12,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryReport {
    /// Fractions of the sampled boundary in the inflow, tangential and
    /// outflow sets.
    pub gamma_minus: f64,
    pub gamma_zero: f64,
    pub gamma_plus: f64,
    /// Normalised `L^1` discrepancy of box-averaged `Tr(bu)` and `g Tr b` on the inflow set.
    pub discrepancy: f64,
}

/// Classify the boundary by the sign of `Tr b` and compare `Tr(bu)`, taken
/// from the plane `r_probe`, with `g Tr b` on the inflow set after averaging
/// over boxes of `box_cells^3` profile cells.
pub fn boundary_condition_check(
    solution: &dyn ScalarSolution,
    field: &dyn VelocityField,
    g_bar: &(dyn Fn(f64, f64, f64) -> f64 + Sync),
    grid: ProfileGrid,
    r_probe: f64,
    box_cells: usize,
) -> BoundaryReport {
    let src = TraceSource::with_solution(field, solution);
    let b = box_cells.max(1);
    let (nbt, nby) = (grid.nt.div_ceil(b), grid.ny.div_ceil(b));
    let boxes: Vec<(f64, usize, usize, usize)> = (0..nbt * nby * nby)
        .into_par_iter()
        .map(|bx| {
            let (bt, b1, b2) = (bx / (nby * nby), (bx / nby) % nby, bx % nby);
            let (mut s_flux, mut s_data, mut n, mut nminus, mut nzero) = (0.0, 0.0, 0usize, 0usize, 0usize);
            for it in bt * b..((bt + 1) * b).min(grid.nt) {
                for j1 in b1 * b..((b1 + 1) * b).min(grid.ny) {
                    for j2 in b2 * b..((b2 + 1) * b).min(grid.ny) {
                        let [t, y1, y2] = grid.node((it * grid.ny + j1) * grid.ny + j2);
                        let trb = field.boundary_trace(t, y1, y2);
                        n += 1;
                        if trb < -GAMMA0_THRESHOLD {
                            nminus += 1;
                            s_flux += src.normal(SourceTag::Flux, t, [r_probe, y1, y2]);
                            s_data += g_bar(t, y1, y2) * trb;
                        } else if trb.abs() <= GAMMA0_THRESHOLD {
                            nzero += 1;
                        }
                    }
                }
            }
            ((s_flux - s_data).abs(), n, nminus, nzero)
        })
        .collect();
    let total: usize = boxes.iter().map(|b| b.1).sum();
    let minus: usize = boxes.iter().map(|b| b.2).sum();
    let zero: usize = boxes.iter().map(|b| b.3).sum();
    let disc: f64 = boxes.iter().map(|b| b.0).sum::<f64>() / total.max(1) as f64;
    BoundaryReport {
        gamma_minus: minus as f64 / total.max(1) as f64,
        gamma_zero: zero as f64 / total.max(1) as f64,
        gamma_plus: (total - minus - zero) as f64 / total.max(1) as f64,
        discrepancy: disc,
    }
}

/// Box averages of `u(t, .)` on the cells of `grid` with `sub^3` samples per cell.
pub fn box_averages(solution: &dyn ScalarSolution, grid: &DyadicGrid, t: f64, sub: usize) -> CellScalarField {
    let g = *grid;
    let h = g.h / sub as f64;
    let values = (0..g.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j, l) = g.unindex(c);
            let mut s = 0.0;
            for a in 0..sub {
                for bb in 0..sub {
                    for cc in 0..sub {
                        s += solution.eval(
                            t,
                            [
                                i as f64 * g.h + (a as f64 + 0.5) * h,
                                j as f64 * g.h + (bb as f64 + 0.5) * h,
                                l as f64 * g.h + (cc as f64 + 0.5) * h,
                            ],
                        );
                    }
                }
            }
            s / (sub * sub * sub) as f64
        })
        .collect();
    CellScalarField { grid: g, time: t, values }
}

/// Initial trace `w0` as the linear extrapolation to `t = 0` of box averages
/// at `t = tau, tau/2, tau/4`. Fails when the averages are not contracting.
pub fn initial_trace(solution: &dyn ScalarSolution, grid: &DyadicGrid, tau: f64, sub: usize) -> Result<CellScalarField> {
    let a1 = box_averages(solution, grid, tau, sub);
    let a2 = box_averages(solution, grid, 0.5 * tau, sub);
    let a3 = box_averages(solution, grid, 0.25 * tau, sub);
    let d1 = a1.values.iter().zip(&a2.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let d2 = a2.values.iter().zip(&a3.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if d2 > 0.75 * d1 + 1e-12 {
        return Err(Error::Resolution(format!(
            "no trace at tested resolution: successive average gaps {d1:.3e}, {d2:.3e}"
        )));
    }
    let values = a2.values.iter().zip(&a3.values).map(|(x, y)| 2.0 * y - x).collect();
    Ok(CellScalarField { grid: *grid, time: 0.0, values })
}

/// `int grad phi . B` over `]0,T[ x {r > 0}` for the zero-extended field, by a
/// composite two-point Gauss rule with cells of size `q`. For catalog fields
/// the interior divergence vanishes, so this is the trace pairing.
pub fn trace_pairing(field: &ZeroExtended, test: &TestFunction, q: f64) -> f64 {
    let (lo, hi) = test.support();
    let t_hi = field.domain.horizon;
    let axes: [(Vec<f64>, Vec<f64>); 4] = std::array::from_fn(|a| {
        let (l, h) = match a {
            0 => (lo[0].max(0.0), hi[0].min(t_hi)),
            1 => (lo[1].max(0.0), hi[1]),
            _ => (lo[a], hi[a]),
        };
        composite(l, h, q, 0.0, Rule::Gauss2)
    });
    tensor4(&axes, |p| {
        let g = test.grad(p);
        let b = field.eval(p[0], [p[1], p[2], p[3]]);
        g[0] * b[0] + g[1] * b[1] + g[2] * b[2] + g[3] * b[3]
    })
}

/// Direct boundary quadrature `int_{boundary} phi B.n` over `r = 0`, `t = 0`
/// and `t = T` (smooth fields; outward normals).
pub fn gauss_green_boundary(field: &ZeroExtended, test: &TestFunction, q: f64) -> f64 {
    let (lo, hi) = test.support();
    let t_hi = field.domain.horizon;
    let ax = |l: f64, h: f64| composite(l, h, q, 0.0, Rule::Gauss2);
    let b = field.inner.clone();
    let mut s = 0.0;
    if lo[1] < 0.0 {
        let axes = [ax(lo[0].max(0.0), hi[0].min(t_hi)), ax(lo[2], hi[2]), ax(lo[3], hi[3])];
        s += tensor3(&axes, |p| -b.eval(p[0], [0.0, p[1], p[2]])[0] * test.value([p[0], 0.0, p[1], p[2]]));
    }
    for (tb, sign) in [(0.0, -1.0), (t_hi, 1.0)] {
        if lo[0] < tb && hi[0] > tb {
            let axes = [ax(lo[1].max(0.0), hi[1]), ax(lo[2], hi[2]), ax(lo[3], hi[3])];
            s += tensor3(&axes, |p| sign * test.value([tb, p[0], p[1], p[2]]));
        }
    }
    s
}
