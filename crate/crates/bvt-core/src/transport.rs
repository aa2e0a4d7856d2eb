//! Exact characteristic flows of piecewise fields and the chessboard
//! evolutions they generate.

use rayon::prelude::*;

use crate::catalog::{alpha_k, chessboard_datum, square_flow, ChessboardState};
use crate::error::{Error, Result};
use crate::geometry::{CellScalarField, DyadicGrid, Piece, Point, VelocityField};
use crate::solution::ScalarSolution;

/// A crossing between two pieces along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowEvent {
    pub time: f64,
    pub before: u64,
    pub after: u64,
}

/// Full record of one characteristic.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    pub end: Point,
    pub events: Vec<FlowEvent>,
    /// Number of one-ulp nudges applied at vertices.
    pub perturbations: usize,
}

/// Closed-form motion inside one piece for a signed duration `dt`.
#[inline]
fn advance(piece: &Piece, x: Point, dt: f64) -> Point {
    match *piece {
        Piece::Const { v, .. } => [x[0] + v[0] * dt, x[1] + v[1] * dt, x[2] + v[2] * dt],
        Piece::Rotation { vr, center, lambda, .. } => {
            let z = square_flow([x[1] - center[0], x[2] - center[1]], lambda, dt);
            [x[0] + vr * dt, z[0] + center[0], z[1] + center[1]]
        }
    }
}

/// Piece governing the motion that leaves `(t, x)` in direction `dir`.
fn resolve(field: &dyn VelocityField, t: f64, x: Point, dir: f64, probe: f64) -> Piece {
    let p = field.piece(t, x);
    let y = advance(&p, x, dir * probe);
    let q = field.piece(t + dir * probe, y);
    if q.id() == p.id() {
        p
    } else {
        q
    }
}

fn nudge(x: Point) -> Point {
    x.map(|c| if c == 0.0 { f64::MIN_POSITIVE } else { c.next_up() })
}

/// Event-driven integration of `dx/dt = b(t, x)` from `t0` to `t1` (either
/// direction). Inside a piece the motion is closed-form; piece changes are
/// located by bisection down to adjacent floating-point times.
pub fn flow_trajectory(field: &dyn VelocityField, t0: f64, t1: f64, x: Point) -> Result<FlowTrajectory> {
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::Config("non-finite flow times".into()));
    }
    let meta = field.meta();
    let span = (t1 - t0).abs();
    let mut traj = FlowTrajectory { end: x, events: Vec::new(), perturbations: 0 };
    if span == 0.0 {
        return Ok(traj);
    }
    let dir = (t1 - t0).signum();
    let speed = meta.linf_bound.max(1e-300);
    let sub = if meta.finest_scale.is_finite() {
        (meta.finest_scale / (64.0 * speed)).min(span)
    } else {
        span
    };
    let probe = sub * 1e-9;
    let mut t = t0;
    let mut x = x;
    let mut piece = resolve(field, t, x, dir, probe);
    let mut stalls = 0usize;
    while dir * (t1 - t) > 0.0 {
        let tau = sub.min((t1 - t).abs());
        let same = |d: f64| {
            let y = advance(&piece, x, dir * d);
            field.piece(t + dir * d, y).id() == piece.id()
        };
        if same(tau) && same(0.5 * tau) {
            x = advance(&piece, x, dir * tau);
            t = if tau == (t1 - t).abs() { t1 } else { t + dir * tau };
            stalls = 0;
            continue;
        }
        let (mut lo, mut hi) = (0.0f64, if same(0.5 * tau) { tau } else { 0.5 * tau });
        while hi - lo > f64::EPSILON * (t.abs() + hi).max(f64::MIN_POSITIVE) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if same(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        x = advance(&piece, x, dir * hi);
        t += dir * hi;
        let next = resolve(field, t, x, dir, probe);
        traj.events.push(FlowEvent { time: t, before: piece.id(), after: next.id() });
        if hi <= probe {
            stalls += 1;
            if stalls > 8 {
                log::warn!("trajectory stalled at a vertex near t = {t}, x = {x:?}; nudging by one ulp");
                x = nudge(x);
                traj.perturbations += 1;
                stalls = 0;
            }
        } else {
            stalls = 0;
        }
        piece = resolve(field, t, x, dir, probe);
    }
    traj.end = x;
    Ok(traj)
}

/// Position at time `t1` of the characteristic through `(t0, x)`.
pub fn flow_map(field: &dyn VelocityField, t0: f64, t1: f64, x: Point) -> Result<Point> {
    flow_trajectory(field, t0, t1, x).map(|tr| tr.end)
}

/// One clockwise quarter turn of a block: `(y1, y2) -> (y2, -y1)` relative
/// to the block center. `x` must lie in the block of half-width `2^(-2-k)`.
pub fn quarter_turn(k: u32, x: [f64; 2]) -> [f64; 2] {
    let hw = crate::geometry::pow2(-2 - k as i32);
    debug_assert!(x[0].abs() <= hw && x[1].abs() <= hw, "point outside the block");
    [x[1], -x[0]]
}

/// Rotate the 2x2 cell sub-block with lower-left cell `(i0, j0)` clockwise.
fn rotate_cells(cells: &[[i8; 4]; 4], i0: usize, j0: usize) -> [[i8; 4]; 4] {
    let mut out = *cells;
    for di in 0..2 {
        for dj in 0..2 {
            // Cell offsets relative to the block center are (di - 1/2, dj - 1/2);
            // their image under (a, b) -> (b, -a) is (dj - 1/2, 1/2 - di).
            let (ni, nj) = (dj, 1 - di);
            out[i0 + ni][j0 + nj] = cells[i0 + di][j0 + dj];
        }
    }
    out
}

/// States of the chessboard evolution at `r = 0, q, 3q, 4q`, `q = 2^(-2-k)`.
pub fn evolve_chessboard(k: u32) -> Vec<ChessboardState> {
    let q = crate::geometry::pow2(-2 - k as i32);
    let s0 = chessboard_datum(k);
    let c1 = rotate_cells(&s0.cells, 1, 1);
    let mut c2 = c1;
    for _ in 0..2 {
        for (i0, j0) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            c2 = rotate_cells(&c2, i0, j0);
        }
    }
    let c3 = rotate_cells(&c2, 1, 1);
    vec![
        s0,
        ChessboardState { k, r: q, cells: c1 },
        ChessboardState { k, r: 3.0 * q, cells: c2 },
        ChessboardState { k, r: 4.0 * q, cells: c3 },
    ]
}

/// Value of `z_k(r, y)` on `Q_k` by closed-form pull-back.
pub fn chessboard_at(k: u32, r: f64, y: [f64; 2]) -> f64 {
    let a = alpha_k(k);
    let y0 = a.pull_back(r, y);
    chessboard_datum(k).value(y0[0], y0[1])
}

/// Marker-particle oracle: integrate `m x m` markers of `Q_k` forward to
/// `r_end` under the scaled rotation schedule with explicit midpoint steps and
/// bin them. Returns per-cell marker values (`None` where markers disagree).
pub fn marker_chessboard(k: u32, r_end: f64, markers: usize, steps_per_quarter: usize) -> [[Option<i8>; 4]; 4] {
    let a = alpha_k(k);
    let q = a.q();
    let side = 4.0 * q;
    let dr = q / steps_per_quarter as f64;
    let datum = chessboard_datum(k);
    let finals: Vec<([f64; 2], i8)> = (0..markers * markers)
        .into_par_iter()
        .map(|m| {
            let (i, j) = (m / markers, m % markers);
            let mut y = [(i as f64 + 0.5) * side / markers as f64, (j as f64 + 0.5) * side / markers as f64];
            let v = datum.value(y[0], y[1]) as i8;
            let mut r = 0.0;
            let n = (r_end / dr).round() as usize;
            for _ in 0..n {
                let k1 = a.eval(r, y);
                let mid = [y[0] + 0.5 * dr * k1[0], y[1] + 0.5 * dr * k1[1]];
                let k2 = a.eval(r + 0.5 * dr, mid);
                y = [y[0] + dr * k2[0], y[1] + dr * k2[1]];
                r += dr;
            }
            (y, v)
        })
        .collect();
    let mut out = [[None::<i8>; 4]; 4];
    let mut bad = [[false; 4]; 4];
    for (y, v) in finals {
        let i = ((y[0] / q).floor() as i64).clamp(0, 3) as usize;
        let j = ((y[1] / q).floor() as i64).clamp(0, 3) as usize;
        match out[i][j] {
            None if !bad[i][j] => out[i][j] = Some(v),
            Some(w) if w != v => {
                bad[i][j] = true;
                out[i][j] = None;
            }
            _ => {}
        }
    }
    out
}

/// Explicit midpoint integration of the scaled block field for one quarter
/// period with `steps` steps (oracle for [`quarter_turn`]). A step that
/// crosses a diagonal, where the field switches between its two linear
/// branches, is split at the crossing located by bisection.
pub fn quarter_turn_ode(k: u32, x: [f64; 2], steps: usize) -> [f64; 2] {
    let b = crate::catalog::depauw_block(k);
    let dt = b.quarter_period() / steps as f64;
    let branch = |y: [f64; 2]| y[0].abs() > y[1].abs();
    let vel = |side: bool, y: [f64; 2]| {
        if side {
            [0.0, -2.0 * b.lambda * y[0]]
        } else {
            [2.0 * b.lambda * y[1], 0.0]
        }
    };
    let mid = |side: bool, y: [f64; 2], d: f64| {
        let k1 = vel(side, y);
        let m = [y[0] + 0.5 * d * k1[0], y[1] + 0.5 * d * k1[1]];
        let k2 = vel(side, m);
        [y[0] + d * k2[0], y[1] + d * k2[1]]
    };
    // Branch governing the motion leaving `y`.
    let leaving = |y: [f64; 2]| {
        let s = branch(y);
        let probe = mid(s, y, dt * 1e-6);
        branch(probe)
    };
    let mut y = x;
    for _ in 0..steps {
        let mut left = dt;
        for _ in 0..4 {
            let side = leaving(y);
            let end = mid(side, y, left);
            if branch(end) == side {
                y = end;
                break;
            }
            let (mut lo, mut hi) = (0.0, left);
            for _ in 0..80 {
                let m = 0.5 * (lo + hi);
                if branch(mid(side, y, m)) == side {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            y = mid(side, y, hi);
            left -= hi;
            if left <= 0.0 {
                break;
            }
        }
    }
    y
}

/// Result of [`pushforward_density`].
#[derive(Clone, Debug, PartialEq)]
pub struct Pushforward {
    pub density: CellScalarField,
    /// Cells whose backward characteristic left `]0, r_max[`.
    pub exited: Vec<usize>,
}

/// Transport `datum` (given at time `t0`) to time `t` by backward tracing from
/// every cell center. Cells whose characteristic ends outside the truncated
/// domain receive `boundary(t0, end point)`.
pub fn pushforward_density(
    field: &dyn VelocityField,
    datum: &dyn ScalarSolution,
    t0: f64,
    t: f64,
    grid: &DyadicGrid,
    boundary: &(dyn Fn(f64, Point) -> f64 + Sync),
) -> Result<Pushforward> {
    let g = *grid;
    let r_max = g.domain.r_max;
    let res: Vec<Result<(f64, bool)>> = (0..g.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j, l) = g.unindex(c);
            let x = g.center(i, j, l);
            let y = flow_map(field, t, t0, x)?;
            if y[0] <= 0.0 || y[0] >= r_max {
                Ok((boundary(t0, y), true))
            } else {
                Ok((datum.eval(t0, y), false))
            }
        })
        .collect();
    let mut values = Vec::with_capacity(res.len());
    let mut exited = Vec::new();
    for (c, r) in res.into_iter().enumerate() {
        let (v, out) = r?;
        values.push(v);
        if out {
            exited.push(c);
        }
    }
    Ok(Pushforward { density: CellScalarField { grid: g, time: t, values }, exited })
}
