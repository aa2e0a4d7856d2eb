//! The cell fields `beta_k` and `tilde beta_k` on `]0, 4h[ x [0, 4h[^2`, `h = 2^-k`.

use super::blocks::{alpha_k, AlphaK};
use crate::error::{Error, Result};
use crate::geometry::{pow2, wrap, FieldMeta, Piece, Point, Schedule, Vec3, VelocityField, Y_PERIOD};

/// Regions of the cell pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Dashed,
    DashedBand,
    Black,
    BlackBand,
    White,
}

/// `beta_k`: the four-step rearrangement of the scale-`h` chessboard into
/// the scale-`2h` one. `mu` is the r-velocity on black regions (`-5`, or
/// `-1` for the tangent variants).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaK {
    pub k: u32,
    pub h: f64,
    pub mu: f64,
}

pub fn beta_k(k: u32) -> BetaK {
    beta_k_with(k, -5.0)
}

pub fn beta_k_with(k: u32, mu: f64) -> BetaK {
    assert!(k >= 3, "beta_k needs k >= 3");
    BetaK { k, h: pow2(-(k as i32)), mu }
}

#[inline]
fn within(x: f64, lo: f64, hi: f64) -> bool {
    x > lo && x < hi
}

impl BetaK {
    /// Cell period `4h`.
    #[inline]
    pub fn period(&self) -> f64 {
        4.0 * self.h
    }

    /// Branch and value at local `r` (clamped to `[0, 4h[`) and lateral
    /// coordinates already wrapped into `[0, 4h[`.
    pub fn classify(&self, r: f64, y1: f64, y2: f64) -> (Branch, Vec3) {
        let h = self.h;
        let mu = self.mu;
        let one = [1.0, 0.0, 0.0];
        let black = [mu, 0.0, 0.0];
        if r < h {
            let i = (y1 / h) as u32;
            let j = (y2 / h) as u32;
            return match (i % 2, j % 2) {
                (0, 0) => (Branch::Dashed, one),
                (1, 1) => (Branch::Black, black),
                _ => (Branch::White, [0.0; 3]),
            };
        }
        if r < 2.0 * h {
            let rows_d = (0.0..h).contains(&y2) || (2.0 * h..3.0 * h).contains(&y2);
            let rows_b = (h..2.0 * h).contains(&y2) || (3.0 * h..4.0 * h).contains(&y2);
            if (0.0..h).contains(&y1) && rows_d {
                return (Branch::Dashed, one);
            }
            if within(y1, 3.0 * h - r, 4.0 * h - r) && (within(y2, 0.0, h) || within(y2, 2.0 * h, 3.0 * h)) {
                return (Branch::DashedBand, [1.0, -1.0, 0.0]);
            }
            if (3.0 * h..4.0 * h).contains(&y1) && rows_b {
                return (Branch::Black, black);
            }
            if within(y1, r, r + h) && (within(y2, h, 2.0 * h) || within(y2, 3.0 * h, 4.0 * h)) {
                return (Branch::BlackBand, [mu, mu, 0.0]);
            }
            return (Branch::White, [0.0; 3]);
        }
        if r < 3.0 * h {
            if (0.0..2.0 * h).contains(&y1) && (0.0..h).contains(&y2) {
                return (Branch::Dashed, one);
            }
            if within(y1, 0.0, 2.0 * h) && within(y2, 4.0 * h - r, 5.0 * h - r) {
                return (Branch::DashedBand, [1.0, 0.0, -1.0]);
            }
            if (2.0 * h..4.0 * h).contains(&y1) && (3.0 * h..4.0 * h).contains(&y2) {
                return (Branch::Black, black);
            }
            if within(y1, 2.0 * h, 4.0 * h) && within(y2, r - h, r) {
                return (Branch::BlackBand, [mu, 0.0, mu]);
            }
            return (Branch::White, [0.0; 3]);
        }
        let lo1 = y1 < 2.0 * h;
        let lo2 = y2 < 2.0 * h;
        match (lo1, lo2) {
            (true, true) => (Branch::Dashed, one),
            (false, false) => (Branch::Black, black),
            _ => (Branch::White, [0.0; 3]),
        }
    }

    /// Value at local `r` and arbitrary lateral coordinates.
    #[inline]
    pub fn local(&self, r: f64, y1: f64, y2: f64) -> Vec3 {
        let p = self.period();
        self.classify(r.clamp(0.0, p * (1.0 - f64::EPSILON)), wrap(y1, p), wrap(y2, p)).1
    }

    /// Lateral translation of a dashed point from local `r` back to `r = h`
    /// (the end of the first step). `None` if the point is not dashed.
    pub fn dashed_pull_back_to_h(&self, r: f64, y1: f64, y2: f64) -> Option<[f64; 2]> {
        let h = self.h;
        let p = self.period();
        let (mut y1, mut y2) = (wrap(y1, p), wrap(y2, p));
        let mut r = r.clamp(h, p * (1.0 - f64::EPSILON));
        let (b, _) = self.classify(r, y1, y2);
        if !matches!(b, Branch::Dashed | Branch::DashedBand) {
            return None;
        }
        if r >= 3.0 * h {
            r = 3.0 * h;
        }
        if r >= 2.0 * h {
            if let (Branch::DashedBand, _) = self.classify(r, y1, y2) {
                y2 = wrap(y2 + (r - 2.0 * h), p);
            } else if r == 3.0 * h && y2 >= h {
                y2 = wrap(y2 + h, p);
            }
            r = 2.0 * h;
        }
        if r > h {
            let in_band = within(y1, 3.0 * h - r, 4.0 * h - r);
            let at_top = r == 2.0 * h && (h..2.0 * h).contains(&y1);
            if in_band || at_top {
                y1 = wrap(y1 + (r - h), p);
            }
        }
        Some([y1, y2])
    }
}

impl VelocityField for BetaK {
    fn eval(&self, _t: f64, x: Point) -> Vec3 {
        self.local(x[0], x[1], x[2])
    }
    fn meta(&self) -> FieldMeta {
        FieldMeta {
            linf_bound: (2.0 * self.mu * self.mu).sqrt().max(2f64.sqrt()),
            div_linf_bound: 0.0,
            finest_scale: self.h,
            is_measure_divergence: false,
        }
    }
    fn name(&self) -> String {
        format!("beta_{}(mu={})", self.k, self.mu)
    }
}

/// `tilde beta_k`: `beta_k` with the rotation schedule installed on the
/// dashed squares during the first step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TildeBetaK {
    pub beta: BetaK,
    pub alpha: AlphaK,
}

pub fn tilde_beta_k(k: u32) -> TildeBetaK {
    tilde_beta_k_with(k, -5.0)
}

pub fn tilde_beta_k_with(k: u32, mu: f64) -> TildeBetaK {
    TildeBetaK { beta: beta_k_with(k, mu), alpha: alpha_k(k) }
}

impl TildeBetaK {
    /// Lower-left corner of the dashed square containing the wrapped point.
    #[inline]
    pub fn dashed_corner(&self, y1: f64, y2: f64) -> Option<[f64; 2]> {
        let h = self.beta.h;
        let i = (y1 / h) as u32;
        let j = (y2 / h) as u32;
        (i % 2 == 0 && j % 2 == 0).then(|| [i as f64 * h, j as f64 * h])
    }

    /// Value and closed-form piece at local `r`; `y` is unwrapped so that
    /// rotation centers are reported in the caller's frame.
    pub fn local_piece(&self, r: f64, y1: f64, y2: f64, tag: u64) -> (Vec3, Piece) {
        let h = self.beta.h;
        let p = self.beta.period();
        if r >= h {
            let v = self.beta.local(r, y1, y2);
            return (v, Piece::constant(v));
        }
        let (w1, w2) = (wrap(y1, p), wrap(y2, p));
        let Some(corner) = self.dashed_corner(w1, w2) else {
            let v = self.beta.local(r.max(0.0), w1, w2);
            return (v, Piece::constant(v));
        };
        let yl = [w1 - corner[0], w2 - corner[1]];
        let layout = self.alpha.layout(r.max(0.0));
        match self.alpha.block_center(layout, yl) {
            Some(c) => {
                let a = self.alpha.block.velocity([yl[0] - c[0], yl[1] - c[1]]);
                let center = [y1 - yl[0] + c[0], y2 - yl[1] + c[1]];
                let id = tag
                    ^ (layout as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
                    ^ center[0].to_bits().rotate_left(17)
                    ^ center[1].to_bits().rotate_left(41);
                (
                    [1.0, a[0], a[1]],
                    Piece::Rotation { id, vr: 1.0, center, lambda: self.alpha.block.lambda },
                )
            }
            None => {
                let v = [1.0, 0.0, 0.0];
                (v, Piece::constant(v))
            }
        }
    }

    /// Pull a dashed point at local `r` back to `r = 0`; `None` off the dashed set.
    pub fn dashed_pull_back(&self, r: f64, y1: f64, y2: f64) -> Option<[f64; 2]> {
        let h = self.beta.h;
        let p = self.beta.period();
        let (mut y1, mut y2) = (wrap(y1, p), wrap(y2, p));
        let mut r = r.max(0.0);
        if r >= h {
            let y = self.beta.dashed_pull_back_to_h(r, y1, y2)?;
            y1 = y[0];
            y2 = y[1];
            r = h;
        }
        let corner = self.dashed_corner(y1, y2)?;
        let yl = [y1 - corner[0], y2 - corner[1]];
        let z = self.alpha.pull_back(r, yl);
        Some([z[0] + corner[0], z[1] + corner[1]])
    }
}

impl VelocityField for TildeBetaK {
    fn eval(&self, _t: f64, x: Point) -> Vec3 {
        self.local_piece(x[0], x[1], x[2], 0).0
    }
    fn piece(&self, _t: f64, x: Point) -> Piece {
        self.local_piece(x[0], x[1], x[2], 0).1
    }
    fn meta(&self) -> FieldMeta {
        FieldMeta {
            linf_bound: self.beta.meta().linf_bound.max(5f64.sqrt()),
            div_linf_bound: 0.0,
            finest_scale: self.alpha.q(),
            is_measure_divergence: false,
        }
    }
    fn name(&self) -> String {
        format!("tilde_beta_{}(mu={})", self.beta.k, self.beta.mu)
    }
}

/// Lateral periodic extension of a field with the given period.
#[derive(Clone)]
pub struct Periodic<F> {
    pub inner: F,
    pub period: f64,
}

/// Wrap the lateral coordinates of `field` modulo `period`.
pub fn periodic_extend<F: VelocityField>(field: F, period: f64) -> Result<Periodic<F>> {
    let q = Y_PERIOD / period;
    if !(period > 0.0) || q != q.round() {
        return Err(Error::Config(format!(
            "period {period} does not divide the lateral period {Y_PERIOD}"
        )));
    }
    Ok(Periodic { inner: field, period })
}

impl<F: VelocityField> VelocityField for Periodic<F> {
    fn eval(&self, t: f64, x: Point) -> Vec3 {
        self.inner.eval(t, [x[0], wrap(x[1], self.period), wrap(x[2], self.period)])
    }
    fn meta(&self) -> FieldMeta {
        self.inner.meta()
    }
    fn schedule(&self) -> Schedule {
        self.inner.schedule()
    }
    fn piece(&self, t: f64, x: Point) -> Piece {
        let (w1, w2) = (wrap(x[1], self.period), wrap(x[2], self.period));
        match self.inner.piece(t, [x[0], w1, w2]) {
            Piece::Rotation { id, vr, center, lambda } => Piece::Rotation {
                id,
                vr,
                center: [center[0] + x[1] - w1, center[1] + x[2] - w2],
                lambda,
            },
            p => p,
        }
    }
    fn name(&self) -> String {
        format!("periodic({}, {})", self.inner.name(), self.period)
    }
}
