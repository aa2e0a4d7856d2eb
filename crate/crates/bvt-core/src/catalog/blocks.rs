//! Square rotation blocks and the scale-`k` rotation schedule.

use crate::geometry::pow2;

/// Unscaled block field: `(0, -2 y1)` where `|y1| > |y2|`, `(2 y2, 0)` otherwise.
#[inline]
pub fn a_unscaled(y: [f64; 2]) -> [f64; 2] {
    if y[0].abs() > y[1].abs() {
        [0.0, -2.0 * y[0]]
    } else {
        [2.0 * y[1], 0.0]
    }
}

/// Rotation block of scale `k`: half-width `2^(-2-k)`, amplitude `2^(2+k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepauwBlock {
    pub k: u32,
    pub half_width: f64,
    pub lambda: f64,
}

pub fn depauw_block(k: u32) -> DepauwBlock {
    assert!(k >= 3, "block scale k must be at least 3");
    DepauwBlock {
        k,
        half_width: pow2(-2 - k as i32),
        lambda: pow2(2 + k as i32),
    }
}

impl DepauwBlock {
    /// Scaled velocity at `y` relative to the block center; zero outside the square.
    pub fn velocity(&self, y: [f64; 2]) -> [f64; 2] {
        if y[0].abs().max(y[1].abs()) >= self.half_width {
            return [0.0, 0.0];
        }
        let a = a_unscaled(y);
        [self.lambda * a[0], self.lambda * a[1]]
    }

    /// `lambda * 2 * half_width`, independent of `k`.
    pub fn max_speed(&self) -> f64 {
        2.0 * self.lambda * self.half_width
    }

    /// Duration of one quarter turn.
    pub fn quarter_period(&self) -> f64 {
        1.0 / self.lambda
    }
}

/// Clockwise arc-length coordinate on the square of half-size `rho`,
/// starting at the corner `(rho, rho)`.
fn arc(y: [f64; 2], rho: f64) -> f64 {
    let [a, b] = y;
    if a >= b.abs() {
        rho - b
    } else if -b >= a.abs() {
        3.0 * rho - a
    } else if -a >= b.abs() {
        5.0 * rho + b
    } else {
        7.0 * rho + a
    }
}

fn unarc(s: f64, rho: f64) -> [f64; 2] {
    let side = (s / (2.0 * rho)).floor().clamp(0.0, 3.0);
    let u = s - side * 2.0 * rho;
    match side as u8 {
        0 => [rho, rho - u],
        1 => [rho - u, -rho],
        2 => [-rho, -rho + u],
        _ => [-rho + u, rho],
    }
}

/// Flow of `lambda * a` for time `dt` (negative runs backwards): the point
/// moves along its square level set at speed `2 lambda rho`.
pub fn square_flow(y: [f64; 2], lambda: f64, dt: f64) -> [f64; 2] {
    let rho = y[0].abs().max(y[1].abs());
    if rho == 0.0 || dt == 0.0 {
        return y;
    }
    let per = 8.0 * rho;
    let mut s = arc(y, rho) + 2.0 * lambda * rho * dt;
    s -= per * (s / per).floor();
    if s >= per {
        s -= per;
    }
    unarc(s, rho)
}

/// Layout of active blocks in the scale-`k` schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockLayout {
    Central,
    Four,
    Idle,
}

/// The rotation schedule of scale `k` on `]0, 2^-k[ x Q_k`, `Q_k = [0, 2^-k[^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaK {
    pub k: u32,
    pub block: DepauwBlock,
}

pub fn alpha_k(k: u32) -> AlphaK {
    AlphaK { k, block: depauw_block(k) }
}

impl AlphaK {
    /// Block half-width `q = 2^(-2-k)`; `Q_k` has side `4q`.
    #[inline]
    pub fn q(&self) -> f64 {
        self.block.half_width
    }

    pub fn layout(&self, r: f64) -> BlockLayout {
        let q = self.q();
        if (0.0..q).contains(&r) || (3.0 * q..4.0 * q).contains(&r) {
            BlockLayout::Central
        } else if (q..3.0 * q).contains(&r) {
            BlockLayout::Four
        } else {
            BlockLayout::Idle
        }
    }

    /// Center of the block of `layout` containing `y` (local to `Q_k`), if any.
    pub fn block_center(&self, layout: BlockLayout, y: [f64; 2]) -> Option<[f64; 2]> {
        let q = self.q();
        let c = match layout {
            BlockLayout::Central => [2.0 * q, 2.0 * q],
            BlockLayout::Four => [
                if y[0] < 2.0 * q { q } else { 3.0 * q },
                if y[1] < 2.0 * q { q } else { 3.0 * q },
            ],
            BlockLayout::Idle => return None,
        };
        let inside = (y[0] - c[0]).abs() < q && (y[1] - c[1]).abs() < q;
        inside.then_some(c)
    }

    /// `alpha_k(r, y)` with `y` local to `Q_k`.
    pub fn eval(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        match self.block_center(self.layout(r), y) {
            Some(c) => self.block.velocity([y[0] - c[0], y[1] - c[1]]),
            None => [0.0, 0.0],
        }
    }

    /// Pull `y` (local to `Q_k`) at time `r` back to `r = 0`.
    pub fn pull_back(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        let q = self.q();
        let lam = self.block.lambda;
        let mut y = y;
        let mut r = r.clamp(0.0, 4.0 * q);
        let rotate = |layout: BlockLayout, dt: f64, y: &mut [f64; 2]| {
            if let Some(c) = self.block_center(layout, *y) {
                let z = square_flow([y[0] - c[0], y[1] - c[1]], lam, -dt);
                *y = [z[0] + c[0], z[1] + c[1]];
            }
        };
        if r > 3.0 * q {
            rotate(BlockLayout::Central, r - 3.0 * q, &mut y);
            r = 3.0 * q;
        }
        if r > q {
            rotate(BlockLayout::Four, r - q, &mut y);
            r = q;
        }
        rotate(BlockLayout::Central, r, &mut y);
        y
    }
}
