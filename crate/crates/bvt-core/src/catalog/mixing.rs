//! Bounded divergence-free lateral field `c(r, y)` whose transport turns the
//! scale-`2^-m / 4` chessboard at `r = 2^-m` into a (signed) scale-`2^-m / 2`
//! chessboard at `r = 2^(1-m)`, for every `m = 1..=levels`.
//!
//! On `J_m = [L, 2L[`, `L = 2^-m`, two shear stages act:
//! for `r` in `[L, 3L/2[` the horizontal strips `y2 mod L in [L/4, 3L/4[` move in
//! `y1` with speed `1/2`; for `r` in `[3L/2, 2L[` the vertical strips
//! `y1 mod L in [L/4, 3L/4[` move in `y2` with speed `1`.
//! Below `2^-levels` the field vanishes and the solution is frozen.

use crate::geometry::{pow2, wrap};

/// `(-1)^(floor(y1/c) + floor(y2/c))`.
#[inline]
pub fn checker(c: f64, y1: f64, y2: f64) -> f64 {
    let s = (y1 / c).floor() as i64 + (y2 / c).floor() as i64;
    if s.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn in_strip(y: f64, l: f64) -> bool {
    let w = wrap(y, l);
    w >= 0.25 * l && w < 0.75 * l
}

/// Stage of the mixing schedule at a given `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShearStage {
    /// `r` below the truncation depth.
    Frozen,
    /// First half of `J_m`.
    A { m: u32, l: f64 },
    /// Second half of `J_m`.
    B { m: u32, l: f64 },
    /// `r >= 1`.
    Above,
}

/// The mixing field and its chessboard solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearMixer {
    pub levels: u32,
    /// Sign picked up by one level: `checker(L/4)` at `r = L` becomes
    /// `sigma * checker(L/2)` at `r = 2L`.
    pub sigma: f64,
}

/// Sign of the 4x4 unit-cell simulation of one level.
fn level_sign() -> f64 {
    let mut s = [[0i8; 4]; 4];
    for (i, row) in s.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if (i + j) % 2 == 0 { 1 } else { -1 };
        }
    }
    // Stage A: rows j in {1, 2} (in y2) move one unit in +y1.
    let mut a = s;
    for (i, row) in a.iter_mut().enumerate() {
        for j in 1..3 {
            row[j] = s[(i + 3) % 4][j];
        }
    }
    // Stage B: columns i in {1, 2} (in y1) move two units in +y2.
    let mut b = a;
    for i in 1..3 {
        for j in 0..4 {
            b[i][j] = a[i][(j + 2) % 4];
        }
    }
    let coarse = |i: usize, j: usize| if (i / 2 + j / 2) % 2 == 0 { 1i8 } else { -1 };
    let same = (0..16).all(|c| b[c / 4][c % 4] == coarse(c / 4, c % 4));
    let flipped = (0..16).all(|c| b[c / 4][c % 4] == -coarse(c / 4, c % 4));
    assert!(same || flipped, "shear stages do not coarsen the chessboard");
    if same {
        1.0
    } else {
        -1.0
    }
}

impl ShearMixer {
    pub fn new(levels: u32) -> Self {
        assert!(levels >= 1);
        Self { levels, sigma: level_sign() }
    }

    pub fn stage(&self, r: f64) -> ShearStage {
        if r >= 1.0 {
            return ShearStage::Above;
        }
        if r < pow2(-(self.levels as i32)) {
            return ShearStage::Frozen;
        }
        let mut m = 1u32;
        let mut l = 0.5;
        while r < l {
            m += 1;
            l *= 0.5;
        }
        if r < 1.5 * l {
            ShearStage::A { m, l }
        } else {
            ShearStage::B { m, l }
        }
    }

    /// Lateral velocity `c(r, y)`; `|c| <= 1`.
    pub fn velocity(&self, r: f64, y1: f64, y2: f64) -> [f64; 2] {
        match self.stage(r) {
            ShearStage::A { l, .. } if in_strip(y2, l) => [0.5, 0.0],
            ShearStage::B { l, .. } if in_strip(y1, l) => [0.0, 1.0],
            _ => [0.0, 0.0],
        }
    }

    /// Sign `eps_m = sigma^m` of the chessboard at the bottom of `J_m`.
    pub fn level_sign(&self, m: u32) -> f64 {
        if m % 2 == 0 {
            1.0
        } else {
            self.sigma
        }
    }

    /// Solution `v(r, y)`: the transported chessboard, `+-1` everywhere.
    pub fn solution(&self, r: f64, y1: f64, y2: f64) -> f64 {
        let (mut y1, mut y2) = (y1, y2);
        match self.stage(r) {
            ShearStage::Above => checker(0.25, y1, y2),
            ShearStage::Frozen => {
                let m = self.levels;
                self.level_sign(m) * checker(0.25 * pow2(-(m as i32)), y1, y2)
            }
            ShearStage::A { m, l } => {
                if in_strip(y2, l) {
                    y1 -= 0.5 * (r - l);
                }
                self.level_sign(m) * checker(0.25 * l, y1, y2)
            }
            ShearStage::B { m, l } => {
                if in_strip(y1, l) {
                    y2 -= r - 1.5 * l;
                }
                if in_strip(y2, l) {
                    y1 -= 0.25 * l;
                }
                self.level_sign(m) * checker(0.25 * l, y1, y2)
            }
        }
    }

    /// Smallest strip width.
    pub fn finest_scale(&self) -> f64 {
        0.25 * pow2(-(self.levels as i32))
    }
}
