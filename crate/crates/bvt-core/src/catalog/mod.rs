//! Exact vector fields and explicit solutions of the counterexample catalog.

mod assemble;
mod beta;
mod blocks;
mod mixing;

pub use assemble::{
    assemble_field, chessboard_value, dyadic_schedule, exact_solution, AssembledField, ConstructionVariant,
    DyadicSchedule, ExactSolution, VariantTag,
};
pub use beta::{
    beta_k, beta_k_with, periodic_extend, tilde_beta_k, tilde_beta_k_with, BetaK, Branch, Periodic, TildeBetaK,
};
pub use blocks::{a_unscaled, alpha_k, depauw_block, square_flow, AlphaK, BlockLayout, DepauwBlock};
pub use mixing::{checker, ShearMixer, ShearStage};

use serde::Serialize;

use crate::geometry::pow2;

/// A `+-1` pattern on the 4x4 cells of side `q = 2^(-2-k)` tiling `Q_k`.
/// `cells[i][j]` is the value on the cell with `y1`-index `i`, `y2`-index `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChessboardState {
    pub k: u32,
    pub r: f64,
    pub cells: [[i8; 4]; 4],
}

impl ChessboardState {
    #[inline]
    pub fn q(&self) -> f64 {
        pow2(-2 - self.k as i32)
    }

    /// Value at `y` local to `Q_k`.
    pub fn value(&self, y1: f64, y2: f64) -> f64 {
        let q = self.q();
        let i = ((y1 / q).floor() as i64).clamp(0, 3) as usize;
        let j = ((y2 / q).floor() as i64).clamp(0, 3) as usize;
        self.cells[i][j] as f64
    }

    pub fn mean(&self) -> f64 {
        self.cells.iter().flatten().map(|&v| v as f64).sum::<f64>() / 16.0
    }

    /// `int z^2` over `Q_k`.
    pub fn square_integral(&self) -> f64 {
        let q = self.q();
        self.cells.iter().flatten().map(|&v| (v as f64).powi(2)).sum::<f64>() * q * q
    }

    /// Cell-center samples on the `2^level` raster of `Q_k` (`level >= k + 2`),
    /// indexed `[y1][y2]`.
    pub fn rasterize(&self, level: u32) -> Vec<Vec<f64>> {
        assert!(level >= self.k + 2, "raster coarser than the chessboard");
        let h = pow2(-(level as i32));
        let n = (4.0 * self.q() / h) as usize;
        (0..n)
            .map(|i| (0..n).map(|j| self.value((i as f64 + 0.5) * h, (j as f64 + 0.5) * h)).collect())
            .collect()
    }
}

/// The initial chessboard `z_k(0, .)`: `+1` on cells with even index sum.
pub fn chessboard_datum(k: u32) -> ChessboardState {
    assert!(k >= 3, "chessboard scale k must be at least 3");
    let mut cells = [[0i8; 4]; 4];
    for (i, row) in cells.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if (i + j) % 2 == 0 { 1 } else { -1 };
        }
    }
    ChessboardState { k, r: 0.0, cells }
}
