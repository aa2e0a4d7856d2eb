//! Assembly of the dyadic cell fields into fields and solutions on `]0,1[ x Omega`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::beta::{tilde_beta_k_with, Branch, TildeBetaK};
use super::mixing::ShearMixer;
use crate::error::{Error, Result};
use crate::geometry::{pow2, wrap, FieldMeta, Piece, Point, Schedule, Vec3, VelocityField};
use crate::solution::ScalarSolution;

/// Which construction to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum VariantTag {
    /// Inflow everywhere on the boundary, nontrivial solution from zero data.
    InwardDepauw,
    /// Outflow trace `+1`, nontrivial solution with no boundary datum.
    Outward,
    /// Outward field with rotation blocks; `Tr(bu) = 0` for its solution.
    Corollary,
    /// `Outward` with black velocity `-1` (`Tr b = 0`).
    TangentOutward,
    /// `Corollary` with black velocity `-1`.
    TangentCorollary,
}

impl VariantTag {
    pub const ALL: [VariantTag; 5] = [
        VariantTag::InwardDepauw,
        VariantTag::Outward,
        VariantTag::Corollary,
        VariantTag::TangentOutward,
        VariantTag::TangentCorollary,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VariantTag::InwardDepauw => "inward_depauw",
            VariantTag::Outward => "outward",
            VariantTag::Corollary => "corollary",
            VariantTag::TangentOutward => "tangent_outward",
            VariantTag::TangentCorollary => "tangent_corollary",
        }
    }

    /// r-velocity of the black regions.
    pub fn mu(&self) -> f64 {
        match self {
            VariantTag::TangentOutward | VariantTag::TangentCorollary => -1.0,
            _ => -5.0,
        }
    }

    pub fn has_blocks(&self) -> bool {
        matches!(self, VariantTag::Corollary | VariantTag::TangentCorollary)
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        VariantTag::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown variant '{s}'")))
    }
}

/// A construction and its truncation depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConstructionVariant {
    pub tag: VariantTag,
    pub k_max: u32,
}

impl ConstructionVariant {
    pub fn new(tag: VariantTag, k_max: u32) -> Result<Self> {
        if k_max < 4 {
            return Err(Error::Config(format!("K_max must be at least 4, got {k_max}")));
        }
        if k_max > 30 {
            return Err(Error::Config(format!("K_max {k_max} is beyond double precision dyadics")));
        }
        Ok(Self { tag, k_max })
    }
}

/// The intervals `I_k = ]2^(2-k), 2^(3-k)[`, `k = 3..=K_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadicSchedule {
    pub intervals: Vec<(u32, f64, f64)>,
}

pub fn dyadic_schedule(k_max: u32) -> DyadicSchedule {
    DyadicSchedule {
        intervals: (3..=k_max)
            .map(|k| (k, pow2(2 - k as i32), pow2(3 - k as i32)))
            .collect(),
    }
}

impl DyadicSchedule {
    pub fn k_max(&self) -> u32 {
        self.intervals.last().map_or(3, |i| i.0)
    }

    /// Lower end of the finest interval.
    pub fn floor(&self) -> f64 {
        self.intervals.last().map_or(0.5, |i| i.1)
    }

    /// `(k, left end)` of the interval containing `s`; values `>= 1` belong
    /// to `I_3`, values below the finest interval to none.
    pub fn locate(&self, s: f64) -> Option<(u32, f64)> {
        if s >= 0.5 {
            return Some((3, 0.5));
        }
        if s < self.floor() {
            return None;
        }
        let k = (2.0 - s.log2().floor()) as u32;
        let left = pow2(2 - k as i32);
        if s < left {
            Some((k + 1, 0.5 * left))
        } else if s >= 2.0 * left {
            Some((k - 1, 2.0 * left))
        } else {
            Some((k, left))
        }
    }
}

/// A catalog field on `]0,1[ x Omega`.
#[derive(Clone, Debug)]
pub struct AssembledField {
    pub variant: ConstructionVariant,
    pub schedule: DyadicSchedule,
    cells: Vec<TildeBetaK>,
    mixer: ShearMixer,
}

pub fn assemble_field(variant: ConstructionVariant) -> AssembledField {
    let mu = variant.tag.mu();
    AssembledField {
        variant,
        schedule: dyadic_schedule(variant.k_max),
        cells: (3..=variant.k_max).map(|k| tilde_beta_k_with(k, mu)).collect(),
        mixer: ShearMixer::new(variant.k_max - 2),
    }
}

impl AssembledField {
    #[inline]
    fn cell(&self, k: u32) -> &TildeBetaK {
        &self.cells[(k - 3) as usize]
    }

    pub fn mixer(&self) -> &ShearMixer {
        &self.mixer
    }

    /// Value and piece of the `r < t` branch.
    pub fn minus_branch(&self, x: Point) -> (Vec3, Piece) {
        let [r, y1, y2] = x;
        if self.variant.tag == VariantTag::InwardDepauw {
            let c = self.mixer.velocity(r, y1, y2);
            let v = [1.0, c[0], c[1]];
            return (v, Piece::constant(v));
        }
        match self.schedule.locate(r) {
            Some((k, left)) => {
                let cell = self.cell(k);
                if self.variant.tag.has_blocks() {
                    cell.local_piece(r - left, y1, y2, k as u64)
                } else {
                    let v = cell.beta.local(r - left, y1, y2);
                    (v, Piece::constant(v))
                }
            }
            None => {
                let v = self.cell(self.variant.k_max).beta.local(0.0, y1, y2);
                (v, Piece::constant(v))
            }
        }
    }

    /// Branch label of the `r < t` branch for the outward-type variants.
    pub fn minus_region(&self, x: Point) -> Branch {
        let [r, y1, y2] = x;
        let (cell, rl) = match self.schedule.locate(r) {
            Some((k, left)) => (self.cell(k), r - left),
            None => (self.cell(self.variant.k_max), 0.0),
        };
        let p = cell.beta.period();
        cell.beta.classify(rl.clamp(0.0, p * (1.0 - f64::EPSILON)), wrap(y1, p), wrap(y2, p)).0
    }

    /// Value of the `r > t` branch.
    pub fn plus_branch(&self, t: f64, x: Point) -> Vec3 {
        if self.variant.tag == VariantTag::InwardDepauw {
            return [1.0, 0.0, 0.0];
        }
        let br = match self.schedule.locate(t) {
            Some((k, left)) => self.cell(k).beta.local(t - left, x[1], x[2])[0],
            None => self.cell(self.variant.k_max).beta.local(0.0, x[1], x[2])[0],
        };
        [br, 0.0, 0.0]
    }

    /// Weak-star limit of the boundary trace (constant in `(t, y)`).
    pub fn trace_limit(&self) -> f64 {
        match self.variant.tag {
            VariantTag::InwardDepauw => -1.0,
            tag => -(1.0 + tag.mu()) / 4.0,
        }
    }

    /// Finest cell side of the r-schedule, `2^-K_max`.
    pub fn finest_cell(&self) -> f64 {
        pow2(-(self.variant.k_max as i32))
    }
}

impl VelocityField for AssembledField {
    fn eval(&self, t: f64, x: Point) -> Vec3 {
        if x[0] <= t {
            self.minus_branch(x).0
        } else {
            self.plus_branch(t, x)
        }
    }

    fn piece(&self, t: f64, x: Point) -> Piece {
        if x[0] <= t {
            self.minus_branch(x).1
        } else {
            Piece::constant(self.plus_branch(t, x))
        }
    }

    fn meta(&self) -> FieldMeta {
        let tag = self.variant.tag;
        let (linf, finest) = match tag {
            VariantTag::InwardDepauw => (2f64.sqrt(), self.mixer.finest_scale()),
            _ => {
                let mu = tag.mu();
                let b = (2.0 * mu * mu).sqrt().max(2f64.sqrt());
                let b = if tag.has_blocks() { b.max(5f64.sqrt()) } else { b };
                let f = if tag.has_blocks() { 0.25 * self.finest_cell() } else { self.finest_cell() };
                (b, f)
            }
        };
        FieldMeta { linf_bound: linf, div_linf_bound: 0.0, finest_scale: finest, is_measure_divergence: false }
    }

    fn schedule(&self) -> Schedule {
        let mut breakpoints = Vec::new();
        if self.variant.tag != VariantTag::InwardDepauw {
            breakpoints.push(self.schedule.floor());
            for &(_, left, right) in &self.schedule.intervals {
                let h = 0.25 * (right - left);
                breakpoints.extend((1..=4).map(|j| left + j as f64 * h));
            }
            breakpoints.sort_by(f64::total_cmp);
            breakpoints.dedup();
        }
        Schedule { breakpoints, continuous: true }
    }

    fn boundary_trace(&self, _t: f64, _y1: f64, _y2: f64) -> f64 {
        self.trace_limit()
    }

    fn name(&self) -> String {
        format!("{}(K_max={})", self.variant.tag, self.variant.k_max)
    }
}

/// Exact nontrivial solution of a catalog construction.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub field: AssembledField,
}

pub fn exact_solution(variant: ConstructionVariant) -> ExactSolution {
    ExactSolution { field: assemble_field(variant) }
}

impl ExactSolution {
    fn corollary_value(&self, x: Point) -> f64 {
        let f = &self.field;
        let [r, y1, y2] = x;
        let (cell, rl) = match f.schedule.locate(r) {
            Some((k, left)) => (f.cell(k), r - left),
            None => (f.cell(f.variant.k_max), 0.0),
        };
        match cell.dashed_pull_back(rl, y1, y2) {
            Some(y0) => {
                let h = cell.beta.h;
                let corner = [(y0[0] / h).floor() * h, (y0[1] / h).floor() * h];
                chessboard_value(cell.alpha.q(), y0[0] - corner[0], y0[1] - corner[1])
            }
            None => 0.0,
        }
    }
}

/// Value of the initial chessboard of scale `q` at `y` local to `Q_k`.
#[inline]
pub fn chessboard_value(q: f64, y1: f64, y2: f64) -> f64 {
    super::mixing::checker(q, y1, y2)
}

impl ScalarSolution for ExactSolution {
    fn eval(&self, t: f64, x: Point) -> f64 {
        if x[0] <= 0.0 || x[0] > t {
            return 0.0;
        }
        match self.field.variant.tag {
            VariantTag::InwardDepauw => self.field.mixer.solution(x[0], x[1], x[2]),
            VariantTag::Outward | VariantTag::TangentOutward => {
                match self.field.minus_region(x) {
                    Branch::Dashed | Branch::DashedBand => 1.0,
                    _ => 0.0,
                }
            }
            VariantTag::Corollary | VariantTag::TangentCorollary => self.corollary_value(x),
        }
    }

    fn name(&self) -> String {
        format!("exact[{}]", self.field.name())
    }
}
