//! Checks, suites, reports and raster output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{
    assemble_field, beta_k, beta_k_with, exact_solution, tilde_beta_k, ConstructionVariant, VariantTag,
};
use crate::error::{Error, Result};
use crate::fv::{
    calibrate_constant, cone_energy, cone_energy_check, l1_difference, l1_error, l2_balance_report, residual_battery, shear_scenario,
    solve_ibvp, weak_residual, zero_data_scenario, BatteryKind, ConeProfile, ConeStatus, ConeWeight, WeakData,
    WITNESS_THRESHOLD,
};
use crate::geometry::{
    discrete_divergence, make_grid, pow2, sample_face_fluxes, CellScalarField, DomainBox, Point, VelocityField,
    Y_PERIOD,
};
use crate::quadrature::{composite, tensor3, Rule};
use crate::solution::{FnSolution, ScalarSolution, ZeroSolution};
use crate::traces::{
    one_sided_trace, profile_battery, renormalization_trace_check, strong_l1_check, weak_star_check, ProfileGrid,
    SourceTag, TraceProfile, TraceSide, TraceSource,
};
use crate::transport::{evolve_chessboard, marker_chessboard, quarter_turn, quarter_turn_ode};

/// Outcome of one check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    /// An expected non-uniqueness witness.
    #[serde(rename = "WITNESS")]
    Witness,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Witness => "WITNESS",
        }
    }

    pub fn ok(&self) -> bool {
        !matches!(self, Status::Fail)
    }

    fn from_bool(b: bool) -> Self {
        if b {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// One line of a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub status: Status,
    pub runtime_s: f64,
    pub detail: String,
}

impl CheckRecord {
    pub fn line(&self) -> String {
        format!(
            "{:<7} {:<32} measured {:.4e} bound {:.4e} ({:.1} s) {}",
            self.status.as_str(),
            self.name,
            self.measured,
            self.bound,
            self.runtime_s,
            self.detail
        )
    }
}

/// Result of a suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub records: Vec<CheckRecord>,
    pub verdict: Status,
}

impl Report {
    pub fn new(suite: &str, records: Vec<CheckRecord>) -> Self {
        let verdict = Status::from_bool(records.iter().all(|r| r.status.ok()));
        Self { suite: suite.into(), records, verdict }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!("suite {}: {}\n", self.suite, self.verdict.as_str());
        for r in &self.records {
            s.push_str("  ");
            s.push_str(&r.line());
            s.push('\n');
        }
        s
    }
}

/// Measured value, bound, status and a free-form detail string.
pub type Outcome = (f64, f64, Status, String);

/// Run `f` and time it; errors become failed records.
pub fn timed(name: &str, f: impl FnOnce() -> Result<Outcome>) -> CheckRecord {
    let t0 = Instant::now();
    let res = f();
    let runtime_s = t0.elapsed().as_secs_f64();
    match res {
        Ok((measured, bound, status, detail)) => {
            CheckRecord { name: name.into(), measured, bound, status, runtime_s, detail }
        }
        Err(e) => CheckRecord {
            name: name.into(),
            measured: f64::NAN,
            bound: f64::NAN,
            status: Status::Fail,
            runtime_s,
            detail: e.to_string(),
        },
    }
}

fn max_div(field: &dyn VelocityField, level: u32, slab: (f64, f64)) -> Result<f64> {
    let grid = make_grid(DomainBox::standard(), level)?;
    let flux = sample_face_fluxes(field, &grid, slab)?;
    Ok(discrete_divergence(&flux, &grid).max_abs())
}

/// Largest discrete divergence of `beta_k`, `tilde beta_k` (`k` in `ks`) and
/// of every assembled variant with `K_max = k` (`k >= 4`) on the grid of level
/// `k + 2`.
pub fn check_divergence(ks: std::ops::RangeInclusive<u32>) -> CheckRecord {
    timed("divergence-free exactness", || {
        let mut worst: f64 = 0.0;
        let mut n = 0;
        for k in ks {
            let level = k + 2;
            worst = worst.max(max_div(&beta_k(k), level, (0.0, 1.0))?);
            worst = worst.max(max_div(&tilde_beta_k(k), level, (0.0, 1.0))?);
            n += 2;
            if k >= 4 {
                let h = pow2(-(level as i32));
                for tag in VariantTag::ALL {
                    let f = assemble_field(ConstructionVariant::new(tag, k)?);
                    let tc = 0.75 + h;
                    worst = worst.max(max_div(&f, level, (tc - 0.25 * h, tc + 0.25 * h))?);
                    n += 1;
                }
            }
        }
        Ok((worst, 1e-12, Status::from_bool(worst <= 1e-12), format!("{n} fields")))
    })
}

/// Lateral side of the profile base used for weak-star checks.
pub const PROFILE_BASE: f64 = 0.125;

/// Profile grid on `]1/2, 1[ x [0, 1/8]^2` resolving cells of side `2^-k_max`.
pub fn profile_grid(k_max: u32) -> ProfileGrid {
    let ny = (PROFILE_BASE / pow2(-(k_max as i32) - 2)).round() as usize;
    ProfileGrid::new(0.5, 1.0, 4, PROFILE_BASE, ny)
}

/// Profiles of `tag` on the planes `r_k = 2^(2-k)`, `k = 3..=k_max`, from
/// the side `r > r_k`, each with its scale `r_k`.
pub fn dyadic_profiles(
    src: &TraceSource,
    tag: SourceTag,
    k_max: u32,
    grid: ProfileGrid,
) -> Result<Vec<(f64, TraceProfile)>> {
    (3..=k_max)
        .map(|k| {
            let r = pow2(2 - k as i32);
            one_sided_trace(src, tag, r, TraceSide::Minus, grid).map(|p| (r, p))
        })
        .collect()
}

/// Weak-star constant in `|error| <= C Lip(phi) 2^(2-k)`.
pub const WEAK_STAR_C: f64 = 4.0;

fn weak_star_outcome(
    src: &TraceSource,
    tag: SourceTag,
    k_max: u32,
    limit_value: f64,
) -> Result<(crate::traces::WeakStarReport, Vec<(f64, TraceProfile)>)> {
    let grid = profile_grid(k_max);
    let profiles = dyadic_profiles(src, tag, k_max, grid)?;
    let limit = TraceProfile::constant(grid, 0.0, tag, limit_value);
    let tests = profile_battery(grid.t_lo, grid.t_hi, grid.d_len);
    Ok((weak_star_check(&profiles, &limit, &tests, WEAK_STAR_C), profiles))
}

/// Boundary trace of `b` for the outward (`+1`) or inward (`-1`) variant.
pub fn check_boundary_trace(tag: VariantTag, k_max: u32) -> CheckRecord {
    let expected = match tag {
        VariantTag::InwardDepauw => -1.0,
        _ => 1.0,
    };
    timed(&format!("boundary trace of b ({tag})"), || {
        let field = assemble_field(ConstructionVariant::new(tag, k_max)?);
        let src = TraceSource::field(&field);
        let (rep, _) = weak_star_outcome(&src, SourceTag::B, k_max, expected)?;
        let detail = format!(
            "limit {expected:+}, rate {}",
            rep.rate.map_or("exact".into(), |r| format!("{r:.2}"))
        );
        Ok((rep.max_ratio, 1.0, Status::from_bool(rep.pass), detail))
    })
}

/// Relative residual statistics of a solution on a battery.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatteryStats {
    /// `max |R| / ||phi||_{C^1}`.
    pub max_normalized: f64,
    /// `max |R| / int int |u| |d_t phi + b . grad phi|`.
    pub max_relative: f64,
    pub tests: usize,
}

/// Residuals of `solution` over a battery.
pub fn battery_stats(
    solution: &dyn ScalarSolution,
    field: &dyn VelocityField,
    kind: BatteryKind,
    data: WeakData,
    q: f64,
) -> Result<BatteryStats> {
    let tests = residual_battery(kind);
    let mut s = BatteryStats { max_normalized: 0.0, max_relative: 0.0, tests: tests.len() };
    for t in &tests {
        let r = weak_residual(solution, field, t, data, DomainBox::standard(), q)?;
        s.max_normalized = s.max_normalized.max(r.value.abs() / r.c1_norm);
        s.max_relative = s.max_relative.max(r.relative());
    }
    Ok(s)
}

/// Residual tolerance relative to `||phi||_{C^1}`.
pub const RESIDUAL_TOL: f64 = 1e-3;
/// Quadrature cell of the residual checks.
pub const RESIDUAL_Q: f64 = 1.0 / 512.0;

/// Average of `u` over the period cell `[left, left + 4h] x [a, a + 4h] x [b, b + 4h]`.
fn cell_average(u: &dyn ScalarSolution, t: f64, lo: Point, side: f64, n: usize) -> f64 {
    let q = side / n as f64;
    let axes = [
        composite(lo[0], lo[0] + side, q, lo[0], Rule::Shifted(0.5 + 1.0 / 64.0)),
        composite(lo[1], lo[1] + side, q, lo[1], Rule::Shifted(0.5 + 1.0 / 128.0)),
        composite(lo[2], lo[2] + side, q, lo[2], Rule::Shifted(0.5 + 1.0 / 256.0)),
    ];
    tensor3(&axes, |p| u.eval(t, [p[0], p[1], p[2]])) / (side * side * side)
}

/// Two solutions (zero and the dashed indicator) of the outward problem with
/// zero data, and the dashed-area fraction of the nontrivial one.
pub fn check_outward_nonuniqueness(k_max: u32, q: f64, tol: f64) -> CheckRecord {
    timed("outward non-uniqueness", || {
        let v = ConstructionVariant::new(VariantTag::Outward, k_max)?;
        let field = assemble_field(v);
        let u = exact_solution(v);
        let zero = battery_stats(&ZeroSolution, &field, BatteryKind::AwayFromBoundary, WeakData::zero(), q)?;
        let nontrivial = battery_stats(&u, &field, BatteryKind::AwayFromBoundary, WeakData::zero(), q)?;
        let mut worst_avg: f64 = 0.0;
        for &(k, left, right) in &field.schedule.intervals {
            let side = 0.25 * (right - left);
            let h = pow2(-(k as i32));
            for (a, b) in [(0.0, 0.0), (4.0 * h, 8.0 * h), (Y_PERIOD - 4.0 * h, 12.0 * h)] {
                let avg = cell_average(&u, 0.999, [left + 0.0 * side, a, b], 4.0 * h, 32);
                worst_avg = worst_avg.max((avg - 0.25).abs());
            }
        }
        let measured = zero.max_normalized.max(nontrivial.max_normalized);
        let ok = measured <= tol && worst_avg <= 0.02;
        let detail = format!(
            "max |R|/|phi|_C1: zero {:.2e}, nontrivial {:.2e}; max relative {:.2e}; |average - 1/4| <= {:.2e}",
            zero.max_normalized, nontrivial.max_normalized, nontrivial.max_relative, worst_avg
        );
        Ok((measured, tol, if ok { Status::Witness } else { Status::Fail }, detail))
    })
}

/// `u = 1_{r < t}` is not a solution for the outward field; its relative
/// residual must exceed that of the true solution by a factor of ten.
pub fn check_residual_control(k_max: u32, q: f64) -> CheckRecord {
    timed("residual negative control", || {
        let v = ConstructionVariant::new(VariantTag::Outward, k_max)?;
        let field = assemble_field(v);
        let u = exact_solution(v);
        let bad = FnSolution::new("front", 1.0, |t: f64, x: Point| if x[0] < t { 1.0 } else { 0.0 });
        let good = battery_stats(&u, &field, BatteryKind::AwayFromBoundary, WeakData::zero(), q)?;
        let wrong = battery_stats(&bad, &field, BatteryKind::AwayFromBoundary, WeakData::zero(), q)?;
        let ratio = wrong.max_relative / good.max_relative.max(1e-300);
        Ok((
            ratio,
            10.0,
            Status::from_bool(ratio >= 10.0),
            format!("max relative residual: control {:.2e}, solution {:.2e}", wrong.max_relative, good.max_relative),
        ))
    })
}

/// `int_{r < t} |u(t)|` at `t`.
fn minus_l1(u: &dyn ScalarSolution, t: f64, q: f64) -> f64 {
    let axes = [
        composite(0.0, t, q, 0.0, Rule::Shifted(0.5 + 1.0 / 64.0)),
        composite(0.0, Y_PERIOD, q, 0.0, Rule::Shifted(0.5 + 1.0 / 128.0)),
        composite(0.0, Y_PERIOD, q, 0.0, Rule::Shifted(0.5 + 1.0 / 256.0)),
    ];
    tensor3(&axes, |p| u.eval(t, [p[0], p[1], p[2]]).abs())
}

/// Nontrivial solution of the inward problem with zero data.
pub fn check_inward_witness(k_max: u32, q: f64, tol: f64) -> CheckRecord {
    timed("inward non-uniqueness", || {
        let v = ConstructionVariant::new(VariantTag::InwardDepauw, k_max)?;
        let field = assemble_field(v);
        let u = exact_solution(v);
        let res = battery_stats(&u, &field, BatteryKind::ReachingBoundary, WeakData::zero(), q)?;
        let l1 = minus_l1(&u, 0.5, 1.0 / 256.0);
        let src = TraceSource::with_solution(&field, &u);
        let (flux, _) = weak_star_outcome(&src, SourceTag::Flux, k_max, 0.0)?;
        let ok = res.max_normalized <= tol && l1 >= 0.1 && flux.pass;
        let detail = format!(
            "max |R|/|phi|_C1 {:.2e}; L1 on r<t at t=1/2 {:.4}; Tr(bu) pairing ratio {:.2e}",
            res.max_normalized, l1, flux.max_ratio
        );
        Ok((res.max_normalized, tol, if ok { Status::Witness } else { Status::Fail }, detail))
    })
}

/// Corollary variant: `Tr(bu) -> 0`, `Tr b -> 1`; outward `Tr(bu) -> -1/4`.
pub fn check_corollary(k_max: u32) -> CheckRecord {
    timed("corollary traces", || {
        let vc = ConstructionVariant::new(VariantTag::Corollary, k_max)?;
        let fc = assemble_field(vc);
        let uc = exact_solution(vc);
        let src = TraceSource::with_solution(&fc, &uc);
        let (flux, _) = weak_star_outcome(&src, SourceTag::Flux, k_max, 0.0)?;
        let (b, _) = weak_star_outcome(&src, SourceTag::B, k_max, 1.0)?;
        let vo = ConstructionVariant::new(VariantTag::Outward, k_max)?;
        let fo = assemble_field(vo);
        let uo = exact_solution(vo);
        let so = TraceSource::with_solution(&fo, &uo);
        let (out, _) = weak_star_outcome(&so, SourceTag::Flux, k_max, -0.25)?;
        // Normalised pairings of the widest tests at the finest level.
        let finest = pow2(2 - k_max as i32);
        let dev = out
            .rows
            .iter()
            .filter(|r| r.scale == finest && r.test < 4)
            .map(|r| (r.normalized_pairing + 0.25).abs())
            .fold(0.0, f64::max);
        let measured = flux.max_ratio.max(b.max_ratio).max(out.max_ratio);
        let ok = flux.pass && b.pass && out.pass && dev <= 0.02;
        let detail = format!(
            "ratios: Tr(bu) {:.2e}, Tr b {:.2e}, outward Tr(bu) {:.2e}; |outward pairing + 1/4| <= {:.2e}",
            flux.max_ratio, b.max_ratio, out.max_ratio, dev
        );
        Ok((measured, 1.0, Status::from_bool(ok), detail))
    })
}

/// Pointwise renormalisation identity on profile triples of fixed-`k` fields.
pub fn check_renormalization(k_max: u32) -> CheckRecord {
    timed("trace renormalization", || {
        let grid = profile_grid(k_max);
        let mut worst: f64 = 0.0;
        let mut n = 0;
        for tag in [VariantTag::Outward, VariantTag::Corollary, VariantTag::InwardDepauw, VariantTag::TangentOutward] {
            let v = ConstructionVariant::new(tag, k_max)?;
            let f = assemble_field(v);
            let u = exact_solution(v);
            let src = TraceSource::with_solution(&f, &u);
            let planes: Vec<f64> = (3..=k_max)
                .map(|k| pow2(2 - k as i32))
                .chain([0.3125, 0.40625, 0.15625])
                .collect();
            for r0 in planes {
                for side in [TraceSide::Minus, TraceSide::Plus] {
                    let b = one_sided_trace(&src, SourceTag::B, r0, side, grid)?;
                    let ub = one_sided_trace(&src, SourceTag::Flux, r0, side, grid)?;
                    let u2b = one_sided_trace(&src, SourceTag::FluxSquared, r0, side, grid)?;
                    let rep = renormalization_trace_check(&u2b, &ub, &b);
                    worst = worst.max(rep.max_defect).max(rep.zero_patch_max);
                    n += 1;
                }
            }
        }
        Ok((worst, 1e-12, Status::from_bool(worst <= 1e-12), format!("{n} profile triples")))
    })
}

/// Strong `L^1` convergence at interior planes of `beta_4` and its failure at
/// the boundary of the outward variant.
pub fn check_strong_l1(k_max: u32) -> CheckRecord {
    timed("strong L1 trace convergence", || {
        let k = 4;
        let field = beta_k(k);
        let h = pow2(-(k as i32));
        let grid = ProfileGrid::new(0.5, 1.0, 1, 4.0 * h, 256);
        let src = TraceSource::field(&field);
        let mut interior_ok = true;
        let mut worst_slack = f64::INFINITY;
        let mut last_ratio: f64 = 0.0;
        for r0 in [h, 2.0 * h] {
            let limit = one_sided_trace(&src, SourceTag::B, r0, TraceSide::Minus, grid)?;
            let gammas: Vec<(f64, TraceProfile)> = (4..=10)
                .map(|j| {
                    let r = r0 + pow2(-j);
                    one_sided_trace(&src, SourceTag::B, r, TraceSide::Minus, grid).map(|p| (r, p))
                })
                .collect::<Result<_>>()?;
            let rep = strong_l1_check(&gammas, &limit, &field, r0, 64);
            interior_ok &= rep.decreasing && rep.within_bounds;
            for row in &rep.rows {
                if let Some(b) = row.bound {
                    worst_slack = worst_slack.min(b - row.distance);
                }
            }
            let first = rep.rows.first().map_or(0.0, |r| r.distance);
            let last = rep.rows.last().map_or(0.0, |r| r.distance);
            let ratio = if first > 0.0 { last / first } else { 0.0 };
            last_ratio = last_ratio.max(ratio);
            interior_ok &= ratio <= 0.1;
        }
        let v = ConstructionVariant::new(VariantTag::Outward, k_max)?;
        let fo = assemble_field(v);
        let so = TraceSource::field(&fo);
        let og = profile_grid(k_max);
        let profiles = dyadic_profiles(&so, SourceTag::B, k_max, og)?;
        let limit = TraceProfile::constant(og, 0.0, SourceTag::B, fo.trace_limit());
        let rep = strong_l1_check(&profiles, &limit, &fo, 0.0, 1);
        let boundary_min = rep.rows.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
        let ok = interior_ok && boundary_min >= 0.3 && rep.bound_unavailable;
        let detail = format!(
            "interior: bounds hold with slack >= {worst_slack:.2e}, last/first distance {last_ratio:.2e}; boundary: min distance {boundary_min:.4}"
        );
        Ok((boundary_min, 0.3, Status::from_bool(ok), detail))
    })
}

/// Result of the smooth-field convergence study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub levels: Vec<u32>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    pub cfl_difference: f64,
    pub cfl_bound: f64,
    pub calibration: f64,
    pub zero_energy: f64,
    pub energy_bound: f64,
    pub difference_energy: f64,
}

/// Horizon of the smooth scenarios.
pub const SMOOTH_HORIZON: f64 = 0.25;

/// Convergence orders on `levels`, CFL sensitivity and the zero-data cone
/// energy at the middle level.
pub fn convergence_study(levels: [u32; 3]) -> Result<ConvergenceStudy> {
    let mid = levels[1];
    let c = calibrate_constant(mid)?;
    let mut errors = Vec::new();
    let mut mid_run = None;
    for &lv in &levels {
        let (sc, exact) = shear_scenario(lv, 0.4, SMOOTH_HORIZON)?;
        let tr = solve_ibvp(&sc)?;
        errors.push(l1_error(tr.last(), &exact));
        if lv == mid {
            mid_run = Some(tr);
        }
    }
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let (sc2, exact) = shear_scenario(mid, 0.2, SMOOTH_HORIZON)?;
    let tr2 = solve_ibvp(&sc2)?;
    let tr4 = mid_run.expect("middle level run");
    let h = pow2(-(mid as i32));
    let cfl_difference = l1_difference(tr2.last(), tr4.last());
    let field: Arc<dyn VelocityField> = sc2.field.clone();
    let zero = solve_ibvp(&zero_data_scenario(field.clone(), mid, 0.4, SMOOTH_HORIZON)?)?;
    let weight = smooth_cone(field.as_ref());
    let snap = crate::solution::SnapshotSolution::new("fv-zero", vec![zero.last().clone()]);
    let zero_energy = cone_energy(&snap, &weight, DomainBox::standard(), h);
    let last = tr4.last().clone();
    let diff = FnSolution::new("fv-minus-exact", 1.0, move |t: f64, x: Point| last.sample(x) - exact.eval(t, x));
    let difference_energy = cone_energy(&diff, &weight, DomainBox::standard(), h);
    Ok(ConvergenceStudy {
        levels: levels.to_vec(),
        errors,
        orders,
        cfl_difference,
        cfl_bound: c * h.sqrt(),
        calibration: c,
        zero_energy,
        energy_bound: 10.0 * c * h,
        difference_energy,
    })
}

fn smooth_cone(field: &dyn VelocityField) -> ConeWeight {
    ConeWeight::new(
        ConeProfile { inner: 0.25, outer: 0.5 },
        SMOOTH_HORIZON,
        [0.0, 0.25, 0.25],
        field.meta().linf_bound,
    )
}

/// Smooth-field well-posedness surrogate.
pub fn check_wellposed(level: u32) -> CheckRecord {
    timed("well-posed regime", || {
        let st = convergence_study([level - 1, level, level + 1])?;
        let min_order = st.orders.iter().copied().fold(f64::INFINITY, f64::min);
        let ok = min_order >= 0.5 && st.cfl_difference <= st.cfl_bound && st.zero_energy <= st.energy_bound;
        let detail = format!(
            "L1 errors {:?}, orders {:?}; CFL 0.2 vs 0.4 difference {:.3e} (bound {:.3e}, C = {:.3}); zero-data energy {:.1e} (bound {:.3e}); energy of FV - exact {:.3e}",
            st.errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            st.orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>(),
            st.cfl_difference,
            st.cfl_bound,
            st.calibration,
            st.zero_energy,
            st.energy_bound,
            st.difference_energy
        );
        Ok((min_order, 0.5, Status::from_bool(ok), detail))
    })
}

/// Cone weight centred over the boundary at `t = 1/2`.
pub fn boundary_cone(speed: f64) -> ConeWeight {
    ConeWeight::new(ConeProfile { inner: 0.25, outer: 0.5 }, 0.5, [0.0, 0.25, 0.25], speed)
}

/// Cone energy of the outward solution against the FV solution of the
/// fixed-`k` truncation with zero data.
pub fn check_gronwall(k_max: u32, level: u32, q: f64) -> CheckRecord {
    timed("cone energy (Gronwall failure)", || {
        let v = ConstructionVariant::new(VariantTag::Outward, k_max)?;
        let field = assemble_field(v);
        let u = exact_solution(v);
        let weight = boundary_cone(field.meta().linf_bound);
        let defect = weight.max_transport_defect(100_000, DomainBox::standard());
        let rough = cone_energy_check(&u, &field, &weight, DomainBox::standard(), q, 1e-3);
        let e_rough = rough.energy;
        let truncated: Arc<dyn VelocityField> =
            Arc::new(assemble_field(ConstructionVariant::new(VariantTag::Outward, level - 2)?));
        let tr = solve_ibvp(&zero_data_scenario(truncated, level, 0.45, 0.5)?)?;
        let snap = crate::solution::SnapshotSolution::new("fv-truncated", vec![tr.last().clone()]);
        let e_bv = cone_energy(&snap, &weight, DomainBox::standard(), q);
        let ok = rough.status == ConeStatus::Witness && e_bv <= 1e-3 && defect <= 0.0;
        let detail = format!(
            "E(1/2): outward {e_rough:.4}, truncated K_max={} FV {e_bv:.1e}; max d_t nu + M|grad nu| = {defect:.1e}",
            level - 2
        );
        Ok((e_rough, WITNESS_THRESHOLD, if ok { Status::Witness } else { Status::Fail }, detail))
    })
}

/// Box averages of the inward solution and the marker-particle oracle.
pub fn check_mixing(k_max: u32) -> CheckRecord {
    timed("mixing", || {
        let v = ConstructionVariant::new(VariantTag::InwardDepauw, k_max)?;
        let u = exact_solution(v);
        let corners = [0.0, 0.0371, 0.1234, 0.3113];
        let n = 256;
        let mut worst_ratio: f64 = 0.0;
        for k in 3..=6u32 {
            let top = pow2(2 - k as i32);
            for s in [0.3, 0.55, 0.8, 0.95] {
                let r = s * top;
                for &a in &corners {
                    for &b in &corners {
                        let avg = box_average(&u, r, a, b, 0.125, n);
                        worst_ratio = worst_ratio.max(avg.abs() / pow2(3 - k as i32));
                    }
                }
            }
        }
        let mut mismatches = 0;
        for k in [3u32, 4] {
            let states = evolve_chessboard(k);
            for st in &states[1..] {
                let m = marker_chessboard(k, st.r, 64, 2048);
                for i in 0..4 {
                    for j in 0..4 {
                        if m[i][j] != Some(st.cells[i][j]) {
                            mismatches += 1;
                        }
                    }
                }
            }
        }
        let ok = worst_ratio <= 1.0 && mismatches == 0;
        Ok((
            worst_ratio,
            1.0,
            Status::from_bool(ok),
            format!("max |average| / 2^(3-k) = {worst_ratio:.3}; marker mismatches {mismatches}"),
        ))
    })
}

/// Average of `u(1, r, .)` over `[a, a + side] x [b, b + side]`.
pub fn box_average(u: &dyn ScalarSolution, r: f64, a: f64, b: f64, side: f64, n: usize) -> f64 {
    let d = side / n as f64;
    let s: f64 = (0..n * n)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c / n, c % n);
            u.eval(1.0, [r, a + (i as f64 + 0.5) * d, b + (j as f64 + 0.5) * d])
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    s / (n * n) as f64
}

/// Points of the block of half-width `hw` from an additive recurrence.
pub fn block_samples(hw: f64, n: usize) -> Vec<[f64; 2]> {
    let a = [0.754_877_666_246_692_7, 0.569_840_290_998_053_2];
    (0..n)
        .map(|i| {
            let z = [(0.5 + a[0] * i as f64).fract(), (0.5 + a[1] * i as f64).fract()];
            [(2.0 * z[0] - 1.0) * hw, (2.0 * z[1] - 1.0) * hw]
        })
        .collect()
}

/// `quarter_turn` against a fine ODE integration and its fourth power.
pub fn check_flow_oracle(k: u32) -> CheckRecord {
    timed("flow-map oracle", || {
        let block = crate::catalog::depauw_block(k);
        let steps = (block.quarter_period() / 1e-6).ceil() as usize;
        let pts = block_samples(block.half_width, 1000);
        let errs: Vec<(f64, bool)> = pts
            .par_iter()
            .map(|&x| {
                let a = quarter_turn(k, x);
                let b = quarter_turn_ode(k, x, steps);
                let e = (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
                let mut y = x;
                for _ in 0..4 {
                    y = quarter_turn(k, y);
                }
                (e, y == x)
            })
            .collect();
        let worst = errs.iter().map(|e| e.0).fold(0.0, f64::max);
        let identity = errs.iter().all(|e| e.1);
        Ok((
            worst,
            1e-8,
            Status::from_bool(worst <= 1e-8 && identity),
            format!("{} points, {steps} steps, fourfold identity {identity}", pts.len()),
        ))
    })
}

/// Suites known to [`run_suite`].
pub const SUITES: [&str; 7] =
    ["wellposed", "nonuniqueness_inward", "nonuniqueness_outward", "corollary", "traces", "mixing", "all"];

/// Parameters of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub suite: String,
    pub variant: VariantTag,
    pub k_max: u32,
    pub level: u32,
    pub horizon: f64,
    pub out_dir: PathBuf,
    pub cfl: f64,
    pub tol: f64,
    /// Check names to skip.
    pub skip: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            suite: "all".into(),
            variant: VariantTag::Outward,
            k_max: 8,
            level: 6,
            horizon: 0.5,
            out_dir: PathBuf::from("bvt-out"),
            cfl: 0.4,
            tol: RESIDUAL_TOL,
            skip: Vec::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Usage(format!("bad value {v:?} for {key}")))
}

impl RunConfig {
    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "suite" => self.suite = v.into(),
            "variant" => self.variant = v.parse()?,
            "kmax" | "k_max" => self.k_max = parse_num(key, v)?,
            "level" => self.level = parse_num(key, v)?,
            "horizon" => self.horizon = parse_num(key, v)?,
            "out" | "out_dir" => self.out_dir = PathBuf::from(v),
            "cfl" => self.cfl = parse_num(key, v)?,
            "tol" => self.tol = parse_num(key, v)?,
            "skip" => self.skip = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            other => return Err(Error::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse a flat `key = value` file (`#` starts a comment).
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("line {}: expected key=value", n + 1)))?;
            c.set(k, v)?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !SUITES.contains(&self.suite.as_str()) {
            return Err(Error::Usage(format!("unknown suite {:?} (known: {})", self.suite, SUITES.join(", "))));
        }
        ConstructionVariant::new(self.variant, self.k_max)?;
        if !(3..=9).contains(&self.level) {
            return Err(Error::Usage(format!("level {} outside 3..=9", self.level)));
        }
        if !(self.cfl > 0.0 && self.cfl <= crate::fv::MAX_CFL) {
            return Err(Error::Usage(format!("CFL {} outside ]0, {}]", self.cfl, crate::fv::MAX_CFL)));
        }
        if !(self.horizon > 0.0 && self.horizon <= 1.0) {
            return Err(Error::Usage(format!("horizon {} outside ]0, 1]", self.horizon)));
        }
        Ok(())
    }

    fn enabled(&self, name: &str) -> bool {
        !self.skip.iter().any(|s| s == name)
    }
}

/// Colour of `v` on the map white (0), red (`vmax > 0`), black (`vmin < 0`).
pub fn heat_color(v: f64, vmin: f64, vmax: f64) -> [u8; 3] {
    let c = |x: f64| (255.0 * x.clamp(0.0, 1.0)).round() as u8;
    if v > 0.0 && vmax > 0.0 {
        let s = v / vmax;
        [255, c(1.0 - s), c(1.0 - s)]
    } else if v < 0.0 && vmin < 0.0 {
        let s = v / vmin;
        [c(1.0 - s), c(1.0 - s), c(1.0 - s)]
    } else {
        [255, 255, 255]
    }
}

/// Write a 2D slice (`values[i][j]`, `i` along the horizontal axis) as a
/// binary portable pixmap with `scale x scale` pixels per value.
///
/// Colour map: 0 is white, positive values shade to red at `vmax`, negative
/// values shade to black at `vmin`; with the ranges `[-5, 1]` and `[-1, 1]`
/// this renders the dashed/white/black patterns and signed chessboards.
pub fn emit_heatmap(values: &[Vec<f64>], vmin: f64, vmax: f64, scale: usize, path: &Path) -> Result<()> {
    let w = values.len();
    let h = values.first().map_or(0, |r| r.len());
    if w == 0 || h == 0 {
        return Err(Error::Config("empty heatmap slice".into()));
    }
    let s = scale.max(1);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P6\n{} {}\n255\n", w * s, h * s)?;
    for py in 0..h * s {
        let j = h - 1 - py / s;
        for px in 0..w * s {
            out.write_all(&heat_color(values[px / s][j], vmin, vmax))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Lateral slice of a cell field at radial index `i`.
pub fn cell_slice(field: &CellScalarField, i: usize) -> Vec<Vec<f64>> {
    let g = field.grid;
    (0..g.ny).map(|j| (0..g.ny).map(|l| field.get(i, j, l)).collect()).collect()
}

/// `f(y1, y2)` sampled at the centres of an `n x n` grid on `[0, side]^2`.
pub fn sample_slice(n: usize, side: f64, f: impl Fn(f64, f64) -> f64) -> Vec<Vec<f64>> {
    let d = side / n as f64;
    (0..n).map(|i| (0..n).map(|j| f((i as f64 + 0.5) * d, (j as f64 + 0.5) * d)).collect()).collect()
}

/// Build the global worker pool, capped by `BVT_THREADS` when set.
pub fn init_thread_pool() {
    if let Some(n) = std::env::var("BVT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().is_err() {
            log::warn!("worker pool already initialised; BVT_THREADS ignored");
        }
    }
}

fn outputs_for(suite: &str, cfg: &RunConfig) -> Result<Vec<String>> {
    let dir = &cfg.out_dir;
    let mut written = Vec::new();
    let mut put = |name: &str| {
        written.push(name.to_string());
        dir.join(name)
    };
    match suite {
        "wellposed" => {
            let (sc, _) = shear_scenario(cfg.level - 1, cfg.cfl, SMOOTH_HORIZON)?;
            let tr = solve_ibvp(&sc.with_snapshots(vec![0.5 * SMOOTH_HORIZON, SMOOTH_HORIZON]))?;
            tr.write_snapshots_csv(&put("wellposed_snapshots.csv"))?;
            tr.write_conserved_csv(&put("wellposed_conserved.csv"))?;
            let last = tr.last();
            emit_heatmap(&cell_slice(last, last.grid.nr / 8), -1.0, 1.0, 8, &put("wellposed_slice.ppm"))?;
        }
        "nonuniqueness_outward" | "corollary" => {
            let tag = if suite == "corollary" { VariantTag::Corollary } else { VariantTag::Outward };
            let v = ConstructionVariant::new(tag, cfg.k_max)?;
            let f = assemble_field(v);
            let u = exact_solution(v);
            let src = TraceSource::with_solution(&f, &u);
            let grid = profile_grid(cfg.k_max.min(6));
            let r = pow2(2 - cfg.k_max.min(6) as i32);
            for st in [SourceTag::B, SourceTag::Flux] {
                let p = one_sided_trace(&src, st, r, TraceSide::Minus, grid)?;
                p.write_csv(&put(&format!("{suite}_trace_{}.csv", st.as_str())))?;
            }
            let b3 = beta_k_with(3, -5.0);
            let slice = sample_slice(64, 0.5, |y1, y2| b3.local(pow2(-4) - 1e-9, y1, y2)[0]);
            emit_heatmap(&slice, -5.0, 1.0, 4, &put("beta3_r2-4.ppm"))?;
            let slice = sample_slice(128, 0.125, |y1, y2| u.eval(0.99, [0.3, y1, y2]));
            emit_heatmap(&slice, -1.0, 1.0, 4, &put(&format!("{suite}_solution_slice.ppm")))?;
        }
        "nonuniqueness_inward" | "mixing" => {
            let v = ConstructionVariant::new(VariantTag::InwardDepauw, cfg.k_max)?;
            let u = exact_solution(v);
            for (i, r) in [0.03, 0.1, 0.3].into_iter().enumerate() {
                let slice = sample_slice(128, 0.5, |y1, y2| u.eval(0.99, [r, y1, y2]));
                emit_heatmap(&slice, -1.0, 1.0, 4, &put(&format!("{suite}_slice{i}.ppm")))?;
            }
            if suite == "mixing" {
                for k in [3u32, 4] {
                    for st in evolve_chessboard(k) {
                        let img: Vec<Vec<f64>> =
                            (0..4).map(|i| (0..4).map(|j| st.cells[i][j] as f64).collect()).collect();
                        let name = format!("chessboard_k{k}_r{:.5}.ppm", st.r);
                        emit_heatmap(&img, -1.0, 1.0, 32, &put(&name))?;
                    }
                }
            }
        }
        "traces" => {
            let v = ConstructionVariant::new(cfg.variant, cfg.k_max)?;
            let f = assemble_field(v);
            let u = exact_solution(v);
            let src = TraceSource::with_solution(&f, &u);
            let grid = profile_grid(cfg.k_max.min(6));
            for k in 3..=cfg.k_max.min(6) {
                let p = one_sided_trace(&src, SourceTag::B, pow2(2 - k as i32), TraceSide::Minus, grid)?;
                p.write_csv(&put(&format!("trace_b_k{k}.csv")))?;
            }
        }
        _ => {}
    }
    Ok(written)
}

/// Checks of one suite.
pub fn suite_checks(suite: &str, cfg: &RunConfig) -> Result<Vec<CheckRecord>> {
    let k = cfg.k_max;
    let mut out = Vec::new();
    let mut add = |name: &str, f: &dyn Fn() -> CheckRecord| {
        if cfg.enabled(name) {
            let rec = f();
            log::info!("{}", rec.line());
            out.push(rec);
        }
    };
    match suite {
        "wellposed" => {
            add("wellposed", &|| check_wellposed(cfg.level));
            add("l2_balance", &|| check_l2_balance(cfg.level - 1));
        }
        "nonuniqueness_outward" => {
            add("outward_nonuniqueness", &|| check_outward_nonuniqueness(k, RESIDUAL_Q, cfg.tol));
            add("residual_control", &|| check_residual_control(k, RESIDUAL_Q));
            add("boundary_trace", &|| check_boundary_trace(VariantTag::Outward, k));
            add("gronwall", &|| check_gronwall(k, cfg.level, 1.0 / 128.0));
        }
        "nonuniqueness_inward" => {
            add("inward_witness", &|| check_inward_witness(k, RESIDUAL_Q, cfg.tol));
            add("boundary_trace", &|| check_boundary_trace(VariantTag::InwardDepauw, k));
        }
        "corollary" => {
            add("corollary", &|| check_corollary(k));
            add("renormalization", &|| check_renormalization(k.min(6)));
        }
        "traces" => {
            add("divergence", &|| check_divergence(3..=6));
            add("renormalization", &|| check_renormalization(k.min(6)));
            add("strong_l1", &|| check_strong_l1(k));
        }
        "mixing" => {
            add("mixing", &|| check_mixing(k));
            add("flow_oracle", &|| check_flow_oracle(3));
        }
        "all" => {
            drop(add);
            for s in &SUITES[..SUITES.len() - 1] {
                out.extend(suite_checks(s, cfg)?);
            }
        }
        other => return Err(Error::Usage(format!("unknown suite {other:?}"))),
    }
    Ok(out)
}

/// `L^2` balance of a smooth run with zero inflow.
pub fn check_l2_balance(level: u32) -> CheckRecord {
    timed("L2 balance", || {
        let (sc, _) = shear_scenario(level, 0.4, SMOOTH_HORIZON)?;
        let sc = crate::fv::Scenario { boundary: crate::fv::BoundaryData::zero(), ..sc };
        let tr = solve_ibvp(&sc)?;
        let rep = l2_balance_report(&tr);
        let worst = rep.rows.iter().map(|r| r.dissipation).fold(f64::INFINITY, f64::min);
        Ok((
            worst,
            0.0,
            Status::from_bool(rep.dissipative && rep.nonincreasing),
            format!("{} steps, total dissipation {:.3e}", rep.rows.len(), rep.total_dissipation),
        ))
    })
}

/// Execute the configured suite, write its outputs and `report.json`.
pub fn run_suite(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let records = suite_checks(&cfg.suite, cfg)?;
    let suites: Vec<&str> = if cfg.suite == "all" { SUITES[..SUITES.len() - 1].to_vec() } else { vec![&cfg.suite] };
    let mut files = BTreeMap::new();
    for s in suites {
        files.insert(s.to_string(), outputs_for(s, cfg)?);
    }
    let report = Report::new(&cfg.suite, records);
    report.write_json(&cfg.out_dir.join("report.json"))?;
    log::info!("outputs: {files:?}");
    Ok(report)
}

/// Load a report written by [`run_suite`].
pub fn load_report(path: &Path) -> Result<serde_json::Value> {
    let s = std::fs::read_to_string(path)?;
    serde_json::from_str(&s).map_err(|e| Error::Io(e.to_string()))
}

/// The `Pass`/`Witness` flag of a cone status.
pub fn cone_status(s: ConeStatus) -> Status {
    match s {
        ConeStatus::Pass => Status::Pass,
        ConeStatus::Witness => Status::Witness,
        ConeStatus::Fail => Status::Fail,
    }
}
