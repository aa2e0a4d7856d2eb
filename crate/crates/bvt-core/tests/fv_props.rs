use std::sync::Arc;

use bvt_core::catalog::{assemble_field, ConstructionVariant, VariantTag};
use bvt_core::fv::*;
use bvt_core::geometry::{make_grid, sample_face_fluxes, CellScalarField, DomainBox, Point};
use bvt_core::solution::{ScalarSolution, ZeroSolution};
use bvt_core::traces::TestFunction;
use bvt_core::Error;
use proptest::prelude::*;

fn inward(k: u32) -> Arc<bvt_core::catalog::AssembledField> {
    Arc::new(assemble_field(ConstructionVariant::new(VariantTag::InwardDepauw, k).unwrap()))
}

fn lcg_field(level: u32, seed: u64, lo: f64, hi: f64) -> CellScalarField {
    let g = make_grid(DomainBox::standard(), level).unwrap();
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut f = CellScalarField::zeros(g, 0.0);
    for v in f.values.iter_mut() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *v = lo + (hi - lo) * ((s >> 11) as f64 / (1u64 << 53) as f64);
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn upwind_obeys_the_maximum_principle(seed in any::<u64>(), lo in -2.0f64..0.0, w in 0.1f64..3.0, c in 0.0f64..1.0) {
        let hi = lo + w;
        let mut state = lcg_field(4, seed, lo, hi);
        let field = inward(4);
        let g = state.grid;
        let flux = sample_face_fluxes(field.as_ref(), &g, (0.6, 0.61)).unwrap();
        let dt = MAX_CFL * g.h / face_speed(&flux);
        let gval = lo + c * w;
        let bc = BoundaryData { inner: Arc::new(move |_, _, _| gval), outer: Arc::new(move |_, _, _| gval) };
        for n in 0..6 {
            state = upwind_step(&state, &flux, dt, 0.6 + n as f64 * dt, &bc, None).unwrap().state;
        }
        for &v in &state.values {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{v} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn mass_changes_only_through_the_boundary(seed in any::<u64>()) {
        let (sc, _) = shear_scenario(4, 0.4, 0.1).unwrap();
        let sc = Scenario { initial: lcg_field(4, seed, 0.0, 1.0), ..sc }
            .with_source(Arc::new(|t: f64, x: Point| t * x[0]));
        let tr = solve_ibvp(&sc).unwrap();
        for w in tr.log.windows(2) {
            let change = w[1].mass - w[0].mass;
            let expected = w[1].boundary_flux + w[1].source_mass;
            prop_assert!((change - expected).abs() <= 1e-13, "step {}: {change} vs {expected}", w[1].step);
        }
    }

    #[test]
    fn cone_weight_decreases_along_characteristics(
        apex in prop::array::uniform3(0.0f64..0.5),
        speed in 0.5f64..8.0,
        t_bar in 0.2f64..1.0,
    ) {
        let w = ConeWeight::new(ConeProfile { inner: 0.25, outer: 0.5 }, t_bar, apex, speed);
        prop_assert!(w.max_transport_defect(4096, DomainBox::standard()) <= 1e-12);
        prop_assert_eq!(w.eval(t_bar, apex), 1.0);
        let far = [apex[0] + 0.6, apex[1], apex[2]];
        prop_assert_eq!(w.eval(t_bar, far), 0.0);
    }
}

#[test]
fn zero_data_stays_zero() {
    let field = assemble_field(ConstructionVariant::new(VariantTag::Outward, 4).unwrap());
    let tr = solve_ibvp(&zero_data_scenario(Arc::new(field), 4, 0.45, 0.5).unwrap()).unwrap();
    assert!(tr.last().values.iter().all(|&v| v == 0.0));
    assert!(tr.log.iter().all(|r| r.mass == 0.0 && r.boundary_flux == 0.0));
}

#[test]
fn constant_inflow_front_is_within_one_cell() {
    let level = 5;
    let t = 0.5;
    let tr = solve_ibvp(&constant_inflow_scenario(level, 0.4, t).unwrap()).unwrap();
    let s = tr.last();
    let g = s.grid;
    // Lateral area 1/4: the mass equals the front depth times the area, up to
    // the diffusive tail that has left through r = r_max.
    let depth = s.integral() / 0.25;
    assert!((depth - t).abs() < 1e-4, "depth {depth}");
    let crossing = (0..g.nr).find(|&i| s.get(i, 0, 0) < 0.5).expect("front inside the box");
    let r_half = (crossing as f64 + 0.5) * g.h;
    assert!((r_half - t).abs() <= g.h, "u = 1/2 crossing at {r_half}");
}

#[test]
fn oversized_steps_are_refused() {
    let field = inward(4);
    let g = make_grid(DomainBox::standard(), 4).unwrap();
    let flux = sample_face_fluxes(field.as_ref(), &g, (0.6, 0.61)).unwrap();
    let dt = 1.01 * MAX_CFL * g.h / face_speed(&flux);
    let err = upwind_step(&CellScalarField::zeros(g, 0.6), &flux, dt, 0.6, &BoundaryData::zero(), None).unwrap_err();
    assert!(matches!(err, Error::Cfl { .. }), "{err}");

    let sc = zero_data_scenario(field, 4, 0.5, 0.5).unwrap();
    assert!(matches!(solve_ibvp(&sc), Err(Error::Config(_))));
}

#[test]
fn residual_rejects_inadmissible_tests() {
    let field = assemble_field(ConstructionVariant::new(VariantTag::Outward, 6).unwrap());
    let q = 1.0 / 256.0;
    let d = DomainBox::standard();
    // Touches r = 0 where the field leaves the domain.
    let outflow = TestFunction::new([0.5, 0.0, 0.25, 0.25], [0.125; 4], 1.0);
    let err = weak_residual(&ZeroSolution, &field, &outflow, WeakData::zero(), d, q).unwrap_err();
    assert!(matches!(err, Error::Admissibility(_)), "{err}");
    // Reaches the final time.
    let late = TestFunction::new([0.95, 0.5, 0.25, 0.25], [0.125; 4], 1.0);
    let err = weak_residual(&ZeroSolution, &field, &late, WeakData::zero(), d, q).unwrap_err();
    assert!(matches!(err, Error::Admissibility(_)), "{err}");
}

#[test]
fn smooth_exact_solution_has_small_residual() {
    let (_, exact) = shear_scenario(4, 0.4, 0.25).unwrap();
    let g_bar = |t: f64, y1: f64, y2: f64| ShearExact::profile(-t, y1, y2);
    let u_bar = |x: Point| exact.eval(0.0, x);
    let data = WeakData { g_bar: &g_bar, u_bar: &u_bar, f: None };
    // Reaches both r = 0 (inflow) and t = 0.
    let test = TestFunction::new([0.05, 0.05, 0.2, 0.3], [0.125; 4], 1.0);
    let res = weak_residual(&exact, &exact.field, &test, data, DomainBox::standard(), 1.0 / 128.0).unwrap();
    assert!(res.value.abs() <= 1e-6 * res.c1_norm, "{res:?}");
}
