use std::sync::Arc;

use bvt_core::catalog::{assemble_field, ConstructionVariant, VariantTag};
use bvt_core::fv::{ShearExact, ShearField};
use bvt_core::geometry::{make_grid, zero_extend, ConstantField, DomainBox};
use bvt_core::solution::FnSolution;
use bvt_core::traces::*;
use bvt_core::Error;
use proptest::prelude::*;

fn grid() -> ProfileGrid {
    ProfileGrid::new(0.5, 1.0, 4, 0.125, 16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bump_gradient_matches_finite_differences(
        c in prop::array::uniform4(0.2f64..0.8),
        h in prop::array::uniform4(0.05f64..0.2),
        s in prop::array::uniform4(-0.9f64..0.9),
    ) {
        let b = TestFunction::new(c, h, 1.0);
        let p: [f64; 4] = std::array::from_fn(|a| c[a] + s[a] * h[a]);
        let g = b.grad(p);
        let e = 1e-6;
        for a in 0..4 {
            let (mut pp, mut pm) = (p, p);
            pp[a] += e;
            pm[a] -= e;
            let fd = (b.value(pp) - b.value(pm)) / (2.0 * e);
            prop_assert!((fd - g[a]).abs() <= 1e-5 * (1.0 + b.lip()), "axis {a}: {fd} vs {}", g[a]);
        }
    }

    #[test]
    fn renormalization_holds_for_products(b in -2.0f64..2.0, u in -3.0f64..3.0) {
        let gb = TraceProfile::constant(grid(), 0.25, SourceTag::B, b);
        let gub = TraceProfile::constant(grid(), 0.25, SourceTag::Flux, u * b);
        let gu2b = TraceProfile::constant(grid(), 0.25, SourceTag::FluxSquared, u * u * b);
        let rep = renormalization_trace_check(&gu2b, &gub, &gb);
        prop_assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn gauss_green_matches_boundary_integral(t in 0.1f64..0.6, r in 0.02f64..0.3, y1 in 0.0f64..0.5, y2 in 0.0f64..0.5) {
        let ext = zero_extend(Arc::new(ShearField { amp: 0.5 }), DomainBox::standard());
        let test = TestFunction::new([t, r, y1, y2], [0.125; 4], 1.0);
        let q = 1.0 / 64.0;
        let vol = trace_pairing(&ext, &test, q);
        let bdry = gauss_green_boundary(&ext, &test, q);
        prop_assert!((vol - bdry).abs() <= 1e-6 * test.c1_norm(), "{vol} vs {bdry}");
    }
}

#[test]
fn constant_field_has_constant_trace() {
    let f = ConstantField([1.0, 0.3, -0.2]);
    let src = TraceSource::field(&f);
    for side in [TraceSide::Minus, TraceSide::Plus] {
        let p = one_sided_trace(&src, SourceTag::B, 0.25, side, grid()).unwrap();
        assert!(p.values.iter().all(|&v| v == -1.0));
    }
    let jump = trace_jump(&src, SourceTag::B, 0.25, grid()).unwrap();
    assert_eq!(jump.max_abs(), 0.0);
}

#[test]
fn trace_depends_only_on_the_field_near_the_plane() {
    // Truncating deeper scales leaves the field on r > 2^(2-6) unchanged.
    let coarse = assemble_field(ConstructionVariant::new(VariantTag::Outward, 6).unwrap());
    let fine = assemble_field(ConstructionVariant::new(VariantTag::Outward, 8).unwrap());
    let g = ProfileGrid::new(0.5, 1.0, 4, 0.125, 64);
    for r0 in [0.25, 0.125] {
        let a = one_sided_trace(&TraceSource::field(&coarse), SourceTag::B, r0, TraceSide::Minus, g).unwrap();
        let b = one_sided_trace(&TraceSource::field(&fine), SourceTag::B, r0, TraceSide::Minus, g).unwrap();
        assert_eq!(a.values, b.values, "r0 = {r0}");
    }
}

#[test]
fn unresolved_planes_are_rejected() {
    let src_field = ShearField { amp: 0.5 };
    let src = TraceSource::field(&src_field);
    let err = one_sided_trace(&src, SourceTag::B, 0.3, TraceSide::Minus, grid()).unwrap_err();
    assert!(matches!(err, Error::Resolution(_)), "{err}");
    let err = one_sided_trace(&src, SourceTag::B, 0.0, TraceSide::Plus, grid()).unwrap_err();
    assert!(matches!(err, Error::Resolution(_)), "{err}");
}

#[test]
fn l1_distance_is_normalized() {
    let a = TraceProfile::constant(grid(), 0.25, SourceTag::B, 0.0);
    let b = TraceProfile::constant(grid(), 0.25, SourceTag::B, 1.0);
    assert!((a.l1_distance(&b) - 1.0).abs() < 1e-14);
    assert!((b.mean() - 1.0).abs() < 1e-14);
}

#[test]
fn initial_trace_recovers_continuous_data() {
    let exact = ShearExact { field: ShearField { amp: 0.5 } };
    let g = make_grid(DomainBox::standard(), 3).unwrap();
    let w0 = initial_trace(&exact, &g, 0.01, 4).unwrap();
    let direct = box_averages(&exact, &g, 0.0, 4);
    let err = w0.values.iter().zip(&direct.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-4, "{err}");
}

#[test]
fn initial_trace_refuses_oscillating_data() {
    // Alternates sign at every halving of t.
    let osc = FnSolution::new("osc", 1.0, |t: f64, _| (std::f64::consts::PI * t.log2()).cos());
    let g = make_grid(DomainBox::standard(), 3).unwrap();
    let err = initial_trace(&osc, &g, 0.01, 1).unwrap_err();
    assert!(matches!(err, Error::Resolution(_)), "{err}");
}
