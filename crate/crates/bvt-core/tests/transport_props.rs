use bvt_core::catalog::{assemble_field, ConstructionVariant, VariantTag};
use bvt_core::geometry::{pow2, VelocityField, Y_PERIOD};
use bvt_core::transport::{flow_map, flow_trajectory, quarter_turn, quarter_turn_ode};
use proptest::prelude::*;

fn field(tag: VariantTag, k: u32) -> bvt_core::catalog::AssembledField {
    assemble_field(ConstructionVariant::new(tag, k).unwrap())
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dy = |u: f64, v: f64| {
        let d = (u - v).rem_euclid(Y_PERIOD);
        d.min(Y_PERIOD - d)
    };
    (a[0] - b[0]).abs().max(dy(a[1], b[1])).max(dy(a[2], b[2]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn piecewise_flow_is_invertible(r in 0.3f64..0.6, y1 in 0.0f64..0.5, y2 in 0.0f64..0.5) {
        // Tangential shear layers: the flow moves within r = const and is a
        // piecewise translation, so forward and backward maps compose exactly.
        let f = field(VariantTag::TangentOutward, 5);
        let x = [r, y1, y2];
        let there = flow_map(&f, 0.6, 0.9, x).unwrap();
        let back = flow_map(&f, 0.9, 0.6, there).unwrap();
        prop_assert!(dist(back, x) <= 1e-12, "{x:?} -> {there:?} -> {back:?}");
    }

    #[test]
    fn inward_flow_preserves_volume(r in 0.3f64..0.6, y1 in 0.0f64..0.5, y2 in 0.0f64..0.5) {
        // The flow is a piecewise rigid motion; the Jacobian is exact as long
        // as the stencil follows one sequence of pieces.
        let f = field(VariantTag::InwardDepauw, 5);
        let e = 1e-8;
        let x = [r, y1, y2];
        let ids = |p: [f64; 3]| {
            let tr = flow_trajectory(&f, 0.6, 0.7, p).unwrap();
            (tr.end, tr.events.iter().map(|ev| (ev.before, ev.after)).collect::<Vec<_>>())
        };
        let (_, path) = ids(x);
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            let (mut p, mut m) = (x, x);
            p[c] += e;
            m[c] -= e;
            let ((fp, pp), (fm, pm)) = (ids(p), ids(m));
            prop_assume!(pp == path && pm == path);
            for row in 0..3 {
                jac[row][c] = (fp[row] - fm[row]) / (2.0 * e);
            }
        }
        let det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
            - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
            + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
        prop_assert!((det - 1.0).abs() < 1e-6, "det {det}");
    }

    #[test]
    fn fields_are_laterally_periodic(r in 0.001f64..0.99, y1 in 0.0f64..0.5, y2 in 0.0f64..0.5, t in 0.0f64..1.0) {
        for tag in VariantTag::ALL {
            let f = field(tag, 6);
            let a = f.eval(t, [r, y1, y2]);
            for b in [f.eval(t, [r, y1 + Y_PERIOD, y2]), f.eval(t, [r, y1, y2 - Y_PERIOD])] {
                let d = (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max);
                prop_assert!(d <= 1e-12, "{tag}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn quarter_turn_four_times_is_identity(k in 3u32..9, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let hw = pow2(-2 - k as i32);
        let x = [a * hw, b * hw];
        let mut y = x;
        for _ in 0..4 {
            y = quarter_turn(k, y);
        }
        prop_assert_eq!(x, y);
    }
}

#[test]
fn quarter_turn_permutes_a_centered_lattice() {
    // Measure preservation on the block: the image of a symmetric lattice is
    // the same lattice.
    let k = 4;
    let hw = pow2(-2 - k as i32);
    let n = 16;
    let pts: Vec<[f64; 2]> = (0..n)
        .flat_map(|i| (0..n).map(move |j| [((i as f64 + 0.5) / n as f64 * 2.0 - 1.0) * hw, ((j as f64 + 0.5) / n as f64 * 2.0 - 1.0) * hw]))
        .collect();
    let key = |p: [f64; 2]| ((p[0] / hw * 1e6).round() as i64, (p[1] / hw * 1e6).round() as i64);
    let mut before: Vec<_> = pts.iter().map(|&p| key(p)).collect();
    let mut after: Vec<_> = pts.iter().map(|&p| key(quarter_turn(k, p))).collect();
    before.sort_unstable();
    after.sort_unstable();
    assert_eq!(before, after);
}

#[test]
fn ode_quarter_turn_matches_rotation() {
    let k = 3;
    let hw = pow2(-2 - k as i32);
    for &(a, b) in &[(0.3, 0.1), (-0.7, 0.45), (0.05, -0.9), (0.61, 0.62)] {
        let x = [a * hw, b * hw];
        let exact = quarter_turn(k, x);
        let ode = quarter_turn_ode(k, x, 4000);
        assert!((exact[0] - ode[0]).abs() < 1e-10 && (exact[1] - ode[1]).abs() < 1e-10, "{x:?}: {exact:?} vs {ode:?}");
    }
}
