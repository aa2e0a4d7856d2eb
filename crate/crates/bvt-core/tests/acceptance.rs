//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use bvt_core::catalog::{assemble_field, exact_solution, ConstructionVariant, VariantTag};
use bvt_core::geometry::VelocityField;
use bvt_core::harness::*;
use bvt_core::solution::ScalarSolution;

/// Average of `g(t, y1, y2)` over `t in ]1/2, 1[` and one lateral period,
/// sampled along the additive recurrence generated by the root of x^4 = x + 1
/// (equidistributed, no lattice aliasing with dyadic patterns).
fn plane_average(n: usize, g: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let phi = 1.220_744_084_605_759_6_f64;
    let a = [1.0 / phi, 1.0 / (phi * phi), 1.0 / (phi * phi * phi)];
    let mut acc = 0.0;
    for i in 0..n {
        let s = |c: f64| (0.5 + c * (i + 1) as f64).fract();
        acc += g(0.5 + 0.5 * s(a[0]), 0.5 * s(a[1]), 0.5 * s(a[2]));
    }
    acc / n as f64
}

/// Independent estimate of the normal component `-b_r` just inside `r = r0`.
fn normal_mean(field: &dyn VelocityField, r0: f64) -> f64 {
    plane_average(1 << 20, |t, y1, y2| -field.eval(t, [r0 * (1.0 + 1e-7), y1, y2])[0])
}

/// Independent estimate of `-b_r u` just inside `r = r0`.
fn flux_mean(field: &dyn VelocityField, u: &dyn ScalarSolution, r0: f64) -> f64 {
    plane_average(1 << 20, |t, y1, y2| {
        let x = [r0 * (1.0 + 1e-7), y1, y2];
        -field.eval(t, x)[0] * u.eval(t, x)
    })
}

fn variant(tag: VariantTag, k: u32) -> ConstructionVariant {
    ConstructionVariant::new(tag, k).expect("valid variant")
}

struct Line {
    n: usize,
    ok: bool,
    text: String,
}

fn line(n: usize, records: &[CheckRecord], extra: &[(String, bool)]) -> Line {
    let ok = records.iter().all(|r| r.status.ok()) && extra.iter().all(|e| e.1);
    let mut parts: Vec<String> = records.iter().map(|r| r.line()).collect();
    parts.extend(extra.iter().map(|e| format!("{} [{}]", e.0, if e.1 { "ok" } else { "bad" })));
    Line { n, ok, text: parts.join(" | ") }
}

#[test]
fn all_criteria() {
    let mut lines = Vec::new();

    lines.push(line(1, &[check_divergence(3..=6)], &[]));

    // Direct plane averages on r = 2^-6, against the exact limits +1 and -1.
    let out = assemble_field(variant(VariantTag::Outward, 8));
    let inw = assemble_field(variant(VariantTag::InwardDepauw, 8));
    let r6 = 1.0 / 64.0;
    let (mo, mi) = (normal_mean(&out, r6), normal_mean(&inw, r6));
    let bound = 4.0 * 4.0 * r6;
    lines.push(line(
        2,
        &[check_boundary_trace(VariantTag::Outward, 8), check_boundary_trace(VariantTag::InwardDepauw, 8)],
        &[
            (format!("direct outward mean {mo:+.4} vs +1"), (mo - 1.0).abs() <= bound),
            (format!("direct inward mean {mi:+.4} vs -1"), (mi + 1.0).abs() <= bound),
        ],
    ));

    // Average of the nontrivial solution over a full lateral period inside r < t.
    let u_out = exact_solution(variant(VariantTag::Outward, 8));
    let avg = {
        let n = 128;
        let mut acc = 0.0;
        for i in 0..n {
            let r = 0.25 + 0.25 * (i as f64 + 0.41) / n as f64;
            for j in 0..n {
                let y1 = 0.5 * (j as f64 + 0.37) / n as f64;
                for l in 0..n {
                    let y2 = 0.5 * (l as f64 + 0.29) / n as f64;
                    acc += u_out.eval(0.75, [r, y1, y2]);
                }
            }
        }
        acc / (n * n * n) as f64
    };
    lines.push(line(
        3,
        &[check_outward_nonuniqueness(8, RESIDUAL_Q, RESIDUAL_TOL), check_residual_control(8, RESIDUAL_Q)],
        &[(format!("direct period average {avg:.4} vs 1/4"), (avg - 0.25).abs() <= 0.02)],
    ));

    lines.push(line(4, &[check_inward_witness(8, RESIDUAL_Q, RESIDUAL_TOL)], &[]));

    let cor = assemble_field(variant(VariantTag::Corollary, 8));
    let u_cor = exact_solution(variant(VariantTag::Corollary, 8));
    let fo = flux_mean(&out, &u_out, r6);
    let fc = flux_mean(&cor, &u_cor, r6);
    lines.push(line(
        5,
        &[check_corollary(8)],
        &[
            (format!("direct outward flux mean {fo:+.4} vs -1/4"), (fo + 0.25).abs() <= 0.02),
            (format!("direct corollary flux mean {fc:+.4} vs 0"), fc.abs() <= 4.0 * r6),
        ],
    ));

    lines.push(line(6, &[check_renormalization(6)], &[]));
    lines.push(line(7, &[check_strong_l1(8)], &[]));
    lines.push(line(8, &[check_wellposed(6), check_l2_balance(5)], &[]));
    lines.push(line(9, &[check_gronwall(8, 6, 1.0 / 128.0)], &[]));
    lines.push(line(10, &[check_mixing(8)], &[]));
    lines.push(line(11, &[check_flow_oracle(3)], &[]));

    for l in &lines {
        println!("criterion {}: {} {}", l.n, if l.ok { "PASS" } else { "FAIL" }, l.text);
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.ok).map(|l| l.n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
