use bvt_core::catalog::*;
use bvt_core::geometry::*;

fn max_div(field: &dyn VelocityField, level: u32, slab: (f64, f64)) -> f64 {
    let grid = make_grid(DomainBox::standard(), level).unwrap();
    let flux = sample_face_fluxes(field, &grid, slab).unwrap();
    let div = discrete_divergence(&flux, &grid);
    div.max_abs()
}

#[test]
fn beta_fields_are_discretely_divergence_free() {
    for k in 3..=6 {
        let level = k + 2;
        assert_eq!(max_div(&beta_k(k), level, (0.0, 1.0)), 0.0, "beta_{k}");
        assert_eq!(max_div(&tilde_beta_k(k), level, (0.0, 1.0)), 0.0, "tilde_beta_{k}");
    }
}

#[test]
fn assembled_fields_are_discretely_divergence_free() {
    for k in 4..=6u32 {
        let level = k + 2;
        let h = pow2(-(level as i32));
        for tag in VariantTag::ALL {
            let f = assemble_field(ConstructionVariant::new(tag, k).unwrap());
            for &tc in &[0.75 + h, 0.5 - 3.0 * h, 0.3125 + 5.0 * h, 0.2 - 0.2f64.rem_euclid(2.0 * h) + h] {
                let d = max_div(&f, level, (tc - 0.25 * h, tc + 0.25 * h));
                assert_eq!(d, 0.0, "{tag} K_max={k} t={tc}");
            }
        }
    }
}
