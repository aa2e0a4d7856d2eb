use std::hint::black_box;

use bvt_core::catalog::{assemble_field, exact_solution, ConstructionVariant, VariantTag};
use bvt_core::fv::{face_speed, residual_battery, upwind_step, weak_residual, BatteryKind, BoundaryData, WeakData, MAX_CFL};
use bvt_core::geometry::{make_grid, sample_face_fluxes, CellScalarField, DomainBox};
use bvt_core::harness::RESIDUAL_Q;
use bvt_core::transport::flow_map;
use criterion::{criterion_group, criterion_main, Criterion};

fn outward(k: u32) -> bvt_core::catalog::AssembledField {
    assemble_field(ConstructionVariant::new(VariantTag::Outward, k).expect("valid variant"))
}

fn face_sampling(c: &mut Criterion) {
    let field = outward(6);
    let grid = make_grid(DomainBox::standard(), 6).unwrap();
    c.bench_function("sample_face_fluxes/level6", |b| {
        b.iter(|| sample_face_fluxes(&field, &grid, black_box((0.6, 0.61))).unwrap())
    });
}

fn flow(c: &mut Criterion) {
    let field = outward(6);
    c.bench_function("flow_map/outward_k6", |b| {
        b.iter(|| flow_map(&field, 0.0, 0.9, black_box([0.3, 0.123, 0.377])).unwrap())
    });
}

fn upwind(c: &mut Criterion) {
    let field = outward(6);
    let grid = make_grid(DomainBox::standard(), 6).unwrap();
    let flux = sample_face_fluxes(&field, &grid, (0.6, 0.61)).unwrap();
    let mut state = CellScalarField::zeros(grid, 0.6);
    for (i, v) in state.values.iter_mut().enumerate() {
        *v = ((i * 37) % 11) as f64 / 11.0;
    }
    let dt = 0.9 * MAX_CFL * grid.h / face_speed(&flux);
    let bc = BoundaryData::zero();
    c.bench_function("upwind_step/level6", |b| {
        b.iter(|| upwind_step(black_box(&state), &flux, dt, 0.6, &bc, None).unwrap())
    });
}

fn residual(c: &mut Criterion) {
    let v = ConstructionVariant::new(VariantTag::Outward, 6).unwrap();
    let field = assemble_field(v);
    let u = exact_solution(v);
    let test = residual_battery(BatteryKind::AwayFromBoundary)[10];
    c.bench_function("weak_residual/outward_k6", |b| {
        b.iter(|| weak_residual(&u, &field, black_box(&test), WeakData::zero(), DomainBox::standard(), RESIDUAL_Q).unwrap())
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = face_sampling, flow, upwind, residual
}
criterion_main!(kernels);
