use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use perichannel::assembly::{assemble_convection_skew, SparseSystem};
use perichannel::{build_channel_mesh, solve_navier_stokes, solve_stokes, DofMap, SolveOptions};
use perichannel_bench::{discretization, wavy, SIZES};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for n in SIZES {
        let mesh = build_channel_mesh(&wavy(), n, n).unwrap();
        let dofs = DofMap::new(&mesh).unwrap();
        group.bench_with_input(BenchmarkId::new("stokes_blocks", n), &n, |b, _| {
            b.iter(|| SparseSystem::assemble(black_box(&mesh), &dofs, 1.0).unwrap())
        });
        let u: Vec<f64> = (0..dofs.num_velocity()).map(|i| (i as f64).sin()).collect();
        group.bench_with_input(BenchmarkId::new("convection", n), &n, |b, _| {
            b.iter(|| assemble_convection_skew(&mesh, &dofs, black_box(&u)))
        });
    }
    group.finish();
}

fn solves(c: &mut Criterion) {
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for n in SIZES {
        let disc = discretization(n);
        group.bench_with_input(BenchmarkId::new("stokes", n), &n, |b, _| {
            b.iter(|| solve_stokes(&disc, black_box(1.0), &opts).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("navier_stokes", n), &n, |b, _| {
            b.iter(|| solve_navier_stokes(&disc, black_box(1.0), &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, solves);
criterion_main!(benches);
