// Sequential vs parallel execution of the ensemble hot paths.
// Build with `--no-default-features` to see the fallback without rayon.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use turbwig_core::background::BackgroundModel;
use turbwig_core::beam::{white_noise_propagate, ComplexBeam, GaussianBeam};
use turbwig_core::grid::TransverseGrid;
use turbwig_core::medium::synthesize_screens;
use turbwig_core::moments::{solve_mean_wm_with, MeanSolverOptions, WhiteNoiseModel};
use turbwig_core::par::{self, Execution};
use turbwig_core::rays::{trace_rays_sde, RayEnsemble, SdeOptions};
use turbwig_core::spectra::SpectrumModel;
use turbwig_core::wigner::{wigner_transform_with, WignerSampling};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn model() -> SpectrumModel {
    SpectrumModel::von_karman(1.0 / 3.0, 0.5, 2.0, 1.0, 1).unwrap()
}

fn beam(grid: &TransverseGrid) -> ComplexBeam {
    ComplexBeam::gaussian(grid, 1.0, 1.0, GaussianBeam::centered(2.0)).unwrap()
}

fn screen_ensemble(c: &mut Criterion) {
    let grid = TransverseGrid::new(1, 256, 0.2).unwrap();
    let b = beam(&grid);
    let m = model();
    let mut group = c.benchmark_group("white_noise_ensemble_32");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| {
                let norms = par::map(exec, 32, |r| {
                    let s = synthesize_screens(&m, &grid, 100, 5e-3, 1, r as u64).unwrap();
                    white_noise_propagate(&b, &s).unwrap().norm_sq()
                });
                black_box(norms)
            })
        });
    }
    group.finish();
}

fn wigner(c: &mut Criterion) {
    let grid = TransverseGrid::new(1, 1024, 0.1).unwrap();
    let b = beam(&grid);
    let mut group = c.benchmark_group("wigner_transform_1024");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| black_box(wigner_transform_with(&b, WignerSampling { stride: 1, exec }).unwrap()))
        });
    }
    group.finish();
}

fn mean_solver(c: &mut Criterion) {
    let grid = TransverseGrid::new(1, 256, 0.2).unwrap();
    let w0 = wigner_transform_with(&beam(&grid), WignerSampling { stride: 2, exec: Execution::Sequential }).unwrap();
    let wn = WhiteNoiseModel::wigner_moyal(model(), 1.0, 1.0, BackgroundModel::default()).unwrap();
    let mut group = c.benchmark_group("mean_wm_256");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| {
                let opts = MeanSolverOptions { exec, ..Default::default() };
                black_box(solve_mean_wm_with(&w0, &wn, 0.5, opts).unwrap())
            })
        });
    }
    group.finish();
}

fn rays(c: &mut Criterion) {
    let wn = WhiteNoiseModel::liouville(model(), 1.0, BackgroundModel::default()).unwrap();
    let start = RayEnsemble::gaussian(1, 4096, [0.0, 0.0], 1.0, [0.0, 0.0], 0.1, 3).unwrap();
    let mut group = c.benchmark_group("ray_sde_4096");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| {
                let opts = SdeOptions { tuple_size: 1, dz: 1e-2, seed: 9, exec };
                black_box(trace_rays_sde(&start, &wn, 1.0, opts).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, screen_ensemble, wigner, mean_solver, rays);
criterion_main!(benches);
