use turbwig_core::background::BackgroundModel;
use turbwig_core::grid::TransverseGrid;
use turbwig_core::medium::{synthesize_volume, VolumeSpec};
use turbwig_core::moments::WhiteNoiseModel;
use turbwig_core::par::Execution;
use turbwig_core::rays::{trace_rays_medium, trace_rays_sde, MediumTraceOptions, RayEnsemble, SdeOptions};
use turbwig_core::spectra::SpectrumModel;

fn model(amplitude: f64) -> SpectrumModel {
    SpectrumModel::von_karman(1.0 / 3.0, 0.5, 4.0, amplitude, 1).unwrap()
}

#[test]
fn sde_rays_follow_the_diffusion_moment_laws() {
    let (k, z, sx, sp) = (1.2, 2.0, 0.5, 0.1);
    let wn = WhiteNoiseModel::liouville(model(0.3), k, BackgroundModel::default()).unwrap();
    let d0 = wn.diffusion_origin().unwrap();
    let n = 20_000;
    let start = RayEnsemble::gaussian(1, n, [0.0, 0.0], sx, [0.0, 0.0], sp, 4).unwrap();
    let opts = SdeOptions { tuple_size: 1, dz: 1e-2, seed: 8, exec: Execution::Parallel };
    let end = trace_rays_sde(&start, &wn, z, opts).unwrap();
    let vp = sp * sp + k * k * d0 * z;
    let vx = sx * sx + sp * sp * z * z / (k * k) + d0 * z.powi(3) / 3.0;
    // Gaussian sample variance has relative standard error sqrt(2/n)
    let tol = 3.0 * (2.0 / n as f64).sqrt();
    assert!((end.momentum_variance(0) / vp - 1.0).abs() < tol);
    assert!((end.position_variance(0) / vx - 1.0).abs() < tol);
}

#[test]
fn silent_medium_leaves_rays_straight() {
    let grid = TransverseGrid::new(1, 128, 0.5).unwrap();
    let real = synthesize_volume(&model(0.0), &grid, VolumeSpec::covering(1.0, 0.5, 0.25, 1.0), 2, 0)
        .unwrap()
        .with_epsilon(0.5);
    let start = RayEnsemble::gaussian(1, 64, [0.0, 0.0], 5.0, [0.3, 0.0], 0.2, 1).unwrap();
    let k = 2.0;
    let opts = MediumTraceOptions { ktilde: k, dz: 0.01, exec: Execution::Sequential };
    let end = trace_rays_medium(&start, Some(&real), &BackgroundModel::default(), 1.0, opts).unwrap();
    for i in 0..start.len() {
        assert_eq!(end.momenta[i], start.momenta[i]);
        let x = start.positions[i] + start.momenta[i] / k;
        assert!((end.positions[i] - x).abs() < 1e-12);
    }
}

#[test]
fn medium_tracing_refuses_to_run_past_the_volume() {
    let grid = TransverseGrid::new(1, 64, 0.5).unwrap();
    let real = synthesize_volume(&model(1.0), &grid, VolumeSpec { nz: 8, dz_field: 0.25 }, 2, 0)
        .unwrap()
        .with_epsilon(0.5);
    let start = RayEnsemble::gaussian(1, 8, [0.0, 0.0], 1.0, [0.0, 0.0], 0.0, 1).unwrap();
    let opts = MediumTraceOptions { ktilde: 1.0, dz: 0.01, exec: Execution::Sequential };
    assert!(trace_rays_medium(&start, Some(&real), &BackgroundModel::default(), 5.0, opts).is_err());
}
