use proptest::prelude::*;
use turbwig_core::grid::TransverseGrid;
use turbwig_core::medium::{empirical_covariance, synthesize_screens, synthesize_volume, VolumeSpec};
use turbwig_core::spectra::{covariance_function, SpectrumModel};

#[test]
fn synthesized_volumes_reproduce_the_model_covariance() {
    // a smooth field, so the spectral mass beyond the lattice Nyquist
    // (about K^-2H / 2H of the variance) stays well under one percent
    let model = SpectrumModel::von_karman(0.75, 1.0, f64::INFINITY, 1.0, 1).unwrap();
    let grid = TransverseGrid::new(1, 256, 0.125).unwrap();
    let reals: Vec<_> = (0..40)
        .map(|r| synthesize_volume(&model, &grid, VolumeSpec { nz: 256, dz_field: 0.125 }, 17, r).unwrap())
        .collect();
    let refs: Vec<_> = reals.iter().collect();
    let lags = vec![vec![0], vec![4], vec![8], vec![16]];
    for est in empirical_covariance(&refs, &lags).unwrap() {
        let exact = covariance_function(&model, &[est.lag[0] as f64 * 0.125]).unwrap();
        assert!(
            (est.value - exact).abs() < 3.0 * est.std_err + 0.01,
            "lag {:?}: {} +- {} vs {exact}",
            est.lag,
            est.value,
            est.std_err
        );
    }
}

#[test]
fn screens_have_white_noise_variance_scaling() {
    // the phase of one step, S dz, has variance dz C(0), so screen values
    // scale like 1 / dz
    let model = SpectrumModel::von_karman(1.0 / 3.0, 0.5, 2.0, 1.0, 1).unwrap();
    let grid = TransverseGrid::new(1, 128, 0.25).unwrap();
    let var = |dz: f64| {
        let mut acc = 0.0;
        let mut n = 0usize;
        for r in 0..20 {
            let s = synthesize_screens(&model, &grid, 50, dz, 5, r).unwrap();
            acc += s.values.iter().map(|v| v * v).sum::<f64>();
            n += s.values.len();
        }
        acc / n as f64
    };
    let ratio = var(0.01) / var(0.02);
    assert!((ratio - 2.0).abs() < 0.1, "variance ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn realizations_are_reproducible(seed in any::<u64>(), r in 0u64..1000) {
        let model = SpectrumModel::von_karman(1.0 / 3.0, 0.5, 2.0, 1.0, 1).unwrap();
        let grid = TransverseGrid::new(1, 32, 0.5).unwrap();
        let spec = VolumeSpec { nz: 16, dz_field: 0.5 };
        let a = synthesize_volume(&model, &grid, spec, seed, r).unwrap();
        let b = synthesize_volume(&model, &grid, spec, seed, r).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}
