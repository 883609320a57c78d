use proptest::prelude::*;
use turbwig_core::spectra::{
    covariance_closed_form, covariance_quadrature, structure_function, transverse_spectrum, SpectrumModel,
};

#[test]
fn closed_form_covariance_agrees_with_spectral_quadrature() {
    for (hurst, dim) in [(0.25, 1), (1.0 / 3.0, 1), (0.7, 2)] {
        let m = SpectrumModel::von_karman(hurst, 0.8, f64::INFINITY, 1.3, dim).unwrap();
        for (i, r) in [0.1f64, 0.7, 2.0, 5.0].into_iter().enumerate() {
            // (t, x): alternate between a time lag and a transverse lag
            let mut x = vec![0.0; dim + 1];
            x[i % 2] = r;
            let a = covariance_closed_form(&m, r).unwrap();
            let b = covariance_quadrature(&m, &x).unwrap();
            assert!((a - b).abs() < 1e-7 * 1.3, "H={hurst} d={dim} r={r}: {a} vs {b}");
        }
    }
}

#[test]
fn structure_function_is_twice_the_covariance_drop() {
    let m = SpectrumModel::von_karman(1.0 / 3.0, 0.5, f64::INFINITY, 1.0, 1).unwrap();
    let b0 = covariance_closed_form(&m, 0.0).unwrap();
    for r in [0.05, 0.5, 3.0] {
        let d = structure_function(&m, r).unwrap();
        let expected = 2.0 * (b0 - covariance_closed_form(&m, r).unwrap());
        assert!((d - expected).abs() < 1e-7, "r={r}: {d} vs {expected}");
    }
}

#[test]
fn ultraviolet_cutoff_lowers_the_transverse_integral() {
    let open = SpectrumModel::von_karman(0.5, 1.0, f64::INFINITY, 1.0, 1).unwrap();
    let cut = SpectrumModel::von_karman(0.5, 1.0, 2.0, 1.0, 1).unwrap();
    let a = transverse_spectrum(&open).integral().unwrap();
    let b = transverse_spectrum(&cut).integral().unwrap();
    assert!(b < a && b > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn covariance_is_bounded_by_the_variance(hurst in 0.1f64..0.9, eta in 0.2f64..3.0, r in 0.0f64..10.0) {
        let m = SpectrumModel::von_karman(hurst, eta, f64::INFINITY, 1.0, 1).unwrap();
        let b0 = covariance_closed_form(&m, 0.0).unwrap();
        let b = covariance_closed_form(&m, r).unwrap();
        prop_assert!((b0 - 1.0).abs() < 1e-12);
        prop_assert!(b <= b0 + 1e-12 && b >= 0.0);
    }

    #[test]
    fn spectrum_decays_monotonically(hurst in 0.1f64..0.9, k in 0.0f64..50.0) {
        let m = SpectrumModel::von_karman(hurst, 1.0, f64::INFINITY, 1.0, 1).unwrap();
        prop_assert!(m.radial(k + 0.5) < m.radial(k));
    }
}
