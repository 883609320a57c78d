use turbwig_core::background::BackgroundModel;
use turbwig_core::beam::{ComplexBeam, GaussianBeam};
use turbwig_core::grid::TransverseGrid;
use turbwig_core::moments::{
    solve_mean_inhomogeneous, solve_mean_liouville, solve_mean_wm, InhomogeneousOptions, WhiteNoiseModel,
};
use turbwig_core::spectra::SpectrumModel;
use turbwig_core::wigner::{gaussian_wigner, wigner_transform, PhaseAxes, WignerGrid};

fn model() -> SpectrumModel {
    SpectrumModel::von_karman(1.0 / 3.0, 0.5, 4.0, 0.2, 1).unwrap()
}

fn momentum_variance(w: &WignerGrid) -> f64 {
    let ps = w.axes.ps();
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for j in 0..w.axes.nx() {
        for (v, p) in w.row(j).iter().zip(&ps) {
            m0 += v;
            m1 += v * p;
            m2 += v * p * p;
        }
    }
    m2 / m0 - (m1 / m0).powi(2)
}

/// Liouville law for a Gaussian start: the state stays Gaussian with
/// Var_x + Var_p z^2/k^2 + D z^3/3, Cov = Var_p z/k + k D z^2/2,
/// Var_p + k^2 D z.
fn gaussian_law(width: f64, gamma: f64, k: f64, d0: f64, z: f64, x: f64, p: f64) -> f64 {
    let vx0 = width * width / 2.0;
    let vp0 = gamma * gamma / (2.0 * width * width);
    let vxx = vx0 + vp0 * z * z / (k * k) + d0 * z.powi(3) / 3.0;
    let vxp = vp0 * z / k + k * d0 * z * z / 2.0;
    let vpp = vp0 + k * k * d0 * z;
    let det = vxx * vpp - vxp * vxp;
    let q = (vpp * x * x - 2.0 * vxp * x * p + vxx * p * p) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

#[test]
fn liouville_mean_of_a_gaussian_matches_the_moment_law() {
    let (width, gamma, k, z) = (1.0, 1.0, 1.3, 1.5);
    let wn = WhiteNoiseModel::liouville(model(), k, BackgroundModel::default()).unwrap();
    let d0 = wn.diffusion_origin().unwrap();
    let axes = PhaseAxes::new(TransverseGrid::new(1, 128, 0.25).unwrap(), 128, 0.1).unwrap();
    let w0 = WignerGrid::from_fn(&axes, gamma, 0.0, |x, p| gaussian_wigner(0.0, width, 0.0, 0.0, gamma, x, p));
    let w = solve_mean_liouville(&w0, &wn, z).unwrap().into_grid().unwrap();
    let law = WignerGrid::from_fn(&axes, gamma, z, |x, p| gaussian_law(width, gamma, k, d0, z, x, p));
    let worst = w.values.iter().zip(&law.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-7 * law.sup_norm(), "worst {worst}");
}

#[test]
fn grid_pde_tracks_the_exact_liouville_solver() {
    let (gamma, k, z) = (1.0, 1.0, 1.0);
    let wn = WhiteNoiseModel::liouville(model(), k, BackgroundModel::default()).unwrap();
    let axes = PhaseAxes::new(TransverseGrid::new(1, 96, 0.25).unwrap(), 96, 0.1).unwrap();
    let w0 = WignerGrid::from_fn(&axes, gamma, 0.0, |x, p| gaussian_wigner(0.0, 1.0, 0.2, 0.0, gamma, x, p));
    let exact = solve_mean_liouville(&w0, &wn, z).unwrap().into_grid().unwrap();
    let opts = InhomogeneousOptions { nsteps: 200, ..Default::default() };
    let pde = solve_mean_inhomogeneous(&w0, &wn, z, opts).unwrap().into_grid().unwrap();
    assert!(pde.relative_l2_distance(&exact).unwrap() < 1e-3);
}

#[test]
fn wigner_moyal_momentum_spread_grows_like_the_diffusion_limit() {
    // g(y) = D(0) y^2 + O(y^4), so the second moment of the mean grows by
    // exactly k^2 D(0) z at any gamma; a low cutoff keeps the scattered
    // momenta inside the window
    let model = || SpectrumModel::von_karman(1.0 / 3.0, 0.5, 1.0, 0.2, 1).unwrap();
    let grid = TransverseGrid::new(1, 1024, 0.1).unwrap();
    let (k, z) = (1.0, 0.5);
    for gamma in [1.0, 0.5] {
        let beam = ComplexBeam::gaussian(&grid, gamma, k, GaussianBeam::centered(3.0)).unwrap();
        let w0 = wigner_transform(&beam).unwrap();
        let wn = WhiteNoiseModel::wigner_moyal(model(), gamma, k, BackgroundModel::default()).unwrap();
        let d0 = WhiteNoiseModel::liouville(model(), k, BackgroundModel::default()).unwrap().diffusion_origin().unwrap();
        let w = solve_mean_wm(&w0, &wn, z).unwrap().into_grid().unwrap();
        let growth = momentum_variance(&w) - momentum_variance(&w0);
        let expected = k * k * d0 * z;
        assert!((growth / expected - 1.0).abs() < 1e-3, "gamma {gamma}: {growth} vs {expected}");
    }
}
