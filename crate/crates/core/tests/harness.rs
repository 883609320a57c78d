use turbwig_core::config::ExperimentConfig;
use turbwig_core::error::Error;
use turbwig_core::harness::{report, run_convergence_liouville, run_convergence_wm, ConvergenceReport};

const SMALL_WM: &str = r#"
schema_version = 1
regime = "wigner-moyal"
seed = 3

[spectrum]
form = "von-karman"
hurst = 0.3333333333333333
eta = 0.5
rho = 1.0
amplitude = 1.0

[grid]
n = 128
dx = 0.25

[physics]
z = 0.1

[beam]
width = 2.0

[ensemble]
realizations = 8
groups = 4
batch = 3

[schedule]
condition = "wm-fixed-eta"
epsilons = [0.5, 0.35]
"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(SMALL_WM).unwrap()
}

#[test]
fn zero_distance_reproduces_the_initial_state_exactly() {
    let mut cfg = small();
    cfg.physics.z = 0.0;
    let r = run_convergence_wm(&cfg).unwrap();
    for p in &r.points {
        assert!(p.error < 1e-14 && p.std_err < 1e-14, "{p:?}");
    }
}

#[test]
fn report_survives_json_and_csv() {
    let mut r = run_convergence_wm(&small()).unwrap();
    assert_eq!(r.points.len(), 2);
    // timings are kept out of the serialized report
    r.wall_clock_seconds.clear();
    assert_eq!(ConvergenceReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    let csv = r.to_csv().unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let width = reader.headers().unwrap().len();
    let rows: Vec<_> = reader.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|row| row.len() == width));
    let eps: f64 = rows[1][4].parse().unwrap();
    assert_eq!(eps, 0.35);
}

#[test]
fn bundle_manifest_hashes_the_csv() {
    let r = run_convergence_wm(&small()).unwrap();
    let bundle = report(&[("a".to_string(), r.clone()), ("b".to_string(), r)]).unwrap();
    assert_eq!(bundle.csv.lines().count(), 5);
    let sha = bundle.manifest["files"]["report.csv"].as_str().unwrap();
    use sha2::{Digest, Sha256};
    assert_eq!(sha, hex::encode(Sha256::digest(bundle.csv.as_bytes())));
    assert!(bundle.summary.contains("wm-fixed-eta"));
}

#[test]
fn work_ceiling_stops_the_run_before_it_starts() {
    let mut cfg = small();
    cfg.limits.max_work = 10.0;
    assert!(matches!(run_convergence_wm(&cfg), Err(Error::ResourceCeiling(_))));
}

#[test]
fn wrong_regime_is_refused() {
    assert!(matches!(run_convergence_liouville(&small()), Err(Error::Config(_))));
}
