use boundary_kpz::experiments::{self, ExperimentConfig, Kind, Manifest};
use boundary_kpz::Error;

fn small_spectrum(name: &str, tolerance: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::with_defaults(name, Kind::Spectrum, 0);
    let p = cfg.spectrum.as_mut().unwrap();
    p.n = 64;
    p.k_max = 32;
    p.oracle_modes = 32;
    p.tolerance = tolerance;
    cfg
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_spectrum("spec", 1e-6);
    let a = experiments::run_experiment(&cfg, &dir.path().join("a")).unwrap();
    let b = experiments::run_experiment(&cfg, &dir.path().join("b")).unwrap();
    assert!(a.passed);
    assert_eq!(a.id, b.id);
    assert_eq!(a.artifacts, b.artifacts);
    for art in &a.artifacts {
        let x = std::fs::read(dir.path().join("a/spec").join(&art.path)).unwrap();
        let y = std::fs::read(dir.path().join("b/spec").join(&art.path)).unwrap();
        assert_eq!(x, y, "{}", art.path);
    }
    assert!(dir.path().join("a/spec/record.json").exists());
    assert!(dir.path().join("a/spec/config.toml").exists());
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = ExperimentConfig::with_defaults("g", Kind::Growth, 4);
    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, back);
    assert_eq!(cfg.id().unwrap(), back.id().unwrap());
    let other = ExperimentConfig::with_defaults("g", Kind::Growth, 5);
    assert_ne!(cfg.id().unwrap(), other.id().unwrap());
}

#[test]
fn unknown_keys_are_named_in_the_error() {
    let text = "name = \"x\"\n[spectrum]\nn = 64\nbogus = 1\n";
    match ExperimentConfig::from_toml(text) {
        Err(Error::Config { path, .. }) => assert!(path.contains("spectrum"), "{path}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn exactly_one_section_is_required() {
    assert!(matches!(ExperimentConfig::from_toml("name = \"x\"\n"), Err(Error::Config { .. })));
    let two = "name = \"x\"\n[spectrum]\n[renorm]\n";
    assert!(matches!(ExperimentConfig::from_toml(two), Err(Error::Config { .. })));
}

#[test]
fn duplicate_names_are_rejected() {
    let text = "[[experiment]]\nname = \"a\"\n[experiment.spectrum]\n\n[[experiment]]\nname = \"a\"\n[experiment.renorm]\n";
    assert!(matches!(Manifest::from_toml(text), Err(Error::Config { .. })));
}

#[test]
fn empty_manifest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = experiments::suite(&Manifest::from_toml("").unwrap(), dir.path()).unwrap();
    assert!(report.passed);
    assert!(report.entries.is_empty());
}

#[test]
fn a_failing_experiment_does_not_affect_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad_curve = small_spectrum("broken", 1e-6);
    bad_curve.spectrum.as_mut().unwrap().curve = "triangle".into();
    let manifest = Manifest {
        experiment: vec![
            small_spectrum("good", 1e-6),
            small_spectrum("strict", 0.0),
            bad_curve,
        ],
    };
    let report = experiments::suite(&manifest, dir.path()).unwrap();
    assert!(!report.passed);
    let by_name = |n: &str| report.entries.iter().find(|e| e.name == n).unwrap();
    assert!(by_name("good").record.as_ref().unwrap().passed);
    let strict = by_name("strict").record.as_ref().unwrap();
    assert!(!strict.passed);
    assert!(strict.checks.iter().any(|c| !c.passed));
    let broken = by_name("broken");
    assert!(broken.record.is_none());
    assert_eq!(broken.error_kind.as_deref(), Some("config"));
    assert!(dir.path().join("good/record.json").exists());
}

#[test]
fn linear_fit_recovers_a_line() {
    let x: Vec<f64> = (1..10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 2.0).collect();
    let (intercept, slope, r2) = experiments::linear_fit(&x, &y);
    assert!((slope - 0.5).abs() < 1e-12 && (intercept + 2.0).abs() < 1e-12);
    assert!((r2 - 1.0).abs() < 1e-12);
}
