use std::f64::consts::TAU;

use boundary_kpz::growth::{self, DiskMetric, GrowthConfig, InterfaceState, KernelSpec, ParticleState};
use boundary_kpz::rng::GaussianStream;
use boundary_kpz::spde::KernelK;
use boundary_kpz::{Domain, Error};

fn disk(n: usize) -> Domain {
    Domain::from_preset(&"disk".parse().unwrap(), n).unwrap()
}

#[test]
fn first_exit_from_the_center_is_uniform() {
    let n = 400;
    let angles: Vec<f64> = (0..n).map(|s| growth::first_exit_angle(1e-3, s).unwrap()).collect();
    let (c, s) = angles
        .iter()
        .fold((0.0, 0.0), |(c, s), a| (c + a.cos() / n as f64, s + a.sin() / n as f64));
    // each of cos and sin has variance 1/2
    let sigma = (0.5 / n as f64).sqrt();
    assert!(c.abs() < 3.0 * sigma && s.abs() < 3.0 * sigma, "({c}, {s})");

    let mut bins = [0usize; 8];
    for a in &angles {
        bins[((a / TAU * 8.0) as usize).min(7)] += 1;
    }
    let expected = n as f64 / 8.0;
    let chi2: f64 = bins.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 7 degrees of freedom
    assert!(chi2 < 24.32, "chi2 = {chi2}, bins {bins:?}");
}

#[test]
fn flat_local_time_rate_is_one_and_step_stable() {
    let rate = |delta: f64| {
        let v: Vec<f64> = (0..100)
            .map(|s| growth::flat_local_time(20.0, delta, s).unwrap() / 20.0)
            .collect();
        growth::mean_and_error(&v)
    };
    let (coarse, ec) = rate(1e-3);
    let (fine, ef) = rate(1e-4);
    assert!((coarse - fine).abs() < 3.0 * ec.hypot(ef), "{coarse} vs {fine}");
    assert!((fine - 1.0).abs() < 3.0 * ef, "{fine} ± {ef}");
}

#[test]
fn boundary_start_with_tiny_target_stays_close() {
    let start = 1.3;
    let mut noise = GaussianStream::new(5, 0);
    let mut contacts = Vec::new();
    let p = growth::reflected_bm_run(
        ParticleState::on_boundary(start),
        &DiskMetric::flat(),
        1e-6,
        1e-6,
        &mut noise,
        &mut contacts,
    )
    .unwrap();
    let q = p.boundary_angle.unwrap();
    let gap = (q - start + TAU / 2.0).rem_euclid(TAU) - TAU / 2.0;
    assert!(gap.abs() < 0.05, "moved to {q}");
    let credited: f64 = contacts.iter().map(|c| c.local_time).sum();
    assert!((credited - 1e-6).abs() < 1e-15);
    assert!(p.position[0].hypot(p.position[1]) <= 1.0 + 1e-15);
}

#[test]
fn particle_rejects_coarse_steps_and_stale_targets() {
    let mut noise = GaussianStream::new(0, 0);
    let mut contacts = Vec::new();
    let flat = DiskMetric::flat();
    let p = ParticleState::at_center();
    assert!(matches!(
        growth::reflected_bm_run(p, &flat, 1.0, 0.1, &mut noise, &mut contacts),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        growth::reflected_bm_run(p, &flat, 0.0, 1e-3, &mut noise, &mut contacts),
        Err(Error::Domain(_))
    ));
}

#[test]
fn fluctuation_field_inverts_affinely() {
    let d = disk(32);
    let mut s = InterfaceState::flat(&d, 0.3);
    s.t = 0.7;
    s.values = d.curve.field_fn(|t| 2.0 + t.cos());
    let y = growth::fluctuation_field(&s);
    let e = 0.3f64.powf(1.0 / 3.0);
    for (yv, iv) in y.values().iter().zip(s.values.values()) {
        assert!((e * yv + s.t / e - iv).abs() < 1e-12);
    }
}

#[test]
fn flat_metric_is_recovered_from_a_flat_interface() {
    let d = disk(32);
    assert!(DiskMetric::from_interface(&d, d.curve.constant(3.0).values()).is_flat());
    assert!(!DiskMetric::from_interface(&d, d.curve.field_fn(|t| 0.2 * t.sin()).values()).is_flat());
}

#[test]
fn spectral_bracket_is_linear_in_time() {
    let d = disk(64);
    let k = boundary_kpz::spde::make_kernel(&d.curve, &d.heat, 0.1).unwrap();
    for x in [0, 7, 40] {
        let a = growth::limit_bracket(&d.basis, &k, x, 0.3);
        let b = growth::limit_bracket(&d.basis, &k, x, 0.9);
        assert!(a > 0.0);
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
    }
}

#[test]
fn realized_qv_of_a_line_shrinks_with_the_mesh() {
    let series: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
    assert!((growth::realized_qv(&series, 1) - 1.0).abs() < 1e-15);
    assert!((growth::realized_qv(&series, 4) - 0.25).abs() < 1e-15);
}

#[test]
fn replicas_are_reproducible_from_their_seed() {
    let d = disk(32);
    let cfg = GrowthConfig {
        eps: 0.4,
        horizon: 0.05,
        mesh: 1,
        ..Default::default()
    };
    let k = cfg.kernel.build(&d).unwrap();
    let a = growth::run_growth(&cfg, &d, &k, 9).unwrap();
    let b = growth::run_growth(&cfg, &d, &k, 9).unwrap();
    let c = growth::run_growth(&cfg, &d, &k, 10).unwrap();
    assert_eq!(a.int_noise, b.int_noise);
    assert_eq!(a.final_interface, b.final_interface);
    assert_ne!(a.int_noise, c.int_noise);
}

#[test]
fn growth_config_rejects_bad_meshes() {
    let cfg = GrowthConfig {
        mesh: 5,
        ..Default::default()
    };
    assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
    let cfg = GrowthConfig {
        eps: 1.5,
        ..Default::default()
    };
    assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
}

#[test]
fn constant_kernel_keeps_the_interface_flat() {
    let d = disk(32);
    let cfg = GrowthConfig {
        eps: 0.3,
        horizon: 0.1,
        kernel: KernelSpec::Constant,
        mesh: 2,
        ..Default::default()
    };
    let k = KernelK::constant(&d.curve);
    let run = growth::run_growth(&cfg, &d, &k, 3).unwrap();
    assert!(run.martingale[0].iter().all(|v| v.abs() < 1e-12));
    let expected = 0.3f64.powf(-1.0 / 3.0) * 0.1;
    assert!(run.final_interface.iter().all(|v| (v - expected).abs() < 1e-10));
}
