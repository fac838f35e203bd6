use meanband::bands::{band_from_stats, covers, BandKind};
use meanband::estimator::{
    estimate, fit, per_curve_coeffs, pooled_stats, theoretical_levels, truncated_target, Rule,
};
use meanband::grid_basis::{make_grid, BasisFamily};
use meanband::metrics::omega_event_check;
use meanband::process_sim::{
    derive_seed, eval_signal, generate_panel, sigma_k_theoretical, CurvePanel, PanelConfig, ProcessSpec,
    SignalSpec,
};
use ndarray::Array2;

fn bb_config(n: usize, m: usize, noise_sd: f64) -> PanelConfig<f64> {
    PanelConfig {
        n,
        grid: make_grid(m).unwrap(),
        signal: SignalSpec::signal1_default(),
        process: ProcessSpec::brownian_bridge(),
        noise_sd,
        seed: 0,
    }
}

#[test]
fn pooled_coefficients_are_unbiased() {
    let config = bb_config(40, 32, 0.4);
    let basis = BasisFamily::Fourier.build(&config.grid).unwrap();
    let mu = basis.analyze(&eval_signal(&config.signal, &config.grid).unwrap()).unwrap();
    let reps = 600;
    let draws: Vec<Vec<f64>> = (0..reps)
        .map(|s| {
            let p = generate_panel(&config.with_seed(derive_seed(1, s))).unwrap();
            let (stats, _) = fit(&p, &basis, Rule::LeastSquares, 1.0, 0.05, 0.0).unwrap();
            stats.mu_hat().to_vec()
        })
        .collect();
    for k in [0, 1, 2, 7, 31] {
        let xs: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let se = sd / (reps as f64).sqrt();
        assert!((mean - mu[k]).abs() < 4.0 * se, "k={k}: mean {mean}, mu {}, se {se}", mu[k]);
    }
}

#[test]
fn sample_spread_tracks_population_variance() {
    // E[S_k^2] = sigma_k^2 + sigma_eps^2 / m.
    let config = bb_config(50, 32, 0.5);
    let basis = BasisFamily::Fourier.build(&config.grid).unwrap();
    let sigma2 = sigma_k_theoretical(&config.process, &basis).unwrap();
    let reps = 400;
    let mut acc = vec![0.0; 32];
    let mut acc2 = vec![0.0; 32];
    for s in 0..reps {
        let p = generate_panel(&config.with_seed(derive_seed(2, s))).unwrap();
        let stats = pooled_stats(&per_curve_coeffs(&p, &basis).unwrap(), 0.05, 0.0).unwrap();
        for k in 0..32 {
            let v = stats.s_k()[k].powi(2);
            acc[k] += v;
            acc2[k] += v * v;
        }
    }
    let r = reps as f64;
    for k in [0, 1, 5, 31] {
        let mean = acc[k] / r;
        let se = ((acc2[k] / r - mean * mean) / r).sqrt();
        let want = sigma2[k] + 0.25 / 32.0;
        assert!((mean - want).abs() < 4.0 * se, "k={k}: {mean} vs {want} (se {se})");
    }
}

#[test]
fn noiseless_sparse_panel_recovers_coefficients() {
    let g = make_grid::<f64>(16).unwrap();
    let basis = BasisFamily::Fourier.build(&g).unwrap();
    let mut mu = vec![0.0; 16];
    mu[0] = 2.0;
    mu[3] = -0.7;
    mu[10] = 0.4;
    let f = basis.synthesize(&mu).unwrap();
    // Each curve is f plus a multiple of phi_1, so only k = 1 varies.
    let y = Array2::from_shape_fn((6, 16), |(i, j)| f[j] + 0.01 * (i as f64 - 2.5));
    let p = CurvePanel::new(g, y).unwrap();
    let (stats, est) = fit(&p, &basis, Rule::Hard, 1.0, 0.05, 0.0).unwrap();
    for k in 0..16 {
        assert!((stats.mu_hat()[k] - mu[k]).abs() < 1e-12);
        assert!((est.coeffs[k] - mu[k]).abs() < 1e-12);
    }
    for (a, b) in est.values.iter().zip(&f) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn omega_implies_band_covers_truncated_target() {
    // On Omega the hard estimate +/- 3 sum r_tilde |phi| 1{..} contains f_bar(2 r_bar).
    let alpha = 0.05;
    let delta = 0.05;
    let config = bb_config(100, 64, 0.5);
    let basis = BasisFamily::Fourier.build(&config.grid).unwrap();
    let sigma2 = sigma_k_theoretical(&config.process, &basis).unwrap();
    let levels = theoretical_levels(&sigma2, config.noise_sd, config.n, alpha, delta).unwrap();
    let mu = basis.analyze(&eval_signal(&config.signal, &config.grid).unwrap()).unwrap();
    let doubled: Vec<f64> = levels.r_bar.iter().map(|r| 2.0 * r).collect();
    let (_, target) = truncated_target(&mu, &doubled, &basis).unwrap();
    let mut on_omega = 0;
    let mut covered = 0;
    for s in 0..200 {
        let p = generate_panel(&config.with_seed(derive_seed(3, s))).unwrap();
        let stats = pooled_stats(&per_curve_coeffs(&p, &basis).unwrap(), alpha, delta).unwrap();
        let band = band_from_stats(BandKind::ProposedHard3, &stats, &basis, None).unwrap();
        let c = covers(&band, &target).unwrap();
        covered += usize::from(c);
        if omega_event_check(&stats, &levels, &mu) {
            on_omega += 1;
            assert!(c, "replicate {s}: Omega holds but the band misses f_bar(2 r_bar)");
        }
    }
    assert!(on_omega > 100, "Omega held only {on_omega} times");
    assert!(covered >= on_omega);
}

#[test]
fn soft_estimate_is_never_larger_than_hard() {
    let config = bb_config(30, 32, 0.3);
    let basis = BasisFamily::Haar.build(&config.grid).unwrap();
    for s in 0..20 {
        let p = generate_panel(&config.with_seed(derive_seed(4, s))).unwrap();
        let stats = pooled_stats(&per_curve_coeffs(&p, &basis).unwrap(), 0.05, 0.0).unwrap();
        let hard = estimate(&stats, &basis, Rule::Hard, 1.0).unwrap();
        let soft = estimate(&stats, &basis, Rule::Soft, 1.0).unwrap();
        for k in 0..32 {
            assert!(soft.coeffs[k].abs() <= hard.coeffs[k].abs());
        }
    }
}

#[test]
fn f32_pipeline_tracks_f64() {
    let c64 = bb_config(20, 16, 0.2);
    let c32 = PanelConfig::<f32> {
        n: 20,
        grid: make_grid(16).unwrap(),
        signal: SignalSpec::signal1_default(),
        process: ProcessSpec::brownian_bridge(),
        noise_sd: 0.2,
        seed: 0,
    };
    let p64 = generate_panel(&c64).unwrap();
    let p32 = generate_panel(&c32).unwrap();
    let b64 = BasisFamily::Fourier.build(p64.grid()).unwrap();
    let b32 = BasisFamily::Fourier.build(p32.grid()).unwrap();
    let (s64, _) = fit(&p64, &b64, Rule::LeastSquares, 1.0, 0.05, 0.0).unwrap();
    let (s32, _) = fit(&p32, &b32, Rule::LeastSquares, 1.0f32, 0.05, 0.0).unwrap();
    for k in 0..16 {
        assert!((s64.mu_hat()[k] - s32.mu_hat()[k] as f64).abs() < 1e-4);
    }
}
