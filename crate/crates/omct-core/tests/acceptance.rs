//! Acceptance gate: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them; the test name
//! itself carries the criterion number).

use omct_core::calibration::{
    asymmetry_calibration, coherent_calibration, coherent_occupation, direct_calibration,
    extrapolate_to_drive_end, CoherentDriveSpec, DirectCalibrationSigmas, Measured,
};
use omct_core::detection::{
    gamma_om_rate, simulate_clicks, ClickHistogram, Detuning,
};
use omct_core::filter::{transmit_pulse, FilterStack, SampledWaveform, Sideband};
use omct_core::inference::{
    ensemble_mcmc, fit_power_law, fit_pulse_occupancy, McmcConfig, PriorSpec, PulseFit,
    PulseFitConfig,
};
use omct_core::model::{BathModel, OccupancyDynamics};
use omct_core::presets;
use omct_core::rng::CounterRng;
use omct_core::units::TAU;

#[test]
fn criterion_01_filter_suppression_at_5ghz() {
    let stack = presets::reference_filter_stack();
    let t = stack.intensity_transmission(5e9).unwrap();
    let db = -10.0 * t.log10();
    assert!(
        (112.0..=116.0).contains(&db),
        "two-filter suppression {db:.2} dB outside 114 ± 2 dB"
    );
    println!("criterion 01 PASS: two-filter suppression at 5 GHz = {db:.1} dB (114 ± 2 dB)");
}

#[test]
fn criterion_02_single_filter_step_response() {
    // Analytic single-pole intensity step response, with the filter passage
    // delay and one global sub-sample alignment estimated from the rise
    // (a sampled step defines its onset only to within a sample phase).
    let stack = FilterStack::new(13.2e6, 18.8e9, 1, 0.0).unwrap();
    let dt = 1e-9;
    let n0 = 32usize;
    let n = 4096;
    let mut v = vec![0.0; n];
    for x in v.iter_mut().skip(n0 + 1).take(1500) {
        *x = 1.0;
    }
    v[n0] = 0.5;
    let wave = SampledWaveform::new(0.0, dt, v).unwrap();
    let out = transmit_pulse(&stack, &wave).unwrap();
    let a = std::f64::consts::PI * stack.fwhm;
    let oracle_at = |i: usize, shift: f64| {
        let t = (i - n0) as f64 * dt - stack.passage_time() + shift;
        (1.0 - (-a * t).exp()).powi(2)
    };
    let mut best = (f64::INFINITY, 0.0);
    for step in 0..=100 {
        let shift = (step as f64 / 100.0 - 0.25) * dt;
        let sse: f64 = ((n0 + 3)..(n0 + 200))
            .map(|i| (out.values()[i] - oracle_at(i, shift)).powi(2))
            .sum();
        if sse < best.0 {
            best = (sse, shift);
        }
    }
    let mut worst: f64 = 0.0;
    for i in (n0 + 3)..(n0 + 1400) {
        let oracle = oracle_at(i, best.1);
        let rel = (out.values()[i] - oracle).abs() / oracle.max(5e-3);
        worst = worst.max(rel);
    }
    assert!(
        worst <= 0.01,
        "step response deviates by {worst:.3}, limit 1%"
    );
    println!(
        "criterion 02 PASS: k=1 step response within {:.2}% of the single-pole form (limit 1%)",
        100.0 * worst
    );
}

#[test]
fn criterion_03_resonant_suppression_factor() {
    let dev = presets::release_free_device();
    let s = dev.resonant_suppression();
    assert!(
        (s - 0.0231).abs() <= 1e-4,
        "resonant suppression {s:.5} vs 0.0231 ± 1e-4"
    );
    println!("criterion 03 PASS: resonant suppression (κ/2ω_m)² = {s:.4} (0.0231 ± 1e-4)");
}

#[test]
fn criterion_04_short_pulse_scattering_probability() {
    let dev = presets::release_free_device();
    let p = dev.scattering_probability(128.0, 100e-9);
    assert!(
        (0.04..=0.06).contains(&p),
        "p_as = {p:.4} outside [0.04, 0.06]"
    );
    println!("criterion 04 PASS: p_as = γ_om·T0 = {p:.3} for n_c = 128, T0 = 100 ns (in [0.04, 0.06])");
}

/// Shared fixture for criteria 5 and 6: simulate a short red-detuned pulse
/// train from the ring-up truth and fit it back.
struct PulseRoundTrip {
    truth_n_i: f64,
    truth_n_f: f64,
    fit: PulseFit,
}

fn pulse_round_trip(reps: u64, seed: u64, walkers: usize, steps: usize) -> PulseRoundTrip {
    let stack = presets::reference_filter_stack();
    let (n_i, n_f, gamma_m) = (0.42, 1.25, 530e3);
    let dt = 4e-9;
    let n = 160;
    let t_pulse = 100e-9;
    let gamma_cal = 21.1;
    let nc_peak = 128.0;
    let n_nep_true = 0.02;

    let env_values: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            if t < t_pulse + 40e-9 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let env = SampledWaveform::new(0.5 * dt, dt, env_values).unwrap();

    let dynamics = OccupancyDynamics {
        n_i,
        n_f,
        gamma_m,
        t_start: 0.0,
        duration: n as f64 * dt,
    };
    // Forward model on the same grid the fitter uses.
    let gated: Vec<f64> = (0..n)
        .map(|i| {
            let t = env.time(i);
            let frac = ((t_pulse - (t - 0.5 * dt)) / dt).clamp(0.0, 1.0);
            dynamics.occupancy_unchecked(t) * env.values()[i] * frac
        })
        .collect();
    let n_m_wave = SampledWaveform::new(0.0 + 0.5 * dt, dt, gated).unwrap();
    let flat_env = SampledWaveform::new(0.5 * dt, dt, vec![1.0; n]).unwrap();
    let star = omct_core::filter::filtered_occupancy_signal(
        &stack,
        &n_m_wave,
        &flat_env,
        Sideband::AntiStokes,
    )
    .unwrap();
    let rate: Vec<f64> = star
        .values()
        .iter()
        .map(|&v| gamma_cal * nc_peak * (v + n_nep_true))
        .collect();
    let data = simulate_clicks(
        |t| {
            let idx = ((t - 0.5 * dt) / dt).round() as usize;
            rate[idx.min(n - 1)]
        },
        0.0,
        n as f64 * dt,
        reps,
        dt,
        seed,
    )
    .unwrap();

    let prior = PriorSpec::from_bounds(&[
        ("n_i", 0.0, 5.0),
        ("n_f", 0.0, 5.0),
        ("t_stop", t_pulse - 72e-9, t_pulse + 72e-9),
        ("n_nep", 0.0, 0.5),
    ])
    .unwrap();
    let cfg = PulseFitConfig {
        stack,
        nc_envelope: env,
        gamma_cal,
        nc_peak,
        sideband: Sideband::AntiStokes,
        gamma_m: Some(gamma_m),
        pulse_start: 0.0,
        prior,
        mcmc: McmcConfig::new(walkers, steps, seed.wrapping_mul(2654435761).wrapping_add(1)),
    };
    let fit = fit_pulse_occupancy(&data, &cfg).unwrap();
    PulseRoundTrip {
        truth_n_i: n_i,
        truth_n_f: n_f,
        fit,
    }
}

#[test]
fn criterion_05_pulse_round_trip_recovers_occupancies() {
    let rt = pulse_round_trip(2_000_000, 401, 24, 3000);
    let ni_ok = rt.fit.result.covers("n_i", rt.truth_n_i);
    let nf_ok = rt.fit.result.covers("n_f", rt.truth_n_f);
    assert!(
        ni_ok && nf_ok,
        "truth (n_i {}, n_f {}) outside CIs {:?} / {:?}",
        rt.truth_n_i,
        rt.truth_n_f,
        rt.fit.result.interval("n_i"),
        rt.fit.result.interval("n_f")
    );
    println!(
        "criterion 05 PASS: n_i CI {:?}, n_f CI {:?} cover truth (0.42, 1.25) at 2e6 repetitions",
        rt.fit.result.interval("n_i").unwrap(),
        rt.fit.result.interval("n_f").unwrap()
    );
}

#[test]
fn criterion_06_credibility_interval_calibration() {
    let runs = 50;
    let mut covered = 0;
    for run in 0..runs {
        let rt = pulse_round_trip(200_000, 1000 + run, 16, 1200);
        if rt.fit.result.covers("n_i", rt.truth_n_i) && rt.fit.result.covers("n_f", rt.truth_n_f) {
            covered += 1;
        }
    }
    assert!(
        covered >= 43,
        "truth inside the 95% CI in only {covered}/{runs} runs (need >= 43)"
    );
    println!("criterion 06 PASS: truth inside the 95% CI in {covered}/{runs} runs (need >= 43)");
}

#[test]
fn criterion_07_power_law_recovery() {
    let truth = (510e3, 170.0, 0.98);
    let clean: Vec<(f64, f64, f64)> = (0..30)
        .map(|i| {
            let x = 10f64 * (3e4f64 / 10.0).powf(i as f64 / 29.0);
            (x, truth.0 + truth.1 * x.powf(truth.2), 0.0)
        })
        .collect();
    let fit = fit_power_law(&clean, true).unwrap();
    let rels = [
        (fit.value("offset").unwrap() - truth.0).abs() / truth.0,
        (fit.value("prefactor").unwrap() - truth.1).abs() / truth.1,
        (fit.value("exponent").unwrap() - truth.2).abs() / truth.2,
    ];
    assert!(
        rels.iter().all(|r| *r < 1e-6),
        "noise-free recovery errors {rels:?} exceed 1e-6"
    );

    let mut rng = CounterRng::new(7007, 0);
    let noisy: Vec<(f64, f64, f64)> = clean
        .iter()
        .map(|&(x, y, _)| (x, y * (1.0 + 0.05 * rng.normal()), 0.05 * y))
        .collect();
    let nfit = fit_power_law(&noisy, true).unwrap();
    for (name, t) in [("offset", truth.0), ("prefactor", truth.1), ("exponent", truth.2)] {
        let (lo, hi) = nfit.interval(name).unwrap();
        let sigma = (hi - lo) / (2.0 * 1.959964);
        let pull = (nfit.value(name).unwrap() - t).abs() / sigma;
        assert!(pull <= 3.0, "{name} off by {pull:.2} sigma under 5% noise");
    }
    println!(
        "criterion 07 PASS: noise-free power law to {:.1e} rel.; 5%-noise fit within 3 sigma",
        rels.iter().cloned().fold(0.0f64, f64::max)
    );
}

#[test]
fn criterion_08_three_way_calibration_consistency() {
    let dev = presets::release_free_device();
    let cfg = presets::release_free_detection();
    let bath = presets::release_free_bath();
    let truth = gamma_om_rate(&dev, 1.0) * cfg.eta_tot();

    // Direct, from device knowledge with the documented error budget.
    let sigmas = DirectCalibrationSigmas {
        g_om: 0.05 * dev.g_om,
        kappa: 0.02 * dev.kappa,
        eta_o: 0.03 * cfg.eta_o,
        eta_fc: 0.07 * cfg.eta_fc,
        eta_loss: 0.05 * cfg.eta_loss,
        eta_det: 0.04 * cfg.eta_det,
    };
    let direct = direct_calibration(&dev, &cfg, &sigmas).unwrap();

    // Sideband asymmetry, from simulated counting at n_m = 0.2.
    let mut rng = CounterRng::new(808, 0);
    let n_c = 200.0;
    let n_m = 0.2;
    let tau = 600.0;
    let rate_plus = gamma_om_rate(&dev, n_c) * cfg.eta_tot() * (n_m + 1.0);
    let rate_minus = gamma_om_rate(&dev, n_c) * cfg.eta_tot() * n_m;
    let k_plus = rng.poisson(rate_plus * tau) as f64;
    let k_minus = rng.poisson(rate_minus * tau) as f64;
    let asym = asymmetry_calibration(
        Measured::new(k_plus / tau, k_plus.sqrt() / tau),
        Measured::new(k_minus / tau, k_minus.sqrt() / tau),
        n_c,
    )
    .unwrap();

    // Coherent excitation, from a simulated driven decay.
    let nc_coh = 48.0;
    let gamma_m = bath.gamma_m_of_nc(nc_coh);
    let spec = CoherentDriveSpec::new(
        Measured::new(0.01, 0.0003),
        Measured::new(2.5e11, 7.5e9),
        2e-6,
    )
    .unwrap();
    let n_coh = coherent_occupation(
        dev.eta_o(),
        dev.gamma_om(nc_coh),
        spec.xi_sb.value,
        spec.phi_pump.value,
        gamma_m,
    );
    let rate0 = truth * nc_coh * n_coh;
    let lambda = TAU * gamma_m;
    let tau_bin = 2e-2;
    let points: Vec<(f64, f64, f64)> = (1..=10)
        .map(|i| {
            let t = i as f64 * 0.8e-7;
            let mean = rate0 * (-lambda * t).exp() * tau_bin;
            let k = rng.poisson(mean) as f64;
            (t, k.max(1.0) / tau_bin, k.max(1.0).sqrt() / tau_bin)
        })
        .collect();
    let at_end = extrapolate_to_drive_end(&points).unwrap();
    let coherent = coherent_calibration(
        &spec,
        Measured::new(gamma_m, 0.03 * gamma_m),
        Measured::new(dev.gamma_om(nc_coh), 0.04 * dev.gamma_om(nc_coh)),
        Measured::new(dev.eta_o(), 0.02 * dev.eta_o()),
        at_end,
        Measured::new(nc_coh, 0.05 * nc_coh),
    )
    .unwrap();

    for (a, b, label) in [
        (&direct, &asym, "direct vs asymmetry"),
        (&direct, &coherent, "direct vs coherent"),
        (&asym, &coherent, "asymmetry vs coherent"),
    ] {
        assert!(
            a.agrees_within(b, 2.0),
            "{label}: {:.2}±{:.2} vs {:.2}±{:.2} disagree beyond 2 sigma",
            a.gamma_cal,
            a.sigma,
            b.gamma_cal,
            b.sigma
        );
    }
    println!(
        "criterion 08 PASS: direct {:.1}±{:.1}, asymmetry {:.1}±{:.2}, coherent {:.1}±{:.1} cps agree pairwise at 2 sigma",
        direct.gamma_cal, direct.sigma, asym.gamma_cal, asym.sigma, coherent.gamma_cal, coherent.sigma
    );
}

#[test]
fn criterion_09_sideband_asymmetry_identity() {
    let dev = presets::release_free_device();
    let cfg = presets::release_free_detection();
    let n_c = 150.0;
    let expect = gamma_om_rate(&dev, n_c) * cfg.eta_tot();
    let tau = 2000.0;
    for (i, n_m) in [0.0, 1.0, 10.0].iter().enumerate() {
        let rate_plus =
            omct_core::detection::sideband_rate(&dev, &cfg, Detuning::Blue, n_c, *n_m);
        let rate_minus =
            omct_core::detection::sideband_rate(&dev, &cfg, Detuning::Red, n_c, *n_m);
        let mut rng = CounterRng::new(909, i as u64);
        let k_plus = rng.poisson(rate_plus * tau) as f64;
        let k_minus = rng.poisson(rate_minus * tau) as f64;
        let diff = (k_plus - k_minus) / tau;
        let sigma = (k_plus + k_minus).sqrt() / tau;
        assert!(
            (diff - expect).abs() <= 3.0 * sigma,
            "n_m = {n_m}: simulated asymmetry {diff:.2} vs {expect:.2} (3 sigma = {:.2})",
            3.0 * sigma
        );
    }
    println!(
        "criterion 09 PASS: simulated Γ+ − Γ− matches γ_om·η_tot = {expect:.1} cps within 3 sigma for n_m in {{0, 1, 10}}"
    );
}

#[test]
fn criterion_10_steady_state_against_rate_equation() {
    let mut rng = CounterRng::new(4242, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let bath = BathModel::new(
            rng.uniform_in(1e3, 1e6),
            rng.uniform_in(0.0, 2.0),
            rng.uniform_in(0.0, 1e3),
            rng.uniform_in(0.2, 1.2),
            rng.uniform_in(0.0, 50.0),
        )
        .unwrap();
        let n_c = rng.uniform_in(1.0, 1e4);
        let gp = bath.gamma_p(n_c);
        let gtot = TAU * (bath.gamma_0 + gp);
        let drive = TAU * (bath.gamma_0 * bath.n_0 + gp * bath.n_p);
        let f = |n: f64| drive - gtot * n;
        let mut n = 0.0;
        let t_end = 20.0 / gtot;
        let steps = 20_000;
        let dt = t_end / steps as f64;
        for _ in 0..steps {
            let k1 = f(n);
            let k2 = f(n + 0.5 * dt * k1);
            let k3 = f(n + 0.5 * dt * k2);
            let k4 = f(n + dt * k3);
            n += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let closed = bath.steady_state_occupancy(n_c).unwrap();
        let err = (n - closed).abs() / closed.max(1e-12);
        worst = worst.max(err);
    }
    assert!(worst < 1e-6, "worst steady-state mismatch {worst:.2e}");
    println!(
        "criterion 10 PASS: steady state matches the integrated two-bath rate equation to {worst:.1e} (limit 1e-6) over 100 parameter sets"
    );
}

#[test]
fn criterion_11_mcmc_sanity_and_determinism() {
    let rho: f64 = 0.9;
    let prior = PriorSpec::from_bounds(&[("x", -50.0, 50.0), ("y", -50.0, 50.0)]).unwrap();
    let logp = move |v: &[f64]| {
        -(v[0] * v[0] - 2.0 * rho * v[0] * v[1] + v[1] * v[1]) / (2.0 * (1.0 - rho * rho))
    };
    let samples = ensemble_mcmc(logp, &prior, &McmcConfig::new(32, 6000, 77)).unwrap();
    let xs = samples.param_draws(0);
    let ys = samples.param_draws(1);
    let (mx, my) = (mean(&xs), mean(&ys));
    let (sx, sy) = (std_dev(&xs), std_dev(&ys));
    let mut cov = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mx) * (y - my);
    }
    let corr = cov / xs.len() as f64 / (sx * sy);
    assert!(mx.abs() < 0.05 && my.abs() < 0.05, "means {mx:.3}, {my:.3}");
    assert!(
        (0.95..=1.05).contains(&sx) && (0.95..=1.05).contains(&sy),
        "stds {sx:.3}, {sy:.3}"
    );
    assert!((corr - rho).abs() < 0.03, "correlation {corr:.3}");

    // Bit-identical draws for any evaluation parallelism.
    let mut reference = McmcConfig::new(16, 400, 5);
    reference.threads = 1;
    let base = ensemble_mcmc(logp, &prior, &reference).unwrap();
    for threads in [2, 4] {
        let mut cfg = McmcConfig::new(16, 400, 5);
        cfg.threads = threads;
        let run = ensemble_mcmc(logp, &prior, &cfg).unwrap();
        for step in 0..run.steps() {
            for w in 0..run.walkers() {
                assert_eq!(
                    base.position(step, w),
                    run.position(step, w),
                    "draws differ at step {step}, walker {w}, threads {threads}"
                );
            }
        }
    }
    println!(
        "criterion 11 PASS: 2-D correlated normal gives means ({mx:.3}, {my:.3}), stds ({sx:.3}, {sy:.3}), corr {corr:.3}; draws bit-identical for 1/2/4 threads"
    );
}

#[test]
fn criterion_12_nnep_dark_count_term() {
    let dev = presets::release_free_device();
    let mut cfg = presets::release_free_detection();
    cfg.pump_suppression = 0.0; // isolate the dark-count term
    let value = omct_core::detection::nnep(&dev, &cfg, Detuning::Red, 1000.0, 21.1).unwrap();
    assert!(
        (value - 3.32e-4).abs() <= 1e-6,
        "dark-count term {value:.3e} vs 3.32e-4 ± 1e-6"
    );
    println!("criterion 12 PASS: off-resonant dark-count nNEP term = {value:.3e} (3.32e-4 ± 1e-6)");
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// The simulated click histogram in criterion 5 is consumed by the fitter;
/// this guard keeps its CSV round trip honest at acceptance scale too.
#[test]
fn histogram_serialization_round_trip_at_scale() {
    let h = simulate_clicks(|t| 1e4 * (1.0 + (t * 1e7).sin().abs()), 0.0, 1e-5, 5000, 1e-7, 3)
        .unwrap();
    let parsed = ClickHistogram::from_csv(&h.to_csv()).unwrap();
    assert_eq!(h, parsed);
}
