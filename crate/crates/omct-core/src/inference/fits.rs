//! The model fits: filtered pulse-occupancy posterior (MCMC), complex
//! transparency-window response, power laws, and exponential decays.

use super::leastsq::{levenberg_marquardt, LmFit};
use super::mcmc::{ensemble_mcmc, McmcConfig, PosteriorSamples};
use super::{poisson_log_likelihood, z_critical, FitResult, PriorSpec};
use crate::detection::ClickHistogram;
use crate::error::{Error, Result};
use crate::filter::{transmit_power, FilterStack, SampledWaveform, Sideband};
use crate::model::OccupancyDynamics;
use crate::units::TAU;
use rustfft::num_complex::Complex64;

const CI_LEVEL: f64 = 0.95;

/// Build a `FitResult` from a least-squares solution. When the input carried
/// no uncertainties the covariance is rescaled by the reduced chi-square, the
/// usual practice for unweighted fits.
fn fit_result_from_lm(
    names: Vec<String>,
    fit: &LmFit,
    weighted: bool,
) -> Result<FitResult> {
    let z = z_critical(CI_LEVEL);
    let scale = if weighted { 1.0 } else { fit.red_chi2().sqrt() };
    let mut lo = Vec::with_capacity(names.len());
    let mut hi = Vec::with_capacity(names.len());
    for i in 0..names.len() {
        let mut s = fit.sigma(i) * scale;
        if s.is_nan() {
            // Unidentifiable direction (infinite variance times zero misfit).
            s = f64::INFINITY;
        }
        lo.push(fit.params[i] - z * s);
        hi.push(fit.params[i] + z * s);
    }
    let mut result = FitResult::from_parts(
        names,
        fit.params.clone(),
        lo,
        hi,
        CI_LEVEL,
        -0.5 * fit.chi2,
    )?;
    result.red_chi2 = Some(fit.red_chi2());
    Ok(result)
}

// ---------------------------------------------------------------------------
// Power law
// ---------------------------------------------------------------------------

/// Log-log linear regression initializer for a (offset-free) power law.
pub(crate) fn power_law_loglog_init(points: &[(f64, f64, f64)], offset: f64) -> (f64, f64) {
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, _) in points {
        let yr = y - offset;
        if yr <= 0.0 {
            continue;
        }
        let (lx, ly) = (x.ln(), yr.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        n += 1.0;
    }
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 || n < 2.0 {
        return (1.0, 0.0);
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy * sxx - sx * sxy) / det;
    (intercept.exp(), slope)
}

/// Weighted nonlinear fit of y = [offset +] prefactor·x^exponent.
///
/// `points` are `(x, y, sigma)` with positive x and y; zero sigmas switch the
/// fit to unit weights. Parameters are named `offset` (when fitted),
/// `prefactor`, and `exponent`.
pub fn fit_power_law(points: &[(f64, f64, f64)], with_offset: bool) -> Result<FitResult> {
    let n_params = if with_offset { 3 } else { 2 };
    if points.len() < 4 || points.len() <= n_params {
        return Err(Error::NotEnoughPoints {
            needed: 4.max(n_params + 1),
            got: points.len(),
        });
    }
    if points.iter().any(|&(x, y, _)| x <= 0.0 || y <= 0.0) {
        return Err(Error::invalid("points", "x and y must be positive"));
    }
    let weighted = points.iter().all(|&(_, _, s)| s > 0.0);
    let min_y = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let offset0 = if with_offset { 0.9 * min_y } else { 0.0 };
    let (prefactor0, exponent0) = power_law_loglog_init(points, offset0);

    let model = move |p: &[f64], x: f64| -> f64 {
        if with_offset {
            p[0] + p[1] * x.powf(p[2])
        } else {
            p[0] * x.powf(p[1])
        }
    };
    let residuals = |p: &[f64]| -> Vec<f64> {
        points
            .iter()
            .map(|&(x, y, s)| {
                let w = if weighted { s } else { 1.0 };
                (model(p, x) - y) / w
            })
            .collect()
    };
    let init: Vec<f64> = if with_offset {
        vec![offset0, prefactor0, exponent0]
    } else {
        vec![prefactor0, exponent0]
    };
    let fit = levenberg_marquardt(residuals, &init)?;
    let names: Vec<String> = if with_offset {
        vec!["offset".into(), "prefactor".into(), "exponent".into()]
    } else {
        vec!["prefactor".into(), "exponent".into()]
    };
    fit_result_from_lm(names, &fit, weighted)
}

// ---------------------------------------------------------------------------
// Exponential decay
// ---------------------------------------------------------------------------

/// Weighted fit of y = amplitude·e^{−2π·rate·t} [+ floor].
///
/// Parameters are named `amplitude`, `rate_hz`, and `floor` (when fitted);
/// the derived 1/e time is reported as `t_1e_s` when the rate is resolved
/// away from zero.
pub fn fit_exponential_decay(points: &[(f64, f64, f64)], with_floor: bool) -> Result<FitResult> {
    let n_params = if with_floor { 3 } else { 2 };
    if points.len() <= n_params {
        return Err(Error::NotEnoughPoints {
            needed: n_params + 1,
            got: points.len(),
        });
    }
    let weighted = points.iter().all(|&(_, _, s)| s > 0.0);
    let min_y = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let t_lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let t_span = (t_hi - t_lo).max(1e-30);
    let floor0 = if with_floor { 0.9 * min_y.max(0.0) } else { 0.0 };

    // Log-linear initializer on the floor-subtracted data.
    let (mut sw, mut st, mut sl, mut stt, mut stl) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y, _) in points {
        let yr = y - floor0;
        if yr <= 0.0 {
            continue;
        }
        let l = yr.ln();
        sw += 1.0;
        st += t;
        sl += l;
        stt += t * t;
        stl += t * l;
    }
    let det = sw * stt - st * st;
    let (mut amp0, mut rate0) = (min_y.max(1e-12), 0.1 / (TAU * t_span));
    if det.abs() > 1e-300 && sw >= 2.0 {
        let slope = (sw * stl - st * sl) / det;
        let intercept = (stt * sl - st * stl) / det;
        amp0 = intercept.exp();
        rate0 = (-slope / TAU).max(0.01 / (TAU * t_span));
    }

    let model = move |p: &[f64], t: f64| -> f64 {
        let base = p[0] * (-TAU * p[1] * t).exp();
        if with_floor {
            base + p[2]
        } else {
            base
        }
    };
    let residuals = |p: &[f64]| -> Vec<f64> {
        points
            .iter()
            .map(|&(t, y, s)| {
                let w = if weighted { s } else { 1.0 };
                (model(p, t) - y) / w
            })
            .collect()
    };
    let init: Vec<f64> = if with_floor {
        vec![amp0, rate0, floor0]
    } else {
        vec![amp0, rate0]
    };
    let mut fit = levenberg_marquardt(residuals, &init)?;
    if with_floor {
        // The floor form is degenerate on non-decaying data (any split of a
        // constant between amplitude·e^{-rate·t -> 0} and floor fits). Prefer
        // the pure-floor reading whenever it does at least as well.
        let mean_y = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
        let trivial = levenberg_marquardt(residuals, &[0.0, rate0, mean_y])?;
        if trivial.chi2 <= fit.chi2 {
            fit = trivial;
        }
    }

    let mut names: Vec<String> = vec!["amplitude".into(), "rate_hz".into()];
    if with_floor {
        names.push("floor".into());
    }
    let mut result = fit_result_from_lm(names, &fit, weighted)?;

    // Derived 1/e time with the interval mapped through the monotone
    // transform t = 1/(2π·rate).
    let rate = fit.params[1];
    if let Some((r_lo, r_hi)) = result.interval("rate_hz") {
        if rate > 0.0 && r_lo > 0.0 {
            result = result.with_extra_param(
                "t_1e_s",
                1.0 / (TAU * rate),
                1.0 / (TAU * r_hi),
                1.0 / (TAU * r_lo),
            )?;
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// Transparency-window (complex Lorentzian) response
// ---------------------------------------------------------------------------

/// One point of a coherent-response sweep: modulation offset δω from the
/// mechanical frequency (Hz), the normalized complex response, and a
/// per-quadrature uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EitPoint {
    pub delta: f64,
    pub s: Complex64,
    pub sigma: f64,
}

/// The normalized coherent response model S(δω) = 1 − A/(iδω − γ_m/2),
/// with δω and γ_m in Hz and complex amplitude A in the same units.
pub fn eit_response(delta: f64, a: Complex64, gamma_m: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) - a / (Complex64::new(0.0, delta) - gamma_m / 2.0)
}

/// Complex least-squares fit of the transparency window: parameters
/// `a_re`, `a_im` (complex amplitude, Hz) and `gamma_m` (Hz), fitting real
/// and imaginary residuals jointly.
pub fn fit_eit(sweep: &[EitPoint]) -> Result<FitResult> {
    if sweep.len() < 5 {
        return Err(Error::NotEnoughPoints {
            needed: 5,
            got: sweep.len(),
        });
    }
    let lo = sweep.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min);
    let hi = sweep
        .iter()
        .map(|p| p.delta)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateFit(
            "sweep points share a single modulation frequency".into(),
        ));
    }
    let weighted = sweep.iter().all(|p| p.sigma > 0.0);

    // Width initializer from the dip profile |1 - S|.
    let mut peak_idx = 0;
    let mut peak_mag = 0.0;
    for (i, p) in sweep.iter().enumerate() {
        let m = (Complex64::new(1.0, 0.0) - p.s).norm();
        if m > peak_mag {
            peak_mag = m;
            peak_idx = i;
        }
    }
    let half = peak_mag / 2.0;
    let mut left = lo;
    let mut right = hi;
    for p in sweep {
        let m = (Complex64::new(1.0, 0.0) - p.s).norm();
        if p.delta < sweep[peak_idx].delta && m < half {
            left = left.max(p.delta);
        }
        if p.delta > sweep[peak_idx].delta && m < half {
            right = right.min(p.delta);
        }
    }
    let mut gamma0 = right - left;
    if !(gamma0 > 0.0) || !gamma0.is_finite() {
        gamma0 = (hi - lo) / 4.0;
    }
    let s_peak = sweep[peak_idx].s;
    let a0 = (Complex64::new(1.0, 0.0) - s_peak)
        * (Complex64::new(0.0, sweep[peak_idx].delta) - gamma0 / 2.0);

    let residuals = |p: &[f64]| -> Vec<f64> {
        let a = Complex64::new(p[0], p[1]);
        let gamma = p[2];
        let mut out = Vec::with_capacity(2 * sweep.len());
        for pt in sweep {
            let w = if weighted { pt.sigma } else { 1.0 };
            let d = eit_response(pt.delta, a, gamma) - pt.s;
            out.push(d.re / w);
            out.push(d.im / w);
        }
        out
    };
    let fit = levenberg_marquardt(residuals, &[a0.re, a0.im, gamma0])?;
    if !(fit.params[2] > 0.0) {
        return Err(Error::NoConvergence(format!(
            "fitted linewidth is not positive ({})",
            fit.params[2]
        )));
    }
    fit_result_from_lm(
        vec!["a_re".into(), "a_im".into(), "gamma_m".into()],
        &fit,
        weighted,
    )
}

// ---------------------------------------------------------------------------
// Filtered pulse-occupancy posterior
// ---------------------------------------------------------------------------

/// Everything the pulse fit needs besides the histogram itself.
#[derive(Debug, Clone)]
pub struct PulseFitConfig {
    /// The pump-filter stack in front of the detector.
    pub stack: FilterStack,
    /// Normalized pump envelope ñ_c(t) sampled at the histogram bin centers.
    pub nc_envelope: SampledWaveform,
    /// Calibration rate Γ_cal (counts/s at unit n_c and n_m).
    pub gamma_cal: f64,
    /// Peak intracavity photon number of the pulse.
    pub nc_peak: f64,
    /// Which sideband the histogram was taken on.
    pub sideband: Sideband,
    /// Total mechanical linewidth (Hz); `None` adds it to the sampled
    /// parameters.
    pub gamma_m: Option<f64>,
    /// Time the thermal ring-up starts (s).
    pub pulse_start: f64,
    /// Uniform priors over, in order: n_i, n_f, t_stop, n_nep[, gamma_m].
    pub prior: PriorSpec,
    /// Sampler settings.
    pub mcmc: McmcConfig,
}

/// Posterior summary of a pulse fit.
#[derive(Debug, Clone)]
pub struct PulseFit {
    /// Medians and 95% credibility intervals.
    pub result: FitResult,
    /// The full chain.
    pub posterior: PosteriorSamples,
    /// Measured-occupancy forward model n_m*(t) at the posterior median.
    pub best_waveform: SampledWaveform,
    /// Parameters whose credibility interval covers more than 90% of the
    /// prior range — unidentified by this data set.
    pub unidentified: Vec<String>,
}

/// Bayesian fit of a click histogram against the filtered thermal ring-up
/// model: n_m(t) from the two-occupation exponential, gated by the pump
/// envelope cut at `t_stop`, pushed through the filter stack, offset by a
/// constant noise occupancy n_nep, and compared to the counts through the
/// Poisson likelihood.
pub fn fit_pulse_occupancy(data: &ClickHistogram, cfg: &PulseFitConfig) -> Result<PulseFit> {
    let env = &cfg.nc_envelope;
    let dt = env.dt;
    let grid_ok = env.len() == data.len()
        && (dt - data.bin_width).abs() <= 1e-9 * dt
        && (env.t0 - data.bin_center(0)).abs() <= 1e-6 * dt;
    if !grid_ok {
        return Err(Error::GridMismatch(
            "envelope must be sampled at the histogram bin centers".into(),
        ));
    }
    let peak = env.values().iter().cloned().fold(0.0f64, f64::max);
    if (peak - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(
            "nc_envelope",
            format!("must be normalized to unit peak, got {peak}"),
        ));
    }
    if !(cfg.gamma_cal > 0.0) || !(cfg.nc_peak > 0.0) {
        return Err(Error::invalid(
            "gamma_cal/nc_peak",
            "calibration rate and peak photon number must be positive",
        ));
    }
    let mut expected_names = vec!["n_i", "n_f", "t_stop", "n_nep"];
    if cfg.gamma_m.is_none() {
        expected_names.push("gamma_m");
    }
    if cfg.prior.names() != expected_names {
        return Err(Error::invalid(
            "prior",
            format!(
                "parameters must be {:?} in order, got {:?}",
                expected_names,
                cfg.prior.names()
            ),
        ));
    }

    let off = cfg.sideband.vacuum_offset();
    let exposure = data.exposure() * cfg.gamma_cal * cfg.nc_peak;
    let times: Vec<f64> = (0..env.len()).map(|i| env.time(i)).collect();
    let duration = env.duration();

    // λ_i(θ) for the Poisson likelihood; model failures reject the sample.
    let expected_counts = |theta: &[f64]| -> Option<Vec<f64>> {
        let (n_i, n_f, t_stop, n_nep) = (theta[0], theta[1], theta[2], theta[3]);
        let gamma_m = cfg.gamma_m.unwrap_or_else(|| theta[4]);
        if !(gamma_m > 0.0) || n_i < 0.0 || n_f < 0.0 || n_nep < 0.0 {
            return None;
        }
        let dynamics = OccupancyDynamics {
            n_i,
            n_f,
            gamma_m,
            t_start: cfg.pulse_start,
            duration,
        };
        let gated: Vec<f64> = times
            .iter()
            .zip(env.values())
            .map(|(&t, &e)| {
                // Fraction of the sample cell [t-dt/2, t+dt/2] before t_stop.
                let frac = ((t_stop - (t - 0.5 * dt)) / dt).clamp(0.0, 1.0);
                (dynamics.occupancy_unchecked(t) + off) * e * frac
            })
            .collect();
        // v = n_m* + off already; the rate adds the constant noise occupancy.
        let star_plus_off = transmit_power(&cfg.stack, &gated, dt).ok()?;
        Some(
            star_plus_off
                .iter()
                .map(|&v| (v + n_nep) * exposure)
                .collect(),
        )
    };

    let log_post = |theta: &[f64]| -> f64 {
        match expected_counts(theta) {
            Some(lam) => poisson_log_likelihood(&lam, data),
            None => f64::NEG_INFINITY,
        }
    };

    let posterior = ensemble_mcmc(log_post, &cfg.prior, &cfg.mcmc)?;
    let medians = posterior.medians();
    let dim = cfg.prior.len();
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    let mut unidentified = Vec::new();
    for p in 0..dim {
        let l = posterior.quantile(p, 0.025);
        let h = posterior.quantile(p, 0.975);
        if cfg.prior.coverage(p, l, h) > 0.9 {
            unidentified.push(cfg.prior.names()[p].to_string());
        }
        lo.push(l);
        hi.push(h);
    }
    let logp = log_post(&medians);
    let mut result = FitResult::from_parts(
        cfg.prior.names().iter().map(|s| s.to_string()).collect(),
        medians.clone(),
        lo,
        hi,
        CI_LEVEL,
        logp,
    )?;
    result.seed = Some(cfg.mcmc.seed);

    let lam = expected_counts(&medians).ok_or_else(|| {
        Error::NoConvergence("posterior median fails the forward model".into())
    })?;
    let star: Vec<f64> = lam.iter().map(|l| l / exposure - off).collect();
    let best_waveform = SampledWaveform::from_raw(env.t0, dt, star);

    Ok(PulseFit {
        result,
        posterior,
        best_waveform,
        unidentified,
    })
}

impl FitResult {
    /// Append a derived parameter with its own interval.
    pub(crate) fn with_extra_param(
        mut self,
        name: &str,
        value: f64,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        if !(lo <= value && value <= hi) {
            return Err(Error::invalid(
                "fit",
                format!("interval [{lo}, {hi}] does not contain {value} for `{name}`"),
            ));
        }
        self.names.push(name.to_string());
        self.values.push(value);
        self.ci_low.push(lo);
        self.ci_high.push(hi);
        Ok(self)
    }
}
