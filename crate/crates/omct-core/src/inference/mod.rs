//! Bayesian and least-squares parameter estimation: a Poisson-likelihood MCMC
//! over the filtered forward model, complex-Lorentzian response fits, and the
//! power-law / exponential fits used for linewidth and noise scalings.

mod fits;
mod leastsq;
mod mcmc;

pub use fits::{
    fit_eit, fit_exponential_decay, fit_power_law, fit_pulse_occupancy, EitPoint, PulseFit,
    PulseFitConfig,
};
pub use mcmc::{ensemble_mcmc, McmcConfig, PosteriorSamples};
/// Complex type used for transparency-window sweep data.
pub use rustfft::num_complex::Complex64;

use crate::detection::ClickHistogram;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::stats::ln_factorial;
use serde::{Deserialize, Serialize};

/// Independent uniform prior bounds, one entry per parameter (ordered).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    entries: Vec<(String, f64, f64)>,
}

impl PriorSpec {
    pub fn new(entries: Vec<(String, f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("prior", "needs at least one parameter"));
        }
        for (name, lo, hi) in &entries {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(
                    "prior",
                    format!("bounds for `{name}` must satisfy lo < hi, got [{lo}, {hi}]"),
                ));
            }
        }
        Ok(PriorSpec { entries })
    }

    /// Convenience constructor from `(name, lo, hi)` tuples.
    pub fn from_bounds(bounds: &[(&str, f64, f64)]) -> Result<Self> {
        Self::new(
            bounds
                .iter()
                .map(|(n, lo, hi)| (n.to_string(), *lo, *hi))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _, _)| n.as_str()).collect()
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.entries[i].1, self.entries[i].2)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len()
            && x.iter()
                .zip(&self.entries)
                .all(|(v, (_, lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Fraction of the prior range covered by `[lo, hi]` for parameter `i`.
    pub fn coverage(&self, i: usize, lo: f64, hi: f64) -> f64 {
        let (plo, phi) = self.bounds(i);
        ((hi.min(phi) - lo.max(plo)) / (phi - plo)).clamp(0.0, 1.0)
    }

    pub(crate) fn sample(&self, rng: &mut CounterRng) -> Vec<f64> {
        self.entries
            .iter()
            .map(|(_, lo, hi)| rng.uniform_in(*lo, *hi))
            .collect()
    }
}

/// Log-likelihood of a click histogram under per-bin expected counts λ_i:
/// Σ_i (k_i·ln λ_i − λ_i − ln k_i!).
///
/// A zero expectation with observed counts yields −∞ (an impossible sample,
/// to be rejected), never an error.
pub fn poisson_log_likelihood(expected: &[f64], data: &ClickHistogram) -> f64 {
    assert_eq!(
        expected.len(),
        data.counts.len(),
        "expected-count vector must match the histogram bins"
    );
    let mut total = 0.0;
    for (&lam, &k) in expected.iter().zip(&data.counts) {
        if !lam.is_finite() || lam < 0.0 {
            return f64::NEG_INFINITY;
        }
        if lam == 0.0 {
            if k > 0 {
                return f64::NEG_INFINITY;
            }
            continue; // certain event, zero contribution
        }
        total += k as f64 * lam.ln() - lam - ln_factorial(k);
    }
    total
}

/// Two-sided z value for a central interval at the given level.
pub(crate) fn z_critical(level: f64) -> f64 {
    // The two levels used in this crate; anything else falls back to a
    // rational approximation of the normal quantile.
    if (level - 0.95).abs() < 1e-12 {
        return 1.959_963_984_540_054;
    }
    if (level - 0.90).abs() < 1e-12 {
        return 1.644_853_626_951_472;
    }
    normal_quantile(0.5 + level / 2.0)
}

/// Acklam's rational approximation to the standard normal quantile.
fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Point estimates with credibility (or confidence) intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    names: Vec<String>,
    values: Vec<f64>,
    ci_low: Vec<f64>,
    ci_high: Vec<f64>,
    /// Interval level (e.g. 0.95).
    pub level: f64,
    /// Log-probability of the data at the point estimate (−χ²/2 for
    /// least-squares fits, up to the Gaussian normalization).
    pub logp: f64,
    /// Reduced chi-square, when the fit is a weighted least squares.
    pub red_chi2: Option<f64>,
    /// Sampler seed, when the fit is posterior-based.
    pub seed: Option<u64>,
}

impl FitResult {
    pub(crate) fn from_parts(
        names: Vec<String>,
        values: Vec<f64>,
        ci_low: Vec<f64>,
        ci_high: Vec<f64>,
        level: f64,
        logp: f64,
    ) -> Result<Self> {
        assert!(names.len() == values.len() && values.len() == ci_low.len());
        for i in 0..values.len() {
            if !(ci_low[i] <= values[i] && values[i] <= ci_high[i]) {
                return Err(Error::invalid(
                    "fit",
                    format!(
                        "interval [{}, {}] does not contain estimate {} for `{}`",
                        ci_low[i], ci_high[i], values[i], names[i]
                    ),
                ));
            }
        }
        Ok(FitResult {
            names,
            values,
            ci_low,
            ci_high,
            level,
            logp,
            red_chi2: None,
            seed: None,
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    /// Point estimate by parameter name.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.values[i])
    }

    /// `(low, high)` interval bounds by parameter name.
    pub fn interval(&self, name: &str) -> Option<(f64, f64)> {
        self.index(name).map(|i| (self.ci_low[i], self.ci_high[i]))
    }

    /// Does the interval for `name` contain `truth`?
    pub fn covers(&self, name: &str, truth: f64) -> bool {
        self.interval(name)
            .map(|(lo, hi)| lo <= truth && truth <= hi)
            .unwrap_or(false)
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// JSON with fields {params, ci_low, ci_high, level, logp, seed}.
    pub fn to_json(&self) -> String {
        let map = |vals: &[f64]| -> serde_json::Value {
            self.names
                .iter()
                .zip(vals)
                .map(|(n, v)| (n.clone(), serde_json::json!(v)))
                .collect::<serde_json::Map<_, _>>()
                .into()
        };
        let mut root = serde_json::json!({
            "params": map(&self.values),
            "ci_low": map(&self.ci_low),
            "ci_high": map(&self.ci_high),
            "level": self.level,
            "logp": self.logp,
            "seed": self.seed,
        });
        if let Some(rc) = self.red_chi2 {
            root["red_chi2"] = serde_json::json!(rc);
        }
        serde_json::to_string_pretty(&root).expect("fit result serializes")
    }
}
