//! From occupancy and pump waveforms to detector clicks: detected sideband
//! rates, noise-equivalent phonon occupation, a deterministic Poisson click
//! simulator, and the calibrated inverse mapping from counts back to
//! occupancy.

use crate::error::{Error, Result};
use crate::filter::{SampledWaveform, Sideband};
use crate::model::DeviceParams;
use crate::rng::{CounterRng, POISSON_NORMAL_CUTOVER};
use crate::units::angular;
use serde::{Deserialize, Serialize};

/// Detection-chain parameters of the photon-counting setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Cavity coupling efficiency κ_e/κ.
    pub eta_o: f64,
    /// Fiber-chip coupling efficiency.
    pub eta_fc: f64,
    /// Path transmission from chip to detector.
    pub eta_loss: f64,
    /// Detector efficiency.
    pub eta_det: f64,
    /// Dark count rate Γ_DCR (counts/s).
    pub dark_rate: f64,
    /// Residual pump transmission A (dimensionless power ratio).
    pub pump_suppression: f64,
    /// Excess laser-noise click rate at the operating power (counts/s).
    pub laser_noise_rate: f64,
}

impl DetectionConfig {
    pub fn new(
        eta_o: f64,
        eta_fc: f64,
        eta_loss: f64,
        eta_det: f64,
        dark_rate: f64,
        pump_suppression: f64,
        laser_noise_rate: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("eta_o", eta_o),
            ("eta_fc", eta_fc),
            ("eta_loss", eta_loss),
            ("eta_det", eta_det),
            ("pump_suppression", pump_suppression),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be in [0,1], got {v}")));
            }
        }
        for (name, v) in [("dark_rate", dark_rate), ("laser_noise_rate", laser_noise_rate)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(DetectionConfig {
            eta_o,
            eta_fc,
            eta_loss,
            eta_det,
            dark_rate,
            pump_suppression,
            laser_noise_rate,
        })
    }

    /// Total sideband detection efficiency η_tot = η_o·η_fc·η_loss·η_det.
    pub fn eta_tot(&self) -> f64 {
        self.eta_o * self.eta_fc * self.eta_loss * self.eta_det
    }

    /// Total background click rate Γ_noise (counts/s).
    pub fn noise_rate(&self) -> f64 {
        self.dark_rate + self.laser_noise_rate
    }
}

/// Pump detuning Δ = ω_l − ω_o relative to the mechanical frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detuning {
    /// Δ = −ω_m: the anti-Stokes sideband lands on the cavity resonance.
    Red,
    /// Δ = +ω_m: the Stokes sideband lands on the cavity resonance.
    Blue,
    /// Δ = 0: both sidebands are suppressed by the optical density of states.
    Resonant,
}

impl Detuning {
    /// The sideband measured in this configuration. Off-resonant pumping
    /// detects the sideband that falls on the cavity resonance; resonant
    /// pumping here reads out the anti-Stokes sideband (the thermometry
    /// choice, since it vanishes with the phonon number).
    pub fn detected_sideband(self) -> Sideband {
        match self {
            Detuning::Red | Detuning::Resonant => Sideband::AntiStokes,
            Detuning::Blue => Sideband::Stokes,
        }
    }

    fn is_resonant(self) -> bool {
        matches!(self, Detuning::Resonant)
    }
}

/// γ_om as a true event rate (scattered photons per second): the angular
/// counterpart of [`DeviceParams::gamma_om`].
pub fn gamma_om_rate(dev: &DeviceParams, n_c: f64) -> f64 {
    angular(dev.gamma_om(n_c))
}

/// Detected sideband photon rate (counts/s),
/// Γ± = γ_om·η_tot·(n_m + (1±1)/2) + Γ_noise,
/// with the optomechanical term additionally suppressed by (κ/2ω_m)² when
/// pumping on resonance.
pub fn sideband_rate(
    dev: &DeviceParams,
    cfg: &DetectionConfig,
    det: Detuning,
    n_c: f64,
    n_m: f64,
) -> f64 {
    debug_assert!(n_c >= 0.0 && n_m >= 0.0);
    let off = det.detected_sideband().vacuum_offset();
    let suppression = if det.is_resonant() {
        dev.resonant_suppression()
    } else {
        1.0
    };
    gamma_om_rate(dev, n_c) * cfg.eta_tot() * (n_m + off) * suppression + cfg.noise_rate()
}

/// Noise-equivalent phonon occupation: the background click rate expressed as
/// an apparent occupancy, given the calibration rate `gamma_cal` (counts/s at
/// unit photon and phonon number).
pub fn nnep(
    dev: &DeviceParams,
    cfg: &DetectionConfig,
    det: Detuning,
    n_c: f64,
    gamma_cal: f64,
) -> Result<f64> {
    if !(n_c > 0.0) {
        return Err(Error::invalid("n_c", format!("must be positive, got {n_c}")));
    }
    if !(gamma_cal > 0.0) {
        return Err(Error::invalid(
            "gamma_cal",
            format!("must be positive, got {gamma_cal}"),
        ));
    }
    let dark = cfg.dark_rate / (gamma_cal * n_c);
    let a = cfg.pump_suppression;
    Ok(if det.is_resonant() {
        dark * (2.0 * dev.omega_m / dev.kappa).powi(2)
            + a * (dev.kappa * dev.omega_m * (1.0 - 2.0 * cfg.eta_o)
                / (dev.kappa_e * dev.g_om))
                .powi(2)
    } else {
        dark + a * (dev.kappa * dev.omega_m / (2.0 * dev.kappa_e * dev.g_om)).powi(2)
    })
}

/// Binned single-photon counts accumulated over many pulse cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickHistogram {
    /// Left edges of the (uniform) time bins (s).
    pub bin_starts: Vec<f64>,
    /// Bin width Δt (s).
    pub bin_width: f64,
    /// Counts per bin, summed over repetitions.
    pub counts: Vec<u64>,
    /// Number of pulse cycles accumulated.
    pub repetitions: u64,
}

impl ClickHistogram {
    /// Uniform histogram starting at `t_start`.
    pub fn uniform(t_start: f64, bin_width: f64, counts: Vec<u64>, repetitions: u64) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::invalid("bin_width", "must be positive"));
        }
        if counts.is_empty() {
            return Err(Error::invalid("counts", "histogram must not be empty"));
        }
        if repetitions < 1 {
            return Err(Error::invalid("repetitions", "must be at least 1"));
        }
        let bin_starts = (0..counts.len())
            .map(|i| t_start + i as f64 * bin_width)
            .collect();
        Ok(ClickHistogram {
            bin_starts,
            bin_width,
            counts,
            repetitions,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Midpoint of bin `i`; rates are evaluated here.
    pub fn bin_center(&self, i: usize) -> f64 {
        self.bin_starts[i] + 0.5 * self.bin_width
    }

    /// Per-bin exposure: repetitions × Δt (s).
    pub fn exposure(&self) -> f64 {
        self.repetitions as f64 * self.bin_width
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Merge two histograms taken on the same grid (counts and repetitions add).
    pub fn merge(&self, other: &ClickHistogram) -> Result<ClickHistogram> {
        let same = self.len() == other.len()
            && (self.bin_width - other.bin_width).abs() <= 1e-9 * self.bin_width
            && (self.bin_starts[0] - other.bin_starts[0]).abs() <= 1e-6 * self.bin_width;
        if !same {
            return Err(Error::GridMismatch("histogram bins differ".into()));
        }
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a + b)
            .collect();
        ClickHistogram::uniform(
            self.bin_starts[0],
            self.bin_width,
            counts,
            self.repetitions + other.repetitions,
        )
    }

    /// Serialize as CSV with header `bin_start_s,bin_width_s,counts,repetitions`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start_s,bin_width_s,counts,repetitions\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!(
                "{:.12e},{:.12e},{},{}\n",
                self.bin_starts[i], self.bin_width, c, self.repetitions
            ));
        }
        out
    }

    /// Parse the CSV form produced by [`ClickHistogram::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut starts: Vec<f64> = Vec::new();
        let mut widths: Vec<f64> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        let mut reps: Vec<u64> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 {
                if line.trim() != "bin_start_s,bin_width_s,counts,repetitions" {
                    return Err(Error::CsvParse {
                        line: 1,
                        reason: format!(
                            "expected header `bin_start_s,bin_width_s,counts,repetitions`, got `{line}`"
                        ),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::CsvParse {
                    line: lineno + 1,
                    reason: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let bad = |reason: String| Error::CsvParse {
                line: lineno + 1,
                reason,
            };
            starts.push(
                fields[0]
                    .parse()
                    .map_err(|e| bad(format!("bin_start_s: {e}")))?,
            );
            widths.push(
                fields[1]
                    .parse()
                    .map_err(|e| bad(format!("bin_width_s: {e}")))?,
            );
            counts.push(fields[2].parse().map_err(|e| bad(format!("counts: {e}")))?);
            reps.push(
                fields[3]
                    .parse()
                    .map_err(|e| bad(format!("repetitions: {e}")))?,
            );
        }
        if counts.is_empty() {
            return Err(Error::CsvParse {
                line: 2,
                reason: "histogram has no rows".into(),
            });
        }
        let width = widths[0];
        if widths.iter().any(|w| (w - width).abs() > 1e-9 * width)
            || reps.iter().any(|r| *r != reps[0])
        {
            return Err(Error::CsvParse {
                line: 2,
                reason: "bin_width_s and repetitions must be constant".into(),
            });
        }
        for (i, w) in starts.windows(2).enumerate() {
            if ((w[1] - w[0]) - width).abs() > 1e-6 * width {
                return Err(Error::CsvParse {
                    line: i + 3,
                    reason: "bins are not contiguous and uniform".into(),
                });
            }
        }
        ClickHistogram::uniform(starts[0], width, counts, reps[0])
    }
}

/// Simulate a click histogram: for every repetition and bin, an independent
/// Poisson draw with mean rate(bin center)·Δt, accumulated over repetitions.
///
/// Each repetition owns a counter-based RNG substream, so the result depends
/// only on `(seed, repetitions, grid)` — never on how repetitions are batched.
pub fn simulate_clicks<F: Fn(f64) -> f64>(
    rate_fn: F,
    t_start: f64,
    window: f64,
    repetitions: u64,
    bin_width: f64,
    seed: u64,
) -> Result<ClickHistogram> {
    simulate_click_batch(rate_fn, t_start, window, 0, repetitions, bin_width, seed)
}

/// The repetitions `[first_rep, first_rep + repetitions)` of the substream
/// family selected by `seed`. Disjoint batches merge to exactly the joint
/// simulation.
pub fn simulate_click_batch<F: Fn(f64) -> f64>(
    rate_fn: F,
    t_start: f64,
    window: f64,
    first_rep: u64,
    repetitions: u64,
    bin_width: f64,
    seed: u64,
) -> Result<ClickHistogram> {
    if !(window > 0.0) || !(bin_width > 0.0) {
        return Err(Error::invalid("window/bin_width", "must be positive"));
    }
    if repetitions < 1 {
        return Err(Error::invalid("repetitions", "must be at least 1"));
    }
    let n_bins_f = window / bin_width;
    let n_bins = n_bins_f.round() as usize;
    if n_bins == 0 || (n_bins_f - n_bins as f64).abs() > 1e-9 * n_bins_f {
        return Err(Error::invalid(
            "bin_width",
            format!("must divide the window ({window} / {bin_width} = {n_bins_f})"),
        ));
    }
    let mut means = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let t = t_start + (i as f64 + 0.5) * bin_width;
        let r = rate_fn(t);
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidRate { t_s: t, value: r });
        }
        means.push(r * bin_width);
    }
    let exp_neg: Vec<f64> = means.iter().map(|m| (-m).exp()).collect();

    let mut counts = vec![0u64; n_bins];
    for rep in first_rep..(first_rep + repetitions) {
        let mut rng = CounterRng::new(seed, rep);
        for (i, (&mean, &en)) in means.iter().zip(&exp_neg).enumerate() {
            if mean == 0.0 {
                continue;
            }
            counts[i] += if mean < POISSON_NORMAL_CUTOVER {
                rng.poisson_inversion(mean, en)
            } else {
                rng.poisson(mean)
            };
        }
    }
    ClickHistogram::uniform(t_start, bin_width, counts, repetitions)
}

/// A per-bin occupancy estimate with one-sigma Poisson error bars.
#[derive(Debug, Clone)]
pub struct OccupancyEstimate {
    /// Measured occupancy n_m*(t) sampled at bin centers.
    pub waveform: SampledWaveform,
    /// One-sigma counting uncertainty per bin (√k propagated).
    pub sigma: Vec<f64>,
}

/// Calibrated inverse of the counting chain, applied per bin:
/// n_m* = k/(Γ_cal·n_c·Δt·reps) − (1±1)/2.
///
/// `gamma_cal` must match the detuning of the data (for resonant data fold the
/// (κ/2ω_m)² suppression into it).
pub fn histogram_to_occupancy(
    h: &ClickHistogram,
    gamma_cal: f64,
    nc_peak: f64,
    det: Detuning,
) -> Result<OccupancyEstimate> {
    if !(gamma_cal * nc_peak > 0.0) {
        return Err(Error::invalid(
            "gamma_cal/nc_peak",
            "calibration rate and peak photon number must be positive",
        ));
    }
    if h.repetitions < 1 || !(h.bin_width > 0.0) {
        return Err(Error::ZeroExposure);
    }
    let off = det.detected_sideband().vacuum_offset();
    let scale = gamma_cal * nc_peak * h.bin_width * h.repetitions as f64;
    let values: Vec<f64> = h.counts.iter().map(|&k| k as f64 / scale - off).collect();
    let sigma: Vec<f64> = h.counts.iter().map(|&k| (k as f64).sqrt() / scale).collect();
    Ok(OccupancyEstimate {
        waveform: SampledWaveform::from_raw(h.bin_center(0), h.bin_width, values),
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{release_free_detection, release_free_device};

    #[test]
    fn sideband_rate_limits() {
        let dev = release_free_device();
        let mut cfg = release_free_detection();
        cfg.dark_rate = 0.0;
        cfg.laser_noise_rate = 0.0;

        // No phonons, no noise: the anti-Stokes rate vanishes.
        assert_eq!(sideband_rate(&dev, &cfg, Detuning::Red, 100.0, 0.0), 0.0);

        // The Stokes vacuum term alone.
        let stokes0 = sideband_rate(&dev, &cfg, Detuning::Blue, 100.0, 0.0);
        let expect = gamma_om_rate(&dev, 100.0) * cfg.eta_tot();
        assert!((stokes0 - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn asymmetry_identity_independent_of_occupancy_and_noise() {
        let dev = release_free_device();
        let mut cfg = release_free_detection();
        cfg.dark_rate = 123.0;
        cfg.laser_noise_rate = 7.7;
        let n_c = 250.0;
        let expect = gamma_om_rate(&dev, n_c) * cfg.eta_tot();
        for n_m in [0.0, 1.0, 10.0, 137.2] {
            let plus = sideband_rate(&dev, &cfg, Detuning::Blue, n_c, n_m);
            let minus = sideband_rate(&dev, &cfg, Detuning::Red, n_c, n_m);
            assert!(((plus - minus) - expect).abs() < 1e-9 * expect);
        }
    }

    #[test]
    fn resonant_rate_suppressed() {
        let dev = release_free_device();
        let mut cfg = release_free_detection();
        cfg.dark_rate = 0.0;
        cfg.laser_noise_rate = 0.0;
        let ratio = sideband_rate(&dev, &cfg, Detuning::Resonant, 50.0, 3.0)
            / sideband_rate(&dev, &cfg, Detuning::Red, 50.0, 3.0);
        assert!((ratio - dev.resonant_suppression()).abs() < 1e-12);
        assert!((dev.resonant_suppression() - 0.0231).abs() < 1e-4);
    }

    #[test]
    fn nnep_reference_arithmetic() {
        let dev = release_free_device();
        let cfg = release_free_detection();
        let gamma_cal = 21.1;

        // Dark-count term alone.
        let mut dark_only = cfg.clone();
        dark_only.pump_suppression = 0.0;
        let dark = nnep(&dev, &dark_only, Detuning::Red, 1000.0, gamma_cal).unwrap();
        assert!((dark - 7.0 / 21_100.0).abs() < 1e-9);
        assert!((dark - 3.32e-4).abs() < 1e-6);

        // Pump-leak floor alone.
        let mut leak_only = cfg.clone();
        leak_only.dark_rate = 0.0;
        let leak = nnep(&dev, &leak_only, Detuning::Red, 1000.0, gamma_cal).unwrap();
        assert!((7.9e-4..8.4e-4).contains(&leak), "leak {leak}");

        // Combined.
        let total = nnep(&dev, &cfg, Detuning::Red, 1000.0, gamma_cal).unwrap();
        assert!((total - (dark + leak)).abs() < 1e-12);
        assert!((total - 1.15e-3).abs() < 5e-5, "total {total}");

        // Zero noise, zero leak: floor vanishes.
        let mut quiet = cfg.clone();
        quiet.dark_rate = 0.0;
        quiet.pump_suppression = 0.0;
        assert_eq!(nnep(&dev, &quiet, Detuning::Red, 10.0, gamma_cal).unwrap(), 0.0);
    }

    #[test]
    fn nnep_dark_terms_detuning_ratio() {
        let dev = release_free_device();
        let mut cfg = release_free_detection();
        cfg.pump_suppression = 0.0;
        let off = nnep(&dev, &cfg, Detuning::Red, 500.0, 21.1).unwrap();
        let res = nnep(&dev, &cfg, Detuning::Resonant, 500.0, 21.1).unwrap();
        let expect = (2.0 * dev.omega_m / dev.kappa).powi(2);
        assert!((res / off - expect).abs() < 1e-9);
        assert!((expect - 43.2).abs() < 0.1);
    }

    #[test]
    fn nnep_decreasing_with_constant_floor() {
        let dev = release_free_device();
        let cfg = release_free_detection();
        let mut prev = f64::INFINITY;
        for exp in 1..=8 {
            let n_c = 10f64.powi(exp);
            let v = nnep(&dev, &cfg, Detuning::Red, n_c, 21.1).unwrap();
            assert!(v < prev);
            prev = v;
        }
        // The floor no longer depends on n_c once dark counts are negligible.
        let hi1 = nnep(&dev, &cfg, Detuning::Red, 1e12, 21.1).unwrap();
        let hi2 = nnep(&dev, &cfg, Detuning::Red, 1e13, 21.1).unwrap();
        assert!((hi1 - hi2).abs() / hi1 < 1e-3);
    }

    #[test]
    fn constant_rate_moments() {
        let rate = 2e5;
        let h = simulate_clicks(|_| rate, 0.0, 2e-3, 1000, 1e-6, 42).unwrap();
        let per_bin: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
        let expect_total = rate * 2e-3 * 1000.0;
        let total: f64 = per_bin.iter().sum();
        assert!(total >= 1e5);
        assert!(
            (total - expect_total).abs() < 5.0 * expect_total.sqrt(),
            "total {total} vs {expect_total}"
        );
        let mean = crate::stats::mean(&per_bin);
        let var = crate::stats::std_dev(&per_bin).powi(2);
        let ratio = var / mean;
        assert!((0.9..=1.1).contains(&ratio), "variance/mean {ratio}");
    }

    #[test]
    fn zero_rate_all_zero() {
        let h = simulate_clicks(|_| 0.0, 0.0, 1e-4, 50, 1e-6, 7).unwrap();
        assert_eq!(h.total_counts(), 0);
        assert_eq!(h.len(), 100);
    }

    #[test]
    fn ring_up_rate_matches_analytic_means() {
        // Rate driven by the thermal ring-up; per-bin empirical means must sit
        // within 3σ of rate(t_i)·Δt for at least 95% of bins.
        let dynamics = crate::model::OccupancyDynamics::new(0.5, 8.0, 5e5, 0.0, 2e-6).unwrap();
        let scale = 3000.0;
        let rate = |t: f64| scale * dynamics.occupancy_unchecked(t);
        let reps = 1_000_000u64;
        let bin = 31.25e-9;
        let h = simulate_clicks(rate, 0.0, 2e-6, reps, bin, 11).unwrap();
        let mut good = 0;
        for i in 0..h.len() {
            let lam = rate(h.bin_center(i)) * bin;
            let expect = lam * reps as f64;
            let sigma = expect.sqrt();
            if (h.counts[i] as f64 - expect).abs() <= 3.0 * sigma {
                good += 1;
            }
        }
        assert!(
            good as f64 >= 0.95 * h.len() as f64,
            "{good}/{} bins inside 3 sigma",
            h.len()
        );
    }

    #[test]
    fn deterministic_and_batch_invariant() {
        let rate = |t: f64| 1e4 * (1.0 + (t * 1e6).sin().powi(2));
        let a = simulate_clicks(rate, 0.0, 1e-5, 400, 1e-7, 99).unwrap();
        let b = simulate_clicks(rate, 0.0, 1e-5, 400, 1e-7, 99).unwrap();
        assert_eq!(a, b);

        let first = simulate_click_batch(rate, 0.0, 1e-5, 0, 250, 1e-7, 99).unwrap();
        let second = simulate_click_batch(rate, 0.0, 1e-5, 250, 150, 1e-7, 99).unwrap();
        assert_eq!(first.merge(&second).unwrap(), a);

        let other_seed = simulate_clicks(rate, 0.0, 1e-5, 400, 1e-7, 100).unwrap();
        assert_ne!(a, other_seed);
    }

    #[test]
    fn half_windows_match_joint_in_distribution() {
        let rate = 5e4;
        let joint = simulate_clicks(|_| rate, 0.0, 2e-4, 200, 1e-6, 5).unwrap();
        let left = simulate_clicks(|_| rate, 0.0, 1e-4, 200, 1e-6, 6).unwrap();
        let right = simulate_clicks(|_| rate, 1e-4, 1e-4, 200, 1e-6, 7).unwrap();
        let halves: Vec<f64> = left
            .counts
            .iter()
            .chain(&right.counts)
            .map(|&c| c as f64)
            .collect();
        let joint_counts: Vec<f64> = joint.counts.iter().map(|&c| c as f64).collect();
        let (_, p) = crate::stats::ks_two_sample(&halves, &joint_counts);
        assert!(p > 0.01, "KS p = {p}");
    }

    #[test]
    fn occupancy_round_trip_at_fixed_occupation() {
        // Clicks at a constant n_m = 10 invert back to 10 within the counting
        // error of 1e5 repetitions.
        let gamma_cal = 21.1;
        let n_c = 128.0;
        let n_m = 10.0;
        let rate = gamma_cal * n_c * n_m;
        let reps = 100_000u64;
        let h = simulate_clicks(|_| rate, 0.0, 4e-7, reps, 2e-8, 21).unwrap();
        let est = histogram_to_occupancy(&h, gamma_cal, n_c, Detuning::Red).unwrap();
        let mean = crate::stats::mean(est.waveform.values());
        assert!((mean - n_m).abs() < 0.5, "mean {mean}");
        // Error bars have the right scale.
        let expect_sigma = (rate * 2e-8 * reps as f64).sqrt() / (gamma_cal * n_c * 2e-8 * reps as f64);
        let got_sigma = crate::stats::mean(&est.sigma);
        assert!((got_sigma - expect_sigma).abs() / expect_sigma < 0.05);
    }

    #[test]
    fn occupancy_definitional_cases() {
        // Bins exactly at the unit-occupancy rate give n_m* = 1 (anti-Stokes).
        let gamma_cal = 20.0;
        let n_c = 10.0;
        let dt = 1e-3;
        let reps = 500u64;
        let k = (gamma_cal * n_c * dt * reps as f64).round() as u64;
        let h = ClickHistogram::uniform(0.0, dt, vec![k; 8], reps).unwrap();
        let est = histogram_to_occupancy(&h, gamma_cal, n_c, Detuning::Red).unwrap();
        for v in est.waveform.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        // The same counts read as Stokes data sit at n_m* = 0.
        let est_s = histogram_to_occupancy(&h, gamma_cal, n_c, Detuning::Blue).unwrap();
        for v in est_s.waveform.values() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn simulate_rejects_bad_input() {
        assert!(matches!(
            simulate_clicks(|_| -1.0, 0.0, 1e-5, 10, 1e-6, 0),
            Err(Error::InvalidRate { .. })
        ));
        assert!(simulate_clicks(|_| 1.0, 0.0, 1e-5, 10, 3e-6, 0).is_err());
        assert!(matches!(
            histogram_to_occupancy(
                &ClickHistogram::uniform(0.0, 1e-6, vec![1; 4], 10).unwrap(),
                0.0,
                1.0,
                Detuning::Red
            ),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn histogram_csv_round_trip() {
        let h = ClickHistogram::uniform(1e-6, 5e-8, vec![0, 3, 17, 2], 1000).unwrap();
        let parsed = ClickHistogram::from_csv(&h.to_csv()).unwrap();
        assert_eq!(h, parsed);
        assert!(ClickHistogram::from_csv("bad header\n").is_err());
        assert!(ClickHistogram::from_csv(
            "bin_start_s,bin_width_s,counts,repetitions\n0,1e-6,oops,10\n"
        )
        .is_err());
    }
}
