//! Thermometry calibration: three independent routes to Γ_cal, the detected
//! count rate at unit intracavity photon and unit phonon number, each with
//! first-order uncertainty propagation (and a Monte-Carlo cross-check mode).
//!
//! * direct — Γ_cal = 2π·4g_om²η_tot/κ from device and efficiency knowledge;
//! * sideband asymmetry — Γ_cal = (Γ₊ − Γ₋)/n_c from the vacuum-fluctuation
//!   rate difference;
//! * coherent excitation — Γ_cal = Γ₋^coh/(n_c·n_coh) against a coherent
//!   phonon state of computable amplitude.

use crate::detection::{gamma_om_rate, DetectionConfig};
use crate::error::{Error, Result};
use crate::filter::{cw_sweep_response, FilterStack};
use crate::model::{BathModel, DeviceParams};
use crate::rng::CounterRng;
use crate::units::angular;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A value with a one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Measured { value, sigma }
    }

    /// A value known exactly (zero uncertainty).
    pub fn exact(value: f64) -> Self {
        Measured { value, sigma: 0.0 }
    }

    /// Relative uncertainty; zero for an exactly known zero.
    pub fn rel(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            (self.sigma / self.value).abs()
        }
    }
}

/// Which procedure produced a calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    Direct,
    SidebandAsymmetry,
    CoherentExcitation,
}

/// A calibration rate with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Γ_cal: counts/s at unit n_c and unit n_m.
    pub gamma_cal: f64,
    /// One-sigma uncertainty (counts/s).
    pub sigma: f64,
    pub method: CalibrationMethod,
    /// Every ingoing parameter (values and sigmas) keyed by name.
    pub inputs: BTreeMap<String, f64>,
    /// Soft contract violations noticed along the way.
    pub warnings: Vec<String>,
}

impl CalibrationResult {
    fn new(
        gamma_cal: f64,
        sigma: f64,
        method: CalibrationMethod,
        inputs: BTreeMap<String, f64>,
        warnings: Vec<String>,
    ) -> Result<Self> {
        if !(gamma_cal > 0.0) {
            return Err(Error::invalid(
                "gamma_cal",
                format!("calibration must be positive, got {gamma_cal}"),
            ));
        }
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be finite and nonnegative"));
        }
        Ok(CalibrationResult {
            gamma_cal,
            sigma,
            method,
            inputs,
            warnings,
        })
    }

    /// JSON form including the full input provenance record.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration result serializes")
    }

    /// Whether two calibrations agree within k combined sigmas.
    pub fn agrees_within(&self, other: &CalibrationResult, k: f64) -> bool {
        let combined = (self.sigma.powi(2) + other.sigma.powi(2)).sqrt();
        (self.gamma_cal - other.gamma_cal).abs() <= k * combined
    }
}

/// One-sigma uncertainties of the inputs to [`direct_calibration`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DirectCalibrationSigmas {
    pub g_om: f64,
    pub kappa: f64,
    pub eta_o: f64,
    pub eta_fc: f64,
    pub eta_loss: f64,
    pub eta_det: f64,
}

/// Γ_cal from device constants and the efficiency budget,
/// Γ_cal = 2π·4g_om²η_tot/κ, with first-order error propagation.
pub fn direct_calibration(
    dev: &DeviceParams,
    cfg: &DetectionConfig,
    sigmas: &DirectCalibrationSigmas,
) -> Result<CalibrationResult> {
    let etas = [
        ("eta_o", cfg.eta_o, sigmas.eta_o),
        ("eta_fc", cfg.eta_fc, sigmas.eta_fc),
        ("eta_loss", cfg.eta_loss, sigmas.eta_loss),
        ("eta_det", cfg.eta_det, sigmas.eta_det),
    ];
    for (name, v, _) in etas {
        if v <= 0.0 {
            return Err(Error::IncompleteInput(format!(
                "efficiency {name} is zero or unmeasured"
            )));
        }
    }
    let value = gamma_om_rate(dev, 1.0) * cfg.eta_tot();
    let mut rel2 = (2.0 * sigmas.g_om / dev.g_om).powi(2) + (sigmas.kappa / dev.kappa).powi(2);
    for (_, v, s) in etas {
        rel2 += (s / v).powi(2);
    }
    let sigma = value * rel2.sqrt();

    let mut inputs = BTreeMap::new();
    inputs.insert("g_om_hz".into(), dev.g_om);
    inputs.insert("kappa_hz".into(), dev.kappa);
    inputs.insert("sigma_g_om_hz".into(), sigmas.g_om);
    inputs.insert("sigma_kappa_hz".into(), sigmas.kappa);
    for (name, v, s) in etas {
        inputs.insert(name.into(), v);
        inputs.insert(format!("sigma_{name}"), s);
    }
    CalibrationResult::new(value, sigma, CalibrationMethod::Direct, inputs, Vec::new())
}

/// Monte-Carlo cross-check of [`direct_calibration`]'s linearized error bar:
/// draws the inputs from independent normals and reports the sample spread.
pub fn direct_calibration_mc(
    dev: &DeviceParams,
    cfg: &DetectionConfig,
    sigmas: &DirectCalibrationSigmas,
    draws: usize,
    seed: u64,
) -> Result<Measured> {
    if draws < 2 {
        return Err(Error::invalid("draws", "need at least two draws"));
    }
    let mut samples = Vec::with_capacity(draws);
    for i in 0..draws {
        let mut rng = CounterRng::new(seed, i as u64);
        let mut draw = |v: f64, s: f64| (v + s * rng.normal()).max(1e-12);
        let g = draw(dev.g_om, sigmas.g_om);
        let kappa = draw(dev.kappa, sigmas.kappa);
        let eta = draw(cfg.eta_o, sigmas.eta_o)
            * draw(cfg.eta_fc, sigmas.eta_fc)
            * draw(cfg.eta_loss, sigmas.eta_loss)
            * draw(cfg.eta_det, sigmas.eta_det);
        samples.push(angular(4.0 * g * g / kappa) * eta);
    }
    Ok(Measured::new(
        crate::stats::mean(&samples),
        crate::stats::std_dev(&samples),
    ))
}

/// Γ_cal from the Stokes/anti-Stokes rate difference at a shared photon
/// number: Γ_cal = (Γ₊ − Γ₋)/n_c with σ = √(σ₊² + σ₋²)/n_c.
///
/// Requiring one `n_c` for both rates encodes the equal-conditions assumption
/// of the method; see [`back_action_contamination`] for the pre-flight check.
pub fn asymmetry_calibration(
    gamma_plus: Measured,
    gamma_minus: Measured,
    n_c: f64,
) -> Result<CalibrationResult> {
    if !(n_c > 0.0) {
        return Err(Error::invalid("n_c", format!("must be positive, got {n_c}")));
    }
    let asym = gamma_plus.value - gamma_minus.value;
    if asym <= 0.0 {
        return Err(Error::invalid(
            "gamma_plus",
            format!(
                "non-positive sideband asymmetry ({} - {}): insufficient asymmetry or mis-ordered inputs",
                gamma_plus.value, gamma_minus.value
            ),
        ));
    }
    let value = asym / n_c;
    let sigma = (gamma_plus.sigma.powi(2) + gamma_minus.sigma.powi(2)).sqrt() / n_c;
    let mut inputs = BTreeMap::new();
    inputs.insert("gamma_plus_cps".into(), gamma_plus.value);
    inputs.insert("sigma_gamma_plus_cps".into(), gamma_plus.sigma);
    inputs.insert("gamma_minus_cps".into(), gamma_minus.value);
    inputs.insert("sigma_gamma_minus_cps".into(), gamma_minus.sigma);
    inputs.insert("n_c".into(), n_c);
    CalibrationResult::new(
        value,
        sigma,
        CalibrationMethod::SidebandAsymmetry,
        inputs,
        Vec::new(),
    )
}

/// Ratio γ_om/(γ_0 + γ_p) at the operating power. Above ~0.1 the asymmetry
/// calibration's equal-conditions assumption starts to fail through
/// optomechanical back-action.
pub fn back_action_contamination(dev: &DeviceParams, bath: &BathModel, n_c: f64) -> f64 {
    dev.gamma_om(n_c) / bath.gamma_m_of_nc(n_c)
}

/// One point of a pump-filter detuning sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Filter-stack detuning Δ_p from the sideband (Hz).
    pub delta_p: f64,
    /// Measured rate (counts/s).
    pub rate: f64,
    /// One-sigma uncertainty of the rate (counts/s).
    pub sigma: f64,
}

/// Weighted least-squares amplitude of the filter-sweep shape: the measured
/// rates are modeled as Γ±·response(Δ_p) with the response from
/// [`cw_sweep_response`], and the peak (unfiltered) rate Γ± is returned.
pub fn sideband_sweep_fit(
    points: &[SweepPoint],
    stack: &FilterStack,
    gamma_m: f64,
) -> Result<Measured> {
    if points.len() < 5 {
        return Err(Error::NotEnoughPoints {
            needed: 5,
            got: points.len(),
        });
    }
    let lo = points.iter().map(|p| p.delta_p).fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .map(|p| p.delta_p)
        .fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 2.0 * stack.fwhm {
        return Err(Error::DegenerateFit(format!(
            "sweep span {} Hz must cover at least twice the filter width {} Hz",
            hi - lo,
            stack.fwhm
        )));
    }
    // Noiseless synthetic sweeps carry zero sigmas; fall back to unit weights.
    let unweighted = points.iter().any(|p| p.sigma <= 0.0);
    let mut num = 0.0;
    let mut den = 0.0;
    for p in points {
        let s = cw_sweep_response(stack, gamma_m, p.delta_p)?;
        let w = if unweighted { 1.0 } else { 1.0 / (p.sigma * p.sigma) };
        num += w * s * p.rate;
        den += w * s * s;
    }
    if den <= 0.0 {
        return Err(Error::DegenerateFit(
            "sweep response vanished at every point".into(),
        ));
    }
    let amplitude = num / den;
    let sigma = if unweighted { 0.0 } else { den.sqrt().recip() };
    Ok(Measured::new(amplitude, sigma))
}

/// Coherent mechanical drive delivered through a modulated pump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentDriveSpec {
    /// Modulated sideband power relative to the pump.
    pub xi_sb: Measured,
    /// Pump photon flux in the bus waveguide (photons/s).
    pub phi_pump: Measured,
    /// Drive duration (s).
    pub t_drive: f64,
}

impl CoherentDriveSpec {
    pub fn new(xi_sb: Measured, phi_pump: Measured, t_drive: f64) -> Result<Self> {
        if !(xi_sb.value > 0.0 && xi_sb.value < 1.0) {
            return Err(Error::invalid(
                "xi_sb",
                format!("must be in (0,1), got {}", xi_sb.value),
            ));
        }
        if !(phi_pump.value > 0.0) {
            return Err(Error::invalid("phi_pump", "must be positive"));
        }
        if !(t_drive > 0.0) {
            return Err(Error::invalid("t_drive", "must be positive"));
        }
        Ok(CoherentDriveSpec {
            xi_sb,
            phi_pump,
            t_drive,
        })
    }
}

/// Steady-state coherent occupation reached by a resonant beat-note drive:
/// n_coh = 4·η_o·γ_om·ξ_sb·Φ_pump / γ_m² (rates made angular-consistent
/// internally; γ_om and γ_m are the usual ω/2π Hz values).
pub fn coherent_occupation(eta_o: f64, gamma_om_hz: f64, xi_sb: f64, phi_pump: f64, gamma_m_hz: f64) -> f64 {
    4.0 * eta_o * angular(gamma_om_hz) * xi_sb * phi_pump / angular(gamma_m_hz).powi(2)
}

/// Γ_cal from coherent excitation: Γ_cal = Γ₋^coh/(n_c·n_coh) with n_coh from
/// [`coherent_occupation`]. Emits a warning when the drive is not much longer
/// than the mechanical response time (2π·γ_m·T_drive < 5).
#[allow(clippy::too_many_arguments)]
pub fn coherent_calibration(
    spec: &CoherentDriveSpec,
    gamma_m: Measured,
    gamma_om_val: Measured,
    eta_o: Measured,
    gamma_minus_coh: Measured,
    n_c: Measured,
) -> Result<CalibrationResult> {
    if !(gamma_m.value > 0.0) || !(gamma_om_val.value > 0.0) || !(eta_o.value > 0.0) {
        return Err(Error::invalid(
            "gamma_m/gamma_om/eta_o",
            "rates and efficiencies must be positive",
        ));
    }
    if !(gamma_minus_coh.value > 0.0) || !(n_c.value > 0.0) {
        return Err(Error::invalid(
            "gamma_minus_coh/n_c",
            "measured rate and photon number must be positive",
        ));
    }
    let mut warnings = Vec::new();
    let ring_factor = angular(gamma_m.value) * spec.t_drive;
    if ring_factor < 5.0 {
        warnings.push(format!(
            "drive duration covers only {ring_factor:.2} mechanical response times (want >= 5); \
             the coherent state may not have reached steady state"
        ));
    }
    let n_coh = coherent_occupation(
        eta_o.value,
        gamma_om_val.value,
        spec.xi_sb.value,
        spec.phi_pump.value,
        gamma_m.value,
    );
    let rel2_ncoh = eta_o.rel().powi(2)
        + gamma_om_val.rel().powi(2)
        + spec.xi_sb.rel().powi(2)
        + spec.phi_pump.rel().powi(2)
        + (2.0 * gamma_m.rel()).powi(2);
    let value = gamma_minus_coh.value / (n_c.value * n_coh);
    let rel2 = gamma_minus_coh.rel().powi(2) + n_c.rel().powi(2) + rel2_ncoh;
    let sigma = value * rel2.sqrt();

    let mut inputs = BTreeMap::new();
    inputs.insert("xi_sb".into(), spec.xi_sb.value);
    inputs.insert("sigma_xi_sb".into(), spec.xi_sb.sigma);
    inputs.insert("phi_pump_cps".into(), spec.phi_pump.value);
    inputs.insert("sigma_phi_pump_cps".into(), spec.phi_pump.sigma);
    inputs.insert("t_drive_s".into(), spec.t_drive);
    inputs.insert("gamma_m_hz".into(), gamma_m.value);
    inputs.insert("sigma_gamma_m_hz".into(), gamma_m.sigma);
    inputs.insert("gamma_om_hz".into(), gamma_om_val.value);
    inputs.insert("sigma_gamma_om_hz".into(), gamma_om_val.sigma);
    inputs.insert("eta_o".into(), eta_o.value);
    inputs.insert("sigma_eta_o".into(), eta_o.sigma);
    inputs.insert("gamma_minus_coh_cps".into(), gamma_minus_coh.value);
    inputs.insert("sigma_gamma_minus_coh_cps".into(), gamma_minus_coh.sigma);
    inputs.insert("n_c".into(), n_c.value);
    inputs.insert("sigma_n_c".into(), n_c.sigma);
    inputs.insert("n_coh".into(), n_coh);
    CalibrationResult::new(
        value,
        sigma,
        CalibrationMethod::CoherentExcitation,
        inputs,
        warnings,
    )
}

/// Extrapolate a free exponential decay back to the end of the drive (t = 0)
/// by weighted log-linear least squares. Exact on noiseless exponentials.
///
/// `points` are `(t, rate, sigma)` with positive rates; returns the rate at
/// t = 0 with its propagated uncertainty.
pub fn extrapolate_to_drive_end(points: &[(f64, f64, f64)]) -> Result<Measured> {
    if points.len() < 2 {
        return Err(Error::NotEnoughPoints {
            needed: 2,
            got: points.len(),
        });
    }
    if points.iter().any(|&(_, y, _)| y <= 0.0) {
        return Err(Error::invalid(
            "points",
            "rates must be positive for log-linear extrapolation",
        ));
    }
    // ln y = ln A - lambda t, weights w = (y/sigma)^2; unit weights if any
    // sigma is unset.
    let unweighted = points.iter().any(|&(_, _, s)| s <= 0.0);
    let (mut sw, mut st, mut sl, mut stt, mut stl) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y, s) in points {
        let w = if unweighted { 1.0 } else { (y / s).powi(2) };
        let l = y.ln();
        sw += w;
        st += w * t;
        sl += w * l;
        stt += w * t * t;
        stl += w * t * l;
    }
    let det = sw * stt - st * st;
    if det.abs() < 1e-300 {
        return Err(Error::DegenerateFit(
            "decay points do not span a time interval".into(),
        ));
    }
    let ln_a = (stt * sl - st * stl) / det;
    let var_ln_a = if unweighted { 0.0 } else { stt / det };
    let a = ln_a.exp();
    Ok(Measured::new(a, a * var_ln_a.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{reference_filter_stack, release_free_detection, release_free_device};

    fn direct_fixture_sigmas(dev: &DeviceParams, cfg: &DetectionConfig) -> DirectCalibrationSigmas {
        DirectCalibrationSigmas {
            g_om: 0.05 * dev.g_om,
            kappa: 0.02 * dev.kappa,
            eta_o: 0.03 * cfg.eta_o,
            eta_fc: 0.07 * cfg.eta_fc,
            eta_loss: 0.05 * cfg.eta_loss,
            eta_det: 0.04 * cfg.eta_det,
        }
    }

    #[test]
    fn direct_reference_value() {
        let dev = release_free_device();
        let cfg = release_free_detection();
        let res = direct_calibration(&dev, &cfg, &direct_fixture_sigmas(&dev, &cfg)).unwrap();
        assert!((res.gamma_cal - 24.7).abs() < 0.05, "{}", res.gamma_cal);
        assert!((res.sigma - 3.5).abs() < 0.1, "{}", res.sigma);
        assert_eq!(res.method, CalibrationMethod::Direct);
        assert!(res.inputs.contains_key("eta_fc"));
    }

    #[test]
    fn direct_scaling_and_errors() {
        let dev = release_free_device();
        let cfg = release_free_detection();
        let sig = DirectCalibrationSigmas::default();
        let base = direct_calibration(&dev, &cfg, &sig).unwrap().gamma_cal;
        let mut dev2 = dev.clone();
        dev2.g_om *= 2.0;
        let doubled = direct_calibration(&dev2, &cfg, &sig).unwrap().gamma_cal;
        assert!((doubled / base - 4.0).abs() < 1e-12);

        let mut blind = cfg.clone();
        blind.eta_det = 0.0;
        assert!(matches!(
            direct_calibration(&dev, &blind, &sig),
            Err(Error::IncompleteInput(_))
        ));
    }

    #[test]
    fn direct_mc_matches_linear_propagation() {
        let dev = release_free_device();
        let cfg = release_free_detection();
        let sigmas = direct_fixture_sigmas(&dev, &cfg);
        let linear = direct_calibration(&dev, &cfg, &sigmas).unwrap();
        let mc = direct_calibration_mc(&dev, &cfg, &sigmas, 20_000, 3).unwrap();
        assert!((mc.value - linear.gamma_cal).abs() / linear.gamma_cal < 0.02);
        assert!((mc.sigma - linear.sigma).abs() / linear.sigma < 0.15);
    }

    #[test]
    fn asymmetry_unit_construction_and_fixture() {
        let x = 37.0;
        let res =
            asymmetry_calibration(Measured::exact(2.0 * x), Measured::exact(x), x).unwrap();
        assert!((res.gamma_cal - 1.0).abs() < 1e-12);

        let table = asymmetry_calibration(
            Measured::new(2532.0, 495.0),
            Measured::new(422.0, 495.0),
            100.0,
        )
        .unwrap();
        assert!((table.gamma_cal - 21.1).abs() < 0.05, "{}", table.gamma_cal);
        assert!((table.sigma - 7.0).abs() < 0.05, "{}", table.sigma);
    }

    #[test]
    fn asymmetry_invariant_to_common_background() {
        // Any additive rate common to both sidebands cancels exactly.
        let base = asymmetry_calibration(
            Measured::exact(2000.0),
            Measured::exact(500.0),
            80.0,
        )
        .unwrap();
        let shifted = asymmetry_calibration(
            Measured::exact(2000.0 + 333.0),
            Measured::exact(500.0 + 333.0),
            80.0,
        )
        .unwrap();
        assert_eq!(base.gamma_cal, shifted.gamma_cal);
    }

    #[test]
    fn asymmetry_rejects_mis_ordered() {
        assert!(asymmetry_calibration(Measured::exact(10.0), Measured::exact(20.0), 5.0).is_err());
        assert!(asymmetry_calibration(Measured::exact(10.0), Measured::exact(10.0), 5.0).is_err());
    }

    #[test]
    fn asymmetry_monte_carlo_recovers_truth() {
        // Simulated counting at n_m = 0.2: the extracted rate matches the
        // gamma_om*eta_tot used in the simulation within 3 sigma of the
        // 50-run ensemble mean.
        let dev = release_free_device();
        let cfg = release_free_detection();
        let n_c = 200.0;
        let n_m = 0.2;
        let truth = gamma_om_rate(&dev, 1.0) * cfg.eta_tot();
        let tau = 400.0; // seconds of integration per sideband
        let runs = 50;
        let mut estimates = Vec::with_capacity(runs);
        for run in 0..runs {
            let mut rng = CounterRng::new(77, run as u64);
            let rate_plus = gamma_om_rate(&dev, n_c) * cfg.eta_tot() * (n_m + 1.0);
            let rate_minus = gamma_om_rate(&dev, n_c) * cfg.eta_tot() * n_m;
            let k_plus = rng.poisson(rate_plus * tau) as f64;
            let k_minus = rng.poisson(rate_minus * tau) as f64;
            let res = asymmetry_calibration(
                Measured::new(k_plus / tau, k_plus.sqrt() / tau),
                Measured::new(k_minus / tau, k_minus.sqrt() / tau),
                n_c,
            )
            .unwrap();
            estimates.push(res.gamma_cal);
        }
        let mean = crate::stats::mean(&estimates);
        let sem = crate::stats::std_dev(&estimates) / (runs as f64).sqrt();
        assert!(
            (mean - truth).abs() <= 3.0 * sem,
            "mean {mean} vs truth {truth} (sem {sem})"
        );
    }

    #[test]
    fn sweep_fit_recovers_noiseless_amplitude() {
        let stack = reference_filter_stack();
        let gamma_m = 5.2e5;
        let amp = 2500.0;
        let points: Vec<SweepPoint> = [-15.0, -10.0, -5.0, -2.0, 0.0, 2.0, 5.0, 10.0, 15.0]
            .iter()
            .map(|&mhz| {
                let dp = mhz * 1e6;
                SweepPoint {
                    delta_p: dp,
                    rate: amp * cw_sweep_response(&stack, gamma_m, dp).unwrap(),
                    sigma: 0.0,
                }
            })
            .collect();
        let fit = sideband_sweep_fit(&points, &stack, gamma_m).unwrap();
        assert!((fit.value - amp).abs() / amp < 1e-6, "{}", fit.value);
    }

    #[test]
    fn sweep_fit_coverage_under_poisson_noise() {
        let stack = reference_filter_stack();
        let gamma_m = 5.2e5;
        let amp = 2500.0;
        let tau = 0.5;
        let detunings: Vec<f64> = (-8..=8).map(|i| i as f64 * 2e6).collect();
        let shapes: Vec<f64> = detunings
            .iter()
            .map(|&dp| cw_sweep_response(&stack, gamma_m, dp).unwrap())
            .collect();
        let mut covered = 0;
        let runs = 100;
        for run in 0..runs {
            let mut rng = CounterRng::new(123, run as u64);
            let points: Vec<SweepPoint> = detunings
                .iter()
                .zip(&shapes)
                .map(|(&dp, &s)| {
                    let k = rng.poisson(amp * s * tau) as f64;
                    SweepPoint {
                        delta_p: dp,
                        rate: k / tau,
                        sigma: (k.max(1.0)).sqrt() / tau,
                    }
                })
                .collect();
            let fit = sideband_sweep_fit(&points, &stack, gamma_m).unwrap();
            if (fit.value - amp).abs() <= 3.0 * fit.sigma {
                covered += 1;
            }
        }
        assert!(covered >= 95, "3-sigma coverage {covered}/{runs}");
    }

    #[test]
    fn sweep_fit_degenerate_inputs() {
        let stack = reference_filter_stack();
        let one = vec![SweepPoint {
            delta_p: 0.0,
            rate: 1.0,
            sigma: 1.0,
        }];
        assert!(matches!(
            sideband_sweep_fit(&one, &stack, 5e5),
            Err(Error::NotEnoughPoints { .. })
        ));
        let same: Vec<SweepPoint> = (0..6)
            .map(|_| SweepPoint {
                delta_p: 1e6,
                rate: 2.0,
                sigma: 0.1,
            })
            .collect();
        assert!(matches!(
            sideband_sweep_fit(&same, &stack, 5e5),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn coherent_occupation_scalings() {
        let base = coherent_occupation(0.4, 2.6e4, 0.01, 2.5e11, 5.2e5);
        // Inverse-square in the linewidth.
        let half = coherent_occupation(0.4, 2.6e4, 0.01, 2.5e11, 2.6e5);
        assert!((half / base - 4.0).abs() < 1e-12);
        // Linear in eta_o, xi, phi.
        assert!(
            (coherent_occupation(0.8, 2.6e4, 0.01, 2.5e11, 5.2e5) / base - 2.0).abs() < 1e-12
        );
        assert!(
            (coherent_occupation(0.4, 2.6e4, 0.02, 2.5e11, 5.2e5) / base - 2.0).abs() < 1e-12
        );
        assert!(
            (coherent_occupation(0.4, 2.6e4, 0.01, 5.0e11, 5.2e5) / base - 2.0).abs() < 1e-12
        );
    }

    #[test]
    fn coherent_reference_fixture() {
        // Drive and device inputs chosen to document the coherent-method row:
        // n_coh ≈ 64.5 at n_c = 48 and a measured 64394 cps at the drive end.
        let dev = release_free_device();
        let bath = crate::presets::release_free_bath();
        let n_c = 48.0;
        let gamma_m = bath.gamma_m_of_nc(n_c);
        let gamma_om = dev.gamma_om(n_c);
        let spec = CoherentDriveSpec::new(
            Measured::new(0.01, 0.0003),
            Measured::new(2.5e11, 7.5e9),
            2e-6,
        )
        .unwrap();
        let res = coherent_calibration(
            &spec,
            Measured::new(gamma_m, 0.03 * gamma_m),
            Measured::new(gamma_om, 0.04 * gamma_om),
            Measured::new(dev.eta_o(), 0.02 * dev.eta_o()),
            Measured::new(64_394.3, 0.02 * 64_394.3),
            Measured::new(n_c, 0.05 * n_c),
        )
        .unwrap();
        let n_coh = res.inputs["n_coh"];
        assert!((n_coh - 64.5).abs() < 0.1, "n_coh = {n_coh}");
        assert!((res.gamma_cal - 20.8).abs() < 0.05, "{}", res.gamma_cal);
        assert!((res.sigma - 2.1).abs() < 0.15, "{}", res.sigma);
        assert!(res.warnings.is_empty());
    }

    #[test]
    fn coherent_warns_on_short_drive() {
        let spec = CoherentDriveSpec::new(
            Measured::exact(0.01),
            Measured::exact(1e11),
            1e-7,
        )
        .unwrap();
        let res = coherent_calibration(
            &spec,
            Measured::exact(5.2e5),
            Measured::exact(2.6e4),
            Measured::exact(0.42),
            Measured::exact(1e4),
            Measured::exact(48.0),
        )
        .unwrap();
        assert_eq!(res.warnings.len(), 1);
    }

    #[test]
    fn extrapolation_exact_for_clean_exponential() {
        let a = 6.4e4;
        let lambda = crate::units::angular(5.2e5);
        let points: Vec<(f64, f64, f64)> = (1..=8)
            .map(|i| {
                let t = i as f64 * 2e-7;
                (t, a * (-lambda * t).exp(), 0.0)
            })
            .collect();
        let fit = extrapolate_to_drive_end(&points).unwrap();
        assert!((fit.value - a).abs() / a < 1e-10, "{}", fit.value);
    }

    #[test]
    fn coherent_full_pipeline_recovers_ground_truth() {
        // Drive a simulated mode to its coherent steady state, observe the
        // noisy decay, extrapolate back to the drive end, and calibrate; the
        // result must land within 5% of the gamma_om*eta_tot ground truth.
        let dev = release_free_device();
        let cfg = release_free_detection();
        let bath = crate::presets::release_free_bath();
        let n_c = 48.0;
        let gamma_m = bath.gamma_m_of_nc(n_c);
        let truth = gamma_om_rate(&dev, 1.0) * cfg.eta_tot();

        let spec = CoherentDriveSpec::new(
            Measured::exact(0.01),
            Measured::exact(2.5e11),
            2e-6,
        )
        .unwrap();
        let n_coh = coherent_occupation(
            dev.eta_o(),
            dev.gamma_om(n_c),
            spec.xi_sb.value,
            spec.phi_pump.value,
            gamma_m,
        );

        // Noisy observation of the free decay after the drive stops.
        let rate0 = truth * n_c * n_coh;
        let lambda = angular(gamma_m);
        let tau_bin = 2e-2; // effective exposure per decay point
        let mut rng = CounterRng::new(2024, 0);
        let points: Vec<(f64, f64, f64)> = (1..=10)
            .map(|i| {
                let t = i as f64 * 0.8e-7;
                let mean = rate0 * (-lambda * t).exp() * tau_bin;
                let k = rng.poisson(mean) as f64;
                (t, k.max(1.0) / tau_bin, k.max(1.0).sqrt() / tau_bin)
            })
            .collect();
        let at_end = extrapolate_to_drive_end(&points).unwrap();

        let res = coherent_calibration(
            &spec,
            Measured::exact(gamma_m),
            Measured::exact(dev.gamma_om(n_c)),
            Measured::exact(dev.eta_o()),
            at_end,
            Measured::exact(n_c),
        )
        .unwrap();
        assert!(
            (res.gamma_cal - truth).abs() / truth < 0.05,
            "{} vs {}",
            res.gamma_cal,
            truth
        );
    }

    #[test]
    fn json_round_trip_carries_provenance() {
        let res = asymmetry_calibration(
            Measured::new(2532.0, 495.0),
            Measured::new(422.0, 495.0),
            100.0,
        )
        .unwrap();
        let json = res.to_json();
        let back: CalibrationResult = serde_json::from_str(&json).unwrap();
        assert_eq!(res, back);
    }
}
