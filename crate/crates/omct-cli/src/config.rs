//! Run configuration: one TOML tree per run, with explicit unit suffixes in
//! every key name so that no quantity is ever ambiguous about factors of 2π.

use omct_core::calibration::DirectCalibrationSigmas;
use omct_core::detection::{DetectionConfig, Detuning};
use omct_core::filter::FilterStack;
use omct_core::model::{BathModel, DeviceParams};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub device: DeviceSection,
    pub bath: BathSection,
    pub detection: DetectionSection,
    pub filters: FilterSection,
    pub pulse: PulseSection,
    #[serde(default)]
    pub inference: InferenceSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub omega_o_hz: f64,
    pub omega_m_hz: f64,
    pub kappa_hz: f64,
    pub kappa_e_hz: f64,
    pub gamma_0_hz: f64,
    pub g_om_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub gamma_0_hz: f64,
    pub n_0: f64,
    pub hot_prefactor_hz: f64,
    pub hot_exponent: f64,
    pub n_p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    /// Cavity coupling; computed from the device (κ_e/κ) when omitted.
    #[serde(default)]
    pub eta_o: Option<f64>,
    pub eta_fc: f64,
    pub eta_loss: f64,
    pub eta_det: f64,
    pub dark_rate_cps: f64,
    pub pump_suppression: f64,
    #[serde(default)]
    pub laser_noise_cps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub fwhm_hz: f64,
    pub fsr_hz: f64,
    pub count: u32,
    #[serde(default)]
    pub detuning_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub duration_s: f64,
    /// Exactly one of (delay_s, repetition_rate_hz): R = 1/(T0 + Td).
    #[serde(default)]
    pub delay_s: Option<f64>,
    #[serde(default)]
    pub repetition_rate_hz: Option<f64>,
    pub detuning: Detuning,
    pub n_c: f64,
    #[serde(default = "default_envelope")]
    pub envelope: String,
    /// Simulated / fitted time window (defaults to 4× the pulse duration).
    #[serde(default)]
    pub window_s: Option<f64>,
    pub bin_width_s: f64,
    /// Pulse cycles to accumulate when simulating.
    #[serde(default = "default_repetitions")]
    pub repetitions: u64,
    /// Occupancy overrides; derived from the bath model when omitted.
    #[serde(default)]
    pub n_i: Option<f64>,
    #[serde(default)]
    pub n_f: Option<f64>,
    #[serde(default)]
    pub gamma_m_hz: Option<f64>,
    /// Noise-floor occupancy; derived from the detection section when omitted.
    #[serde(default)]
    pub n_nep: Option<f64>,
}

fn default_envelope() -> String {
    "square".into()
}

fn default_repetitions() -> u64 {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct InferenceSection {
    #[serde(default = "default_walkers")]
    pub walkers: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Uniform prior bounds per parameter name, `name = [lo, hi]`.
    #[serde(default)]
    pub priors: BTreeMap<String, [f64; 2]>,
}

fn default_walkers() -> usize {
    24
}

fn default_steps() -> usize {
    3000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    /// Known calibration rate; derived by the direct formula when omitted.
    #[serde(default)]
    pub gamma_cal_cps: Option<f64>,
    #[serde(default)]
    pub direct: Option<DirectSigmasSection>,
    #[serde(default)]
    pub asym: Option<AsymSection>,
    #[serde(default)]
    pub coherent: Option<CoherentSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct DirectSigmasSection {
    #[serde(default)]
    pub sigma_g_om_hz: f64,
    #[serde(default)]
    pub sigma_kappa_hz: f64,
    #[serde(default)]
    pub sigma_eta_o: f64,
    #[serde(default)]
    pub sigma_eta_fc: f64,
    #[serde(default)]
    pub sigma_eta_loss: f64,
    #[serde(default)]
    pub sigma_eta_det: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AsymSection {
    pub gamma_plus_cps: f64,
    #[serde(default)]
    pub sigma_gamma_plus_cps: f64,
    pub gamma_minus_cps: f64,
    #[serde(default)]
    pub sigma_gamma_minus_cps: f64,
    pub n_c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoherentSection {
    pub xi_sb: f64,
    #[serde(default)]
    pub sigma_xi_sb: f64,
    pub phi_pump_cps: f64,
    #[serde(default)]
    pub sigma_phi_pump_cps: f64,
    pub t_drive_s: f64,
    pub gamma_minus_coh_cps: f64,
    #[serde(default)]
    pub sigma_gamma_minus_coh_cps: f64,
    pub n_c: f64,
    #[serde(default)]
    pub sigma_n_c: f64,
    /// Linewidth at the drive power; from the bath model when omitted.
    #[serde(default)]
    pub gamma_m_hz: Option<f64>,
    #[serde(default)]
    pub sigma_gamma_m_hz: f64,
    #[serde(default)]
    pub sigma_gamma_om_hz: f64,
    #[serde(default)]
    pub sigma_eta_o: f64,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialization counterpart of [`ExperimentConfig::parse`]; the
    /// parse → serialize → parse round trip is identity (see tests).
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), String> {
        match (self.pulse.delay_s, self.pulse.repetition_rate_hz) {
            (Some(_), Some(_)) => {
                return Err(
                    "pulse: exactly one of `delay_s` and `repetition_rate_hz` may be set".into(),
                )
            }
            (None, None) => {
                return Err(
                    "pulse: one of `delay_s` or `repetition_rate_hz` is required".into(),
                )
            }
            _ => {}
        }
        if self.pulse.duration_s <= 0.0 {
            return Err("pulse.duration_s: must be positive".into());
        }
        if self.pulse.bin_width_s <= 0.0 {
            return Err("pulse.bin_width_s: must be positive".into());
        }
        if self.pulse.n_c < 0.0 {
            return Err("pulse.n_c: must be nonnegative".into());
        }
        if self.pulse.envelope != "square" {
            return Err(format!(
                "pulse.envelope: only `square` is built in, got `{}`",
                self.pulse.envelope
            ));
        }
        let rep = self.repetition_rate_hz();
        if rep * self.pulse.duration_s >= 1.0 {
            return Err(format!(
                "pulse.repetition_rate_hz: duty cycle R*T0 = {} must be < 1",
                rep * self.pulse.duration_s
            ));
        }
        // Constructing the core types runs their own invariants.
        self.device().map_err(|e| format!("device: {e}"))?;
        self.bath().map_err(|e| format!("bath: {e}"))?;
        self.detection().map_err(|e| format!("detection: {e}"))?;
        let filters = self.filters().map_err(|e| format!("filters: {e}"))?;
        if filters.is_low_finesse() {
            eprintln!(
                "warning: filters.fwhm_hz/fsr_hz give finesse {:.0} < 100; the lossless \
                 high-finesse filter model degrades",
                filters.finesse()
            );
        }
        Ok(())
    }

    pub fn device(&self) -> omct_core::Result<DeviceParams> {
        DeviceParams::new(
            self.device.omega_o_hz,
            self.device.omega_m_hz,
            self.device.kappa_hz,
            self.device.kappa_e_hz,
            self.device.gamma_0_hz,
            self.device.g_om_hz,
        )
    }

    pub fn bath(&self) -> omct_core::Result<BathModel> {
        BathModel::new(
            self.bath.gamma_0_hz,
            self.bath.n_0,
            self.bath.hot_prefactor_hz,
            self.bath.hot_exponent,
            self.bath.n_p,
        )
    }

    pub fn detection(&self) -> omct_core::Result<DetectionConfig> {
        let eta_o = match self.detection.eta_o {
            Some(v) => v,
            None => self.device.kappa_e_hz / self.device.kappa_hz,
        };
        DetectionConfig::new(
            eta_o,
            self.detection.eta_fc,
            self.detection.eta_loss,
            self.detection.eta_det,
            self.detection.dark_rate_cps,
            self.detection.pump_suppression,
            self.detection.laser_noise_cps,
        )
    }

    pub fn filters(&self) -> omct_core::Result<FilterStack> {
        FilterStack::new(
            self.filters.fwhm_hz,
            self.filters.fsr_hz,
            self.filters.count,
            self.filters.detuning_hz,
        )
    }

    /// R = (T0 + Td)⁻¹, whichever of the two was given.
    pub fn repetition_rate_hz(&self) -> f64 {
        match (self.pulse.repetition_rate_hz, self.pulse.delay_s) {
            (Some(r), _) => r,
            (None, Some(td)) => 1.0 / (self.pulse.duration_s + td),
            (None, None) => unreachable!("validated"),
        }
    }

    /// Td = R⁻¹ − T0.
    pub fn delay_s(&self) -> f64 {
        1.0 / self.repetition_rate_hz() - self.pulse.duration_s
    }

    pub fn window_s(&self) -> f64 {
        self.pulse.window_s.unwrap_or(4.0 * self.pulse.duration_s)
    }

    /// Calibration rate: explicit, or the direct formula.
    pub fn gamma_cal(&self) -> omct_core::Result<f64> {
        if let Some(v) = self.calibration.gamma_cal_cps {
            return Ok(v);
        }
        let dev = self.device()?;
        let det = self.detection()?;
        Ok(omct_core::detection::gamma_om_rate(&dev, 1.0) * det.eta_tot())
    }

    /// Total mechanical linewidth at the pulse power.
    pub fn gamma_m(&self) -> omct_core::Result<f64> {
        if let Some(v) = self.pulse.gamma_m_hz {
            return Ok(v);
        }
        Ok(self.bath()?.gamma_m_of_nc(self.pulse.n_c))
    }

    pub fn direct_sigmas(&self) -> DirectCalibrationSigmas {
        let s = self.calibration.direct.clone().unwrap_or_default();
        DirectCalibrationSigmas {
            g_om: s.sigma_g_om_hz,
            kappa: s.sigma_kappa_hz,
            eta_o: s.sigma_eta_o,
            eta_fc: s.sigma_eta_fc,
            eta_loss: s.sigma_eta_loss,
            eta_det: s.sigma_eta_det,
        }
    }
}
