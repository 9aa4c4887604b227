//! Closed-form occupancy and rate formulas for an optomechanical crystal whose
//! mechanical mode couples to a hot (optically populated) and a cold
//! (cryostat) thermal bath.
//!
//! All frequencies and rates are ω/2π in Hz. Exponential time dependence uses
//! the angular rate 2π·γ.

use crate::error::{Error, Result};
use crate::units::{angular, BOLTZMANN, PLANCK};
use serde::{Deserialize, Serialize};

/// Optomechanical constants of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Optical resonance frequency (Hz).
    pub omega_o: f64,
    /// Mechanical frequency (Hz).
    pub omega_m: f64,
    /// Total optical linewidth κ = κ_i + κ_e (Hz).
    pub kappa: f64,
    /// External coupling rate (Hz).
    pub kappa_e: f64,
    /// Internal optical loss rate (Hz).
    pub kappa_i: f64,
    /// Intrinsic mechanical decay rate (Hz).
    pub gamma_0: f64,
    /// Zero-point optomechanical coupling rate (Hz).
    pub g_om: f64,
}

impl DeviceParams {
    /// Build a parameter set from the measured quantities; κ_i is derived as
    /// κ − κ_e.
    pub fn new(
        omega_o: f64,
        omega_m: f64,
        kappa: f64,
        kappa_e: f64,
        gamma_0: f64,
        g_om: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("omega_o", omega_o),
            ("omega_m", omega_m),
            ("kappa", kappa),
            ("kappa_e", kappa_e),
            ("gamma_0", gamma_0),
            ("g_om", g_om),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if kappa_e > kappa {
            return Err(Error::invalid(
                "kappa_e",
                format!("external coupling {kappa_e} exceeds total linewidth {kappa}"),
            ));
        }
        Ok(DeviceParams {
            omega_o,
            omega_m,
            kappa,
            kappa_e,
            kappa_i: kappa - kappa_e,
            gamma_0,
            g_om,
        })
    }

    /// κ < 2ω_m: the optical linewidth resolves the mechanical sidebands.
    pub fn resolved_sideband(&self) -> bool {
        self.kappa < 2.0 * self.omega_m
    }

    /// Cavity coupling efficiency η_o = κ_e/κ.
    pub fn eta_o(&self) -> f64 {
        self.kappa_e / self.kappa
    }

    /// Parametrically enhanced scattering rate γ_om = 4 g_om² n_c / κ, in the
    /// same ω/2π convention as the inputs.
    pub fn gamma_om(&self, n_c: f64) -> f64 {
        debug_assert!(n_c >= 0.0);
        4.0 * self.g_om * self.g_om * n_c / self.kappa
    }

    /// Sideband scattering probability over a pulse of duration `t0`:
    /// p = 2π·γ_om·T₀ (the angular rate is the event rate).
    pub fn scattering_probability(&self, n_c: f64, t0: f64) -> f64 {
        angular(self.gamma_om(n_c)) * t0
    }

    /// Back-action / detection suppression factor (κ/2ω_m)² that applies when
    /// pumping on resonance.
    pub fn resonant_suppression(&self) -> f64 {
        (self.kappa / (2.0 * self.omega_m)).powi(2)
    }
}

/// Hot/cold bath couplings and occupations governing the mechanical mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathModel {
    /// Cold-bath coupling rate γ_0 (Hz).
    pub gamma_0: f64,
    /// Cold-bath occupation.
    pub n_0: f64,
    /// Hot-bath power-law prefactor b (Hz): γ_p(n_c) = b·n_c^a.
    pub hot_prefactor: f64,
    /// Hot-bath power-law exponent a.
    pub hot_exponent: f64,
    /// Hot-bath occupation.
    pub n_p: f64,
}

impl BathModel {
    pub fn new(
        gamma_0: f64,
        n_0: f64,
        hot_prefactor: f64,
        hot_exponent: f64,
        n_p: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("gamma_0", gamma_0),
            ("n_0", n_0),
            ("hot_prefactor", hot_prefactor),
            ("n_p", n_p),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(
                    name,
                    format!("must be nonnegative, got {v}"),
                ));
            }
        }
        if !hot_exponent.is_finite() {
            return Err(Error::invalid("hot_exponent", "must be finite"));
        }
        Ok(BathModel {
            gamma_0,
            n_0,
            hot_prefactor,
            hot_exponent,
            n_p,
        })
    }

    /// Hot-bath coupling γ_p(n_c) = b·n_c^a (Hz).
    pub fn gamma_p(&self, n_c: f64) -> f64 {
        debug_assert!(n_c >= 0.0);
        if n_c == 0.0 && self.hot_exponent == 0.0 {
            // 0^0: the power law is constant, keep it so at the origin.
            return self.hot_prefactor;
        }
        self.hot_prefactor * n_c.powf(self.hot_exponent)
    }

    /// Total mechanical linewidth γ_m(n_c) = γ_0 + γ_p(n_c) (Hz).
    pub fn gamma_m_of_nc(&self, n_c: f64) -> f64 {
        self.gamma_0 + self.gamma_p(n_c)
    }

    /// Detailed-balance steady state n_m = (γ_p·n_p + γ_0·n_0)/(γ_0 + γ_p).
    pub fn steady_state_occupancy(&self, n_c: f64) -> Result<f64> {
        let gp = self.gamma_p(n_c);
        let total = self.gamma_0 + gp;
        if total <= 0.0 {
            return Err(Error::UndefinedRate);
        }
        Ok((gp * self.n_p + self.gamma_0 * self.n_0) / total)
    }
}

/// Single-pulse thermal ring-up: n_m(t) = n_i + (n_f − n_i)(1 − e^{−2π·γ_m·(t−t_start)}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyDynamics {
    /// Occupation at the start of the pulse.
    pub n_i: f64,
    /// Asymptotic occupation for long pulses.
    pub n_f: f64,
    /// Total mechanical decay rate (Hz).
    pub gamma_m: f64,
    /// Pulse start time (s).
    pub t_start: f64,
    /// Pulse duration T₀ (s).
    pub duration: f64,
}

impl OccupancyDynamics {
    pub fn new(n_i: f64, n_f: f64, gamma_m: f64, t_start: f64, duration: f64) -> Result<Self> {
        if n_i < 0.0 || n_f < 0.0 {
            return Err(Error::invalid("n_i/n_f", "occupations must be nonnegative"));
        }
        if gamma_m <= 0.0 {
            return Err(Error::invalid("gamma_m", "must be positive"));
        }
        if duration <= 0.0 {
            return Err(Error::invalid("duration", "must be positive"));
        }
        Ok(OccupancyDynamics {
            n_i,
            n_f,
            gamma_m,
            t_start,
            duration,
        })
    }

    /// Occupation at time `t` within the pulse window.
    pub fn occupancy_at(&self, t: f64) -> Result<f64> {
        if t < self.t_start || t > self.t_start + self.duration {
            return Err(Error::invalid(
                "t",
                format!(
                    "{t} outside pulse window [{}, {}]",
                    self.t_start,
                    self.t_start + self.duration
                ),
            ));
        }
        Ok(self.occupancy_unchecked(t))
    }

    /// The same closed form without the window check; before `t_start` the
    /// occupation is held at `n_i`. Forward models need the trajectory on a
    /// full sampling grid where the pump envelope gates what is observable.
    pub fn occupancy_unchecked(&self, t: f64) -> f64 {
        if t <= self.t_start {
            return self.n_i;
        }
        let x = angular(self.gamma_m) * (t - self.t_start);
        self.n_i + (self.n_f - self.n_i) * (-(-x).exp_m1())
    }

    /// Pulse-averaged occupation T₀⁻¹∫ n_m(t) dt, in closed form.
    pub fn average_occupancy(&self) -> f64 {
        let x = angular(self.gamma_m) * self.duration;
        // (1 - e^{-x})/x, series for small x to keep the n_i limit exact.
        let decay_avg = if x < 1e-6 {
            1.0 - x / 2.0 + x * x / 6.0
        } else {
            -(-x).exp_m1() / x
        };
        self.n_f + (self.n_i - self.n_f) * decay_avg
    }
}

/// Repetition-rate noise model: pulse-train build-up and pump-probe decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionModel {
    /// Reference repetition rate R₀ (Hz) at which n_f = 1.
    pub r_0: f64,
    /// Exponent θ of n_f(R) = (R/R₀)^θ.
    pub theta: f64,
    /// Residual floor occupation.
    pub n_res: f64,
    /// Occupation reached under coherent driving.
    pub n_coh: f64,
    /// Decay rate of the coherently driven occupation (Hz).
    pub gamma_coh: f64,
}

impl RepetitionModel {
    pub fn new(r_0: f64, theta: f64, n_res: f64, n_coh: f64, gamma_coh: f64) -> Result<Self> {
        if r_0 <= 0.0 {
            return Err(Error::invalid("r_0", "must be positive"));
        }
        if n_res < 0.0 || n_coh < 0.0 {
            return Err(Error::invalid(
                "n_res/n_coh",
                "occupations must be nonnegative",
            ));
        }
        Ok(RepetitionModel {
            r_0,
            theta,
            n_res,
            n_coh,
            gamma_coh,
        })
    }

    /// Final and initial occupation for a pulse train at repetition rate `r`:
    /// n_f = (R/R₀)^θ and n_i = n_f·e^{−2π·γ₀·T_d} + n_dilution with
    /// T_d = 1/R − T₀.
    pub fn repetition_noise(
        &self,
        r: f64,
        t_0: f64,
        gamma_0: f64,
        n_dilution: f64,
    ) -> Result<(f64, f64)> {
        if r <= 0.0 {
            return Err(Error::invalid("r", "repetition rate must be positive"));
        }
        let duty = r * t_0;
        if duty >= 1.0 {
            return Err(Error::InvalidDutyCycle(duty));
        }
        let n_f = (r / self.r_0).powf(self.theta);
        let t_d = 1.0 / r - t_0;
        let n_i = n_f * (-angular(gamma_0) * t_d).exp() + n_dilution;
        Ok((n_f, n_i))
    }

    /// Pump-probe decay of a coherently driven occupation:
    /// n_i(T_d) = n_coh·e^{−2π·γ_coh·T_d} + n_res.
    pub fn pump_probe_decay(&self, t_d: f64) -> f64 {
        debug_assert!(t_d >= 0.0);
        self.n_coh * (-angular(self.gamma_coh) * t_d).exp() + self.n_res
    }
}

/// CW noise power law n_m(n_c) = prefactor·n_c^exponent.
pub fn cw_noise_power_law(prefactor: f64, exponent: f64, n_c: f64) -> f64 {
    debug_assert!(n_c > 0.0);
    prefactor * n_c.powf(exponent)
}

/// Bose–Einstein occupation of a mode at `omega_m` (Hz) for temperature `t` (K).
pub fn occupancy_from_temperature(omega_m: f64, t: f64) -> Result<f64> {
    if omega_m <= 0.0 {
        return Err(Error::invalid("omega_m", "must be positive"));
    }
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("must be positive, got {t}")));
    }
    let x = PLANCK * omega_m / (BOLTZMANN * t);
    // 1/(e^x − 1) via expm1; overflows cleanly to 0 for large x.
    Ok(1.0 / x.exp_m1())
}

/// Inverse of [`occupancy_from_temperature`]: the temperature at which the mode
/// holds `n` thermal quanta.
pub fn temperature_from_occupancy(omega_m: f64, n: f64) -> Result<f64> {
    if omega_m <= 0.0 {
        return Err(Error::invalid("omega_m", "must be positive"));
    }
    if !(n > 0.0) {
        return Err(Error::invalid("n", format!("must be positive, got {n}")));
    }
    let quantum = PLANCK * omega_m / BOLTZMANN;
    Ok(quantum / (1.0 / n).ln_1p())
}
