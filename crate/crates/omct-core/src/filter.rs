//! Cascaded Fabry–Pérot pump-filter stack: CW transmission, frequency-domain
//! pulse distortion, and the forward model linking the true phonon occupancy
//! waveform to the one a photon counter sees behind the filters.
//!
//! The single-filter amplitude transfer is the lossless two-mirror form
//! t(ω) = (1−r)·e^{−iωt₀} / (1 − r·e^{−i2ωt₀}) with passage time
//! t₀ = 1/(2·FSR) and mirror reflectivity r tied to the finesse through
//! F = π√r/(1−r). A stack of `count` identical filters multiplies transfers.
//! Pulse propagation takes the square root of the power envelope, applies the
//! stack transfer in the frequency domain, and squares the output magnitude.

use crate::error::{Error, Result};
use crate::fft;
use crate::units::{angular, TAU};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Which optomechanical sideband a waveform represents. The Stokes process
/// carries the +1 vacuum contribution, the anti-Stokes process does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sideband {
    /// Phonon-emission sideband at ω_l − ω_m.
    Stokes,
    /// Phonon-absorption sideband at ω_l + ω_m.
    AntiStokes,
}

impl Sideband {
    /// The (1±1)/2 vacuum term: 1 for Stokes, 0 for anti-Stokes.
    pub fn vacuum_offset(self) -> f64 {
        match self {
            Sideband::Stokes => 1.0,
            Sideband::AntiStokes => 0.0,
        }
    }
}

/// A stack of identical, series-coupled Fabry–Pérot filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStack {
    /// Intensity full width at half maximum of a single filter (Hz).
    pub fwhm: f64,
    /// Free spectral range (Hz).
    pub fsr: f64,
    /// Number of cascaded identical filters.
    pub count: u32,
    /// Stack center frequency relative to the signal carrier (Hz).
    pub detuning: f64,
}

impl FilterStack {
    pub fn new(fwhm: f64, fsr: f64, count: u32, detuning: f64) -> Result<Self> {
        if !(fwhm > 0.0) {
            return Err(Error::invalid("fwhm", format!("must be positive, got {fwhm}")));
        }
        if !(fsr > fwhm) {
            return Err(Error::invalid(
                "fsr",
                format!("free spectral range {fsr} must exceed the linewidth {fwhm}"),
            ));
        }
        if count < 1 {
            return Err(Error::invalid("count", "need at least one filter"));
        }
        if !detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        Ok(FilterStack {
            fwhm,
            fsr,
            count,
            detuning,
        })
    }

    /// Finesse F = FSR / FWHM. The lossless model assumes F ≫ 1; below ~100
    /// the finesse–reflectivity relation degrades (see [`FilterStack::is_low_finesse`]).
    pub fn finesse(&self) -> f64 {
        self.fsr / self.fwhm
    }

    /// True when the high-finesse assumption is questionable (F < 100).
    pub fn is_low_finesse(&self) -> bool {
        self.finesse() < 100.0
    }

    /// 1/e response time of the intensity impulse response, 1/(π·FWHM).
    pub fn response_time(&self) -> f64 {
        1.0 / (std::f64::consts::PI * self.fwhm)
    }

    /// Optical passage time through one filter, t₀ = 1/(2·FSR).
    pub fn passage_time(&self) -> f64 {
        1.0 / (2.0 * self.fsr)
    }

    /// Mirror reflectivity solving F = π√r/(1−r).
    pub fn reflectivity(&self) -> Result<f64> {
        reflectivity_from_finesse(self.finesse())
    }

    /// Stack amplitude transfer at angular frequency offset `omega` (rad/s)
    /// from the signal carrier; the stack's detuning shifts its resonance.
    pub fn amplitude_transfer(&self, omega: f64) -> Result<Complex64> {
        let r = self.reflectivity()?;
        let rel = omega - angular(self.detuning);
        Ok(single_amplitude(r, self.passage_time(), rel).powi(self.count as i32))
    }

    /// Stack intensity transmission |t(ω)|^2k at an ordinary-frequency offset
    /// `f_hz` from the carrier.
    pub fn intensity_transmission(&self, f_hz: f64) -> Result<f64> {
        Ok(self.amplitude_transfer(angular(f_hz))?.norm_sqr())
    }

    /// Near-resonance Lorentzian approximation of a single filter's intensity
    /// transmission, T(f) = 1/(1 + (2f/FWHM)²), at offset `f_hz` from the
    /// stack center.
    pub fn lorentzian_intensity_single(&self, f_hz: f64) -> f64 {
        1.0 / (1.0 + (2.0 * f_hz / self.fwhm).powi(2))
    }
}

fn single_amplitude(r: f64, t0: f64, omega: f64) -> Complex64 {
    let phase = omega * t0;
    let num = (1.0 - r) * Complex64::from_polar(1.0, -phase);
    let den = Complex64::new(1.0, 0.0) - r * Complex64::from_polar(1.0, -2.0 * phase);
    num / den
}

/// Solve F = π√r/(1−r) for the mirror reflectivity r ∈ (0, 1) by bisection
/// to 1e-12. Only high-finesse stacks (F > π) admit a physical solution here.
pub fn reflectivity_from_finesse(finesse: f64) -> Result<f64> {
    if !finesse.is_finite() || finesse <= std::f64::consts::PI {
        return Err(Error::NoReflectivitySolution(finesse));
    }
    let g = |r: f64| std::f64::consts::PI * r.sqrt() - finesse * (1.0 - r);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A real waveform sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledWaveform {
    /// Time of the first sample (s).
    pub t0: f64,
    /// Sample spacing (s).
    pub dt: f64,
    values: Vec<f64>,
}

impl SampledWaveform {
    /// A nonnegative waveform (power or occupancy envelope).
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("values", "waveform must not be empty"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(
                "values",
                format!("samples must be finite and nonnegative, got {bad}"),
            ));
        }
        Ok(SampledWaveform { t0, dt, values })
    }

    /// Derived signals (e.g. a measured Stokes occupancy after subtracting the
    /// vacuum term) may legitimately go negative; skip the sign check.
    pub(crate) fn from_raw(t0: f64, dt: f64, values: Vec<f64>) -> Self {
        SampledWaveform { t0, dt, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Total span covered by the samples (s).
    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    /// ∫ v dt by the rectangle rule (exact for the sampled representation).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dt
    }

    /// True when two waveforms share one grid (same length, spacing, origin).
    pub fn same_grid(&self, other: &SampledWaveform) -> bool {
        self.len() == other.len()
            && (self.dt - other.dt).abs() <= 1e-9 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-6 * self.dt
    }

    /// Duration of the quiet tail: trailing samples below 1e-8 of the peak.
    pub fn trailing_quiet_duration(&self) -> f64 {
        let peak = self.values.iter().cloned().fold(0.0f64, f64::max);
        let floor = 1e-8 * peak;
        let quiet = self
            .values
            .iter()
            .rev()
            .take_while(|v| v.abs() <= floor)
            .count();
        quiet as f64 * self.dt
    }

    /// Serialize as CSV with header `t_s,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{:.12e},{:.12e}\n", self.time(i), v));
        }
        out
    }

    /// Parse the `t_s,value` CSV form, checking grid uniformity.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 {
                if line.trim() != "t_s,value" {
                    return Err(Error::CsvParse {
                        line: 1,
                        reason: format!("expected header `t_s,value`, got `{line}`"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|x| x.trim().parse::<f64>().ok())
                    .ok_or(Error::CsvParse {
                        line: lineno + 1,
                        reason: format!("bad row `{line}`"),
                    })
            };
            times.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        if values.len() < 2 {
            return Err(Error::CsvParse {
                line: times.len() + 1,
                reason: "need at least two samples".into(),
            });
        }
        let dt = times[1] - times[0];
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.abs() {
                return Err(Error::CsvParse {
                    line: i + 3,
                    reason: "time grid is not uniform".into(),
                });
            }
        }
        SampledWaveform::new(times[0], dt, values)
    }
}

/// Required trailing-zero duration before transmitting through `stack`:
/// ten filter response times.
pub fn required_padding(stack: &FilterStack) -> f64 {
    10.0 * stack.response_time()
}

/// Propagate a power envelope through the filter stack.
///
/// The envelope must end in at least [`required_padding`] of (near-)zeros so
/// the circular FFT convolution cannot wrap the filter ring-down onto the
/// pulse front. Output is on the input grid.
pub fn transmit_pulse(stack: &FilterStack, p_in: &SampledWaveform) -> Result<SampledWaveform> {
    let required = required_padding(stack);
    let found = p_in.trailing_quiet_duration();
    if found < required {
        return Err(Error::InsufficientPadding {
            required_s: required,
            found_s: found,
        });
    }
    let values = transmit_power(stack, p_in.values(), p_in.dt)?;
    Ok(SampledWaveform::from_raw(p_in.t0, p_in.dt, values))
}

/// Power-envelope transmission without the padding precondition; shared by
/// [`transmit_pulse`], [`filtered_occupancy_signal`], and the pulse-fit
/// forward model.
pub(crate) fn transmit_power(stack: &FilterStack, p_in: &[f64], dt: f64) -> Result<Vec<f64>> {
    let r = stack.reflectivity()?;
    let t0 = stack.passage_time();
    let n = p_in.len();
    // Pad so the impulse-response tail of the last nonzero sample lands in
    // appended zeros rather than wrapping; 16 response times push the wrapped
    // amplitude residue below 1e-13 in intensity.
    let extra = (16.0 * stack.response_time() / dt).ceil() as usize + 1;
    let n_pad = (n + extra).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n_pad];
    for (b, p) in buf.iter_mut().zip(p_in) {
        if *p < 0.0 || !p.is_finite() {
            return Err(Error::invalid(
                "p_in",
                format!("power samples must be finite and nonnegative, got {p}"),
            ));
        }
        *b = Complex64::new(p.sqrt(), 0.0);
    }
    fft::forward_in_place(&mut buf);
    let det = angular(stack.detuning);
    for (k, b) in buf.iter_mut().enumerate() {
        let omega = TAU * fft::bin_freq_hz(k, n_pad, dt);
        *b *= single_amplitude(r, t0, omega - det).powi(stack.count as i32);
    }
    fft::inverse_in_place(&mut buf);
    Ok(buf[..n].iter().map(|c| c.norm_sqr()).collect())
}

/// Forward model of the calibrated photon-counting signal: the measured
/// occupancy waveform n_m*(t) produced when the true occupancy `n_m_traj`
/// is gated by the normalized pump envelope `nc_envelope` and distorted by
/// the filter stack:
///
/// n_m*(t) + off = |F⁻¹[ F[√((n_m + off)·ñ_c)] · t(ω)^k ]|², off = (1±1)/2.
pub fn filtered_occupancy_signal(
    stack: &FilterStack,
    n_m_traj: &SampledWaveform,
    nc_envelope: &SampledWaveform,
    sideband: Sideband,
) -> Result<SampledWaveform> {
    if !n_m_traj.same_grid(nc_envelope) {
        return Err(Error::GridMismatch(format!(
            "occupancy grid (t0 {}, dt {}, n {}) vs envelope grid (t0 {}, dt {}, n {})",
            n_m_traj.t0,
            n_m_traj.dt,
            n_m_traj.len(),
            nc_envelope.t0,
            nc_envelope.dt,
            nc_envelope.len()
        )));
    }
    let peak = nc_envelope.values().iter().cloned().fold(0.0f64, f64::max);
    if (peak - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(
            "nc_envelope",
            format!("must be normalized to unit peak, got {peak}"),
        ));
    }
    let off = sideband.vacuum_offset();
    let gated: Vec<f64> = n_m_traj
        .values()
        .iter()
        .zip(nc_envelope.values())
        .map(|(n, e)| (n + off) * e)
        .collect();
    let out = transmit_power(stack, &gated, n_m_traj.dt)?;
    Ok(SampledWaveform::from_raw(
        n_m_traj.t0,
        n_m_traj.dt,
        out.into_iter().map(|v| v - off).collect(),
    ))
}

/// Which CW sideband shape the sweep integral uses for a single filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepShape {
    /// Exact Airy intensity |t(ω)|² (default).
    ExactAiry,
    /// Near-resonance Lorentzian approximation.
    LorentzianApprox,
}

/// Relative CW detection rate when the filter stack is detuned by `delta_p`
/// (Hz) from a mechanical sideband of FWHM `gamma_m` (Hz): the unit-mass
/// sideband Lorentzian integrated against the stack transmission. Exact Airy
/// transmission by default.
pub fn cw_sweep_response(stack: &FilterStack, gamma_m: f64, delta_p: f64) -> Result<f64> {
    cw_sweep_response_with(stack, gamma_m, delta_p, SweepShape::ExactAiry)
}

/// [`cw_sweep_response`] with an explicit choice of transmission shape.
pub fn cw_sweep_response_with(
    stack: &FilterStack,
    gamma_m: f64,
    delta_p: f64,
    shape: SweepShape,
) -> Result<f64> {
    if !(gamma_m > 0.0) {
        return Err(Error::invalid(
            "gamma_m",
            format!("must be positive, got {gamma_m}"),
        ));
    }
    let r = stack.reflectivity()?;
    let t0 = stack.passage_time();
    let k = stack.count as i32;
    let single = |f: f64| -> f64 {
        match shape {
            SweepShape::ExactAiry => single_amplitude(r, t0, angular(f)).norm_sqr(),
            SweepShape::LorentzianApprox => stack.lorentzian_intensity_single(f),
        }
    };
    let stack_t = |f: f64| single(f).powi(k);

    // Substitute away the unit-mass sideband Lorentzian (centered at f = 0):
    // f(u) = (γ/2)·tan(π(u-1/2)) maps u ∈ (0,1) onto its probability mass, so
    // response = ∫₀¹ T^k(f(u) - Δp) du with the filter centered at Δp.
    // Integration is confined to one free spectral range around the filter so
    // neighboring filter orders do not alias in.
    let gh = 0.5 * gamma_m;
    let u_of = |f: f64| (f / gh).atan() / std::f64::consts::PI + 0.5;
    let f_of = |u: f64| gh * (std::f64::consts::PI * (u - 0.5)).tan();
    let g = |u: f64| stack_t(f_of(u) - delta_p);

    let mut lo = u_of(delta_p - 0.5 * stack.fsr).max(1e-12);
    let mut hi = u_of(delta_p + 0.5 * stack.fsr).min(1.0 - 1e-12);
    if lo >= hi {
        (lo, hi) = (1e-12, 1.0 - 1e-12);
    }

    // Seed breakpoints at filter-shape landmarks so the adaptive pass cannot
    // step over a narrow transmission peak.
    let mut knots = vec![lo, hi];
    for m in [-8.0, -4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let u = u_of(delta_p + m * stack.fwhm);
        if u > lo && u < hi {
            knots.push(u);
        }
    }
    for q in 1..8 {
        knots.push(lo + (hi - lo) * q as f64 / 8.0);
    }
    knots.sort_by(|a, b| a.total_cmp(b));
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let mut total = 0.0;
    for w in knots.windows(2) {
        total += adaptive_simpson(&g, w[0], w[1], 1e-9, 48);
    }
    Ok(total.clamp(0.0, 1.0))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol {
        left + right + err / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}
