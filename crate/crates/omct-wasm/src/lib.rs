//! Browser demo bindings: three interactive views over the core models,
//! each returning a flat `Float64Array` of equal-length columns for a
//! plain-canvas plotting page.
//!
//! The computational functions are ordinary Rust (and unit-tested on the host
//! target); the `#[wasm_bindgen]` wrappers only translate errors.

use omct_core::detection::{histogram_to_occupancy, simulate_clicks, Detuning};
use omct_core::filter::{
    filtered_occupancy_signal, transmit_pulse, FilterStack, SampledWaveform, Sideband,
};
use omct_core::model::OccupancyDynamics;
use omct_core::presets;
use wasm_bindgen::prelude::*;

/// Square pulse through the filter stack.
/// Columns: time (ns), input power, transmitted power.
fn pulse_view(fwhm_mhz: f64, fsr_ghz: f64, count: u32, pulse_ns: f64) -> Result<Vec<f64>, String> {
    let stack = FilterStack::new(fwhm_mhz * 1e6, fsr_ghz * 1e9, count, 0.0)
        .map_err(|e| e.to_string())?;
    let dt = (pulse_ns * 1e-9 / 200.0).clamp(0.2e-9, 4e-9);
    let t_pulse = pulse_ns * 1e-9;
    let tail = 20.0 * stack.response_time();
    let n = ((t_pulse * 3.0 + tail) / dt).ceil() as usize;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            ((t_pulse - t) / dt + 1.0).clamp(0.0, 1.0)
        })
        .collect();
    let wave = SampledWaveform::new(0.0, dt, values).map_err(|e| e.to_string())?;
    let out = transmit_pulse(&stack, &wave).map_err(|e| e.to_string())?;
    let mut flat = Vec::with_capacity(3 * n);
    flat.extend((0..n).map(|i| wave.time(i) * 1e9));
    flat.extend_from_slice(wave.values());
    flat.extend_from_slice(out.values());
    Ok(flat)
}

/// Thermal ring-up seen through the filters, with a simulated photon-counting
/// estimate on top. Columns: time (ns), true gated occupancy, measured model
/// n_m*, click-estimate, one-sigma error.
#[allow(clippy::too_many_arguments)]
fn occupancy_view(
    n_i: f64,
    n_f: f64,
    gamma_m_khz: f64,
    pulse_ns: f64,
    fwhm_mhz: f64,
    count: u32,
    gamma_cal_cps: f64,
    n_c: f64,
    repetitions: f64,
    seed: u32,
) -> Result<Vec<f64>, String> {
    let stack =
        FilterStack::new(fwhm_mhz * 1e6, 18.8e9, count, 0.0).map_err(|e| e.to_string())?;
    let t_pulse = pulse_ns * 1e-9;
    let dt = (t_pulse / 32.0).clamp(1e-9, 16e-9);
    let window = t_pulse * 4.0 + 16.0 * stack.response_time();
    let n = (window / dt).ceil() as usize;
    let dynamics = OccupancyDynamics::new(n_i, n_f, gamma_m_khz * 1e3, 0.0, window)
        .map_err(|e| e.to_string())?;

    let centers: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dt).collect();
    let env: Vec<f64> = centers
        .iter()
        .map(|&t| ((t_pulse - (t - 0.5 * dt)) / dt).clamp(0.0, 1.0))
        .collect();
    let occupancy: Vec<f64> = centers
        .iter()
        .map(|&t| dynamics.occupancy_unchecked(t))
        .collect();
    let env_wave = SampledWaveform::new(0.5 * dt, dt, env.clone()).map_err(|e| e.to_string())?;
    let occ_wave =
        SampledWaveform::new(0.5 * dt, dt, occupancy.clone()).map_err(|e| e.to_string())?;
    let star = filtered_occupancy_signal(&stack, &occ_wave, &env_wave, Sideband::AntiStokes)
        .map_err(|e| e.to_string())?;

    let rate: Vec<f64> = star
        .values()
        .iter()
        .map(|&v| gamma_cal_cps * n_c * v.max(0.0))
        .collect();
    let reps = repetitions.max(1.0) as u64;
    let hist = simulate_clicks(
        |t| {
            let idx = ((t - 0.5 * dt) / dt).round() as usize;
            rate[idx.min(n - 1)]
        },
        0.0,
        n as f64 * dt,
        reps,
        dt,
        seed as u64,
    )
    .map_err(|e| e.to_string())?;
    let est = histogram_to_occupancy(&hist, gamma_cal_cps, n_c, Detuning::Red)
        .map_err(|e| e.to_string())?;

    let mut flat = Vec::with_capacity(5 * n);
    flat.extend(centers.iter().map(|t| t * 1e9));
    flat.extend(occupancy.iter().zip(&env).map(|(o, e)| o * e));
    flat.extend_from_slice(star.values());
    flat.extend_from_slice(est.waveform.values());
    flat.extend_from_slice(&est.sigma);
    Ok(flat)
}

/// Noise-equivalent phonon occupation against photon number for the
/// reference device. Columns: n_c, off-resonant floor, resonant floor.
fn nnep_view(
    dark_cps: f64,
    gamma_cal_cps: f64,
    suppression_dbc: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let dev = presets::release_free_device();
    let mut cfg = presets::release_free_detection();
    cfg.dark_rate = dark_cps;
    cfg.pump_suppression = 10f64.powf(-suppression_dbc.abs() / 10.0);
    let points = points.clamp(2, 400);
    let (lo, hi) = (1.0f64, 1e6f64);
    let mut flat = Vec::with_capacity(3 * points);
    let ncs: Vec<f64> = (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect();
    flat.extend_from_slice(&ncs);
    for det in [Detuning::Red, Detuning::Resonant] {
        for &n_c in &ncs {
            flat.push(
                omct_core::detection::nnep(&dev, &cfg, det, n_c, gamma_cal_cps)
                    .map_err(|e| e.to_string())?,
            );
        }
    }
    Ok(flat)
}

#[wasm_bindgen]
pub fn filter_pulse_view(
    fwhm_mhz: f64,
    fsr_ghz: f64,
    count: u32,
    pulse_ns: f64,
) -> Result<Vec<f64>, JsError> {
    pulse_view(fwhm_mhz, fsr_ghz, count, pulse_ns).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn occupancy_experiment_view(
    n_i: f64,
    n_f: f64,
    gamma_m_khz: f64,
    pulse_ns: f64,
    fwhm_mhz: f64,
    count: u32,
    gamma_cal_cps: f64,
    n_c: f64,
    repetitions: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    occupancy_view(
        n_i,
        n_f,
        gamma_m_khz,
        pulse_ns,
        fwhm_mhz,
        count,
        gamma_cal_cps,
        n_c,
        repetitions,
        seed,
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn nnep_floor_view(
    dark_cps: f64,
    gamma_cal_cps: f64,
    suppression_dbc: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    nnep_view(dark_cps, gamma_cal_cps, suppression_dbc, points).map_err(|e| JsError::new(&e))
}
