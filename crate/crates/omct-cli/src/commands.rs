//! Subcommand implementations. Every command is a pure function of
//! (config file, input files, seed): rerunning writes byte-identical data
//! files, and the manifest records what was written.

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use omct_core::calibration::{
    asymmetry_calibration, coherent_calibration, direct_calibration, CoherentDriveSpec, Measured,
};
use omct_core::detection::{nnep, simulate_clicks, ClickHistogram, Detuning};
use omct_core::filter::{
    filtered_occupancy_signal, transmit_pulse, SampledWaveform,
};
use omct_core::inference::{
    fit_eit, fit_exponential_decay, fit_power_law, fit_pulse_occupancy, EitPoint, McmcConfig,
    PriorSpec, PulseFitConfig,
};
use omct_core::model::OccupancyDynamics;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

pub struct CommonArgs {
    pub config_path: PathBuf,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

type CmdResult = Result<(), String>;

fn load_config(args: &CommonArgs) -> Result<(ExperimentConfig, Vec<u8>), String> {
    let bytes = fs::read(&args.config_path)
        .map_err(|e| format!("cannot read config {}: {e}", args.config_path.display()))?;
    let text = String::from_utf8_lossy(&bytes);
    let cfg = ExperimentConfig::parse(&text)?;
    Ok((cfg, bytes))
}

fn effective_seed(args: &CommonArgs, cfg: &ExperimentConfig) -> u64 {
    args.seed.unwrap_or(cfg.inference.seed)
}

fn write_output(
    dir: &Path,
    name: &str,
    content: &str,
    manifest: &mut RunManifest,
) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    manifest.record(&path);
    println!("wrote {}", path.display());
    Ok(())
}

/// Square pump envelope sampled at bin centers with fractional edge bins;
/// `high_s` is where the nominal envelope ends.
fn square_envelope(window_s: f64, bin_width: f64, high_s: f64) -> SampledWaveform {
    let n = (window_s / bin_width).round() as usize;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * bin_width;
            ((high_s - (t - 0.5 * bin_width)) / bin_width).clamp(0.0, 1.0)
        })
        .collect();
    SampledWaveform::new(0.5 * bin_width, bin_width, values).expect("valid envelope")
}

/// The simulated (and fitted) detection-rate model shared by simulate and
/// fit-pulse: thermal ring-up, envelope gating, filter stack, calibration.
struct RateModel {
    rate: Vec<f64>,
    n_m: Vec<f64>,
    grid: SampledWaveform,
}

fn build_rate_model(cfg: &ExperimentConfig) -> Result<RateModel, String> {
    let dev = cfg.device().map_err(|e| e.to_string())?;
    let det_cfg = cfg.detection().map_err(|e| e.to_string())?;
    let stack = cfg.filters().map_err(|e| e.to_string())?;
    let bath = cfg.bath().map_err(|e| e.to_string())?;
    let detuning = cfg.pulse.detuning;
    let n_c = cfg.pulse.n_c;
    let bin = cfg.pulse.bin_width_s;
    let window = cfg.window_s();
    let t0 = cfg.pulse.duration_s;

    let env = square_envelope(window, bin, t0);
    let n = env.len();

    if n_c == 0.0 {
        // Pure background: no optomechanical signal at all.
        let rate = vec![det_cfg.noise_rate(); n];
        let n_m = vec![0.0; n];
        return Ok(RateModel {
            rate,
            n_m,
            grid: env,
        });
    }

    let gamma_m = cfg.gamma_m().map_err(|e| e.to_string())?;
    let n_f = match cfg.pulse.n_f {
        Some(v) => v,
        None => bath
            .steady_state_occupancy(n_c)
            .map_err(|e| format!("bath: {e}"))?,
    };
    let n_i = match cfg.pulse.n_i {
        Some(v) => v,
        None => {
            // Lifetime-limited build-up: the final occupation decays through
            // the cold bath over the dead time and rides on its occupation.
            let td = cfg.delay_s();
            n_f * (-omct_core::units::angular(bath.gamma_0) * td).exp() + bath.n_0
        }
    };
    let dynamics = OccupancyDynamics::new(n_i, n_f, gamma_m, 0.0, window)
        .map_err(|e| format!("pulse occupancies: {e}"))?;
    let n_m: Vec<f64> = (0..n)
        .map(|i| dynamics.occupancy_unchecked(env.time(i)))
        .collect();
    let n_m_wave = SampledWaveform::new(env.t0, env.dt, n_m.clone()).expect("valid occupancy");

    let sideband = detuning.detected_sideband();
    let star = filtered_occupancy_signal(&stack, &n_m_wave, &env, sideband)
        .map_err(|e| format!("filter model: {e}"))?;

    let gamma_cal = cfg.gamma_cal().map_err(|e| e.to_string())?;
    let suppression = if detuning == Detuning::Resonant {
        dev.resonant_suppression()
    } else {
        1.0
    };
    let n_nep = match cfg.pulse.n_nep {
        Some(v) => v,
        None => nnep(&dev, &det_cfg, detuning, n_c, gamma_cal).map_err(|e| e.to_string())?,
    };
    let off = sideband.vacuum_offset();
    let rate: Vec<f64> = star
        .values()
        .iter()
        .map(|&v| gamma_cal * suppression * n_c * (v + off + n_nep))
        .collect();
    Ok(RateModel {
        rate,
        n_m,
        grid: env,
    })
}

pub fn cmd_simulate(args: &CommonArgs) -> CmdResult {
    let (cfg, bytes) = load_config(args)?;
    let seed = effective_seed(args, &cfg);
    let mut manifest = RunManifest::start(&bytes, seed);

    let model = build_rate_model(&cfg)?;
    let grid = &model.grid;
    let rate = model.rate.clone();
    let dt = grid.dt;
    let histogram = simulate_clicks(
        |t| {
            let idx = ((t - grid.t0) / dt).round() as usize;
            rate[idx.min(rate.len() - 1)]
        },
        grid.t0 - 0.5 * dt,
        grid.duration(),
        cfg.pulse.repetitions,
        dt,
        seed,
    )
    .map_err(|e| format!("simulation: {e}"))?;

    write_output(&args.out_dir, "histogram.csv", &histogram.to_csv(), &mut manifest)?;
    let sidecar = serde_json::to_string_pretty(&cfg.detection().map_err(|e| e.to_string())?)
        .expect("serializes");
    write_output(&args.out_dir, "histogram.meta.json", &sidecar, &mut manifest)?;
    let truth = SampledWaveform::new(grid.t0, dt, model.n_m).expect("valid occupancy");
    write_output(
        &args.out_dir,
        "true_occupancy.csv",
        &truth.to_csv(),
        &mut manifest,
    )?;
    manifest
        .finish(&args.out_dir)
        .map_err(|e| format!("manifest: {e}"))
}

fn prior_from_config(cfg: &ExperimentConfig) -> Result<(PriorSpec, Option<f64>), String> {
    let priors = &cfg.inference.priors;
    let mut names = vec!["n_i", "n_f", "t_stop", "n_nep"];
    let sample_gamma = priors.contains_key("gamma_m");
    if sample_gamma {
        names.push("gamma_m");
    }
    let mut entries = Vec::new();
    for name in &names {
        let bounds = priors.get(*name).ok_or_else(|| {
            format!("inference.priors: missing bounds for `{name}` (need n_i, n_f, t_stop, n_nep[, gamma_m])")
        })?;
        entries.push((name.to_string(), bounds[0], bounds[1]));
    }
    let prior = PriorSpec::new(entries).map_err(|e| format!("inference.priors: {e}"))?;
    let gamma_m = if sample_gamma {
        None
    } else {
        Some(cfg.gamma_m().map_err(|e| e.to_string())?)
    };
    Ok((prior, gamma_m))
}

pub fn cmd_fit_pulse(args: &CommonArgs, data_path: &Path, envelope: Option<&Path>) -> CmdResult {
    let (cfg, bytes) = load_config(args)?;
    let seed = effective_seed(args, &cfg);
    let mut manifest = RunManifest::start(&bytes, seed);

    let data_text = fs::read_to_string(data_path)
        .map_err(|e| format!("cannot read {}: {e}", data_path.display()))?;
    let data = ClickHistogram::from_csv(&data_text).map_err(|e| e.to_string())?;

    let (prior, gamma_m) = prior_from_config(&cfg)?;
    // Nominal envelope: the configured square, held high out to the upper
    // t_stop prior bound so the fitted gate can move both ways.
    let t_stop_hi = prior
        .names()
        .iter()
        .position(|n| *n == "t_stop")
        .map(|i| prior.bounds(i).1)
        .unwrap();
    let nc_envelope = match envelope {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            SampledWaveform::from_csv(&text).map_err(|e| e.to_string())?
        }
        None => square_envelope(
            data.len() as f64 * data.bin_width,
            data.bin_width,
            t_stop_hi.min(data.len() as f64 * data.bin_width),
        ),
    };

    let gamma_cal = cfg.gamma_cal().map_err(|e| e.to_string())?;
    let mut mcmc = McmcConfig::new(cfg.inference.walkers, cfg.inference.steps, seed);
    mcmc.burn_in = cfg.inference.burn_in;
    mcmc.threads = cfg.inference.threads.unwrap_or(1);
    let fit_cfg = PulseFitConfig {
        stack: cfg.filters().map_err(|e| e.to_string())?,
        nc_envelope,
        gamma_cal,
        nc_peak: cfg.pulse.n_c,
        sideband: cfg.pulse.detuning.detected_sideband(),
        gamma_m,
        pulse_start: 0.0,
        prior,
        mcmc,
    };
    let fit = fit_pulse_occupancy(&data, &fit_cfg).map_err(|e| e.to_string())?;
    if !fit.unidentified.is_empty() {
        eprintln!(
            "warning: parameters {:?} are unconstrained by this data set (interval spans the prior)",
            fit.unidentified
        );
    }

    write_output(&args.out_dir, "fit_result.json", &fit.result.to_json(), &mut manifest)?;
    write_output(&args.out_dir, "posterior.csv", &fit.posterior.to_csv(), &mut manifest)?;
    write_output(
        &args.out_dir,
        "bestfit_waveform.csv",
        &fit.best_waveform.to_csv(),
        &mut manifest,
    )?;
    manifest
        .finish(&args.out_dir)
        .map_err(|e| format!("manifest: {e}"))
}

/// Parse a numeric CSV with the given header, reporting 1-based line numbers.
fn parse_table(text: &str, header: &str) -> Result<Vec<Vec<f64>>, String> {
    let cols = header.split(',').count();
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != header {
                return Err(format!("line 1: expected header `{header}`, got `{line}`"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols {
            return Err(format!(
                "line {}: expected {cols} fields, got {}",
                lineno + 1,
                fields.len()
            ));
        }
        let mut row = Vec::with_capacity(cols);
        for f in fields {
            row.push(
                f.parse::<f64>()
                    .map_err(|e| format!("line {}: `{f}`: {e}", lineno + 1))?,
            );
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("line 2: no data rows".into());
    }
    Ok(rows)
}

pub fn cmd_fit_eit(args: &CommonArgs, data_path: &Path) -> CmdResult {
    let bytes = fs::read(data_path)
        .map_err(|e| format!("cannot read {}: {e}", data_path.display()))?;
    let mut manifest = RunManifest::start(&bytes, args.seed.unwrap_or(0));
    let text = String::from_utf8_lossy(&bytes);
    let rows = parse_table(&text, "delta_hz,s_re,s_im,sigma")?;
    let sweep: Vec<EitPoint> = rows
        .iter()
        .map(|r| EitPoint {
            delta: r[0],
            s: num_complex(r[1], r[2]),
            sigma: r[3],
        })
        .collect();
    let fit = fit_eit(&sweep).map_err(|e| e.to_string())?;
    write_output(&args.out_dir, "fit_result.json", &fit.to_json(), &mut manifest)?;
    manifest
        .finish(&args.out_dir)
        .map_err(|e| format!("manifest: {e}"))
}

fn num_complex(re: f64, im: f64) -> omct_core::inference::Complex64 {
    omct_core::inference::Complex64::new(re, im)
}

pub fn cmd_fit_powerlaw(args: &CommonArgs, data_path: &Path, with_offset: bool) -> CmdResult {
    let bytes = fs::read(data_path)
        .map_err(|e| format!("cannot read {}: {e}", data_path.display()))?;
    let mut manifest = RunManifest::start(&bytes, args.seed.unwrap_or(0));
    let text = String::from_utf8_lossy(&bytes);
    let rows = parse_table(&text, "x,y,sigma")?;
    let points: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r[0], r[1], r[2])).collect();
    let fit = fit_power_law(&points, with_offset).map_err(|e| e.to_string())?;
    write_output(&args.out_dir, "fit_result.json", &fit.to_json(), &mut manifest)?;
    manifest
        .finish(&args.out_dir)
        .map_err(|e| format!("manifest: {e}"))
}

pub fn cmd_fit_ringdown(args: &CommonArgs, data_path: &Path, with_floor: bool) -> CmdResult {
    let bytes = fs::read(data_path)
        .map_err(|e| format!("cannot read {}: {e}", data_path.display()))?;
    let mut manifest = RunManifest::start(&bytes, args.seed.unwrap_or(0));
    let text = String::from_utf8_lossy(&bytes);
    let rows = parse_table(&text, "t_s,n,sigma")?;
    let points: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r[0], r[1], r[2])).collect();
    let fit = fit_exponential_decay(&points, with_floor).map_err(|e| e.to_string())?;
    write_output(&args.out_dir, "fit_result.json", &fit.to_json(), &mut manifest)?;
    manifest
        .finish(&args.out_dir)
        .map_err(|e| format!("manifest: {e}"))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
pub enum CalibrationMethodArg {
    Direct,
    Asym,
    Coherent,
}

pub fn cmd_calibrate(args: &CommonArgs, method: CalibrationMethodArg) -> CmdResult {
    let (cfg, bytes) = load_config(args)?;
    let mut manifest = RunManifest::start(&bytes, effective_seed(args, &cfg));
    let dev = cfg.device().map_err(|e| e.to_string())?;
    let result = match method {
        CalibrationMethodArg::Direct => {
            let det = cfg.detection().map_err(|e| e.to_string())?;
            direct_calibration(&dev, &det, &cfg.direct_sigmas()).map_err(|e| e.to_string())?
        }
        CalibrationMethodArg::Asym => {
            let section = cfg
                .calibration
                .asym
                .as_ref()
                .ok_or("config section [calibration.asym] is required")?;
            asymmetry_calibration(
                Measured::new(section.gamma_plus_cps, section.sigma_gamma_plus_cps),
                Measured::new(section.gamma_minus_cps, section.sigma_gamma_minus_cps),
                section.n_c,
            )
            .map_err(|e| e.to_string())?
        }
        CalibrationMethodArg::Coherent => {
            let section = cfg
                .calibration
                .coherent
                .as_ref()
                .ok_or("config section [calibration.coherent] is required")?;
            let bath = cfg.bath().map_err(|e| e.to_string())?;
            let gamma_m = section
                .gamma_m_hz
                .unwrap_or_else(|| bath.gamma_m_of_nc(section.n_c));
            let gamma_om = dev.gamma_om(section.n_c);
            let spec = CoherentDriveSpec::new(
                Measured::new(section.xi_sb, section.sigma_xi_sb),
                Measured::new(section.phi_pump_cps, section.sigma_phi_pump_cps),
                section.t_drive_s,
            )
            .map_err(|e| e.to_string())?;
            let det = cfg.detection().map_err(|e| e.to_string())?;
            coherent_calibration(
                &spec,
                Measured::new(gamma_m, section.sigma_gamma_m_hz),
                Measured::new(gamma_om, section.sigma_gamma_om_hz),
                Measured::new(det.eta_o, section.sigma_eta_o),
                Measured::new(
                    section.gamma_minus_coh_cps,
                    section.sigma_gamma_minus_coh_cps,
                ),
                Measured::new(section.n_c, section.sigma_n_c),
            )
            .map_err(|e| e.to_string())?
        }
    };
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    write_output(&args.out_dir, "calibration.json", &result.to_json(), &mut manifest)?;
    manifest
        .finish(&args.out_dir)
        .map_err(|e| format!("manifest: {e}"))
}

pub fn cmd_nnep(args: &CommonArgs, nc_min: f64, nc_max: f64, points: usize) -> CmdResult {
    let (cfg, bytes) = load_config(args)?;
    let mut manifest = RunManifest::start(&bytes, effective_seed(args, &cfg));
    if !(nc_min > 0.0) || !(nc_max > nc_min) || points < 2 {
        return Err(format!(
            "nnep range: need 0 < nc-min < nc-max and at least 2 points, got [{nc_min}, {nc_max}] x {points}"
        ));
    }
    let dev = cfg.device().map_err(|e| e.to_string())?;
    let det = cfg.detection().map_err(|e| e.to_string())?;
    let gamma_cal = cfg.gamma_cal().map_err(|e| e.to_string())?;
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let n_c = nc_min * (nc_max / nc_min).powf(i as f64 / (points - 1) as f64);
        let off = nnep(&dev, &det, Detuning::Red, n_c, gamma_cal).map_err(|e| e.to_string())?;
        let res =
            nnep(&dev, &det, Detuning::Resonant, n_c, gamma_cal).map_err(|e| e.to_string())?;
        rows.push((n_c, off, res));
    }
    let content = match args.format {
        OutputFormat::Csv => {
            let mut out = String::from("n_c,nnep_off_resonant,nnep_resonant\n");
            for (n_c, off, res) in &rows {
                out.push_str(&format!("{n_c:.6e},{off:.6e},{res:.6e}\n"));
            }
            out
        }
        OutputFormat::Json => {
            let arr: Vec<serde_json::Value> = rows
                .iter()
                .map(|(n_c, off, res)| {
                    serde_json::json!({"n_c": n_c, "nnep_off_resonant": off, "nnep_resonant": res})
                })
                .collect();
            serde_json::to_string_pretty(&arr).expect("serializes")
        }
    };
    let name = match args.format {
        OutputFormat::Csv => "nnep.csv",
        OutputFormat::Json => "nnep.json",
    };
    write_output(&args.out_dir, name, &content, &mut manifest)?;
    manifest
        .finish(&args.out_dir)
        .map_err(|e| format!("manifest: {e}"))
}

pub fn cmd_filter_response(
    args: &CommonArgs,
    span_hz: f64,
    points: usize,
    pulse_ns: Option<f64>,
) -> CmdResult {
    let (cfg, bytes) = load_config(args)?;
    let mut manifest = RunManifest::start(&bytes, effective_seed(args, &cfg));
    if !(span_hz > 0.0) || points < 2 {
        return Err("filter-response: need a positive span and at least 2 points".into());
    }
    let stack = cfg.filters().map_err(|e| e.to_string())?;
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let f = -span_hz + 2.0 * span_hz * i as f64 / (points - 1) as f64;
        let t = stack.intensity_transmission(f).map_err(|e| e.to_string())?;
        rows.push((f, t, -10.0 * t.log10()));
    }
    let content = match args.format {
        OutputFormat::Csv => {
            let mut out = String::from("detuning_hz,intensity_transmission,suppression_db\n");
            for (f, t, db) in &rows {
                out.push_str(&format!("{f:.6e},{t:.6e},{db:.4}\n"));
            }
            out
        }
        OutputFormat::Json => {
            let arr: Vec<serde_json::Value> = rows
                .iter()
                .map(|(f, t, db)| {
                    serde_json::json!({"detuning_hz": f, "intensity_transmission": t, "suppression_db": db})
                })
                .collect();
            serde_json::to_string_pretty(&arr).expect("serializes")
        }
    };
    let name = match args.format {
        OutputFormat::Csv => "filter_response.csv",
        OutputFormat::Json => "filter_response.json",
    };
    write_output(&args.out_dir, name, &content, &mut manifest)?;

    if let Some(ns) = pulse_ns {
        if !(ns > 0.0) {
            return Err("filter-response: --pulse-ns must be positive".into());
        }
        let t_pulse = ns * 1e-9;
        let dt = (t_pulse / 100.0).min(2e-9);
        let tail = 20.0 * stack.response_time();
        let n = ((t_pulse + tail) / dt).ceil() as usize + 16;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                ((t_pulse - t) / dt + 1.0).clamp(0.0, 1.0)
            })
            .collect();
        let wave = SampledWaveform::new(0.0, dt, values).map_err(|e| e.to_string())?;
        let out = transmit_pulse(&stack, &wave).map_err(|e| e.to_string())?;
        let mut text = String::from("t_s,p_in,p_out\n");
        for i in 0..n {
            text.push_str(&format!(
                "{:.6e},{:.6e},{:.6e}\n",
                wave.time(i),
                wave.values()[i],
                out.values()[i]
            ));
        }
        write_output(&args.out_dir, "pulse_response.csv", &text, &mut manifest)?;
    }
    manifest
        .finish(&args.out_dir)
        .map_err(|e| format!("manifest: {e}"))
}
