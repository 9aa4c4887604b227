//! Affine-invariant ensemble sampler (stretch move).
//!
//! An ensemble of walkers is updated half by half: each walker in the moving
//! half picks a partner from the frozen half and proposes
//! Y = X_partner + z·(X_walker − X_partner), with z drawn from the g(z) ∝ 1/√z
//! density on [1/a, a]. Acceptance uses the z^{d−1} volume factor.
//!
//! Every random draw for a step is taken from the master stream *before* the
//! likelihood evaluations, so evaluations may run on any number of threads and
//! the chain is bit-identical regardless of the parallelism.

use super::PriorSpec;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::stats;

/// Sampler configuration.
#[derive(Debug, Clone)]
pub struct McmcConfig {
    /// Number of walkers (even, and more than twice the dimension).
    pub walkers: usize,
    /// Steps of the full ensemble.
    pub steps: usize,
    /// RNG seed.
    pub seed: u64,
    /// Steps discarded as burn-in; defaults to 25% of `steps`.
    pub burn_in: Option<usize>,
    /// Stretch scale a (2.0 unless there is a reason otherwise).
    pub stretch_scale: f64,
    /// Worker threads for likelihood evaluation (1 = serial).
    pub threads: usize,
}

impl McmcConfig {
    pub fn new(walkers: usize, steps: usize, seed: u64) -> Self {
        McmcConfig {
            walkers,
            steps,
            seed,
            burn_in: None,
            stretch_scale: 2.0,
            threads: 1,
        }
    }

    fn burn_in_steps(&self) -> usize {
        self.burn_in
            .unwrap_or((self.steps as f64 * 0.25).round() as usize)
            .min(self.steps.saturating_sub(1))
    }
}

/// Labeled MCMC draws with summaries.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    names: Vec<String>,
    walkers: usize,
    steps: usize,
    burn_in: usize,
    seed: u64,
    /// Layout: draws[(step*walkers + walker)*dim + param].
    draws: Vec<f64>,
    /// Mean acceptance fraction over all proposals.
    pub acceptance: f64,
    /// Integrated autocorrelation time estimate per parameter (in steps).
    pub iat: Vec<f64>,
}

impl PosteriorSamples {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn walkers(&self) -> usize {
        self.walkers
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    /// Retained draws (post burn-in): steps × walkers rows.
    pub fn n_retained(&self) -> usize {
        (self.steps - self.burn_in) * self.walkers
    }

    /// One retained draw as a parameter slice.
    pub fn retained_row(&self, row: usize) -> &[f64] {
        let dim = self.dim();
        let offset = (self.burn_in * self.walkers + row) * dim;
        &self.draws[offset..offset + dim]
    }

    /// All retained values of one parameter.
    pub fn param_draws(&self, param: usize) -> Vec<f64> {
        (0..self.n_retained())
            .map(|r| self.retained_row(r)[param])
            .collect()
    }

    /// Marginal quantile of one parameter over the retained draws.
    pub fn quantile(&self, param: usize, q: f64) -> f64 {
        stats::quantile(&self.param_draws(param), q)
    }

    /// Posterior median per parameter.
    pub fn medians(&self) -> Vec<f64> {
        (0..self.dim()).map(|p| self.quantile(p, 0.5)).collect()
    }

    /// Raw position of a walker at a step (including burn-in), for diagnostics.
    pub fn position(&self, step: usize, walker: usize) -> &[f64] {
        let dim = self.dim();
        let offset = (step * self.walkers + walker) * dim;
        &self.draws[offset..offset + dim]
    }

    /// CSV: one column per parameter, one row per retained draw.
    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for r in 0..self.n_retained() {
            let row = self.retained_row(r);
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&format!("{v:.12e}"));
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Run the stretch-move ensemble sampler on `log_post` restricted to the
/// prior box (outside it the target is −∞). Initial positions are drawn
/// uniformly inside the prior.
pub fn ensemble_mcmc<F>(log_post: F, prior: &PriorSpec, cfg: &McmcConfig) -> Result<PosteriorSamples>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = prior.len();
    if cfg.walkers < 2 * (dim + 1) {
        return Err(Error::invalid(
            "walkers",
            format!("need at least 2*(dim+1) = {} walkers, got {}", 2 * (dim + 1), cfg.walkers),
        ));
    }
    if !cfg.walkers.is_multiple_of(2) {
        return Err(Error::invalid("walkers", "walker count must be even"));
    }
    if cfg.stretch_scale <= 1.0 {
        return Err(Error::invalid("stretch_scale", "must exceed 1"));
    }
    let burn_in = cfg.burn_in_steps();
    if (cfg.steps - burn_in) * cfg.walkers < 10 * dim {
        return Err(Error::invalid(
            "steps",
            format!(
                "only {} retained draws for {} parameters; need at least {}",
                (cfg.steps - burn_in) * cfg.walkers,
                dim,
                10 * dim
            ),
        ));
    }

    let target = |x: &[f64]| -> f64 {
        if prior.contains(x) {
            log_post(x)
        } else {
            f64::NEG_INFINITY
        }
    };

    // Initialization: draw inside the prior until the posterior is finite.
    let mut rng = CounterRng::new(cfg.seed, 0);
    let mut positions: Vec<Vec<f64>> = Vec::with_capacity(cfg.walkers);
    let mut logps: Vec<f64> = Vec::with_capacity(cfg.walkers);
    for _ in 0..cfg.walkers {
        let mut found = false;
        for _attempt in 0..200 {
            let x = prior.sample(&mut rng);
            let lp = target(&x);
            if lp.is_finite() {
                positions.push(x);
                logps.push(lp);
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::McmcInitialization);
        }
    }

    let half = cfg.walkers / 2;
    let a = cfg.stretch_scale;
    let mut draws = Vec::with_capacity(cfg.steps * cfg.walkers * dim);
    let mut accepted = 0usize;

    for _step in 0..cfg.steps {
        for half_idx in 0..2 {
            let (move_range, fixed_start, n_fixed) = if half_idx == 0 {
                (0..half, half, cfg.walkers - half)
            } else {
                (half..cfg.walkers, 0, half)
            };

            // Fix every random draw before any evaluation.
            let mut movers = Vec::with_capacity(move_range.len());
            let mut candidates = Vec::with_capacity(move_range.len());
            for w in move_range {
                let z = ((a - 1.0) * rng.uniform() + 1.0).powi(2) / a;
                let partner = fixed_start + (rng.uniform() * n_fixed as f64) as usize;
                let ln_u = rng.uniform_open().ln();
                let candidate: Vec<f64> = positions[partner]
                    .iter()
                    .zip(&positions[w])
                    .map(|(pj, xk)| pj + z * (xk - pj))
                    .collect();
                movers.push((w, z, ln_u));
                candidates.push(candidate);
            }

            let new_logps = evaluate_all(&target, &candidates, cfg.threads);

            for (((w, z, ln_u), candidate), lp_new) in
                movers.into_iter().zip(candidates).zip(new_logps)
            {
                let ln_ratio = (dim as f64 - 1.0) * z.ln() + lp_new - logps[w];
                if ln_u < ln_ratio {
                    positions[w] = candidate;
                    logps[w] = lp_new;
                    accepted += 1;
                }
            }
        }
        for pos in &positions {
            draws.extend_from_slice(pos);
        }
    }

    let acceptance = accepted as f64 / (cfg.steps * cfg.walkers) as f64;
    let mut samples = PosteriorSamples {
        names: prior.names().iter().map(|s| s.to_string()).collect(),
        walkers: cfg.walkers,
        steps: cfg.steps,
        burn_in,
        seed: cfg.seed,
        draws,
        acceptance,
        iat: Vec::new(),
    };
    samples.iat = (0..dim).map(|p| integrated_autocorr(&samples, p)).collect();
    Ok(samples)
}

fn evaluate_all<T>(target: &T, candidates: &[Vec<f64>], threads: usize) -> Vec<f64>
where
    T: Fn(&[f64]) -> f64 + Sync,
{
    if threads <= 1 || candidates.len() < 2 {
        return candidates.iter().map(|c| target(c)).collect();
    }
    let mut out = vec![0.0f64; candidates.len()];
    let chunk = candidates.len().div_ceil(threads);
    std::thread::scope(|scope| {
        for (slot, work) in out.chunks_mut(chunk).zip(candidates.chunks(chunk)) {
            scope.spawn(move || {
                for (o, c) in slot.iter_mut().zip(work) {
                    *o = target(c);
                }
            });
        }
    });
    out
}

/// Integrated autocorrelation time of one parameter, estimated on the
/// walker-averaged chain with Sokal's automatic window (c = 5).
fn integrated_autocorr(samples: &PosteriorSamples, param: usize) -> f64 {
    let n = samples.steps - samples.burn_in;
    if n < 8 {
        return f64::NAN;
    }
    let mut chain = Vec::with_capacity(n);
    for step in samples.burn_in..samples.steps {
        let mut acc = 0.0;
        for w in 0..samples.walkers {
            acc += samples.position(step, w)[param];
        }
        chain.push(acc / samples.walkers as f64);
    }
    let mean = stats::mean(&chain);
    let c0: f64 = chain.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return f64::NAN;
    }
    let mut tau = 1.0;
    for lag in 1..(n / 2) {
        let mut c = 0.0;
        for t in 0..(n - lag) {
            c += (chain[t] - mean) * (chain[t + lag] - mean);
        }
        c /= (n - lag) as f64;
        tau += 2.0 * c / c0;
        if (lag as f64) >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}
