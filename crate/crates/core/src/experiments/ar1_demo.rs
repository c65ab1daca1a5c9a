//! Scalar AR(1) demonstration: Monte-Carlo estimation of a rare window-mean
//! exceedance with a GPD tail fit, against the closed-form likelihood of a
//! single observed window.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::conventional::{default_fit_threshold, gpd_bootstrap, gpd_tail_fit, percentile_band, quantile, GpdFit};
use crate::error::{DadaError, Result};
use crate::models::{ar1_loglik, Ar1Spec, ObservationSequence};
use crate::seeds::derive_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ar1DemoConfig {
    pub a: f64,
    pub noise_std: f64,
    /// Averaging window length in steps; windows hold `window_steps + 1` values.
    pub window_steps: usize,
    /// Exceedance probability that fixes the event threshold `u`.
    pub true_p: f64,
    pub sample_sizes: Vec<usize>,
    pub n_bootstrap: usize,
    pub band_level: f64,
    /// Return periods, in windows, for the return-level table.
    pub return_periods: Vec<f64>,
    /// Window lengths for the timing table.
    pub timing_window_steps: Vec<usize>,
    /// Closed-form evaluations averaged per timing measurement.
    pub timing_repeats: usize,
    pub master_seed: u64,
}

impl Default for Ar1DemoConfig {
    fn default() -> Self {
        Self {
            a: 0.9,
            noise_std: 1.0,
            window_steps: 20,
            true_p: 0.01,
            sample_sizes: vec![1_000, 2_000, 5_000, 10_000, 20_000, 50_000],
            n_bootstrap: 200,
            band_level: 0.95,
            return_periods: vec![25.0, 50.0, 100.0, 200.0, 500.0, 1_000.0, 10_000.0],
            timing_window_steps: vec![10, 20, 40, 80],
            timing_repeats: 2_000,
            master_seed: 0,
        }
    }
}

impl Ar1DemoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DadaError::Config(m.to_string()));
        Ar1Spec::stationary_scalar(self.a, self.noise_std)?;
        if self.window_steps == 0 {
            return bad("window_steps must be >= 1");
        }
        if !(self.true_p > 0.0 && self.true_p < 0.05) {
            return bad("true_p must lie in (0, 0.05) so that u sits above the fit threshold");
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n < 600) {
            return bad("sample_sizes must be nonempty and each >= 600");
        }
        if !(self.band_level > 0.0 && self.band_level < 1.0) || self.n_bootstrap < 10 {
            return bad("band_level must be in (0, 1) and n_bootstrap >= 10");
        }
        if self.return_periods.iter().any(|&m| !(m > 1.0)) {
            return bad("return periods must exceed 1");
        }
        if self.timing_window_steps.contains(&0) || self.timing_repeats == 0 {
            return bad("timing window lengths and repeats must be positive");
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<Ar1Spec> {
        Ar1Spec::stationary_scalar(self.a, self.noise_std)
    }
}

/// Standard deviation of the mean of `len` consecutive stationary values.
pub fn window_mean_std(a: f64, noise_std: f64, len: usize) -> f64 {
    let gamma0 = noise_std * noise_std / (1.0 - a * a);
    let n = len as f64;
    let mut s = n;
    let mut ak = 1.0;
    for k in 1..len {
        ak *= a;
        s += 2.0 * (n - k as f64) * ak;
    }
    (gamma0 * s).sqrt() / n
}

fn upper_quantile(sd: f64, q: f64) -> f64 {
    let z = Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(1.0 - q);
    sd * z
}

/// Threshold `u` with `P(φ(Y) ≥ u) = true_p`.
pub fn true_threshold(cfg: &Ar1DemoConfig) -> f64 {
    upper_quantile(window_mean_std(cfg.a, cfg.noise_std, cfg.window_steps + 1), cfg.true_p)
}

/// Window means of `n` consecutive non-overlapping windows of one long
/// stationary run.
pub fn window_means<R: Rng + ?Sized>(spec: &Ar1Spec, window_steps: usize, n: usize, rng: &mut R) -> Vec<f64> {
    let len = window_steps + 1;
    let series = spec.simulate(n * len - 1, rng);
    series
        .obs
        .chunks(len)
        .map(|w| w.iter().map(|v| v[0]).sum::<f64>() / len as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    pub empirical: f64,
    pub gpd: f64,
    pub lo: f64,
    pub hi: f64,
    pub xi: f64,
    pub sigma: f64,
    pub n_exceedances: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnRow {
    pub period: f64,
    pub empirical: f64,
    pub gpd: f64,
    pub lo: f64,
    pub hi: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar1Demo {
    pub u: f64,
    pub window_sd: f64,
    pub tail: Vec<TailRow>,
    /// Return levels from the largest sample.
    pub return_levels: Vec<ReturnRow>,
}

struct Estimate {
    means: Vec<f64>,
    fit: GpdFit,
    empirical: f64,
    gpd: f64,
}

fn estimate(spec: &Ar1Spec, cfg: &Ar1DemoConfig, u: f64, n: usize, seed_key: &[u64]) -> Result<Estimate> {
    let mut rng = derive_rng(cfg.master_seed, seed_key);
    let means = window_means(spec, cfg.window_steps, n, &mut rng);
    let empirical = means.iter().filter(|&&m| m >= u).count() as f64 / n as f64;
    let fit = gpd_tail_fit(&means, default_fit_threshold(&means))?;
    let gpd = fit.tail_prob(u).unwrap_or(empirical);
    Ok(Estimate {
        means,
        fit,
        empirical,
        gpd,
    })
}

/// Deterministic part of the demo: tail probabilities against `n` and the
/// return-level curve at the largest `n`.
pub fn run_ar1_demo(cfg: &Ar1DemoConfig) -> Result<Ar1Demo> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let u = true_threshold(cfg);
    let window_sd = window_mean_std(cfg.a, cfg.noise_std, cfg.window_steps + 1);
    let n_max = *cfg.sample_sizes.iter().max().expect("validated");

    let rows: Vec<Result<(TailRow, Option<Vec<ReturnRow>>)>> = cfg
        .sample_sizes
        .par_iter()
        .map(|&n| {
            let est = estimate(&spec, cfg, u, n, &[1, n as u64])?;
            let mut boot_rng = derive_rng(cfg.master_seed, &[2, n as u64]);
            let fits = gpd_bootstrap(&est.means, est.fit.threshold, cfg.n_bootstrap, &mut boot_rng);
            let prob = |f: &GpdFit| f.tail_prob(u).unwrap_or(f64::NAN);
            let (lo, hi) = percentile_band(&fits, cfg.band_level, prob)
                .ok_or_else(|| DadaError::Insufficient(format!("no usable bootstrap fits at n = {n}")))?;
            let row = TailRow {
                n,
                empirical: est.empirical,
                gpd: est.gpd,
                lo,
                hi,
                xi: est.fit.xi,
                sigma: est.fit.sigma,
                n_exceedances: est.fit.n_exceedances,
            };
            let levels = (n == n_max).then(|| {
                cfg.return_periods
                    .iter()
                    .map(|&m| {
                        let q = 1.0 / m;
                        let (lo, hi) = percentile_band(&fits, cfg.band_level, |f| f.return_level(q))
                            .unwrap_or((f64::NAN, f64::NAN));
                        ReturnRow {
                            period: m,
                            empirical: quantile(&est.means, 1.0 - q),
                            gpd: est.fit.return_level(q),
                            lo,
                            hi,
                            truth: upper_quantile(window_sd, q),
                        }
                    })
                    .collect()
            });
            Ok((row, levels))
        })
        .collect();

    let mut tail = Vec::with_capacity(rows.len());
    let mut return_levels = Vec::new();
    for r in rows {
        let (row, levels) = r?;
        tail.push(row);
        if let Some(l) = levels {
            if return_levels.is_empty() {
                return_levels = l;
            }
        }
    }
    Ok(Ar1Demo {
        u,
        window_sd,
        tail,
        return_levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub window_steps: usize,
    /// Simulating `n` windows and estimating `P(φ ≥ u)` from them.
    pub mc_seconds: f64,
    /// One closed-form evaluation of `log f(y)` for a single window.
    pub closed_form_seconds: f64,
}

/// Wall-clock comparison of the two paths. Runs sequentially so that the
/// measurements are not perturbed by each other.
pub fn ar1_timing(cfg: &Ar1DemoConfig) -> Result<Vec<TimingRow>> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let mut rows = Vec::new();
    for &steps in &cfg.timing_window_steps {
        let local = Ar1DemoConfig {
            window_steps: steps,
            ..cfg.clone()
        };
        let u = true_threshold(&local);
        let mut rng = derive_rng(cfg.master_seed, &[3, steps as u64]);
        let y: ObservationSequence = spec.simulate(steps, &mut rng);
        let start = Instant::now();
        let mut acc = 0.0;
        for _ in 0..cfg.timing_repeats {
            acc += std::hint::black_box(ar1_loglik(std::hint::black_box(&y), &spec)?);
        }
        std::hint::black_box(acc);
        let closed_form_seconds = start.elapsed().as_secs_f64() / cfg.timing_repeats as f64;
        for &n in &cfg.sample_sizes {
            let start = Instant::now();
            let est = estimate(&spec, &local, u, n, &[4, steps as u64, n as u64])?;
            std::hint::black_box(est.gpd);
            rows.push(TimingRow {
                n,
                window_steps: steps,
                mc_seconds: start.elapsed().as_secs_f64(),
                closed_form_seconds,
            });
        }
    }
    Ok(rows)
}
