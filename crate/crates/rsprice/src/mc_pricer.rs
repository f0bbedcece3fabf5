//! Monte Carlo pricing: regime-switching Heston via Euler-Maruyama and
//! regime-switching Black-Scholes via exact regime-conditional simulation
//! (the cross-check oracle for the characteristic-function route).

use crate::core::{put_payoff, BsmRsParams, HestonRsParams, MarketState, OptionSpec, Regime};
use crate::ctmc::{discretize, occupation_time, simulate_regime_path, Generator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Normal quantile for the 98% confidence level.
pub const Z98: f64 = 2.326;

/// Variance-flooring placement in the Heston Euler step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceScheme {
    /// Floor v at 0 in drift and diffusion of both equations.
    #[default]
    FullTruncation,
    /// Floor only the diffusion coefficient, leaving the raw v in the
    /// variance drift.
    DiffusionFloorOnly,
}

#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    /// Number of paths N.
    pub n_paths: usize,
    /// Euler steps per year.
    pub n_steps_per_year: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub scheme: VarianceScheme,
}

impl Default for McConfig {
    fn default() -> McConfig {
        McConfig {
            n_paths: 100_000,
            n_steps_per_year: 250,
            seed: 0,
            antithetic: true,
            scheme: VarianceScheme::FullTruncation,
        }
    }
}

/// Sample mean with standard error and 98% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci98: (f64, f64),
}

impl McEstimate {
    fn from_samples(samples: &[f64]) -> McEstimate {
        let n = samples.len();
        assert!(n >= 2, "need at least two paths");
        let mean = kahan_sum(samples.iter().copied()) / n as f64;
        let ss = kahan_sum(samples.iter().map(|&x| {
            let d = x - mean;
            d * d
        }));
        let var = ss / (n - 1) as f64;
        let std_error = (var / n as f64).sqrt();
        McEstimate {
            mean,
            std_error,
            ci98: (mean - Z98 * std_error, mean + Z98 * std_error),
        }
    }

    fn degenerate(value: f64) -> McEstimate {
        McEstimate {
            mean: value,
            std_error: 0.0,
            ci98: (value, value),
        }
    }
}

/// Compensated summation so the reduction is worker-count invariant.
fn kahan_sum<I: Iterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn path_rng(seed: u64, path_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(path_index as u64))
}

/// Exact simulation for the regime-switching Black-Scholes put: conditional
/// on the regime path, log S_T is Gaussian with integrated variance
/// sum_i sigma_i^2 * occupation_time(i). No Euler bias in S.
pub fn bsm_rs_put_mc(
    state: &MarketState,
    spec: &OptionSpec,
    params: &BsmRsParams,
    cfg: &McConfig,
) -> McEstimate {
    let tau = spec.maturity - state.t;
    assert!(state.spot > 0.0);
    assert!(tau >= 0.0);
    if tau == 0.0 {
        return McEstimate::degenerate(put_payoff(state.spot, spec.strike));
    }
    let gen = Generator::new(params.lambda12, params.lambda21);
    let discount = (-params.r * tau).exp();
    let log_s0 = state.spot.ln();
    let samples: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let path = simulate_regime_path(&gen, state.regime, tau, &mut rng);
            let iv = params.sigma[0] * params.sigma[0] * occupation_time(&path, Regime::One)
                + params.sigma[1] * params.sigma[1] * occupation_time(&path, Regime::Two);
            let z: f64 = rng.sample(StandardNormal);
            let terminal = |z: f64| {
                let log_st = log_s0 + params.r * tau - 0.5 * iv + iv.sqrt() * z;
                put_payoff(log_st.exp(), spec.strike)
            };
            let payoff = if cfg.antithetic {
                0.5 * (terminal(z) + terminal(-z))
            } else {
                terminal(z)
            };
            discount * payoff
        })
        .collect();
    McEstimate::from_samples(&samples)
}

/// Euler-Maruyama simulation of the regime-switching Heston put. The regime
/// multiplying each step's vol-of-vol is the regime at the step's left
/// endpoint; the regime path itself is simulated exactly.
pub fn heston_rs_put_mc(
    state: &MarketState,
    spec: &OptionSpec,
    params: &HestonRsParams,
    cfg: &McConfig,
) -> McEstimate {
    let tau = spec.maturity - state.t;
    assert!(state.spot > 0.0);
    assert!(tau >= 0.0);
    let v0 = state.variance.expect("Heston state requires a variance");
    assert!(v0 >= 0.0);
    if tau == 0.0 {
        return McEstimate::degenerate(put_payoff(state.spot, spec.strike));
    }
    let n_steps = ((cfg.n_steps_per_year as f64 * tau).ceil() as usize).max(1);
    let dt = tau / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let rho_perp = (1.0 - params.rho * params.rho).sqrt();
    let gen = Generator::new(params.lambda12, params.lambda21);
    let discount = (-params.r * tau).exp();

    let step = |s: &mut f64, v: &mut f64, sigma: f64, dw1: f64, dw2: f64| {
        let v_floor = v.max(0.0);
        let sqrt_v = v_floor.sqrt();
        let new_s = *s + params.r * *s * dt + sqrt_v * *s * dw1;
        let new_v = match cfg.scheme {
            VarianceScheme::FullTruncation => *v + params.kappa * (params.gamma - v_floor) * dt + sigma * sqrt_v * dw2,
            VarianceScheme::DiffusionFloorOnly => *v + params.kappa * (params.gamma - *v) * dt + sigma * sqrt_v * dw2,
        };
        *s = new_s;
        *v = new_v;
    };

    let samples: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let path = simulate_regime_path(&gen, state.regime, tau, &mut rng);
            let regimes = discretize(&path, n_steps);
            let mut s_pos = state.spot;
            let mut v_pos = v0;
            let mut s_neg = state.spot;
            let mut v_neg = v0;
            for &regime in &regimes {
                let sigma = params.sigma[regime.idx()];
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let dw1 = sqrt_dt * z1;
                let dw2 = sqrt_dt * (params.rho * z1 + rho_perp * z2);
                step(&mut s_pos, &mut v_pos, sigma, dw1, dw2);
                if cfg.antithetic {
                    step(&mut s_neg, &mut v_neg, sigma, -dw1, -dw2);
                }
            }
            let payoff = if cfg.antithetic {
                0.5 * (put_payoff(s_pos, spec.strike) + put_payoff(s_neg, spec.strike))
            } else {
                put_payoff(s_pos, spec.strike)
            };
            discount * payoff
        })
        .collect();
    McEstimate::from_samples(&samples)
}
