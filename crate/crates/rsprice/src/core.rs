//! Shared domain types, payoff/boundary formulas and validation used by
//! every pricing route.

use crate::error::{PriceError, Result};
use statrs::distribution::{ContinuousCDF, Normal};

/// Economic regime of the two-state Markov chain. Reported 1-based on all
/// interfaces, matching the e1/e2 unit-vector convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    One,
    Two,
}

impl Regime {
    /// 0-based storage index.
    pub fn idx(self) -> usize {
        match self {
            Regime::One => 0,
            Regime::Two => 1,
        }
    }

    /// 1-based label for output.
    pub fn label(self) -> usize {
        self.idx() + 1
    }

    pub fn other(self) -> Regime {
        match self {
            Regime::One => Regime::Two,
            Regime::Two => Regime::One,
        }
    }

    pub fn from_label(label: usize) -> Result<Regime> {
        match label {
            1 => Ok(Regime::One),
            2 => Ok(Regime::Two),
            other => Err(PriceError::InvalidParameter(format!(
                "regime must be 1 or 2, got {other}"
            ))),
        }
    }
}

/// Parameters of the regime-switching Black-Scholes model.
///
/// All rates are continuously compounded per year; volatilities are per
/// square-root year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsmRsParams {
    /// Risk-free rate r.
    pub r: f64,
    /// Per-regime volatilities (sigma_1, sigma_2).
    pub sigma: [f64; 2],
    /// Transition rate from regime 1 to 2.
    pub lambda12: f64,
    /// Transition rate from regime 2 to 1.
    pub lambda21: f64,
}

impl BsmRsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) {
            return Err(PriceError::InvalidParameter(format!("r = {}", self.r)));
        }
        if !(self.sigma[0] > 0.0 && self.sigma[1] > 0.0) {
            return Err(PriceError::InvalidParameter(format!(
                "sigma = {:?}",
                self.sigma
            )));
        }
        if !(self.lambda12 >= 0.0 && self.lambda21 >= 0.0) {
            return Err(PriceError::InvalidParameter(format!(
                "lambda12 = {}, lambda21 = {}",
                self.lambda12, self.lambda21
            )));
        }
        Ok(())
    }

    /// Transition rate out of the given regime.
    pub fn rate_out_of(&self, regime: Regime) -> f64 {
        match regime {
            Regime::One => self.lambda12,
            Regime::Two => self.lambda21,
        }
    }
}

/// Parameters of the regime-switching Heston model. The vol-of-vol switches
/// with the regime; the variance process is
/// dv = kappa (gamma - v) dt + sigma_X sqrt(v) dW2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonRsParams {
    pub r: f64,
    /// Mean-reversion rate kappa.
    pub kappa: f64,
    /// Long-run variance level gamma.
    pub gamma: f64,
    /// Correlation between the price and variance Brownian motions.
    pub rho: f64,
    /// Per-regime vol-of-vol (sigma_1, sigma_2).
    pub sigma: [f64; 2],
    pub lambda12: f64,
    pub lambda21: f64,
}

impl HestonRsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) {
            return Err(PriceError::InvalidParameter(format!("r = {}", self.r)));
        }
        if !(self.kappa > 0.0) {
            return Err(PriceError::InvalidParameter(format!("kappa = {}", self.kappa)));
        }
        if !(self.gamma > 0.0) {
            return Err(PriceError::InvalidParameter(format!("gamma = {}", self.gamma)));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(PriceError::InvalidParameter(format!("rho = {}", self.rho)));
        }
        if !(self.sigma[0] > 0.0 && self.sigma[1] > 0.0) {
            return Err(PriceError::InvalidParameter(format!(
                "sigma = {:?}",
                self.sigma
            )));
        }
        if !(self.lambda12 >= 0.0 && self.lambda21 >= 0.0) {
            return Err(PriceError::InvalidParameter(format!(
                "lambda12 = {}, lambda21 = {}",
                self.lambda12, self.lambda21
            )));
        }
        Ok(())
    }

    pub fn rate_out_of(&self, regime: Regime) -> f64 {
        match regime {
            Regime::One => self.lambda12,
            Regime::Two => self.lambda21,
        }
    }
}

/// Payoff kind. Only European puts are modeled; the enum exists so calls can
/// be added later without type churn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PayoffKind {
    #[default]
    EuropeanPut,
}

/// Contract terms of the option.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    /// Strike E.
    pub strike: f64,
    /// Maturity T in years.
    pub maturity: f64,
    pub kind: PayoffKind,
}

impl OptionSpec {
    pub fn put(strike: f64, maturity: f64) -> OptionSpec {
        OptionSpec {
            strike,
            maturity,
            kind: PayoffKind::EuropeanPut,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0) {
            return Err(PriceError::InvalidParameter(format!(
                "strike = {}",
                self.strike
            )));
        }
        if !(self.maturity >= 0.0) {
            return Err(PriceError::InvalidParameter(format!(
                "maturity = {}",
                self.maturity
            )));
        }
        Ok(())
    }
}

/// Current market state at which a price is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    /// Current time t in years.
    pub t: f64,
    /// Spot S.
    pub spot: f64,
    /// Instantaneous variance v (Heston only).
    pub variance: Option<f64>,
    pub regime: Regime,
}

impl MarketState {
    pub fn bsm(t: f64, spot: f64, regime: Regime) -> MarketState {
        MarketState {
            t,
            spot,
            variance: None,
            regime,
        }
    }

    pub fn heston(t: f64, spot: f64, variance: f64, regime: Regime) -> MarketState {
        MarketState {
            t,
            spot,
            variance: Some(variance),
            regime,
        }
    }
}

/// A point price plus optional Monte Carlo uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceResult {
    pub value: f64,
    pub std_error: Option<f64>,
    /// 98% confidence interval (low, high).
    pub ci98: Option<(f64, f64)>,
    pub regime: Regime,
}

impl PriceResult {
    pub fn point(value: f64, regime: Regime) -> PriceResult {
        PriceResult {
            value,
            std_error: None,
            ci98: None,
            regime,
        }
    }
}

/// European put payoff (E - S)^+.
pub fn put_payoff(spot: f64, strike: f64) -> f64 {
    (strike - spot).max(0.0)
}

/// Discounted strike E e^{-r(T-t)}: the value of the put at S = 0.
pub fn discounted_floor(strike: f64, r: f64, t: f64, maturity: f64) -> Result<f64> {
    if t > maturity {
        return Err(PriceError::InvalidTime { t, maturity });
    }
    Ok(strike * (-r * (maturity - t)).exp())
}

/// Textbook Black-Scholes European put. Ground truth for the degenerate
/// single-regime cases (lambda = 0 or sigma_1 = sigma_2).
pub fn bs_put_closed_form(spot: f64, strike: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return put_payoff(spot, strike);
    }
    if sigma <= 0.0 {
        // deterministic forward
        return (strike * (-r * tau).exp() - spot).max(0.0);
    }
    let norm = Normal::new(0.0, 1.0).expect("unit normal");
    let sqrt_tau = tau.sqrt();
    let d1 = ((spot / strike).ln() + (r + 0.5 * sigma * sigma) * tau) / (sigma * sqrt_tau);
    let d2 = d1 - sigma * sqrt_tau;
    strike * (-r * tau).exp() * norm.cdf(-d2) - spot * norm.cdf(-d1)
}
