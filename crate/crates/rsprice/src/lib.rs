//! Pricing engine for European put options under two-regime
//! regime-switching Black-Scholes and Heston models.
//!
//! Three mutually cross-validating routes are provided:
//! semi-analytical characteristic-function pricing, Monte Carlo simulation,
//! and a physics-informed residual-learning network trained against the
//! coupled pricing PDEs. A Crank-Nicolson finite-difference solver serves
//! as a third oracle for the Black-Scholes system.

pub mod cf_pricer;
pub mod core;
pub mod ctmc;
pub mod deriv;
pub mod error;
pub mod fd_oracle;
pub mod mc_pricer;
pub mod net;
pub mod pde;
pub mod quad;
pub mod sampler_loss;

pub use crate::core::{
    bs_put_closed_form, discounted_floor, put_payoff, BsmRsParams, HestonRsParams, MarketState,
    OptionSpec, PayoffKind, PriceResult, Regime,
};
pub use crate::error::{PriceError, Result};
