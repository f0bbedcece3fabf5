//! Coupled PDE residual operators for both models: the physics the PIRL
//! loss enforces and that oracle solutions must annihilate.

use crate::core::{discounted_floor, put_payoff, BsmRsParams, HestonRsParams, MarketState, OptionSpec};
use crate::error::{PriceError, Result};

/// Which coupled system governs the price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    BsmRs,
    HestonRs,
}

/// Value and partial derivatives of the regime-price pair at one point.
/// Heston-only slots are present iff the model is Heston.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivBundle {
    pub value: [f64; 2],
    pub d_t: [f64; 2],
    pub d_s: [f64; 2],
    pub d_ss: [f64; 2],
    pub d_v: Option<[f64; 2]>,
    pub d_vv: Option<[f64; 2]>,
    pub d_sv: Option<[f64; 2]>,
}

/// Residual (d_t V_i - D_i) of the coupled Black-Scholes system, with
/// D_i = -sigma_i^2 S^2 V_i'' / 2 - r S V_i' + r V_i + lambda_ij (V_i - V_j).
/// Zero iff the bundle satisfies the system at this point.
pub fn bsm_rs_residual(b: &DerivBundle, s: f64, params: &BsmRsParams) -> [f64; 2] {
    let lambda = [params.lambda12, params.lambda21];
    let mut res = [0.0; 2];
    for i in 0..2 {
        let j = 1 - i;
        let sig2 = params.sigma[i] * params.sigma[i];
        res[i] = b.d_t[i] + 0.5 * sig2 * s * s * b.d_ss[i] + params.r * s * b.d_s[i]
            - params.r * b.value[i]
            - lambda[i] * (b.value[i] - b.value[j]);
    }
    res
}

/// Residual of the coupled Heston system. The vol-of-vol entering the
/// variance-diffusion and cross terms is the regime's own sigma_i.
pub fn heston_rs_residual(b: &DerivBundle, s: f64, v: f64, params: &HestonRsParams) -> [f64; 2] {
    let d_v = b.d_v.expect("Heston bundle requires d_v");
    let d_vv = b.d_vv.expect("Heston bundle requires d_vv");
    let d_sv = b.d_sv.expect("Heston bundle requires d_sv");
    let lambda = [params.lambda12, params.lambda21];
    let mut res = [0.0; 2];
    for i in 0..2 {
        let j = 1 - i;
        let sig = params.sigma[i];
        res[i] = b.d_t[i]
            + 0.5 * v * s * s * b.d_ss[i]
            + params.r * s * b.d_s[i]
            - params.r * b.value[i]
            + 0.5 * sig * sig * v * d_vv[i]
            + sig * v * params.rho * s * d_sv[i]
            + params.kappa * (params.gamma - v) * d_v[i]
            - lambda[i] * (b.value[i] - b.value[j]);
    }
    res
}

/// Transpose of [`bsm_rs_residual`] as a linear map of the bundle: given
/// adjoints of the two residuals, produce the adjoint bundle satisfying
/// <res(b), w> = <b, adjoint(w)> for every bundle b.
pub fn bsm_rs_residual_adjoint(w: [f64; 2], s: f64, params: &BsmRsParams) -> DerivBundle {
    let lambda = [params.lambda12, params.lambda21];
    let mut out = DerivBundle::default();
    for i in 0..2 {
        let j = 1 - i;
        let sig2 = params.sigma[i] * params.sigma[i];
        out.d_t[i] = w[i];
        out.d_ss[i] = 0.5 * sig2 * s * s * w[i];
        out.d_s[i] = params.r * s * w[i];
        out.value[i] = -(params.r + lambda[i]) * w[i] + lambda[j] * w[j];
    }
    out
}

/// Transpose of [`heston_rs_residual`]; see [`bsm_rs_residual_adjoint`].
pub fn heston_rs_residual_adjoint(
    w: [f64; 2],
    s: f64,
    v: f64,
    params: &HestonRsParams,
) -> DerivBundle {
    let lambda = [params.lambda12, params.lambda21];
    let mut out = DerivBundle {
        d_v: Some([0.0; 2]),
        d_vv: Some([0.0; 2]),
        d_sv: Some([0.0; 2]),
        ..DerivBundle::default()
    };
    for i in 0..2 {
        let j = 1 - i;
        let sig = params.sigma[i];
        out.d_t[i] = w[i];
        out.d_ss[i] = 0.5 * v * s * s * w[i];
        out.d_s[i] = params.r * s * w[i];
        out.value[i] = -(params.r + lambda[i]) * w[i] + lambda[j] * w[j];
        out.d_vv.as_mut().unwrap()[i] = 0.5 * sig * sig * v * w[i];
        out.d_sv.as_mut().unwrap()[i] = sig * v * params.rho * s * w[i];
        out.d_v.as_mut().unwrap()[i] = params.kappa * (params.gamma - v) * w[i];
    }
    out
}

/// Boundary target for a state lying on a boundary face of the domain.
/// Interior points are an error.
pub fn boundary_values(
    model: ModelKind,
    state: &MarketState,
    spec: &OptionSpec,
    r: f64,
) -> Result<[f64; 2]> {
    let strike = spec.strike;
    if state.t == spec.maturity {
        let v = put_payoff(state.spot, strike);
        return Ok([v, v]);
    }
    if state.spot == 0.0 {
        let v = discounted_floor(strike, r, state.t, spec.maturity)?;
        return Ok([v, v]);
    }
    if state.spot.is_infinite() {
        return Ok([0.0, 0.0]);
    }
    if model == ModelKind::HestonRs {
        match state.variance {
            Some(v) if v == 0.0 => {
                // zero-variance limit: the deterministic discounted payoff
                let val = (discounted_floor(strike, r, state.t, spec.maturity)? - state.spot)
                    .max(0.0);
                return Ok([val, val]);
            }
            Some(v) if v.is_infinite() => return Ok([0.0, 0.0]),
            _ => {}
        }
    }
    Err(PriceError::NotABoundary(format!(
        "t = {}, S = {}, v = {:?}",
        state.t, state.spot, state.variance
    )))
}
