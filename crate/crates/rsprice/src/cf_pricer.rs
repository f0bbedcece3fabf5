//! Semi-analytical European put pricing under regime-switching
//! Black-Scholes via characteristic functions and Fourier inversion.
//!
//! The put decomposes as
//!   P = e^{-r tau} E P(S_T <= E) - S Ptilde(S_T <= E),
//! where both probabilities come from Shephard's inversion of the log-price
//! characteristic function under Q and under the stock numeraire measure.

use crate::core::{put_payoff, BsmRsParams, MarketState, OptionSpec, PriceResult};
use crate::error::{PriceError, Result};
use crate::quad;
use num_complex::Complex64;

/// 2x2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexMat2 {
    pub m: [[Complex64; 2]; 2],
}

impl ComplexMat2 {
    pub fn zero() -> ComplexMat2 {
        ComplexMat2 {
            m: [[Complex64::new(0.0, 0.0); 2]; 2],
        }
    }

    pub fn identity() -> ComplexMat2 {
        let mut out = ComplexMat2::zero();
        out.m[0][0] = Complex64::new(1.0, 0.0);
        out.m[1][1] = Complex64::new(1.0, 0.0);
        out
    }

    pub fn mul(&self, other: &ComplexMat2) -> ComplexMat2 {
        let a = &self.m;
        let b = &other.m;
        ComplexMat2 {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
        }
    }

    fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }
}

/// Quadrature controls for the inversion integrals. The integrals run to
/// +infinity and must be truncated; when `eta_max` is absent it is derived
/// from the Gaussian decay bound of the characteristic function.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    /// Absolute tolerance of the adaptive rule.
    pub tol: f64,
    /// Explicit upper truncation; derived from model parameters when None.
    pub eta_max: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> QuadratureConfig {
        QuadratureConfig {
            tol: 1e-10,
            eta_max: None,
        }
    }
}

impl QuadratureConfig {
    /// Truncation point from |f1(eta)| <= exp(-sigma_min^2 eta^2 tau / 2):
    /// eta_max = sqrt(2 ln(1/tol) / (sigma_min^2 tau)) + 10, capped at 1e4.
    pub fn derived_eta_max(&self, sigma_min: f64, tau: f64) -> f64 {
        if let Some(x) = self.eta_max {
            return x;
        }
        let decay = sigma_min * sigma_min * tau;
        let base = if decay > 0.0 {
            (2.0 * (1.0 / self.tol).ln() / decay).sqrt()
        } else {
            0.0
        };
        (base + 10.0).min(1e4)
    }
}

/// The exponent matrix M(eta, tau) of the regime expectation:
/// M = Q^T tau + diag(sigma_i^2 (-j eta - eta^2) / 2) tau.
pub fn matrix_m(eta: Complex64, tau: f64, params: &BsmRsParams) -> ComplexMat2 {
    let j = Complex64::new(0.0, 1.0);
    let diffusion = -j * eta - eta * eta;
    let mut out = ComplexMat2::zero();
    out.m[0][0] = (-params.lambda12 + 0.5 * params.sigma[0] * params.sigma[0] * diffusion) * tau;
    out.m[0][1] = Complex64::new(params.lambda21 * tau, 0.0);
    out.m[1][0] = Complex64::new(params.lambda12 * tau, 0.0);
    out.m[1][1] = (-params.lambda21 + 0.5 * params.sigma[1] * params.sigma[1] * diffusion) * tau;
    out
}

/// phi1(z) = (e^z - 1) / z, series for small |z|.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-8 {
        let one = Complex64::new(1.0, 0.0);
        one + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Closed-form 2x2 complex matrix exponential via Putzer's two-eigenvalue
/// formula, with a phi1 series when the eigenvalues nearly coincide.
pub fn expm_2x2(mat: &ComplexMat2) -> ComplexMat2 {
    let tr = mat.trace();
    let det = mat.det();
    let disc = (tr * tr - 4.0 * det).sqrt();
    let l1 = (tr + disc) / 2.0;
    let l2 = (tr - disc) / 2.0;
    // e^A = e^{l1} I + r2 (A - l1 I), r2 = (e^{l1} - e^{l2}) / (l1 - l2)
    let e1 = l1.exp();
    let r2 = e1 * phi1(l2 - l1);
    let mut out = ComplexMat2::zero();
    for row in 0..2 {
        for col in 0..2 {
            let id = if row == col {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            out.m[row][col] = e1 * id + r2 * (mat.m[row][col] - l1 * id);
        }
    }
    out
}

/// Characteristic function of the log price under Q:
/// f1(eta) = exp(j eta y + j r eta tau) <e^M e_i, 1>.
pub fn char_fn_f1(
    eta: Complex64,
    state: &MarketState,
    spec: &OptionSpec,
    params: &BsmRsParams,
) -> Result<Complex64> {
    if state.spot <= 0.0 {
        return Err(PriceError::NonPositiveSpot(state.spot));
    }
    let tau = spec.maturity - state.t;
    let y = state.spot.ln();
    let j = Complex64::new(0.0, 1.0);
    let em = expm_2x2(&matrix_m(eta, tau, params));
    let i = state.regime.idx();
    let regime_expectation = em.m[0][i] + em.m[1][i];
    Ok((j * eta * y + j * params.r * eta * tau).exp() * regime_expectation)
}

/// Characteristic function of the log price under the stock numeraire:
/// f2(eta) = e^{-r tau - y} f1(eta - j).
pub fn char_fn_f2(
    eta: Complex64,
    state: &MarketState,
    spec: &OptionSpec,
    params: &BsmRsParams,
) -> Result<Complex64> {
    if state.spot <= 0.0 {
        return Err(PriceError::NonPositiveSpot(state.spot));
    }
    let tau = spec.maturity - state.t;
    let y = state.spot.ln();
    let j = Complex64::new(0.0, 1.0);
    let shifted = char_fn_f1(eta - j, state, spec, params)?;
    Ok((-params.r * tau - y).exp() * shifted)
}

/// Shephard inversion:
/// P(S_T <= E) = 1/2 - (1/pi) \int_0^inf Re(e^{-j eta ln E} f(eta) / (j eta)) d eta.
/// The eta -> 0 singularity is removable; the rule never samples eta = 0.
pub fn prob_below<F>(char_fn: F, strike: f64, eta_max: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    assert!(strike > 0.0);
    let log_strike = strike.ln();
    let integrand = |eta: f64| {
        let g = (Complex64::new(0.0, -eta * log_strike)).exp() * char_fn(eta);
        // Re(g / (j eta)) = Im(g) / eta
        g.im / eta
    };
    let integral = quad::integrate(&integrand, 0.0, eta_max, tol)?;
    Ok(0.5 - integral / std::f64::consts::PI)
}

/// European put price by Fourier inversion. The result is checked (not
/// clamped) against the model-free bounds; a violation beyond 1e-6 signals
/// quadrature misconfiguration.
pub fn put_price_cf(
    state: &MarketState,
    spec: &OptionSpec,
    params: &BsmRsParams,
    quad_cfg: &QuadratureConfig,
) -> Result<PriceResult> {
    params.validate()?;
    spec.validate()?;
    if state.spot <= 0.0 {
        return Err(PriceError::NonPositiveSpot(state.spot));
    }
    if state.t > spec.maturity {
        return Err(PriceError::InvalidTime {
            t: state.t,
            maturity: spec.maturity,
        });
    }
    let tau = spec.maturity - state.t;
    if tau == 0.0 {
        return Ok(PriceResult::point(
            put_payoff(state.spot, spec.strike),
            state.regime,
        ));
    }
    let sigma_min = params.sigma[0].min(params.sigma[1]);
    let eta_max = quad_cfg.derived_eta_max(sigma_min, tau);
    let p1 = prob_below(
        |eta| char_fn_f1(Complex64::new(eta, 0.0), state, spec, params).expect("spot checked"),
        spec.strike,
        eta_max,
        quad_cfg.tol,
    )?;
    let p2 = prob_below(
        |eta| char_fn_f2(Complex64::new(eta, 0.0), state, spec, params).expect("spot checked"),
        spec.strike,
        eta_max,
        quad_cfg.tol,
    )?;
    let discount = (-params.r * tau).exp();
    let value = discount * spec.strike * p1 - state.spot * p2;
    let lower = (discount * spec.strike - state.spot).max(0.0);
    let upper = discount * spec.strike;
    if value < lower - 1e-6 || value > upper + 1e-6 {
        return Err(PriceError::BoundViolation {
            value,
            lower,
            upper,
        });
    }
    Ok(PriceResult::point(value, state.regime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{bs_put_closed_form, Regime};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn sec51_params() -> BsmRsParams {
        BsmRsParams {
            r: 0.02,
            sigma: [0.15, 0.35],
            lambda12: 2.0,
            lambda21: 1.0,
        }
    }

    fn degenerate_params(sigma: f64) -> BsmRsParams {
        BsmRsParams {
            r: 0.02,
            sigma: [sigma, sigma],
            lambda12: 0.0,
            lambda21: 0.0,
        }
    }

    #[test]
    fn matrix_m_trivial_cases() {
        let p = sec51_params();
        let eta = Complex64::new(1.3, -0.2);
        let zero_tau = matrix_m(eta, 0.0, &p);
        assert_eq!(zero_tau, ComplexMat2::zero());

        // eta = 0 kills the diffusion term
        let m = matrix_m(Complex64::new(0.0, 0.0), 1.0, &p);
        assert_abs_diff_eq!(m.m[0][0].re, -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m[0][1].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m[1][0].re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m[1][1].re, -1.0, epsilon = 1e-15);

        // lambda = 0, equal sigmas: diagonal sigma^2 (-j eta - eta^2) tau / 2
        let d = degenerate_params(0.2);
        let eta = Complex64::new(0.7, 0.0);
        let m = matrix_m(eta, 2.0, &d);
        let expect = 0.5 * 0.04 * (-Complex64::new(0.0, 1.0) * eta - eta * eta) * 2.0;
        assert_abs_diff_eq!(m.m[0][0].re, expect.re, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m[0][0].im, expect.im, epsilon = 1e-15);
        assert_eq!(m.m[0][1].norm(), 0.0);
    }

    #[test]
    fn expm_trivial_cases() {
        let id = expm_2x2(&ComplexMat2::zero());
        assert_abs_diff_eq!(id.m[0][0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(id.m[0][1].norm(), 0.0, epsilon = 1e-15);

        let mut diag = ComplexMat2::zero();
        diag.m[0][0] = Complex64::new(1.0, 2.0);
        diag.m[1][1] = Complex64::new(-0.5, 0.3);
        let e = expm_2x2(&diag);
        let e00 = diag.m[0][0].exp();
        let e11 = diag.m[1][1].exp();
        assert_abs_diff_eq!(e.m[0][0].re, e00.re, epsilon = 1e-12);
        assert_abs_diff_eq!(e.m[0][0].im, e00.im, epsilon = 1e-12);
        assert_abs_diff_eq!(e.m[1][1].re, e11.re, epsilon = 1e-12);
        assert_abs_diff_eq!(e.m[1][1].im, e11.im, epsilon = 1e-12);
    }

    #[test]
    fn expm_of_generator_matches_transition_matrix() {
        // exp(Q t) for the two-state chain has a closed form
        let gen = crate::ctmc::Generator::new(2.0, 1.0);
        let t = 1.0;
        let mut qt = ComplexMat2::zero();
        let q = gen.matrix();
        for row in 0..2 {
            for col in 0..2 {
                qt.m[row][col] = Complex64::new(q[row][col] * t, 0.0);
            }
        }
        let e = expm_2x2(&qt);
        let p = gen.transition_matrix(t);
        for row in 0..2 {
            for col in 0..2 {
                let rel = (e.m[row][col].re - p[row][col]).abs() / p[row][col].abs();
                assert!(rel < 1e-12, "entry ({row},{col}) off by {rel:.2e}");
                assert!(e.m[row][col].im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn expm_inverse_identity_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut a = ComplexMat2::zero();
            let mut neg = ComplexMat2::zero();
            for row in 0..2 {
                for col in 0..2 {
                    let z = Complex64::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                    a.m[row][col] = z;
                    neg.m[row][col] = -z;
                }
            }
            let prod = expm_2x2(&a).mul(&expm_2x2(&neg));
            for row in 0..2 {
                for col in 0..2 {
                    let id = if row == col { 1.0 } else { 0.0 };
                    assert!(
                        (prod.m[row][col] - id).norm() < 1e-10,
                        "e^A e^-A != I: {:?}",
                        prod
                    );
                }
            }
        }
    }

    #[test]
    fn f1_normalization_and_symmetry() {
        let p = sec51_params();
        let spec = OptionSpec::put(70.0, 1.0);
        let state = MarketState::bsm(0.0, 70.0, Regime::One);
        let one = char_fn_f1(Complex64::new(0.0, 0.0), &state, &spec, &p).unwrap();
        assert_abs_diff_eq!(one.re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(one.im, 0.0, epsilon = 1e-14);

        for k in 1..=200 {
            let eta = k as f64 * 0.25;
            let f = char_fn_f1(Complex64::new(eta, 0.0), &state, &spec, &p).unwrap();
            let fneg = char_fn_f1(Complex64::new(-eta, 0.0), &state, &spec, &p).unwrap();
            assert_abs_diff_eq!(f.re, fneg.re, epsilon = 1e-12);
            assert_abs_diff_eq!(f.im, -fneg.im, epsilon = 1e-12);
            assert!(f.norm() <= 1.0 + 1e-12, "|f1({eta})| = {} > 1", f.norm());
        }
    }

    #[test]
    fn f1_degenerate_case_is_gbm_characteristic_function() {
        let p = degenerate_params(0.15);
        let spec = OptionSpec::put(70.0, 1.0);
        let state = MarketState::bsm(0.0, 70.0, Regime::Two);
        let tau = 1.0;
        let y = 70.0f64.ln();
        for k in 0..40 {
            let eta = Complex64::new(-5.0 + 0.25 * k as f64, 0.0);
            let f = char_fn_f1(eta, &state, &spec, &p).unwrap();
            let j = Complex64::new(0.0, 1.0);
            let sig2 = 0.15 * 0.15;
            let gbm = (j * eta * (y + (p.r - 0.5 * sig2) * tau)
                - 0.5 * sig2 * eta * eta * tau)
                .exp();
            assert!((f - gbm).norm() < 1e-12, "eta {eta}: {f} vs {gbm}");
        }
    }

    #[test]
    fn f2_normalization_and_degenerate_case() {
        let p = sec51_params();
        let spec = OptionSpec::put(70.0, 1.0);
        let state = MarketState::bsm(0.0, 70.0, Regime::One);
        let one = char_fn_f2(Complex64::new(0.0, 0.0), &state, &spec, &p).unwrap();
        assert_abs_diff_eq!(one.re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(one.im, 0.0, epsilon = 1e-10);

        // Hermitian symmetry
        let f = char_fn_f2(Complex64::new(1.7, 0.0), &state, &spec, &p).unwrap();
        let fneg = char_fn_f2(Complex64::new(-1.7, 0.0), &state, &spec, &p).unwrap();
        assert_abs_diff_eq!(f.re, fneg.re, epsilon = 1e-12);
        assert_abs_diff_eq!(f.im, -fneg.im, epsilon = 1e-12);

        // degenerate case: GBM char fn with drift shifted to r + sigma^2/2
        let d = degenerate_params(0.15);
        let tau = 1.0;
        let y = 70.0f64.ln();
        for k in 0..20 {
            let eta = Complex64::new(0.3 * k as f64, 0.0);
            let f = char_fn_f2(eta, &state, &spec, &d).unwrap();
            let j = Complex64::new(0.0, 1.0);
            let sig2 = 0.15 * 0.15;
            let gbm = (j * eta * (y + (d.r + 0.5 * sig2) * tau)
                - 0.5 * sig2 * eta * eta * tau)
                .exp();
            assert!((f - gbm).norm() < 1e-10, "eta {eta}: {f} vs {gbm}");
        }
    }

    #[test]
    fn prob_below_degenerate_matches_normal_cdf() {
        let d = degenerate_params(0.15);
        let spec = OptionSpec::put(70.0, 1.0);
        let state = MarketState::bsm(0.0, 80.0, Regime::One);
        let quad_cfg = QuadratureConfig::default();
        let eta_max = quad_cfg.derived_eta_max(0.15, 1.0);
        let p = prob_below(
            |eta| char_fn_f1(Complex64::new(eta, 0.0), &state, &spec, &d).unwrap(),
            70.0,
            eta_max,
            quad_cfg.tol,
        )
        .unwrap();
        let norm = Normal::new(0.0, 1.0).unwrap();
        let d2 = ((80.0f64 / 70.0).ln() + (0.02 - 0.5 * 0.0225)) / 0.15;
        assert_abs_diff_eq!(p, norm.cdf(-d2), epsilon = 1e-8);
    }

    #[test]
    fn prob_below_cdf_limits_and_monotonicity() {
        let d = degenerate_params(0.25);
        let spec = OptionSpec::put(70.0, 1.0);
        let state = MarketState::bsm(0.0, 70.0, Regime::One);
        let quad_cfg = QuadratureConfig::default();
        let eta_max = quad_cfg.derived_eta_max(0.25, 1.0);
        let cf = |eta: f64| char_fn_f1(Complex64::new(eta, 0.0), &state, &spec, &d).unwrap();

        let low = prob_below(cf, 70.0 * 1e-6, eta_max, quad_cfg.tol).unwrap();
        assert!(low.abs() < 1e-6, "P(S <= ~0) = {low}");
        let high = prob_below(cf, 70.0 * 1e6, eta_max, quad_cfg.tol).unwrap();
        assert!((high - 1.0).abs() < 1e-6, "P(S <= inf) = {high}");

        let mut prev = -1.0;
        for k in 0..50 {
            let strike = 20.0 + 3.0 * k as f64;
            let p = prob_below(cf, strike, eta_max, quad_cfg.tol).unwrap();
            assert!(p >= prev - 1e-9, "CDF not monotone at strike {strike}");
            prev = p;
        }
    }

    #[test]
    fn put_price_degenerate_matches_closed_form() {
        let d = degenerate_params(0.15);
        let spec = OptionSpec::put(70.0, 1.0);
        let quad_cfg = QuadratureConfig::default();
        for &s in &[50.0, 70.0, 90.0] {
            let state = MarketState::bsm(0.0, s, Regime::One);
            let cf = put_price_cf(&state, &spec, &d, &quad_cfg).unwrap().value;
            let bs = bs_put_closed_form(s, 70.0, 0.02, 0.15, 1.0);
            assert_abs_diff_eq!(cf, bs, epsilon = 1e-6);
        }
    }

    #[test]
    fn put_price_regime_ordering_and_far_field() {
        // Section 5.1-style parameters: the high-volatility regime is worth more
        let p = sec51_params();
        let spec = OptionSpec::put(70.0, 1.0);
        let quad_cfg = QuadratureConfig::default();
        let mut s = 30.0;
        while s <= 110.0 {
            let v1 = put_price_cf(&MarketState::bsm(0.0, s, Regime::One), &spec, &p, &quad_cfg)
                .unwrap()
                .value;
            let v2 = put_price_cf(&MarketState::bsm(0.0, s, Regime::Two), &spec, &p, &quad_cfg)
                .unwrap()
                .value;
            assert!(v2 >= v1 - 1e-8, "regime ordering violated at S = {s}");
            s += 5.0;
        }
        let far = put_price_cf(
            &MarketState::bsm(0.0, 1000.0, Regime::Two),
            &spec,
            &p,
            &quad_cfg,
        )
        .unwrap()
        .value;
        assert!(far < 1e-4, "price does not vanish for large S: {far}");
    }

    #[test]
    fn put_price_relabel_symmetry() {
        let p = sec51_params();
        let swapped = BsmRsParams {
            r: p.r,
            sigma: [p.sigma[1], p.sigma[0]],
            lambda12: p.lambda21,
            lambda21: p.lambda12,
        };
        let spec = OptionSpec::put(70.0, 1.0);
        let quad_cfg = QuadratureConfig::default();
        for &s in &[40.0, 70.0, 100.0] {
            let v1 = put_price_cf(&MarketState::bsm(0.0, s, Regime::One), &spec, &p, &quad_cfg)
                .unwrap()
                .value;
            let v1_swapped = put_price_cf(
                &MarketState::bsm(0.0, s, Regime::Two),
                &spec,
                &swapped,
                &quad_cfg,
            )
            .unwrap()
            .value;
            assert_abs_diff_eq!(v1, v1_swapped, epsilon = 1e-9);
        }
    }

    #[test]
    fn put_price_at_maturity_is_payoff() {
        let p = sec51_params();
        let spec = OptionSpec::put(70.0, 1.0);
        let state = MarketState::bsm(1.0, 55.0, Regime::One);
        let v = put_price_cf(&state, &spec, &p, &QuadratureConfig::default()).unwrap();
        assert_eq!(v.value, 15.0);
    }
}
