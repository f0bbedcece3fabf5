//! Coupled 1-D Crank-Nicolson finite-difference solver for the
//! regime-switching Black-Scholes system: a third, independent oracle.
//!
//! The two regimes are advanced as one block-tridiagonal system per time
//! step (2x2 blocks, block Thomas algorithm) so the lambda coupling is
//! treated implicitly and stability does not depend on the rate magnitude.

use crate::core::{discounted_floor, put_payoff, BsmRsParams, OptionSpec, Regime};
use std::io::Write;

/// Uniform space-time grid for the solver.
#[derive(Debug, Clone, Copy)]
pub struct Grid1D {
    pub s_max: f64,
    pub n_space: usize,
    pub n_time: usize,
}

impl Grid1D {
    pub fn new(s_max: f64, n_space: usize, n_time: usize) -> Grid1D {
        assert!(n_space >= 50 && n_time >= 50, "grid too coarse");
        Grid1D {
            s_max,
            n_space,
            n_time,
        }
    }

    /// Default grid: S_max = 4E.
    pub fn for_spec(spec: &OptionSpec, n_space: usize, n_time: usize) -> Grid1D {
        Grid1D::new(4.0 * spec.strike, n_space, n_time)
    }
}

/// Price surfaces V_i(S, t) on the grid, with a bilinear interpolation
/// accessor. Time levels run from maturity (tau = 0) back to t = 0.
#[derive(Debug, Clone)]
pub struct FdSurface {
    pub grid: Grid1D,
    pub maturity: f64,
    /// values[m][j] = (V_1, V_2) at tau = m * dt, S = j * h.
    pub values: Vec<Vec<[f64; 2]>>,
}

impl FdSurface {
    pub fn value(&self, s: f64, t: f64, regime: Regime) -> f64 {
        let tau = (self.maturity - t).clamp(0.0, self.maturity);
        let h = self.grid.s_max / self.grid.n_space as f64;
        let dt = self.maturity / self.grid.n_time as f64;
        let x = (s / h).clamp(0.0, self.grid.n_space as f64);
        let y = (tau / dt).clamp(0.0, self.grid.n_time as f64);
        let j0 = (x.floor() as usize).min(self.grid.n_space - 1);
        let m0 = (y.floor() as usize).min(self.grid.n_time - 1);
        let fx = x - j0 as f64;
        let fy = y - m0 as f64;
        let i = regime.idx();
        let v00 = self.values[m0][j0][i];
        let v01 = self.values[m0][j0 + 1][i];
        let v10 = self.values[m0 + 1][j0][i];
        let v11 = self.values[m0 + 1][j0 + 1][i];
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)
    }

    /// CSV export with header `S,t,V1,V2`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "S,t,V1,V2")?;
        let h = self.grid.s_max / self.grid.n_space as f64;
        let dt = self.maturity / self.grid.n_time as f64;
        for (m, row) in self.values.iter().enumerate() {
            let t = self.maturity - m as f64 * dt;
            for (j, v) in row.iter().enumerate() {
                writeln!(out, "{},{},{},{}", j as f64 * h, t, v[0], v[1])?;
            }
        }
        Ok(())
    }
}

type Mat2 = [[f64; 2]; 2];

fn mat2_inv(m: &Mat2) -> Mat2 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ]
}

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat2_vec(a: &Mat2, x: &[f64; 2]) -> [f64; 2] {
    [
        a[0][0] * x[0] + a[0][1] * x[1],
        a[1][0] * x[0] + a[1][1] * x[1],
    ]
}

/// Spatial operator coefficients per interior node and regime:
/// (lower, diag, upper) of
/// A V_i = sigma_i^2 S^2 V'' / 2 + r S V' - r V_i - lambda_ij (V_i - V_j).
struct Coefs {
    lower: Vec<[f64; 2]>,
    diag: Vec<[f64; 2]>,
    upper: Vec<[f64; 2]>,
    coupling: Mat2,
}

fn operator_coefs(params: &BsmRsParams, grid: &Grid1D) -> Coefs {
    let h = grid.s_max / grid.n_space as f64;
    let n = grid.n_space;
    let mut lower = vec![[0.0; 2]; n + 1];
    let mut diag = vec![[0.0; 2]; n + 1];
    let mut upper = vec![[0.0; 2]; n + 1];
    for j in 1..n {
        let s = j as f64 * h;
        for i in 0..2 {
            let sig2 = params.sigma[i] * params.sigma[i];
            let diff = 0.5 * sig2 * s * s / (h * h);
            let conv = 0.5 * params.r * s / h;
            lower[j][i] = diff - conv;
            diag[j][i] = -2.0 * diff - params.r;
            upper[j][i] = diff + conv;
        }
    }
    let coupling = [
        [-params.lambda12, params.lambda12],
        [params.lambda21, -params.lambda21],
    ];
    Coefs {
        lower,
        diag,
        upper,
        coupling,
    }
}

/// Apply the spatial operator to a full time level (boundaries included).
fn apply_operator(coefs: &Coefs, level: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = level.len() - 1;
    let mut out = vec![[0.0; 2]; n + 1];
    for j in 1..n {
        for i in 0..2 {
            out[j][i] = coefs.lower[j][i] * level[j - 1][i]
                + coefs.diag[j][i] * level[j][i]
                + coefs.upper[j][i] * level[j + 1][i]
                + coefs.coupling[i][0] * level[j][0]
                + coefs.coupling[i][1] * level[j][1];
        }
    }
    out
}

/// Solve (I - c A) u = rhs for the interior nodes by block Thomas, with
/// Dirichlet values `bc0` at j = 0 and 0 at j = n already folded into rhs
/// by the caller except for the implicit lower-boundary coupling, which is
/// handled here.
fn block_thomas(
    coefs: &Coefs,
    c: f64,
    rhs: &mut [[f64; 2]],
    bc0: [f64; 2],
    out: &mut [[f64; 2]],
) {
    let n = out.len() - 1; // space nodes 0..n
    // implicit boundary contribution at j = 1
    for i in 0..2 {
        rhs[1][i] += c * coefs.lower[1][i] * bc0[i];
    }
    // forward elimination over interior nodes 1..n-1
    let mut d_star: Vec<Mat2> = vec![[[0.0; 2]; 2]; n];
    let mut r_star: Vec<[f64; 2]> = vec![[0.0; 2]; n];
    for j in 1..n {
        let mut b: Mat2 = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                let id = if i == k { 1.0 } else { 0.0 };
                b[i][k] = id - c * (coefs.coupling[i][k] + if i == k { coefs.diag[j][i] } else { 0.0 });
            }
        }
        let mut r = rhs[j];
        if j > 1 {
            // subtract L_j * inv(B*_{j-1}) applied quantities
            let lower: Mat2 = [[-c * coefs.lower[j][0], 0.0], [0.0, -c * coefs.lower[j][1]]];
            let inv_prev = mat2_inv(&d_star[j - 1]);
            let upper_prev: Mat2 = [
                [-c * coefs.upper[j - 1][0], 0.0],
                [0.0, -c * coefs.upper[j - 1][1]],
            ];
            let l_inv = mat2_mul(&lower, &inv_prev);
            let corr = mat2_mul(&l_inv, &upper_prev);
            for i in 0..2 {
                for k in 0..2 {
                    b[i][k] -= corr[i][k];
                }
            }
            let lv = mat2_vec(&l_inv, &r_star[j - 1]);
            r = [r[0] - lv[0], r[1] - lv[1]];
        }
        d_star[j] = b;
        r_star[j] = r;
    }
    // back substitution
    out[0] = bc0;
    out[n] = [0.0, 0.0];
    for j in (1..n).rev() {
        let mut r = r_star[j];
        if j < n - 1 {
            let upper: Mat2 = [[-c * coefs.upper[j][0], 0.0], [0.0, -c * coefs.upper[j][1]]];
            let uv = mat2_vec(&upper, &out[j + 1]);
            r = [r[0] - uv[0], r[1] - uv[1]];
        }
        out[j] = mat2_vec(&mat2_inv(&d_star[j]), &r);
    }
}

/// Backward time-march of the coupled system with Crank-Nicolson and a
/// Rannacher start-up (two implicit-Euler half-steps) to damp oscillations
/// from the payoff kink.
pub fn solve_bsm_rs_fd(spec: &OptionSpec, params: &BsmRsParams, grid: &Grid1D) -> FdSurface {
    let n = grid.n_space;
    let m_steps = grid.n_time;
    let dt = spec.maturity / m_steps as f64;
    let h = grid.s_max / n as f64;
    let coefs = operator_coefs(params, grid);

    // terminal condition (imposed, not solved)
    let mut levels: Vec<Vec<[f64; 2]>> = Vec::with_capacity(m_steps + 1);
    let terminal: Vec<[f64; 2]> = (0..=n)
        .map(|j| {
            let p = put_payoff(j as f64 * h, spec.strike);
            [p, p]
        })
        .collect();
    levels.push(terminal);

    let bc_at = |tau: f64| {
        let v = discounted_floor(spec.strike, params.r, spec.maturity - tau, spec.maturity)
            .expect("tau in range");
        [v, v]
    };

    for m in 0..m_steps {
        let prev = levels[m].clone();
        let tau_new = (m + 1) as f64 * dt;
        let mut next = vec![[0.0; 2]; n + 1];
        if m == 0 {
            // Rannacher: two implicit-Euler half-steps
            let mut mid = vec![[0.0; 2]; n + 1];
            let half = 0.5 * dt;
            let mut rhs = prev.clone();
            block_thomas(&coefs, half, &mut rhs, bc_at(half), &mut mid);
            let mut rhs = mid.clone();
            block_thomas(&coefs, half, &mut rhs, bc_at(dt), &mut next);
        } else {
            let c = 0.5 * dt;
            let a_prev = apply_operator(&coefs, &prev);
            let mut rhs: Vec<[f64; 2]> = (0..=n)
                .map(|j| {
                    [
                        prev[j][0] + c * a_prev[j][0],
                        prev[j][1] + c * a_prev[j][1],
                    ]
                })
                .collect();
            // the explicit boundary contribution is already inside a_prev;
            // block_thomas folds in the implicit one
            block_thomas(&coefs, c, &mut rhs, bc_at(tau_new), &mut next);
        }
        levels.push(next);
    }

    FdSurface {
        grid: *grid,
        maturity: spec.maturity,
        values: levels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf_pricer::{put_price_cf, QuadratureConfig};
    use crate::core::{bs_put_closed_form, MarketState};

    fn sec51_params() -> BsmRsParams {
        BsmRsParams {
            r: 0.02,
            sigma: [0.15, 0.35],
            lambda12: 2.0,
            lambda21: 1.0,
        }
    }

    #[test]
    fn degenerate_matches_closed_form() {
        let params = BsmRsParams {
            r: 0.02,
            sigma: [0.15, 0.15],
            lambda12: 0.0,
            lambda21: 0.0,
        };
        let spec = OptionSpec::put(70.0, 1.0);
        let grid = Grid1D::for_spec(&spec, 400, 400);
        let surface = solve_bsm_rs_fd(&spec, &params, &grid);
        for &s in &[50.0, 70.0, 90.0] {
            let truth = bs_put_closed_form(s, 70.0, 0.02, 0.15, 1.0);
            let fd = surface.value(s, 0.0, Regime::One);
            assert!(
                (fd - truth).abs() < 1e-3,
                "S = {s}: FD {fd} vs closed form {truth}"
            );
        }
    }

    #[test]
    fn terminal_slice_is_exact_payoff() {
        let spec = OptionSpec::put(70.0, 1.0);
        let grid = Grid1D::for_spec(&spec, 100, 100);
        let surface = solve_bsm_rs_fd(&spec, &sec51_params(), &grid);
        let h = grid.s_max / grid.n_space as f64;
        for j in 0..=grid.n_space {
            let s = j as f64 * h;
            assert_eq!(surface.values[0][j][0], put_payoff(s, 70.0));
        }
    }

    #[test]
    fn matches_cf_oracle_on_moderate_grid() {
        let spec = OptionSpec::put(70.0, 1.0);
        let params = sec51_params();
        let grid = Grid1D::for_spec(&spec, 400, 400);
        let surface = solve_bsm_rs_fd(&spec, &params, &grid);
        for regime in [Regime::One, Regime::Two] {
            let cf = put_price_cf(
                &MarketState::bsm(0.0, 70.0, regime),
                &spec,
                &params,
                &QuadratureConfig::default(),
            )
            .unwrap()
            .value;
            let fd = surface.value(70.0, 0.0, regime);
            assert!(
                (fd - cf).abs() < 3e-3,
                "regime {:?}: FD {fd} vs CF {cf}",
                regime
            );
        }
    }

    #[test]
    fn discrete_maximum_principle() {
        let spec = OptionSpec::put(70.0, 1.0);
        let params = sec51_params();
        let grid = Grid1D::for_spec(&spec, 200, 200);
        let surface = solve_bsm_rs_fd(&spec, &params, &grid);
        let cap = 70.0 + 1e-6;
        for level in &surface.values {
            for v in level {
                for i in 0..2 {
                    assert!(v[i] >= -1e-9 && v[i] <= cap, "out of range: {}", v[i]);
                }
            }
        }
    }

    #[test]
    fn grid_refinement_improves_accuracy() {
        let params = BsmRsParams {
            r: 0.02,
            sigma: [0.2, 0.2],
            lambda12: 0.0,
            lambda21: 0.0,
        };
        let spec = OptionSpec::put(70.0, 1.0);
        let truth = bs_put_closed_form(70.0, 70.0, 0.02, 0.2, 1.0);
        let coarse = solve_bsm_rs_fd(&spec, &params, &Grid1D::for_spec(&spec, 100, 100));
        let fine = solve_bsm_rs_fd(&spec, &params, &Grid1D::for_spec(&spec, 200, 200));
        let e_coarse = (coarse.value(70.0, 0.0, Regime::One) - truth).abs();
        let e_fine = (fine.value(70.0, 0.0, Regime::One) - truth).abs();
        assert!(
            e_coarse / e_fine >= 3.0,
            "refinement factor {} < 3 (coarse {e_coarse:.2e}, fine {e_fine:.2e})",
            e_coarse / e_fine
        );
    }

    #[test]
    fn regime_swap_symmetry() {
        let p = sec51_params();
        let swapped = BsmRsParams {
            r: p.r,
            sigma: [p.sigma[1], p.sigma[0]],
            lambda12: p.lambda21,
            lambda21: p.lambda12,
        };
        let spec = OptionSpec::put(70.0, 1.0);
        let grid = Grid1D::for_spec(&spec, 200, 200);
        let a = solve_bsm_rs_fd(&spec, &p, &grid);
        let b = solve_bsm_rs_fd(&spec, &swapped, &grid);
        for &s in &[40.0, 70.0, 100.0] {
            let v = a.value(s, 0.0, Regime::One);
            let v_swapped = b.value(s, 0.0, Regime::Two);
            assert!((v - v_swapped).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let spec = OptionSpec::put(70.0, 0.5);
        let grid = Grid1D::new(280.0, 50, 50);
        let surface = solve_bsm_rs_fd(&spec, &sec51_params(), &grid);
        let mut buf = Vec::new();
        surface.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("S,t,V1,V2"));
        assert_eq!(text.lines().count(), 1 + 51 * 51);
    }
}
