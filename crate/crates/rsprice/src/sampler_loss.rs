//! Training-set generation and the three-part physics-informed cost.
//!
//! The cost is C = C_A + C_T + C_low: mean squared PDE residual over inner
//! collocation points, mean squared payoff error on terminal points, and
//! mean squared discounted-strike error on the S = 0 boundary. Means, not
//! sums, so loss magnitudes are comparable across set sizes; the literal
//! sum convention is available behind [`Reduction::Sum`].

use crate::core::{discounted_floor, put_payoff, BsmRsParams, HestonRsParams};
use crate::deriv::{backward_params, forward_jets, JetBatch, JetLayout};
use crate::error::{PriceError, Result};
use crate::net::{NetArchitecture, NetParams, Normalization};
use crate::pde::{
    bsm_rs_residual, bsm_rs_residual_adjoint, heston_rs_residual, heston_rs_residual_adjoint,
    DerivBundle, ModelKind,
};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

/// Rows processed per jet batch; fixed so that cost and gradient are
/// bit-identical at any thread count (chunks are reduced in index order).
const CHUNK: usize = 256;

/// Closed sampling/normalization intervals with coordinate names.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSpec {
    pub names: Vec<&'static str>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl RangeSpec {
    /// Network-input coordinate ranges for BSM-RS: (t, T, S, r, sigma1,
    /// sigma2). The S range starts at 0 so the lower boundary normalizes
    /// to -1 rather than falling outside the box; sigma2's envelope is the
    /// union of its conditional ranges.
    pub fn bsm_inputs() -> RangeSpec {
        RangeSpec {
            names: vec!["t", "T", "S", "r", "sigma1", "sigma2"],
            lo: vec![0.0, 0.0, 0.0, 0.01, 0.10, 0.10],
            hi: vec![4.0, 4.0, 100.0, 0.025, 0.30, 0.40],
        }
    }

    /// Network-input coordinate ranges for Heston-RS:
    /// (t, T, S, v, r, kappa, gamma, sigma1, sigma2).
    pub fn heston_inputs() -> RangeSpec {
        RangeSpec {
            names: vec!["t", "T", "S", "v", "r", "kappa", "gamma", "sigma1", "sigma2"],
            lo: vec![0.0, 0.0, 0.0, 0.01, 0.015, 1.4, 0.01, 0.10, 0.35],
            hi: vec![4.0, 4.0, 100.0, 0.10, 0.025, 2.6, 0.10, 0.45, 0.75],
        }
    }

    pub fn normalization(&self) -> Normalization {
        Normalization::new(self.lo.clone(), self.hi.clone())
    }
}

/// The three collocation sets. Rows are stored in physical coordinates;
/// for Heston each row carries a trailing `rho` column that feeds the PDE
/// residual but is not a network input.
#[derive(Debug, Clone)]
pub struct SampleSets {
    pub model: ModelKind,
    pub names: Vec<&'static str>,
    pub inner: Array2<f64>,
    pub terminal: Array2<f64>,
    pub lower: Array2<f64>,
}

impl SampleSets {
    /// Number of network-input coordinates per row.
    pub fn input_dim(&self) -> usize {
        match self.model {
            ModelKind::BsmRs => 6,
            ModelKind::HestonRs => 9,
        }
    }

    pub fn write_csv<W: Write>(&self, set: &Array2<f64>, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", self.names.join(","))?;
        for row in set.outer_iter() {
            let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn bsm_row(rng: &mut ChaCha8Rng, kind: SetKind) -> [f64; 6] {
    let big_t = rng.gen_range(0.0..4.0);
    let t = match kind {
        SetKind::Terminal => big_t,
        _ => big_t * rng.gen_range(0.0..1.0),
    };
    let s = match kind {
        SetKind::Lower => 0.0,
        _ => rng.gen_range(40.0..100.0),
    };
    let r = rng.gen_range(0.01..0.025);
    let sigma1 = rng.gen_range(0.10..0.30);
    let sigma2 = rng.gen_range(sigma1..0.40);
    [t, big_t, s, r, sigma1, sigma2]
}

fn heston_row(rng: &mut ChaCha8Rng, kind: SetKind) -> [f64; 10] {
    let big_t = rng.gen_range(0.0..4.0);
    let t = match kind {
        SetKind::Terminal => big_t,
        _ => big_t * rng.gen_range(0.0..1.0),
    };
    let s = match kind {
        SetKind::Lower => 0.0,
        _ => rng.gen_range(40.0..100.0),
    };
    let v = rng.gen_range(0.01..0.1);
    let r = rng.gen_range(0.015..0.025);
    let kappa = rng.gen_range(1.4..2.6);
    let gamma = rng.gen_range(0.01..0.1);
    let sigma1 = rng.gen_range(0.10..0.45);
    let sigma2 = rng.gen_range(0.35..0.75);
    let rho = rng.gen_range(-0.85..-0.55);
    [t, big_t, s, v, r, kappa, gamma, sigma1, sigma2, rho]
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SetKind {
    Inner,
    Terminal,
    Lower,
}

fn fill<const W: usize>(
    rng: &mut ChaCha8Rng,
    n: usize,
    kind: SetKind,
    row_fn: fn(&mut ChaCha8Rng, SetKind) -> [f64; W],
) -> Array2<f64> {
    let mut arr = Array2::zeros((n, W));
    for mut row in arr.outer_iter_mut() {
        let vals = row_fn(rng, kind);
        for (slot, v) in row.iter_mut().zip(vals) {
            *slot = v;
        }
    }
    arr
}

pub fn sample_bsm_sized(seed: u64, n_a: usize, n_t: usize, n_low: usize) -> SampleSets {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SampleSets {
        model: ModelKind::BsmRs,
        names: RangeSpec::bsm_inputs().names,
        inner: fill(&mut rng, n_a, SetKind::Inner, bsm_row),
        terminal: fill(&mut rng, n_t, SetKind::Terminal, bsm_row),
        lower: fill(&mut rng, n_low, SetKind::Lower, bsm_row),
    }
}

/// Full-size BSM training set: N_A = 20000, N_T = 5000, N_low = 5000.
pub fn sample_bsm(seed: u64) -> SampleSets {
    sample_bsm_sized(seed, 20000, 5000, 5000)
}

pub fn sample_heston_sized(seed: u64, n_a: usize, n_t: usize, n_low: usize) -> SampleSets {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = RangeSpec::heston_inputs().names;
    names.push("rho");
    SampleSets {
        model: ModelKind::HestonRs,
        names,
        inner: fill(&mut rng, n_a, SetKind::Inner, heston_row),
        terminal: fill(&mut rng, n_t, SetKind::Terminal, heston_row),
        lower: fill(&mut rng, n_low, SetKind::Lower, heston_row),
    }
}

/// Full-size Heston training set: N_A = 30000, N_T = 10000, N_low = 10000.
pub fn sample_heston(seed: u64) -> SampleSets {
    sample_heston_sized(seed, 30000, 10000, 10000)
}

/// Mean (default) vs the paper-literal sum over set rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

/// What is being trained: the model family, the fixed strike, the fixed
/// transition rates, and the component weights (ablation only; default 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingProblem {
    pub model: ModelKind,
    pub strike: f64,
    pub lambda12: f64,
    pub lambda21: f64,
    pub weights: [f64; 3],
    pub reduction: Reduction,
}

impl TrainingProblem {
    pub fn bsm(strike: f64) -> TrainingProblem {
        TrainingProblem {
            model: ModelKind::BsmRs,
            strike,
            lambda12: 2.0,
            lambda21: 1.0,
            weights: [1.0; 3],
            reduction: Reduction::Mean,
        }
    }

    pub fn heston(strike: f64) -> TrainingProblem {
        TrainingProblem {
            model: ModelKind::HestonRs,
            strike,
            lambda12: 2.0,
            lambda21: 3.0,
            weights: [1.0; 3],
            reduction: Reduction::Mean,
        }
    }

    fn layout(&self) -> JetLayout {
        match self.model {
            ModelKind::BsmRs => JetLayout::bsm(),
            ModelKind::HestonRs => JetLayout::heston(),
        }
    }
}

/// The three cost components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms {
    pub total: f64,
    pub inner: f64,
    pub terminal: f64,
    pub lower: f64,
}

fn bundle_from_column(layout: &JetLayout, out: &JetBatch, col: usize) -> DerivBundle {
    let get = |m: &Array2<f64>| [m[[0, col]], m[[1, col]]];
    let heston = layout.dirs.len() == 3;
    DerivBundle {
        value: get(&out.value),
        d_t: get(&out.slots[0]),
        d_s: get(&out.slots[1]),
        d_ss: get(&out.slots[if heston { 3 } else { 2 }]),
        d_v: heston.then(|| get(&out.slots[2])),
        d_vv: heston.then(|| get(&out.slots[4])),
        d_sv: heston.then(|| get(&out.slots[5])),
    }
}

fn bundle_into_adjoint(layout: &JetLayout, adj: &DerivBundle, out: &mut JetBatch, col: usize) {
    let heston = layout.dirs.len() == 3;
    for i in 0..2 {
        out.value[[i, col]] = adj.value[i];
        out.slots[0][[i, col]] = adj.d_t[i];
        out.slots[1][[i, col]] = adj.d_s[i];
        out.slots[if heston { 3 } else { 2 }][[i, col]] = adj.d_ss[i];
        if heston {
            out.slots[2][[i, col]] = adj.d_v.unwrap()[i];
            out.slots[4][[i, col]] = adj.d_vv.unwrap()[i];
            out.slots[5][[i, col]] = adj.d_sv.unwrap()[i];
        }
    }
}

/// Per-chunk evaluation: sum of squared errors plus, when requested, the
/// parameter gradient of that (unnormalized) sum.
fn eval_chunk(
    arch: &NetArchitecture,
    params: &NetParams,
    norm: &Normalization,
    problem: &TrainingProblem,
    kind: SetKind,
    rows: &ndarray::ArrayView2<f64>,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let d = arch.input_dim;
    let b = rows.nrows();
    // network inputs, transposed to d x B (rho column excluded for Heston)
    let x = rows.slice(ndarray::s![.., ..d]).t().to_owned();
    let layout = match kind {
        SetKind::Inner => problem.layout(),
        _ => JetLayout {
            dirs: vec![],
            pairs: vec![],
        },
    };
    let (out, tape) = forward_jets(arch, params, norm, &layout, &x);
    let mut sse = 0.0;
    let mut adjoint = want_grad.then(|| JetBatch::zeros_like(&out));

    for col in 0..b {
        let row = rows.row(col);
        match kind {
            SetKind::Inner => {
                let bundle = bundle_from_column(&layout, &out, col);
                let s = row[2];
                let (res, adj) = match problem.model {
                    ModelKind::BsmRs => {
                        let p = BsmRsParams {
                            r: row[3],
                            sigma: [row[4], row[5]],
                            lambda12: problem.lambda12,
                            lambda21: problem.lambda21,
                        };
                        let res = bsm_rs_residual(&bundle, s, &p);
                        let adj = want_grad.then(|| {
                            bsm_rs_residual_adjoint([2.0 * res[0], 2.0 * res[1]], s, &p)
                        });
                        (res, adj)
                    }
                    ModelKind::HestonRs => {
                        let p = HestonRsParams {
                            r: row[4],
                            kappa: row[5],
                            gamma: row[6],
                            rho: row[9],
                            sigma: [row[7], row[8]],
                            lambda12: problem.lambda12,
                            lambda21: problem.lambda21,
                        };
                        let v = row[3];
                        let res = heston_rs_residual(&bundle, s, v, &p);
                        let adj = want_grad.then(|| {
                            heston_rs_residual_adjoint([2.0 * res[0], 2.0 * res[1]], s, v, &p)
                        });
                        (res, adj)
                    }
                };
                sse += res[0] * res[0] + res[1] * res[1];
                if let (Some(out_adj), Some(adj)) = (adjoint.as_mut(), adj) {
                    bundle_into_adjoint(&layout, &adj, out_adj, col);
                }
            }
            SetKind::Terminal | SetKind::Lower => {
                let (t, big_t, s) = (row[0], row[1], row[2]);
                let r = match problem.model {
                    ModelKind::BsmRs => row[3],
                    ModelKind::HestonRs => row[4],
                };
                let target = match kind {
                    SetKind::Terminal => put_payoff(s, problem.strike),
                    _ => discounted_floor(problem.strike, r, t, big_t)?,
                };
                for i in 0..2 {
                    let err = out.value[[i, col]] - target;
                    sse += err * err;
                    if let Some(out_adj) = adjoint.as_mut() {
                        out_adj.value[[i, col]] = 2.0 * err;
                    }
                }
            }
        }
    }

    let grad = match adjoint {
        Some(adj) => Some(backward_params(arch, params, &layout, &tape, &adj)),
        None => None,
    };
    Ok((sse, grad))
}

fn eval_set(
    arch: &NetArchitecture,
    params: &NetParams,
    norm: &Normalization,
    problem: &TrainingProblem,
    kind: SetKind,
    rows: &Array2<f64>,
    want_grad: bool,
    grad_acc: Option<&mut [f64]>,
) -> Result<f64> {
    let chunks: Vec<_> = rows.axis_chunks_iter(Axis(0), CHUNK).collect();
    let results: Vec<Result<(f64, Option<Vec<f64>>)>> = chunks
        .par_iter()
        .map(|chunk| eval_chunk(arch, params, norm, problem, kind, chunk, want_grad))
        .collect();

    let scale = match problem.reduction {
        Reduction::Mean => 1.0 / rows.nrows().max(1) as f64,
        Reduction::Sum => 1.0,
    };
    let mut sse = 0.0;
    let mut acc = grad_acc;
    for res in results {
        let (chunk_sse, chunk_grad) = res?;
        sse += chunk_sse;
        if let (Some(acc), Some(g)) = (acc.as_deref_mut(), chunk_grad) {
            let weight = scale
                * match kind {
                    SetKind::Inner => problem.weights[0],
                    SetKind::Terminal => problem.weights[1],
                    SetKind::Lower => problem.weights[2],
                };
            for (a, gi) in acc.iter_mut().zip(g) {
                *a += weight * gi;
            }
        }
    }
    Ok(sse * scale)
}

/// The weighted physics-informed cost over all three sample sets.
pub fn cost(
    arch: &NetArchitecture,
    params: &NetParams,
    norm: &Normalization,
    sets: &SampleSets,
    problem: &TrainingProblem,
) -> Result<CostTerms> {
    cost_impl(arch, params, norm, sets, problem, None)
}

/// Cost plus its exact gradient in [`NetParams::to_flat`] order.
pub fn cost_and_grad(
    arch: &NetArchitecture,
    params: &NetParams,
    norm: &Normalization,
    sets: &SampleSets,
    problem: &TrainingProblem,
) -> Result<(CostTerms, Vec<f64>)> {
    let mut grad = vec![0.0; arch.param_count()];
    let terms = cost_impl(arch, params, norm, sets, problem, Some(&mut grad))?;
    Ok((terms, grad))
}

fn cost_impl(
    arch: &NetArchitecture,
    params: &NetParams,
    norm: &Normalization,
    sets: &SampleSets,
    problem: &TrainingProblem,
    mut grad: Option<&mut [f64]>,
) -> Result<CostTerms> {
    assert_eq!(arch.input_dim, sets.input_dim());
    let want = grad.is_some();
    let inner = eval_set(
        arch, params, norm, problem, SetKind::Inner, &sets.inner, want,
        grad.as_deref_mut(),
    )?;
    let terminal = eval_set(
        arch, params, norm, problem, SetKind::Terminal, &sets.terminal, want,
        grad.as_deref_mut(),
    )?;
    let lower = eval_set(
        arch, params, norm, problem, SetKind::Lower, &sets.lower, want,
        grad.as_deref_mut(),
    )?;
    let total =
        problem.weights[0] * inner + problem.weights[1] * terminal + problem.weights[2] * lower;
    if !total.is_finite() {
        return Err(PriceError::Diverged(format!(
            "non-finite cost: inner = {inner}, terminal = {terminal}, lower = {lower}"
        )));
    }
    Ok(CostTerms {
        total,
        inner,
        terminal,
        lower,
    })
}
