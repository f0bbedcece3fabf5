//! Exact network derivatives for the physics losses.
//!
//! The PDE residuals need first partials in t, S (and v), plus the second
//! partials V_SS (and V_vv, V_Sv), at thousands of collocation points per
//! cost evaluation. We propagate second-order jets through the network in
//! batch: every activation carries, besides its value, one slot per
//! requested direction (first partial) and one slot per requested pair
//! (second partial). All slots pass through the same affine maps as the
//! values, so each layer is a handful of dense matrix products.
//!
//! Training additionally needs d(cost)/d(theta). The cost is a function of
//! the output values and output slots, so we backpropagate adjoints through
//! the recorded jet computation, including the nonlinear slot rules of tanh.
//!
//! Derivative seeds are scaled by the input normalization, so all reported
//! partials are with respect to the *physical* coordinates.

use crate::net::{Layer, NetArchitecture, NetParams, Normalization};
use ndarray::{Array2, Axis};

/// Which partials to carry. `dirs` are input-coordinate indices; `pairs`
/// index into `dirs` (so a pair `(1, 1)` means the second partial in the
/// direction listed at position 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetLayout {
    pub dirs: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
}

impl JetLayout {
    /// BSM-RS input (t, T, S, r, sigma1, sigma2): carry d_t, d_S, d_SS.
    pub fn bsm() -> JetLayout {
        JetLayout {
            dirs: vec![0, 2],
            pairs: vec![(1, 1)],
        }
    }

    /// Heston-RS input (t, T, S, v, r, kappa, gamma, sigma1, sigma2):
    /// carry d_t, d_S, d_v, d_SS, d_vv, d_Sv.
    pub fn heston() -> JetLayout {
        JetLayout {
            dirs: vec![0, 2, 3],
            pairs: vec![(1, 1), (2, 2), (1, 2)],
        }
    }

    /// Total slot channels excluding the value channel.
    pub fn n_slots(&self) -> usize {
        self.dirs.len() + self.pairs.len()
    }
}

/// Values and derivative slots of the network outputs over a batch.
/// `value` is `2 x B`; `slots[p]` is `2 x B`, ordered directions first,
/// then pairs, matching the [`JetLayout`].
#[derive(Debug, Clone)]
pub struct JetBatch {
    pub value: Array2<f64>,
    pub slots: Vec<Array2<f64>>,
}

impl JetBatch {
    pub fn zeros_like(other: &JetBatch) -> JetBatch {
        JetBatch {
            value: Array2::zeros(other.value.raw_dim()),
            slots: other
                .slots
                .iter()
                .map(|s| Array2::zeros(s.raw_dim()))
                .collect(),
        }
    }
}

/// One channel-set: the value matrix followed by the slot matrices.
type Channels = Vec<Array2<f64>>;

struct LayerRecord {
    /// Input channels of this layer's affine map.
    u: Channels,
    /// Pre-activation channels (for the output layer these are the outputs).
    z: Channels,
    /// tanh of the value channel; empty for the output layer.
    a: Array2<f64>,
}

/// Everything `backward_params` needs, recorded during `forward_jets`.
pub struct JetTape {
    layers: Vec<LayerRecord>,
}

fn affine(layer: &Layer, u: &Channels) -> Channels {
    let mut z: Channels = u.iter().map(|uc| layer.w.dot(uc)).collect();
    let b = layer.b.view().insert_axis(Axis(1));
    z[0] += &b;
    z
}

/// Jet rules of elementwise tanh:
///   a    = tanh(z),  s = 1 - a^2
///   a_p  = s z_p
///   a_pq = s z_pq + c z_p z_q,  c = -2 a s
fn tanh_jet(layout: &JetLayout, z: &Channels) -> (Array2<f64>, Channels) {
    let nd = layout.dirs.len();
    let a = z[0].mapv(f64::tanh);
    let s = a.mapv(|x| 1.0 - x * x);
    let c = -2.0 * &a * &s;
    let mut out: Channels = Vec::with_capacity(z.len());
    out.push(a.clone());
    for p in 0..nd {
        out.push(&s * &z[1 + p]);
    }
    for (k, &(p, q)) in layout.pairs.iter().enumerate() {
        out.push(&s * &z[1 + nd + k] + &c * &z[1 + p] * &z[1 + q]);
    }
    (a, out)
}

/// Adjoint of `tanh_jet`: given `abar` (adjoints of the activation
/// channels), the recorded `z` channels and `a`, produce `zbar`.
fn tanh_jet_backward(layout: &JetLayout, z: &Channels, a: &Array2<f64>, abar: &Channels) -> Channels {
    let nd = layout.dirs.len();
    let s = a.mapv(|x| 1.0 - x * x);
    let c = -2.0 * a * &s;
    // ds/dz and dc/dz, both expressed through a
    let sp = &c;
    let cp = a.mapv(|x| 6.0 * x * x - 2.0) * &s;

    let mut zbar: Channels = z.iter().map(|m| Array2::zeros(m.raw_dim())).collect();
    // value channel: direct path through a, plus s- and c-sensitivities
    zbar[0] = &abar[0] * &s;
    for p in 0..nd {
        zbar[0] += &(&abar[1 + p] * &z[1 + p] * sp);
        zbar[1 + p] += &(&abar[1 + p] * &s);
    }
    for (k, &(p, q)) in layout.pairs.iter().enumerate() {
        let ak = &abar[1 + nd + k];
        zbar[0] += &(ak * &(&z[1 + nd + k] * sp + &z[1 + p] * &z[1 + q] * &cp));
        zbar[1 + nd + k] += &(ak * &s);
        zbar[1 + p] += &(ak * &c * &z[1 + q]);
        zbar[1 + q] += &(ak * &c * &z[1 + p]);
    }
    zbar
}

fn stack_rows(top: &Array2<f64>, bottom: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(0), &[top.view(), bottom.view()]).expect("shape mismatch")
}

/// Build the normalized input channels for a physical batch (`d x B`).
fn input_channels(norm: &Normalization, layout: &JetLayout, x: &Array2<f64>) -> Channels {
    let (d, b) = x.dim();
    let mut x0 = Array2::zeros((d, b));
    for j in 0..d {
        let scale = norm.scale(j);
        let lo = norm.lo[j];
        for col in 0..b {
            x0[[j, col]] = (x[[j, col]] - lo) * scale - 1.0;
        }
    }
    let mut channels: Channels = vec![x0];
    for &coord in &layout.dirs {
        let mut seed = Array2::zeros((d, b));
        seed.row_mut(coord).fill(norm.scale(coord));
        channels.push(seed);
    }
    // the normalization is affine, so all second-derivative seeds vanish
    for _ in &layout.pairs {
        channels.push(Array2::zeros((d, b)));
    }
    channels
}

/// Forward pass with derivative propagation over a `d x B` physical batch.
/// Returns the outputs (values plus physical partials) and the tape for
/// [`backward_params`].
pub fn forward_jets(
    arch: &NetArchitecture,
    params: &NetParams,
    norm: &Normalization,
    layout: &JetLayout,
    x: &Array2<f64>,
) -> (JetBatch, JetTape) {
    assert_eq!(x.nrows(), arch.input_dim);
    let x0 = input_channels(norm, layout, x);
    let mut records = Vec::with_capacity(arch.hidden_layers + 1);

    let z = affine(&params.layers[0], &x0);
    let (a, mut f) = tanh_jet(layout, &z);
    records.push(LayerRecord { u: x0.clone(), z, a });

    for layer in &params.layers[1..arch.hidden_layers] {
        let u: Channels = f
            .iter()
            .zip(&x0)
            .map(|(fc, xc)| stack_rows(fc, xc))
            .collect();
        let z = affine(layer, &u);
        let (a, act) = tanh_jet(layout, &z);
        for (fc, ac) in f.iter_mut().zip(&act) {
            *fc += ac;
        }
        records.push(LayerRecord { u, z, a });
    }

    let z_out = affine(&params.layers[arch.hidden_layers], &f);
    let out = JetBatch {
        value: z_out[0].clone(),
        slots: z_out[1..].to_vec(),
    };
    records.push(LayerRecord {
        u: f,
        z: z_out,
        a: Array2::zeros((0, 0)),
    });
    (out, JetTape { layers: records })
}

/// Reverse pass: given adjoints of the output values and slots, accumulate
/// the gradient of the implied scalar with respect to every parameter.
/// Returns the gradient flattened in [`NetParams::to_flat`] order.
pub fn backward_params(
    arch: &NetArchitecture,
    params: &NetParams,
    layout: &JetLayout,
    tape: &JetTape,
    out_adjoint: &JetBatch,
) -> Vec<f64> {
    let h = arch.hidden_layers;
    let n = arch.hidden_width;
    let mut grad = NetParams::zeros(arch);

    // output layer: identity activation, zbar = output adjoint
    let mut zbar: Channels = Vec::with_capacity(1 + layout.n_slots());
    zbar.push(out_adjoint.value.clone());
    zbar.extend(out_adjoint.slots.iter().cloned());
    let rec = &tape.layers[h];
    accumulate(&mut grad.layers[h], &zbar, &rec.u);
    let mut fbar: Channels = zbar
        .iter()
        .map(|zc| params.layers[h].w.t().dot(zc))
        .collect();

    for l in (1..h).rev() {
        let rec = &tape.layers[l];
        // skip connection: the adjoint of f_l reaches both the activation
        // and, unchanged, f_{l-1}
        let zb = tanh_jet_backward(layout, &rec.z, &rec.a, &fbar);
        accumulate(&mut grad.layers[l], &zb, &rec.u);
        for (fc, zc) in fbar.iter_mut().zip(&zb) {
            let ubar = params.layers[l].w.t().dot(zc);
            *fc += &ubar.slice(ndarray::s![..n, ..]);
            // rows n.. are the x0 adjoint, which no parameter depends on
        }
    }

    let rec = &tape.layers[0];
    let zb = tanh_jet_backward(layout, &rec.z, &rec.a, &fbar);
    accumulate(&mut grad.layers[0], &zb, &rec.u);

    grad.to_flat()
}

fn accumulate(grad: &mut Layer, zbar: &Channels, u: &Channels) {
    for (zc, uc) in zbar.iter().zip(u) {
        grad.w += &zc.dot(&uc.t());
    }
    grad.b += &zbar[0].sum_axis(Axis(1));
}

/// Exact derivatives of both outputs at one input point, packaged for the
/// PDE residual functions. The layout must be [`JetLayout::bsm`] or
/// [`JetLayout::heston`]; the value slot equals `net::forward` bitwise.
pub fn input_jet(
    arch: &NetArchitecture,
    params: &NetParams,
    norm: &Normalization,
    layout: &JetLayout,
    x: &[f64],
) -> crate::pde::DerivBundle {
    let out = eval_jets_single(arch, params, norm, layout, x);
    let col = |m: &Array2<f64>| [m[[0, 0]], m[[1, 0]]];
    let heston = layout.dirs.len() == 3;
    crate::pde::DerivBundle {
        value: col(&out.value),
        d_t: col(&out.slots[0]),
        d_s: col(&out.slots[1]),
        d_ss: col(&out.slots[if heston { 3 } else { 2 }]),
        d_v: heston.then(|| col(&out.slots[2])),
        d_vv: heston.then(|| col(&out.slots[4])),
        d_sv: heston.then(|| col(&out.slots[5])),
    }
}

/// Single-point convenience wrapper used by the pricers and the CLI.
pub fn eval_jets_single(
    arch: &NetArchitecture,
    params: &NetParams,
    norm: &Normalization,
    layout: &JetLayout,
    x: &[f64],
) -> JetBatch {
    let xm = Array2::from_shape_vec((x.len(), 1), x.to_vec()).expect("shape");
    forward_jets(arch, params, norm, layout, &xm).0
}
