//! The PIRL residual network mapping (t, T, state, parameters) to the
//! regime-price pair (V1, V2).
//!
//! Layer structure: the first hidden layer is a plain affine + activation;
//! every later hidden layer is residual, with the raw input concatenated
//! into its affine input; the output layer is affine with identity
//! activation. Residual additions require a uniform hidden width.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hidden activation. tanh is C-infinity, which the second-derivative
/// physics losses require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetArchitecture {
    pub input_dim: usize,
    /// Number of hidden layers (>= 2).
    pub hidden_layers: usize,
    /// Uniform hidden width.
    pub hidden_width: usize,
    /// Always 2: one price per regime.
    pub output_dim: usize,
    pub activation: Activation,
}

impl NetArchitecture {
    pub fn new(input_dim: usize, hidden_layers: usize, hidden_width: usize) -> NetArchitecture {
        assert!(input_dim >= 3);
        assert!(hidden_layers >= 2);
        assert!(hidden_width >= 1);
        NetArchitecture {
            input_dim,
            hidden_layers,
            hidden_width,
            output_dim: 2,
            activation: Activation::Tanh,
        }
    }

    /// (rows, cols) of each weight matrix in layer order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let d = self.input_dim;
        let n = self.hidden_width;
        let mut shapes = vec![(n, d)];
        for _ in 1..self.hidden_layers {
            shapes.push((n, n + d));
        }
        shapes.push((self.output_dim, n));
        shapes
    }

    /// Total trainable parameter count:
    /// n d + n + (H - 1)(n (n + d) + n) + k n + k.
    pub fn param_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|&(rows, cols)| rows * cols + rows)
            .sum()
    }
}

/// One affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// All trainable weights and biases, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub layers: Vec<Layer>,
}

impl NetParams {
    pub fn zeros(arch: &NetArchitecture) -> NetParams {
        NetParams {
            layers: arch
                .layer_shapes()
                .into_iter()
                .map(|(rows, cols)| Layer {
                    w: Array2::zeros((rows, cols)),
                    b: Array1::zeros(rows),
                })
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flatten into one vector (weights row-major, then bias, per layer).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.w.iter());
            out.extend(layer.b.iter());
        }
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.w.iter_mut() {
                *w = flat[offset];
                offset += 1;
            }
            for b in layer.b.iter_mut() {
                *b = flat[offset];
                offset += 1;
            }
        }
    }

    pub fn from_flat(arch: &NetArchitecture, flat: &[f64]) -> NetParams {
        let mut params = NetParams::zeros(arch);
        params.assign_from_flat(flat);
        params
    }
}

/// Per-coordinate affine map of the physical inputs onto [-1, 1], stored
/// with the model and inverted on derivatives by the chain rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Normalization {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Normalization {
        assert_eq!(lo.len(), hi.len());
        for (l, h) in lo.iter().zip(&hi) {
            assert!(h > l, "degenerate normalization range [{l}, {h}]");
        }
        Normalization { lo, hi }
    }

    /// d(normalized)/d(physical) of coordinate j.
    #[inline]
    pub fn scale(&self, j: usize) -> f64 {
        2.0 / (self.hi[j] - self.lo[j])
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.lo.len());
        x.iter()
            .enumerate()
            .map(|(j, &xj)| (xj - self.lo[j]) * self.scale(j) - 1.0)
            .collect()
    }
}

/// Deterministic forward pass at one physical input point. Uses the same
/// matrix kernels as the batched jet engine so the two agree bitwise.
pub fn forward(
    arch: &NetArchitecture,
    params: &NetParams,
    norm: &Normalization,
    x: &[f64],
) -> [f64; 2] {
    debug_assert_eq!(x.len(), arch.input_dim);
    let act = arch.activation;
    let x0 = Array2::from_shape_vec((arch.input_dim, 1), norm.normalize(x)).expect("shape");
    let affine = |layer: &Layer, input: &Array2<f64>| -> Array2<f64> {
        let mut z = layer.w.dot(input);
        z += &layer.b.view().insert_axis(ndarray::Axis(1));
        z
    };

    let mut f = affine(&params.layers[0], &x0).mapv(|z| act.apply(z));
    for layer in &params.layers[1..arch.hidden_layers] {
        let u = ndarray::concatenate(ndarray::Axis(0), &[f.view(), x0.view()]).expect("shape");
        f += &affine(layer, &u).mapv(|z| act.apply(z));
    }
    let out = affine(&params.layers[arch.hidden_layers], &f);
    [out[[0, 0]], out[[1, 0]]]
}

/// Glorot-uniform weights, zero biases, reproducible by seed.
pub fn init_params(arch: &NetArchitecture, seed: u64) -> NetParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = arch
        .layer_shapes()
        .into_iter()
        .map(|(rows, cols)| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let w = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound));
            Layer {
                w,
                b: Array1::zeros(rows),
            }
        })
        .collect();
    NetParams { layers }
}
