use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::data::Batch;

pub const LAYERS: usize = 128;
pub const WIDTH: usize = 2;
pub const NET_STEP: f64 = 0.05;
pub const PARAM_COUNT: usize = 774;

/// Samples per gradient chunk. Fixed so that the reduction order, and hence
/// the result, does not depend on the thread count.
const CHUNK: usize = 32;

/// Time discretization of the residual network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Leapfrog on a `(Y, Z)` pair: `Z -= h tanh(K^T Y + b)`, then
    /// `Y += h tanh(K Z + b)`.
    Verlet,
    /// `Y += h tanh(K Y + b)`.
    Euler,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Verlet => "verlet",
            Scheme::Euler => "euler",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown scheme {0:?} (expected verlet or euler)")]
pub struct UnknownScheme(pub String);

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verlet" => Ok(Scheme::Verlet),
            "euler" => Ok(Scheme::Euler),
            _ => Err(UnknownScheme(s.into())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArchitectureError {
    #[error("architecture has {got} parameters, expected {expected}")]
    ParamCount { expected: usize, got: usize },
}

/// Shape of the network. The flat parameter vector is laid out as
///
/// | block       | size | contents                                  |
/// |-------------|------|-------------------------------------------|
/// | opening     | 3    | `w` (2), `c`: lifts `x` to `w.x + c`      |
/// | layer `j`   | 6    | `K_j` (2x2, row-major), `b_j` (2)         |
/// | readout     | 3    | `r` (2), `r0`: logit `r.Y + r0`           |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: usize,
    pub step: f64,
    pub scheme: Scheme,
}

impl Architecture {
    /// 128 layers with step 0.05: exactly [`PARAM_COUNT`] parameters.
    pub fn standard(scheme: Scheme) -> Self {
        let arch = Self {
            layers: LAYERS,
            step: NET_STEP,
            scheme,
        };
        arch.expect_count(PARAM_COUNT).expect("standard layout");
        arch
    }

    pub fn param_count(&self) -> usize {
        3 + 6 * self.layers + 3
    }

    pub fn expect_count(&self, expected: usize) -> Result<(), ArchitectureError> {
        let got = self.param_count();
        if got == expected {
            Ok(())
        } else {
            Err(ArchitectureError::ParamCount { expected, got })
        }
    }

    /// `(block name, offset, length)` for every parameter block.
    pub fn layout(&self) -> Vec<(String, usize, usize)> {
        let mut blocks = vec![("w".to_string(), 0, 2), ("c".to_string(), 2, 1)];
        for j in 0..self.layers {
            blocks.push((format!("K{j}"), layer(j), 4));
            blocks.push((format!("b{j}"), layer(j) + 4, 2));
        }
        let r = self.readout();
        blocks.push(("r".into(), r, 2));
        blocks.push(("r0".into(), r + 2, 1));
        blocks
    }

    fn readout(&self) -> usize {
        layer(self.layers)
    }
}

fn layer(j: usize) -> usize {
    3 + 6 * j
}

/// Per-sample activations recorded by the forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    /// `Y_0 .. Y_L`.
    pub y: Vec<[f64; 2]>,
    /// `Z_0 .. Z_L` (Verlet only).
    pub z: Vec<[f64; 2]>,
    /// First and second `tanh` of each layer (the second is unused for Euler).
    pub t1: Vec<[f64; 2]>,
    pub t2: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerletNet {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

#[inline]
fn matvec(k: &[f64], v: [f64; 2], b: &[f64]) -> [f64; 2] {
    [k[0] * v[0] + k[1] * v[1] + b[0], k[2] * v[0] + k[3] * v[1] + b[1]]
}

#[inline]
fn matvec_t(k: &[f64], v: [f64; 2], b: &[f64]) -> [f64; 2] {
    [k[0] * v[0] + k[2] * v[1] + b[0], k[1] * v[0] + k[3] * v[1] + b[1]]
}

#[inline]
fn tanh2(a: [f64; 2]) -> [f64; 2] {
    [a[0].tanh(), a[1].tanh()]
}

/// Mean binary cross-entropy and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// `-y ln s(z) - (1-y) ln(1-s(z))` without overflow.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Logistic function, kept strictly inside `(0, 1)`.
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl VerletNet {
    pub fn new(arch: Architecture, params: Vec<f64>) -> Result<Self, ArchitectureError> {
        if params.len() != arch.param_count() {
            return Err(ArchitectureError::ParamCount {
                expected: arch.param_count(),
                got: params.len(),
            });
        }
        Ok(Self { arch, params })
    }

    pub fn zeros(arch: Architecture) -> Self {
        Self {
            arch,
            params: vec![0.0; arch.param_count()],
        }
    }

    pub fn logit(&self, x: [f64; 2]) -> f64 {
        let mut trace = Trace::default();
        self.forward_into(x, &mut trace)
    }

    pub fn probability(&self, x: [f64; 2]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn forward(&self, x: [f64; 2]) -> (f64, Trace) {
        let mut trace = Trace::default();
        let logit = self.forward_into(x, &mut trace);
        (logit, trace)
    }

    fn forward_into(&self, x: [f64; 2], tr: &mut Trace) -> f64 {
        let p = &self.params;
        let h = self.arch.step;
        let u = p[0] * x[0] + p[1] * x[1] + p[2];
        tr.y.clear();
        tr.z.clear();
        tr.t1.clear();
        tr.t2.clear();
        match self.arch.scheme {
            Scheme::Verlet => {
                let (mut y, mut z) = (x, [u, u]);
                tr.y.push(y);
                tr.z.push(z);
                for j in 0..self.arch.layers {
                    let o = layer(j);
                    let (k, b) = (&p[o..o + 4], &p[o + 4..o + 6]);
                    let ta = tanh2(matvec_t(k, y, b));
                    z = [z[0] - h * ta[0], z[1] - h * ta[1]];
                    let tc = tanh2(matvec(k, z, b));
                    y = [y[0] + h * tc[0], y[1] + h * tc[1]];
                    tr.t1.push(ta);
                    tr.t2.push(tc);
                    tr.y.push(y);
                    tr.z.push(z);
                }
            }
            Scheme::Euler => {
                let mut y = [x[0] + h * u, x[1] + h * u];
                tr.y.push(y);
                for j in 0..self.arch.layers {
                    let o = layer(j);
                    let tc = tanh2(matvec(&p[o..o + 4], y, &p[o + 4..o + 6]));
                    y = [y[0] + h * tc[0], y[1] + h * tc[1]];
                    tr.t1.push(tc);
                    tr.y.push(y);
                }
            }
        }
        let r = self.arch.readout();
        let y = tr.y[self.arch.layers];
        p[r] * y[0] + p[r + 1] * y[1] + p[r + 2]
    }

    /// Adds `scale * d logit / d params` for input `x` into `grad`.
    fn backward(&self, x: [f64; 2], tr: &Trace, scale: f64, grad: &mut [f64]) {
        let p = &self.params;
        let h = self.arch.step;
        let layers = self.arch.layers;
        let r = self.arch.readout();
        let y_out = tr.y[layers];
        grad[r] += scale * y_out[0];
        grad[r + 1] += scale * y_out[1];
        grad[r + 2] += scale;
        let mut gy = [scale * p[r], scale * p[r + 1]];
        let du = match self.arch.scheme {
            Scheme::Verlet => {
                let mut gz = [0.0; 2];
                for j in (0..layers).rev() {
                    let o = layer(j);
                    let k = &p[o..o + 4];
                    // Y_{j+1} = Y_j + h tanh(K Z_{j+1} + b)
                    let (tc, z1) = (tr.t2[j], tr.z[j + 1]);
                    let dc = [gy[0] * h * (1.0 - tc[0] * tc[0]), gy[1] * h * (1.0 - tc[1] * tc[1])];
                    grad[o] += dc[0] * z1[0];
                    grad[o + 1] += dc[0] * z1[1];
                    grad[o + 2] += dc[1] * z1[0];
                    grad[o + 3] += dc[1] * z1[1];
                    grad[o + 4] += dc[0];
                    grad[o + 5] += dc[1];
                    gz[0] += k[0] * dc[0] + k[2] * dc[1];
                    gz[1] += k[1] * dc[0] + k[3] * dc[1];
                    // Z_{j+1} = Z_j - h tanh(K^T Y_j + b)
                    let (ta, y0) = (tr.t1[j], tr.y[j]);
                    let da = [-gz[0] * h * (1.0 - ta[0] * ta[0]), -gz[1] * h * (1.0 - ta[1] * ta[1])];
                    grad[o] += y0[0] * da[0];
                    grad[o + 1] += y0[0] * da[1];
                    grad[o + 2] += y0[1] * da[0];
                    grad[o + 3] += y0[1] * da[1];
                    grad[o + 4] += da[0];
                    grad[o + 5] += da[1];
                    gy[0] += k[0] * da[0] + k[1] * da[1];
                    gy[1] += k[2] * da[0] + k[3] * da[1];
                }
                gz[0] + gz[1]
            }
            Scheme::Euler => {
                for j in (0..layers).rev() {
                    let o = layer(j);
                    let k = &p[o..o + 4];
                    let (tc, y0) = (tr.t1[j], tr.y[j]);
                    let dc = [gy[0] * h * (1.0 - tc[0] * tc[0]), gy[1] * h * (1.0 - tc[1] * tc[1])];
                    grad[o] += dc[0] * y0[0];
                    grad[o + 1] += dc[0] * y0[1];
                    grad[o + 2] += dc[1] * y0[0];
                    grad[o + 3] += dc[1] * y0[1];
                    grad[o + 4] += dc[0];
                    grad[o + 5] += dc[1];
                    gy[0] += k[0] * dc[0] + k[2] * dc[1];
                    gy[1] += k[1] * dc[0] + k[3] * dc[1];
                }
                h * (gy[0] + gy[1])
            }
        };
        grad[0] += du * x[0];
        grad[1] += du * x[1];
        grad[2] += du;
    }

    /// Mean binary cross-entropy over the batch.
    pub fn loss(&self, batch: &Batch) -> f64 {
        self.reduce(batch, false).loss
    }

    /// Mean binary cross-entropy and its gradient by reverse mode.
    pub fn loss_and_grad(&self, batch: &Batch) -> LossGrad {
        self.reduce(batch, true)
    }

    /// Chunked reduction. Losses are combined as running means so that a
    /// batch of identical losses reproduces that loss exactly.
    fn reduce(&self, batch: &Batch, with_grad: bool) -> LossGrad {
        assert!(!batch.is_empty(), "loss over an empty batch");
        let n_params = self.params.len();
        let parts: Vec<(usize, f64, Vec<f64>)> = batch
            .points
            .par_chunks(CHUNK)
            .zip(batch.labels.par_chunks(CHUNK))
            .map(|(xs, ys)| {
                let mut trace = Trace::default();
                let mut grad = if with_grad { vec![0.0; n_params] } else { Vec::new() };
                let mut mean = 0.0;
                for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
                    let z = self.forward_into(x, &mut trace);
                    mean += (bce_with_logit(z, y) - mean) / (k + 1) as f64;
                    if with_grad {
                        self.backward(x, &trace, sigmoid_unclamped(z) - y, &mut grad);
                    }
                }
                (xs.len(), mean, grad)
            })
            .collect();
        let n = batch.len() as f64;
        let mut seen = 0usize;
        let mut loss = 0.0;
        let mut grad = vec![0.0; if with_grad { n_params } else { 0 }];
        for (count, mean, part) in parts {
            seen += count;
            loss += (mean - loss) * (count as f64 / seen as f64);
            for (g, v) in grad.iter_mut().zip(part) {
                *g += v;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        LossGrad { loss, grad }
    }

    /// Fraction of the batch classified correctly (`logit > 0` means class 1).
    pub fn accuracy(&self, batch: &Batch) -> f64 {
        assert!(!batch.is_empty(), "accuracy over an empty batch");
        let correct: usize = batch
            .points
            .par_chunks(CHUNK)
            .zip(batch.labels.par_chunks(CHUNK))
            .map(|(xs, ys)| {
                let mut trace = Trace::default();
                xs.iter()
                    .zip(ys)
                    .filter(|(&x, &y)| (self.forward_into(x, &mut trace) > 0.0) == (y > 0.5))
                    .count()
            })
            .sum();
        correct as f64 / batch.len() as f64
    }
}

fn sigmoid_unclamped(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
