//! Benchmark loss functions with exact analytic gradients.
//!
//! Every optimizer in [`crate::dynamics`] consumes an objective through the
//! [`Objective`] trait. Implementations are immutable after construction, so
//! a single instance can be shared across worker threads.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A differentiable scalar field on `R^d`.
pub trait Objective: Send + Sync {
    /// Registry id, e.g. `"camel6"`.
    fn id(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient at `x` into `grad` (same length as `x`).
    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// Global minimizers, if known in closed form. May be empty.
    fn known_minimizers(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }

    /// Named real parameters (e.g. the oscillation scale).
    fn params(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }

    /// Per-axis box used for initialization and gradient checks.
    fn reference_box(&self) -> (f64, f64) {
        (-2.0, 2.0)
    }

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient(x, &mut g);
        g
    }
}

impl fmt::Debug for dyn Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("id", &self.id())
            .field("dim", &self.dim())
            .field("params", &self.params())
            .finish()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("unknown objective id `{0}` (expected one of: {ids})", ids = OBJECTIVE_IDS.join(", "))]
    UnknownId(String),
    #[error("objective `{id}` requires dimension {expected}, got {got}")]
    Dimension {
        id: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter {name} = {value}: {reason}")]
    Param {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Six-hump camel function on `R^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SixHumpCamel;

impl SixHumpCamel {
    /// High-precision roots of the gradient; the function is point-symmetric
    /// so the second minimizer is the negation of the first.
    pub const MINIMIZER: [f64; 2] = [-0.089_842_013_100_318_06, 0.712_656_403_020_739_6];
    pub const MINIMUM: f64 = -1.031_628_453_489_877_4;
}

impl Objective for SixHumpCamel {
    fn id(&self) -> &str {
        "camel6"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        let a2 = a * a;
        let b2 = b * b;
        (4.0 - 2.1 * a2 + a2 * a2 / 3.0) * a2 + a * b + (-4.0 + 4.0 * b2) * b2
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let (a, b) = (x[0], x[1]);
        let a2 = a * a;
        grad[0] = 8.0 * a - 8.4 * a2 * a + 2.0 * a2 * a2 * a + b;
        grad[1] = a - 8.0 * b + 16.0 * b * b * b;
    }

    fn known_minimizers(&self) -> Vec<Vec<f64>> {
        let [a, b] = Self::MINIMIZER;
        vec![vec![a, b], vec![-a, -b]]
    }
}

/// Separable rough landscape `sum_i (x_i sin(x_i / delta) + 0.1 x_i)^2`.
///
/// `delta` sets the oscillation wavelength and hence the density of local
/// minima. The global minimizer is the origin.
#[derive(Debug, Clone, Copy)]
pub struct Oscillatory {
    dim: usize,
    delta: f64,
}

impl Oscillatory {
    pub fn new(dim: usize, delta: f64) -> Result<Self, ObjectiveError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ObjectiveError::Param {
                name: "osc_delta",
                value: delta,
                reason: "must be positive and finite",
            });
        }
        if dim == 0 {
            return Err(ObjectiveError::Dimension {
                id: "oscillatory",
                expected: 1,
                got: 0,
            });
        }
        Ok(Self { dim, delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    fn term(&self, xi: f64) -> f64 {
        xi * (xi / self.delta).sin() + 0.1 * xi
    }
}

impl Objective for Oscillatory {
    fn id(&self) -> &str {
        "oscillatory"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|&xi| {
                let t = self.term(xi);
                t * t
            })
            .sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for (g, &xi) in grad.iter_mut().zip(x) {
            let u = xi / self.delta;
            let (s, c) = u.sin_cos();
            let t = xi * s + 0.1 * xi;
            *g = 2.0 * t * (s + u * c + 0.1);
        }
    }

    fn known_minimizers(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.dim]]
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("osc_delta", self.delta)]
    }

    fn reference_box(&self) -> (f64, f64) {
        (-10.0, 10.0)
    }
}

/// `x^4/4 - x^2/2`, minima at `x = ±1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWell;

impl Objective for DoubleWell {
    fn id(&self) -> &str {
        "doublewell1d"
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let x2 = x[0] * x[0];
        0.25 * x2 * x2 - 0.5 * x2
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let x = x[0];
        grad[0] = x * x * x - x;
    }

    fn known_minimizers(&self) -> Vec<Vec<f64>> {
        vec![vec![-1.0], vec![1.0]]
    }
}

/// Isotropic quadratic `curvature/2 * |x|^2`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    dim: usize,
    curvature: f64,
}

impl Quadratic {
    pub fn new(dim: usize, curvature: f64) -> Self {
        Self { dim, curvature }
    }
}

impl Objective for Quadratic {
    fn id(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.curvature * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for (g, &v) in grad.iter_mut().zip(x) {
            *g = self.curvature * v;
        }
    }

    fn known_minimizers(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.dim]]
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("curvature", self.curvature)]
    }
}

/// Affine function `a·x + c`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl Objective for Linear {
    fn id(&self) -> &str {
        "linear"
    }

    fn dim(&self) -> usize {
        self.slope.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.offset + self.slope.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
    }

    fn gradient(&self, _x: &[f64], grad: &mut [f64]) {
        grad.copy_from_slice(&self.slope);
    }
}

/// Adds a constant to another objective's value.
pub struct Shifted<O> {
    pub inner: O,
    pub shift: f64,
}

impl<O: Objective> Objective for Shifted<O> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) + self.shift
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.inner.gradient(x, grad)
    }

    fn known_minimizers(&self) -> Vec<Vec<f64>> {
        self.inner.known_minimizers()
    }
}

pub const OBJECTIVE_IDS: &[&str] = &["camel6", "oscillatory", "doublewell1d", "quadratic"];

/// Parameters the registry forwards to objective constructors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParams {
    pub osc_delta: f64,
    pub curvature: f64,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        Self {
            osc_delta: 0.01,
            curvature: 1.0,
        }
    }
}

/// Builds an objective by registry id.
pub fn build_objective(id: &str, dim: usize, params: ObjectiveParams) -> Result<Arc<dyn Objective>, ObjectiveError> {
    let fixed = |name: &'static str, expected: usize| {
        if dim == expected {
            Ok(())
        } else {
            Err(ObjectiveError::Dimension {
                id: name,
                expected,
                got: dim,
            })
        }
    };
    match id {
        "camel6" => {
            fixed("camel6", 2)?;
            Ok(Arc::new(SixHumpCamel))
        }
        "doublewell1d" => {
            fixed("doublewell1d", 1)?;
            Ok(Arc::new(DoubleWell))
        }
        "oscillatory" => Ok(Arc::new(Oscillatory::new(dim, params.osc_delta)?)),
        "quadratic" => {
            if dim == 0 {
                return Err(ObjectiveError::Dimension {
                    id: "quadratic",
                    expected: 1,
                    got: 0,
                });
            }
            Ok(Arc::new(Quadratic::new(dim, params.curvature)))
        }
        other => Err(ObjectiveError::UnknownId(other.to_string())),
    }
}
